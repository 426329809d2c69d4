#pragma once

#include <cstdint>

#include "skewflow/drift.hpp"
#include "skewflow/limit_laws.hpp"
#include "skewflow/measure.hpp"
#include "skewflow/ode.hpp"
#include "skewflow/sde.hpp"

namespace skewflow {

struct LadderConfig {
    Vec eps_ladder{0.5, 0.25, 0.125};  // strictly decreasing, in (0,1]
    std::size_t ensemble = 2000;       // skew trajectories per rung
    double T = 1.0;
    Vec eval_times{0.25, 0.5, 1.0};
    double delta_exponent = 1.5;  // delta(eps) = eps^exponent
    std::size_t oracle_trajectories = 50;
    std::size_t sde_ensemble = 2000;
    double sde_h = 1e-3;
    Vec xi;  // defaults to the origin if empty

    void validate() const;
};

// The proof decomposition evaluated on one aligned trajectory pair: Z(t) and
// its window split Z(N delta) = I1 + I2 plus the remainder I0 on [N delta, t],
// with the two deterministic bounds
//   B0 = 2|f|_inf * delta,   B1 = 2 L (|f0|_inf + |f|_inf) T delta / eps.
struct ZDecomposition {
    double sup_Z = 0.0;
    double sup_I0 = 0.0;
    double sup_I1 = 0.0;
    double sup_I2 = 0.0;
    double bound_I0 = 0.0;
    double bound_I1 = 0.0;
    double delta_used = 0.0;  // delta snapped to a grid multiple
    double telescope_residual = 0.0;  // max |Z - (I0 + I1 + I2)|
};

ZDecomposition decompose_Z(const TrajectoryGrid& x, const TrajectoryGrid& y,
                           const FlowSystem& sys, const Drift& F, double delta);

struct TwoSampleDistance {
    Vec ks;              // exact two-sample KS per coordinate
    double energy = 0.0; // energy distance of the full d-dim marginal
};

TwoSampleDistance two_sample_distance(std::span<const double> a, std::size_t n,
                                      std::span<const double> b, std::size_t m,
                                      std::size_t dim, int jobs);

struct RungMarginal {
    double t = 0.0;
    Vec ks;
    double energy = 0.0;
};

struct RungReport {
    double eps = 0.0;
    double delta_used = 0.0;
    double bound_I0 = 0.0, bound_I1 = 0.0;
    double mean_sup_Z = 0.0;  // E sup |Z^eps| over the ensemble
    double mean_sup_I0 = 0.0, mean_sup_I1 = 0.0, mean_sup_I2 = 0.0;
    double min_margin_I0 = 0.0;  // min over trajectories of bound - sup
    double min_margin_I1 = 0.0;
    double max_telescope_residual = 0.0;
    double max_oracle_residual = 0.0;
    std::size_t oracle_count = 0;
    Vec mean_xT, var_xT;  // slow state at T, per coordinate
    std::vector<RungMarginal> marginals;
    // per-trajectory summaries (for optional dumps)
    Vec sup_Z, sup_I0, sup_I1, sup_I2;
    // marginal samples: eval_times.size() blocks of ensemble x d
    Vec samples;
};

struct LadderReport {
    LadderConfig config;
    std::uint64_t root_seed = 0;
    double noise_floor = 0.0;  // 1.36 * sqrt((M + M_sde)/(M * M_sde))
    Vec sigma_used;            // d x d
    std::vector<RungReport> rungs;
    Vec sde_mean_T, sde_var_T;
    Vec sde_samples;  // eval_times.size() blocks of sde_ensemble x d
};

// Theorem-harness run: per eps an ensemble of skew trajectories with eta ~ mu
// and fixed xi, against one Euler-Maruyama reference ensemble of the limiting
// SDE. Trajectory jobs are independent; reductions are order-deterministic.
LadderReport run_ladder(const FlowSystem& base_system, const LadderConfig& ladder,
                        const Drift& F, const CovarianceEstimate& sigma,
                        const MuSampler& sampler_proto, const IntegratorConfig& cfg,
                        std::uint64_t root_seed, int jobs);

}  // namespace skewflow
