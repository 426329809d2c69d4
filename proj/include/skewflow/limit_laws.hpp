#pragma once

#include <cstdint>

#include "skewflow/measure.hpp"
#include "skewflow/ode.hpp"

namespace skewflow {

// W_n(t) = n^{-1/2} * integral_0^{nt} f0(y(tau)) dtau, carried as extra RK4
// state so the quadrature is consistent with the trajectory.
struct WipPath {
    double n = 0.0;
    double T = 0.0;
    TrajectoryGrid path;  // d components on a uniform grid of [0, T]
};

WipPath wip_path(const FlowSystem& sys, double n, double T,
                 std::span<const double> eta, const IntegratorConfig& cfg,
                 std::size_t target_points = 1000);

// W_n evaluated at a fixed list of times over an ensemble of mu-sampled
// initial conditions. Trajectories are independent jobs.
struct WipEnsemble {
    double n = 0.0;
    Vec times;
    std::size_t d = 0;
    std::size_t m = 0;
    Vec values;  // m x times x d

    double at(std::size_t sample, std::size_t time_idx, std::size_t coord) const {
        return values[(sample * times.size() + time_idx) * d + coord];
    }
    // column (m values) for one time/coordinate
    Vec column(std::size_t time_idx, std::size_t coord) const;
};

WipEnsemble wip_ensemble(const FlowSystem& sys, double n, std::size_t m,
                         const Vec& times, const MuSampler& sampler,
                         const IntegratorConfig& cfg, int jobs);

// Same, with the initial conditions supplied (e.g. reloaded from a MUS1 file).
WipEnsemble wip_ensemble_from(const FlowSystem& sys, double n, const Vec& times,
                              const MuSamples& etas, const IntegratorConfig& cfg,
                              int jobs);

enum class SigmaMethod { Ensemble, GreenKubo };

struct CovarianceEstimate {
    Vec sigma;     // d x d, exactly symmetric
    Vec std_err;   // d x d
    SigmaMethod method = SigmaMethod::Ensemble;
    std::size_t n_samples = 0;
    std::size_t d = 0;
    double clipped_mass = 0.0;  // eigenvalue mass removed by the PSD projection
};

// Sample covariance of {W_n(1)} over M independent eta ~ mu; per-entry
// standard errors by leave-one-out jackknife.
CovarianceEstimate estimate_sigma_ensemble(const FlowSystem& sys, double n,
                                           std::size_t m, const MuSampler& sampler,
                                           const IntegratorConfig& cfg, int jobs);

// Covariance + jackknife from an already-computed ensemble column.
CovarianceEstimate sigma_from_samples(std::span<const double> values, std::size_t m,
                                      std::size_t d);

// Green-Kubo route: Sigma = integral_0^{T_corr} (C(s) + C(s)^T) ds with C the
// empirical stationary autocovariance of f0 along one long centered run.
// Symmetrized exactly and PSD-projected (clipped mass recorded).
CovarianceEstimate estimate_sigma_green_kubo(const FlowSystem& sys, double T_corr,
                                             double T_run, const MuSampler& sampler,
                                             const IntegratorConfig& cfg,
                                             std::size_t record_stride, int jobs);

struct BrownianDiagnostics {
    Vec mean, mean_se;               // W_n(1)
    Vec var_half, var_one, var_two;  // per coordinate (var_two empty if absent)
    Vec var_ratio;                   // Var W_n(1/2) / Var W_n(1)
    Vec increment_corr;              // corr(W_n(1) - W_n(1/2), W_n(1/2))
    double corr_se = 0.0;            // ~ 1/sqrt(M)
};

// Requires times to contain 0.5 and 1 (and optionally 2).
BrownianDiagnostics brownian_diagnostics(const WipEnsemble& ens);

// Empirical LDP tail: fraction of length-T windows whose time average of
// f(x, .) deviates from F_hat(x) by more than a. Windows are disjoint
// segments (separated by `gap`) of a single burned-in orbit, so the window
// starts are mu-distributed and near-independent.
struct LdpEstimate {
    Vec a_grid;
    Vec T_grid;
    Vec b_hat;  // T_grid.size() x a_grid.size(), row-major
    std::size_t n_windows = 0;
    Vec x;
    Vec F_at_x;

    double at(std::size_t t_idx, std::size_t a_idx) const {
        return b_hat[t_idx * a_grid.size() + a_idx];
    }
    double binomial_se(std::size_t t_idx, std::size_t a_idx) const;
};

LdpEstimate estimate_ldp(const FlowSystem& sys, std::span<const double> x,
                         std::span<const double> F_at_x, const Vec& a_grid,
                         const Vec& T_grid, std::size_t n_windows,
                         const MuSampler& sampler, const IntegratorConfig& cfg,
                         double gap = 5.0);

// Several slow points sharing one orbit pass (the x-uniformity check).
std::vector<LdpEstimate> estimate_ldp_multi(const FlowSystem& sys,
                                            std::span<const Vec> xs,
                                            std::span<const Vec> F_at_xs,
                                            const Vec& a_grid, const Vec& T_grid,
                                            std::size_t n_windows,
                                            const MuSampler& sampler,
                                            const IntegratorConfig& cfg,
                                            double gap = 5.0);

// Empirical check of the expectation bound
//   E |1/T int_{nT}^{(n+1)T} f(x, y(tau)) dtau - F(x)| <= a + 2|f|_inf b(a,T).
struct Prop22Result {
    double lhs = 0.0;
    double lhs_std_err = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // rhs - lhs
    double a = 0.0, T = 0.0;
    std::size_t n_shift = 0;
    std::size_t ensemble = 0;
};

Prop22Result check_prop22(const FlowSystem& sys, std::span<const double> x,
                          std::span<const double> F_at_x, double a, double T,
                          std::size_t n_shift, std::size_t ensemble, double b_hat_aT,
                          const MuSampler& sampler, const IntegratorConfig& cfg,
                          double gap = 5.0);

}  // namespace skewflow
