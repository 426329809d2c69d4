#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "skewflow/ode.hpp"

namespace skewflow {

// Numerical stand-in for the invariant measure.
//   Orbit mode: one fast-flow run from a dispersed off-attractor seed,
//     burn-in discarded, retained states spaced `spacing` apart. Fine for
//     pointwise observables; consecutive states are near-independent only on
//     the scale of a few decorrelation times.
//   Dispersed mode: every sample gets its own seed point and burn-in, so the
//     samples stay independent even when each one seeds a long trajectory.
//     Path ensembles (WIP, ladder) require this.
enum class MuMode { Orbit, Dispersed };

struct MuSampler {
    double burn_in = 100.0;       // fast-time duration discarded
    double spacing = 5.0;         // fast-time gap between retained samples (orbit mode)
    double seed_ball_radius = 0.1;
    std::uint64_t seed = 0;
    MuMode mode = MuMode::Orbit;

    void validate() const {
        if (!(burn_in > 0.0)) throw ConfigError("burn_in must be positive");
        if (!(spacing > 0.0)) throw ConfigError("sample spacing must be positive");
        if (seed_ball_radius < 0.0) throw ConfigError("seed ball radius must be >= 0");
    }
};

struct MuSamples {
    std::vector<double> states;  // count x ell
    std::size_t ell = 0;
    // set when spacing < 1 (under one Lorenz decorrelation time): samples
    // are correlated and downstream standard errors are optimistic
    bool correlated_warning = false;
    double burn_in = 0.0;
    double spacing = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return ell == 0 ? 0 : states.size() / ell; }
    std::span<const double> state(std::size_t i) const {
        return {states.data() + i * ell, ell};
    }
};

MuSamples sample_mu(const FlowSystem& sys, const MuSampler& sampler,
                    std::size_t count, const IntegratorConfig& cfg);

// Same result, bit-identical, with dispersed-mode samples burned in as
// independent jobs.
MuSamples sample_mu_parallel(const FlowSystem& sys, const MuSampler& sampler,
                             std::size_t count, const IntegratorConfig& cfg,
                             int jobs);

// Advances every sample by the fast flow for time s (stationarity checks).
MuSamples advance_samples(const FlowSystem& sys, const MuSamples& in, double s,
                          const IntegratorConfig& cfg);

using Observable = std::function<void(std::span<const double> y, std::span<double> out)>;

struct ErgodicAverage {
    Vec value;
    Vec std_err;  // non-overlapping batch-means standard error
    double t_used = 0.0;
    std::size_t batches = 0;
};

// (1/T) * integral of obs(y(tau)) dtau by trapezoid on the RK4 grid.
// Standard errors come from `batches` equal non-overlapping batches; T must
// be long enough for at least 10 of them to be meaningful (T >= 10 with the
// one-unit minimum batch length used here).
ErgodicAverage ergodic_average(const FlowSystem& sys, const Observable& obs,
                               std::size_t obs_dim, double T,
                               std::span<const double> eta,
                               const IntegratorConfig& cfg, std::size_t batches = 20);

// F_hat(x): time average of f(x, y(tau)) with the slow argument held fixed.
ErgodicAverage estimate_F(const FlowSystem& sys, std::span<const double> x, double T,
                          std::span<const double> eta, const IntegratorConfig& cfg,
                          std::size_t batches = 20);

// Ergodic mean of a raw f0 over a calibration run, for runtime centering of
// user-supplied fields with unknown mean.
Vec estimate_f0_mean(const FlowSystem& sys, double T, std::span<const double> eta,
                     const IntegratorConfig& cfg);

}  // namespace skewflow
