#include "skewflow/measure.hpp"

#include <cmath>

#include "skewflow/parallel.hpp"
#include "skewflow/rng.hpp"

namespace skewflow {

namespace {

Vec dispersed_seed(std::size_t ell, double radius, std::uint64_t seed) {
    Vec eta(ell, 1.0);
    if (radius > 0.0) {
        Rng rng(seed);
        // isotropic gaussian direction scaled into the ball
        Vec dir(ell);
        double n2 = 0.0;
        for (auto& v : dir) {
            v = rng.gauss();
            n2 += v * v;
        }
        const double r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(ell));
        const double scale = n2 > 0.0 ? r / std::sqrt(n2) : 0.0;
        for (std::size_t i = 0; i < ell; ++i) eta[i] += scale * dir[i];
    }
    return eta;
}

}  // namespace

MuSamples sample_mu_parallel(const FlowSystem& sys, const MuSampler& sampler,
                             std::size_t count, const IntegratorConfig& cfg,
                             int jobs) {
    sys.validate();
    sampler.validate();
    cfg.validate();
    if (count < 1) throw ConfigError("sample_mu needs count >= 1");

    MuSamples out;
    out.ell = sys.ell;
    out.burn_in = sampler.burn_in;
    out.seed = sampler.seed;
    const auto burn_steps =
        static_cast<std::size_t>(std::ceil(sampler.burn_in / cfg.h_tau - 1e-12));

    if (sampler.mode == MuMode::Dispersed) {
        out.correlated_warning = false;
        out.spacing = 0.0;  // independent orbits
        out.states.assign(count * sys.ell, 0.0);
        run_jobs(count, jobs, [&](std::size_t i) {
            const std::uint64_t si = derive_seed(sampler.seed, "mu.disperse", i);
            const Vec eta = dispersed_seed(sys.ell, sampler.seed_ball_radius, si);
            FastFlowStepper stepper(sys, eta, cfg.h_tau);
            for (std::size_t k = 0; k < burn_steps; ++k) stepper.step();
            auto y = stepper.y();
            std::copy(y.begin(), y.end(), out.states.begin() + i * sys.ell);
        });
        return out;
    }

    out.correlated_warning = sampler.spacing < 1.0;
    out.spacing = sampler.spacing;
    out.states.reserve(count * sys.ell);

    const Vec eta = dispersed_seed(sys.ell, sampler.seed_ball_radius, sampler.seed);
    FastFlowStepper stepper(sys, eta, cfg.h_tau);
    const auto gap_steps =
        static_cast<std::size_t>(std::llround(sampler.spacing / cfg.h_tau));
    if (gap_steps < 1) throw ConfigError("sample spacing below one integrator step");

    for (std::size_t k = 0; k < burn_steps; ++k) stepper.step();
    auto y0 = stepper.y();
    out.states.insert(out.states.end(), y0.begin(), y0.end());
    for (std::size_t i = 1; i < count; ++i) {
        for (std::size_t k = 0; k < gap_steps; ++k) stepper.step();
        auto y = stepper.y();
        out.states.insert(out.states.end(), y.begin(), y.end());
    }
    return out;
}

MuSamples sample_mu(const FlowSystem& sys, const MuSampler& sampler,
                    std::size_t count, const IntegratorConfig& cfg) {
    return sample_mu_parallel(sys, sampler, count, cfg, 1);
}

MuSamples advance_samples(const FlowSystem& sys, const MuSamples& in, double s,
                          const IntegratorConfig& cfg) {
    if (!(s > 0.0)) throw ConfigError("advance time must be positive");
    MuSamples out = in;
    const auto steps = static_cast<std::size_t>(std::ceil(s / cfg.h_tau - 1e-12));
    for (std::size_t i = 0; i < in.size(); ++i) {
        FastFlowStepper stepper(sys, in.state(i), cfg.h_tau);
        for (std::size_t k = 0; k < steps; ++k) stepper.step();
        auto y = stepper.y();
        std::copy(y.begin(), y.end(), out.states.begin() + i * in.ell);
    }
    return out;
}

ErgodicAverage ergodic_average(const FlowSystem& sys, const Observable& obs,
                               std::size_t obs_dim, double T,
                               std::span<const double> eta,
                               const IntegratorConfig& cfg, std::size_t batches) {
    sys.validate();
    cfg.validate();
    if (!(T > 0.0)) throw ConfigError("averaging horizon must be positive");
    if (batches < 2) throw ConfigError("need at least 2 batches");
    if (T < 10.0)
        throw ConfigError("averaging horizon too short for batch-means errors "
                          "(need T >= 10)");

    const auto n_steps = static_cast<std::size_t>(std::ceil(T / cfg.h_tau - 1e-12));
    const double h = T / static_cast<double>(n_steps);

    FastFlowStepper stepper(sys, eta, h);
    Vec prev(obs_dim), cur(obs_dim);
    obs(stepper.y(), std::span<double>(prev));

    // trapezoid increments are assigned to batches by step index; the batch
    // integrals sum exactly to the total
    Vec batch_acc(batches * obs_dim, 0.0);
    for (std::size_t k = 0; k < n_steps; ++k) {
        stepper.step();
        obs(stepper.y(), std::span<double>(cur));
        const std::size_t b = std::min(k * batches / n_steps, batches - 1);
        double* acc = batch_acc.data() + b * obs_dim;
        for (std::size_t i = 0; i < obs_dim; ++i)
            acc[i] += 0.5 * h * (prev[i] + cur[i]);
        std::swap(prev, cur);
    }

    ErgodicAverage result;
    result.t_used = T;
    result.batches = batches;
    result.value.assign(obs_dim, 0.0);
    result.std_err.assign(obs_dim, 0.0);
    // batch durations differ by at most one step; treat them as equal
    const double batch_T = T / static_cast<double>(batches);
    for (std::size_t i = 0; i < obs_dim; ++i) {
        double total = 0.0;
        for (std::size_t b = 0; b < batches; ++b) total += batch_acc[b * obs_dim + i];
        result.value[i] = total / T;
        const double m = result.value[i];
        double ss = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const double bm = batch_acc[b * obs_dim + i] / batch_T;
            ss += (bm - m) * (bm - m);
        }
        const double nb = static_cast<double>(batches);
        result.std_err[i] = std::sqrt(ss / (nb - 1.0) / nb);
    }
    return result;
}

ErgodicAverage estimate_F(const FlowSystem& sys, std::span<const double> x, double T,
                          std::span<const double> eta, const IntegratorConfig& cfg,
                          std::size_t batches) {
    if (x.size() != sys.d) throw ConfigError("estimate_F: x dimension mismatch");
    Vec x_fixed(x.begin(), x.end());
    Observable obs = [&sys, x_fixed](std::span<const double> y, std::span<double> out) {
        sys.f(std::span<const double>(x_fixed), y, out);
    };
    return ergodic_average(sys, obs, sys.d, T, eta, cfg, batches);
}

Vec estimate_f0_mean(const FlowSystem& sys, double T, std::span<const double> eta,
                     const IntegratorConfig& cfg) {
    Observable obs = [&sys](std::span<const double> y, std::span<double> out) {
        sys.f0(y, out);
    };
    return ergodic_average(sys, obs, sys.d, T, eta, cfg).value;
}

}  // namespace skewflow
