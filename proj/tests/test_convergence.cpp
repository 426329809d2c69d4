#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skewflow/convergence.hpp"
#include "skewflow/rng.hpp"

using namespace skewflow;

namespace {

FlowSystem benchmark_system(double eps, std::size_t d = 1) {
    return make_lorenz_benchmark_system(d, LorenzParams{}, BenchmarkCoupling{}, eps);
}

// non-separable coupling: the x-freezing error I1 is genuinely nonzero here
FlowSystem coupled_system(double eps) {
    FlowSystem sys = benchmark_system(eps);
    sys.f = [](std::span<const double> x, std::span<const double> y,
               std::span<double> out) {
        out[0] = -std::tanh(x[0]) + 0.4 * std::sin(y[0] / 10.0) * (1.0 + 0.5 * std::tanh(x[0]));
    };
    sys.f_sup = 1.0 + 0.4 * 1.5;
    sys.lip_f = 1.0 + 0.4 * 0.5;  // d/dx bound
    return sys;
}

}  // namespace

TEST_CASE("decompose_Z: zero when f is y-independent and F = f") {
    FlowSystem sys = benchmark_system(0.5);
    BenchmarkCoupling pure;
    pure.kappa = 0.0;
    sys.f = [pure](std::span<const double> x, std::span<const double> y,
                   std::span<double> out) { benchmark_f(pure, x, y, out); };
    sys.f_sup = pure.c;
    Drift F = make_benchmark_drift(1, pure.c, 0.0, 0.0);
    IntegratorConfig cfg;
    cfg.record_stride = 1;
    SkewTrace tr = integrate_skew_traced(sys, Vec{0.4}, Vec{1.0, 1.0, 1.0}, 0.5, cfg,
                                         &F.eval);
    ZDecomposition dec = decompose_Z(tr.x, tr.y, sys, F, std::pow(0.5, 1.5));
    CHECK(dec.sup_Z <= 1e-12);
    CHECK(dec.sup_I0 <= 1e-12);
    CHECK(dec.sup_I1 <= 1e-12);
    CHECK(dec.sup_I2 <= 1e-12);
}

TEST_CASE("decompose_Z: deterministic bounds and exact telescoping") {
    FlowSystem sys = benchmark_system(0.25);
    Drift F = make_benchmark_drift(1, 1.0, 0.5, -0.017);
    IntegratorConfig cfg;
    cfg.record_stride = 1;
    Rng rng(8);
    MuSampler sampler;
    sampler.seed = derive_seed(42, "test.dec", 0);
    sampler.mode = MuMode::Dispersed;
    MuSamples etas = sample_mu_parallel(sys, sampler, 6, cfg, 0);
    for (std::size_t j = 0; j < etas.size(); ++j) {
        SkewTrace tr =
            integrate_skew_traced(sys, Vec{0.0}, etas.state(j), 1.0, cfg, &F.eval);
        ZDecomposition dec = decompose_Z(tr.x, tr.y, sys, F, std::pow(0.25, 1.5));
        CHECK(dec.sup_I0 <= dec.bound_I0 + 1e-6);
        CHECK(dec.sup_I1 <= dec.bound_I1 + 1e-6);
        CHECK(dec.telescope_residual <= 1e-8);
        CHECK(dec.delta_used == doctest::Approx(std::pow(0.25, 1.5)).epsilon(0.01));
        // the carried Z channel and the grid quadrature agree closely
        double sup_chan = 0.0;
        for (double v : tr.z.data) sup_chan = std::max(sup_chan, std::abs(v));
        CHECK(sup_chan == doctest::Approx(dec.sup_Z).epsilon(0.05));
    }
}

TEST_CASE("decompose_Z: non-separable coupling exercises the freezing error") {
    FlowSystem sys = coupled_system(0.25);
    // drift for this coupling: estimate it crudely; the decomposition only
    // needs |F| <= f_sup and Lipschitz metadata
    Drift F;
    F.d = 1;
    F.bound = sys.f_sup;
    F.lipschitz = sys.lip_f;
    F.eval = [](std::span<const double> x, std::span<double> out) {
        out[0] = -std::tanh(x[0]);
    };
    IntegratorConfig cfg;
    cfg.record_stride = 1;
    SkewTrace tr = integrate_skew_traced(sys, Vec{0.3}, Vec{1.0, 1.0, 1.0}, 1.0, cfg,
                                         &F.eval);
    ZDecomposition dec = decompose_Z(tr.x, tr.y, sys, F, std::pow(0.25, 1.5));
    CHECK(dec.sup_I1 > 0.0);
    CHECK(dec.sup_I1 <= dec.bound_I1 + 1e-6);
    CHECK(dec.sup_I0 <= dec.bound_I0 + 1e-6);
    CHECK(dec.telescope_residual <= 1e-8);
}

TEST_CASE("decompose_Z rejects misaligned grids and tight deltas") {
    FlowSystem sys = benchmark_system(0.5);
    Drift F = make_benchmark_drift(1, 1.0, 0.5, 0.0);
    IntegratorConfig cfg;
    cfg.record_stride = 1;
    SkewTrace tr = integrate_skew_traced(sys, Vec{0.0}, Vec{1.0, 1.0, 1.0}, 0.5, cfg,
                                         &F.eval);
    TrajectoryGrid y_short = tr.y;
    y_short.data.resize(y_short.data.size() - 3);
    CHECK_THROWS_AS(decompose_Z(tr.x, y_short, sys, F, 0.3), ConfigError);
    CHECK_THROWS_AS(decompose_Z(tr.x, tr.y, sys, F, 2.0 * tr.x.dt), ConfigError);
}

TEST_CASE("two_sample_distance: identical, disjoint, mismatched") {
    Vec a{1.0, 2.0, 3.0, 4.0};
    TwoSampleDistance same = two_sample_distance(a, 4, a, 4, 1, 1);
    CHECK(same.ks[0] == 0.0);
    CHECK(same.energy == doctest::Approx(0.0).epsilon(1e-12));

    Vec lo{0.0, 0.1, 0.2}, hi{9.0, 9.1, 9.2};
    TwoSampleDistance far = two_sample_distance(lo, 3, hi, 3, 1, 1);
    CHECK(far.ks[0] == 1.0);
    CHECK(far.energy > 1.0);

    CHECK_THROWS_AS(two_sample_distance(a, 3, a, 4, 1, 1), ConfigError);
}

TEST_CASE("run_ladder: degenerate system gives noise-floor statistics") {
    FlowSystem sys = benchmark_system(1.0);
    sys.f0 = zero_field(1);
    sys.f = zero_coupling(1);
    sys.f0_sup = 0.0;
    sys.f_sup = 0.0;
    sys.lip_f = 0.0;

    LadderConfig lad;
    lad.eps_ladder = {0.5, 0.25};
    lad.ensemble = 40;
    lad.sde_ensemble = 40;
    lad.oracle_trajectories = 4;
    lad.T = 0.5;
    lad.eval_times = {0.25, 0.5};
    lad.xi = {1.5};

    CovarianceEstimate sigma;
    sigma.d = 1;
    sigma.sigma = {0.0};
    sigma.std_err = {0.0};

    Drift F = make_zero_drift(1);
    MuSampler sampler;
    IntegratorConfig cfg;
    LadderReport rep = run_ladder(sys, lad, F, sigma, sampler, cfg, 42, 0);

    REQUIRE(rep.rungs.size() == 2);
    for (const auto& r : rep.rungs) {
        CHECK(r.mean_sup_Z == 0.0);
        for (const auto& marg : r.marginals) {
            CHECK(marg.ks[0] == 0.0);  // both ensembles constant at xi
            CHECK(marg.energy == doctest::Approx(0.0).epsilon(1e-12));
        }
        CHECK(r.mean_xT[0] == 1.5);
        CHECK(r.var_xT[0] == 0.0);
        CHECK(r.max_oracle_residual <= 1e-12);
    }
}

TEST_CASE("run_ladder: small benchmark run satisfies every deterministic contract") {
    FlowSystem sys = benchmark_system(1.0);
    LadderConfig lad;
    lad.eps_ladder = {0.5, 0.25};
    lad.ensemble = 60;
    lad.sde_ensemble = 60;
    lad.oracle_trajectories = 8;
    lad.T = 0.5;
    lad.eval_times = {0.25, 0.5};

    MuSampler sig_sampler;
    sig_sampler.seed = derive_seed(42, "test.lad.sigma", 0);
    IntegratorConfig cfg;
    CovarianceEstimate sigma = estimate_sigma_ensemble(sys, 50.0, 60, sig_sampler, cfg, 0);
    Drift F = make_benchmark_drift(1, 1.0, 0.5, -0.017);

    MuSampler sampler;
    LadderReport rep = run_ladder(sys, lad, F, sigma, sampler, cfg, 42, 0);

    REQUIRE(rep.rungs.size() == 2);
    CHECK(rep.noise_floor == doctest::Approx(1.36 * std::sqrt(2.0 / 60.0)));
    for (const auto& r : rep.rungs) {
        CHECK(r.min_margin_I0 >= -1e-6);
        CHECK(r.min_margin_I1 >= -1e-6);
        CHECK(r.max_telescope_residual <= 1e-8);
        CHECK(r.oracle_count == 8);
        CHECK(r.max_oracle_residual <= 1e-4);
        CHECK(r.delta_used >= 10.0 * 1e-12);
        for (const auto& marg : r.marginals) {
            CHECK(marg.ks[0] >= 0.0);
            CHECK(marg.ks[0] <= 1.0);
            CHECK(marg.energy >= -1e-12);
        }
        CHECK(r.sup_Z.size() == 60);
    }
    // Z shrinks along the ladder even in a small ensemble
    CHECK(rep.rungs[1].mean_sup_Z < rep.rungs[0].mean_sup_Z);
}

TEST_CASE("run_ladder is bit-deterministic across job counts") {
    FlowSystem sys = benchmark_system(1.0);
    LadderConfig lad;
    lad.eps_ladder = {0.5};
    lad.ensemble = 12;
    lad.sde_ensemble = 12;
    lad.oracle_trajectories = 2;
    lad.T = 0.25;
    lad.eval_times = {0.25};

    CovarianceEstimate sigma;
    sigma.d = 1;
    sigma.sigma = {50.0};
    sigma.std_err = {0.0};
    Drift F = make_benchmark_drift(1, 1.0, 0.5, 0.0);
    MuSampler sampler;
    IntegratorConfig cfg;

    LadderReport a = run_ladder(sys, lad, F, sigma, sampler, cfg, 7, 1);
    LadderReport b = run_ladder(sys, lad, F, sigma, sampler, cfg, 7, 2);
    CHECK(a.rungs[0].samples == b.rungs[0].samples);
    CHECK(a.sde_samples == b.sde_samples);
    CHECK(a.rungs[0].sup_Z == b.rungs[0].sup_Z);
}

TEST_CASE("ladder config validation") {
    LadderConfig lad;
    lad.eps_ladder = {0.25, 0.5};  // not decreasing
    CHECK_THROWS_AS(lad.validate(), ConfigError);
    lad.eps_ladder = {0.5, 0.25};
    lad.eval_times = {2.0};  // beyond T
    CHECK_THROWS_AS(lad.validate(), ConfigError);
    lad.eval_times = {0.5};
    lad.delta_exponent = 2.5;  // B1 would not vanish
    CHECK_THROWS_AS(lad.validate(), ConfigError);
}
