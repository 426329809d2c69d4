#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skewflow/flows.hpp"
#include "skewflow/rng.hpp"

using namespace skewflow;

TEST_CASE("lorenz vector field at fixed points") {
    LorenzParams p;
    CHECK(lorenz_g(p, Vec{0.0, 0.0, 0.0}) == Vec{0.0, 0.0, 0.0});

    Vec g = lorenz_g(p, Vec{1.0, 1.0, 1.0});
    CHECK(g[0] == doctest::Approx(0.0));
    CHECK(g[1] == doctest::Approx(26.0));
    CHECK(g[2] == doctest::Approx(-5.0 / 3.0));

    for (int sign : {+1, -1}) {
        Vec c = lorenz_fixed_point(p, sign);
        Vec r = lorenz_g(p, c);
        for (double v : r) CHECK(std::abs(v) <= 1e-12);
    }
}

TEST_CASE("lorenz equivariance under (y1,y2,y3) -> (-y1,-y2,y3)") {
    LorenzParams p;
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        Vec y{40.0 * (rng.uniform01() - 0.5), 40.0 * (rng.uniform01() - 0.5),
              50.0 * rng.uniform01()};
        Vec gy = lorenz_g(p, y);
        Vec sy{-y[0], -y[1], y[2]};
        Vec gsy = lorenz_g(p, sy);
        // exact in floating point: only sign flips are involved
        CHECK(gsy[0] == -gy[0]);
        CHECK(gsy[1] == -gy[1]);
        CHECK(gsy[2] == gy[2]);
    }
}

TEST_CASE("lorenz input validation") {
    LorenzParams p;
    Vec out(3);
    CHECK_THROWS_AS(lorenz_g(p, Vec{1.0, 2.0}), ConfigError);
    LorenzParams bad;
    bad.beta = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("default_f0 coordinate projections") {
    Vec out1(1);
    default_f0(1, Vec{1.0, 2.0, 3.0}, out1);
    CHECK(out1[0] == 2.0);

    Vec out2(2);
    default_f0(2, Vec{0.0, 0.0, 17.5}, out2);
    CHECK(out2[0] == 0.0);
    CHECK(out2[1] == 0.0);

    Vec out3(3);
    CHECK_THROWS_AS(default_f0(3, Vec{1.0, 2.0, 3.0}, out3), ConfigError);
}

TEST_CASE("benchmark coupling: origin, saturation, bounds, Lipschitz") {
    BenchmarkCoupling p;  // c=1, kappa=0.5
    Vec out(1);

    benchmark_f(p, Vec{0.0}, Vec{0.0, 5.0, 5.0}, out);
    CHECK(out[0] == 0.0);

    // tanh saturation with kappa = 0: monotone approach to -c
    BenchmarkCoupling pure;
    pure.kappa = 0.0;
    double prev = 0.0;
    for (double x : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        benchmark_f(pure, Vec{x}, Vec{0.0, 0.0, 0.0}, out);
        CHECK(out[0] < prev);
        CHECK(out[0] > -1.0);
        prev = out[0];
    }
    benchmark_f(pure, Vec{40.0}, Vec{0.0, 0.0, 0.0}, out);
    CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-9));

    // |f| <= c + kappa and Lipschitz in x with constant c, on random pairs
    Rng rng(7);
    Vec fa(1), fb(1);
    for (int trial = 0; trial < 500; ++trial) {
        const double xa = 10.0 * (rng.uniform01() - 0.5);
        const double xb = 10.0 * (rng.uniform01() - 0.5);
        Vec y{30.0 * (rng.uniform01() - 0.5), 0.0, 0.0};
        benchmark_f(p, Vec{xa}, y, fa);
        benchmark_f(p, Vec{xb}, y, fb);
        CHECK(std::abs(fa[0]) <= p.c + p.kappa + 1e-12);
        CHECK(std::abs(fa[0] - fb[0]) <= p.c * std::abs(xa - xb) + 1e-12);
    }
}

TEST_CASE("runtime centering wrapper") {
    FluctuationField raw = [](std::span<const double> y, std::span<double> out) {
        out[0] = y[1] + 3.0;
    };
    FluctuationField centered = centered_f0(raw, Vec{3.0});
    Vec out(1);
    centered(Vec{0.0, 2.0, 0.0}, out);
    CHECK(out[0] == 2.0);
}

TEST_CASE("system assembly and validation") {
    FlowSystem sys = make_lorenz_benchmark_system(2, LorenzParams{},
                                                  BenchmarkCoupling{}, 0.5);
    CHECK(sys.d == 2);
    CHECK(sys.ell == 3);
    CHECK(sys.f_sup == doctest::Approx(1.5));
    CHECK(sys.lip_f == doctest::Approx(1.0));
    CHECK_NOTHROW(sys.validate());

    FlowSystem bad = sys;
    bad.eps = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = sys;
    bad.d = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
