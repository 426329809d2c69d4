#pragma once

#include <functional>
#include <span>
#include <string>

#include "skewflow/types.hpp"

namespace skewflow {

// Vector fields are plain callables writing into caller-provided storage.
// All fields are autonomous and must be pure functions of their inputs.
using FastField = std::function<void(std::span<const double> y, std::span<double> out)>;
using FluctuationField = std::function<void(std::span<const double> y, std::span<double> out)>;
using CouplingField = std::function<void(std::span<const double> x, std::span<const double> y,
                                         std::span<double> out)>;

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    // Absorbing-ball radius used as the numerical stand-in for the compact
    // invariant set: any trajectory leaving it signals integrator failure.
    double trap_radius = 100.0;

    void validate() const;
};

// The full problem definition: slow/fast dimensions, the three fields, the
// scale separation eps, and the bound/Lipschitz metadata the estimates and
// proof-side inequalities rely on.
struct FlowSystem {
    std::size_t d = 1;
    std::size_t ell = 3;
    double eps = 1.0;
    FastField g;
    FluctuationField f0;
    CouplingField f;
    double f_sup = 0.0;    // bound on |f|
    double f0_sup = 0.0;   // bound on |f0| over the trapping region
    double lip_f = 0.0;    // uniform Lipschitz constant of f
    double trap_radius = 100.0;

    void validate() const;
};

void lorenz_g(const LorenzParams& p, std::span<const double> y, std::span<double> out);
Vec lorenz_g(const LorenzParams& p, const Vec& y);

// The two nontrivial equilibria (+/- sqrt(beta*(rho-1)), same, rho-1).
Vec lorenz_fixed_point(const LorenzParams& p, int sign);

// Coordinate projections of the fast state: d=1 -> (y2), d=2 -> (y1, y2).
// Mean-zero under the Lorenz invariant measure by the (y1,y2,y3) ->
// (-y1,-y2,y3) symmetry.
void default_f0(std::size_t d, std::span<const double> y, std::span<double> out);

struct BenchmarkCoupling {
    double c = 1.0;
    double kappa = 0.5;

    void validate() const;
};

// Default test coupling: component-wise -c*tanh(x_i) + kappa*sin(y1/10).
// Bounded by c+kappa, Lipschitz in x with constant c and in y with kappa/10.
void benchmark_f(const BenchmarkCoupling& p, std::span<const double> x,
                 std::span<const double> y, std::span<double> out);

// Wraps an f0 of unknown mean as f0 - mu_hat (runtime centering).
FluctuationField centered_f0(FluctuationField raw, Vec mu_hat);

// Assembled default system: Lorenz fast flow, coordinate-projection f0,
// benchmark coupling. f0_sup defaults cover the attractor with margin.
FlowSystem make_lorenz_benchmark_system(std::size_t d, const LorenzParams& lorenz,
                                        const BenchmarkCoupling& coupling, double eps);

FluctuationField zero_field(std::size_t d);
CouplingField zero_coupling(std::size_t d);

}  // namespace skewflow
