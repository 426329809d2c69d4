#pragma once

#include <cstdint>
#include <vector>

#include "skewflow/measure.hpp"
#include "skewflow/ode.hpp"

namespace skewflow {

// The averaged drift F as a callable plus the metadata (bound, Lipschitz
// constant) that the limit-theorem machinery needs alongside the values.
struct Drift {
    Field eval;
    std::size_t d = 0;
    double bound = 0.0;      // |F| <= bound (inherits |f|_inf)
    double lipschitz = 0.0;  // Lipschitz constant (inherits L)

    void operator()(std::span<const double> x, std::span<double> out) const {
        eval(x, out);
    }
};

// Closed-form drift of the benchmark coupling: averaging -c*tanh(x_i) +
// kappa*sin(y1/10) over mu leaves -c*tanh(x_i) + kappa*sin_mean, with
// sin_mean estimated once from a calibration run.
Drift make_benchmark_drift(std::size_t d, double c, double kappa, double sin_mean);

Drift make_zero_drift(std::size_t d);

// Tabulated F_hat on a rectangular grid, evaluated by multilinear
// interpolation with constant extension outside the box.
struct DriftGrid {
    std::size_t d = 0;
    Vec lo, hi;                    // box corners per dimension
    std::vector<std::size_t> n;    // nodes per dimension, >= 2
    Vec values;                    // prod(n) x d, last dimension fastest

    std::size_t node_count() const;
    void validate() const;
};

Drift make_interpolated_drift(DriftGrid grid, double bound, double lipschitz);

// Fills a DriftGrid by running estimate_F at every node (nodes are
// independent jobs). Box bounds come from the observed slow range padded by
// the caller.
DriftGrid build_drift_grid(const FlowSystem& sys, const Vec& lo, const Vec& hi,
                           const std::vector<std::size_t>& nodes_per_dim,
                           double T_avg, std::span<const double> eta,
                           const IntegratorConfig& cfg, int jobs);

}  // namespace skewflow
