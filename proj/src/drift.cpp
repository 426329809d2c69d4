#include "skewflow/drift.hpp"

#include <cmath>

#include "skewflow/parallel.hpp"

namespace skewflow {

Drift make_benchmark_drift(std::size_t d, double c, double kappa, double sin_mean) {
    if (std::abs(sin_mean) > 1.0)
        throw ConfigError("sin_mean outside [-1,1]; calibration run is suspect");
    Drift F;
    F.d = d;
    F.bound = c + kappa;  // |tanh| <= 1, |sin_mean| <= 1
    F.lipschitz = c;
    F.eval = [c, kappa, sin_mean, d](std::span<const double> x, std::span<double> out) {
        if (x.size() != d || out.size() != d)
            throw ConfigError("drift dimension mismatch");
        const double offset = kappa * sin_mean;
        for (std::size_t i = 0; i < d; ++i) out[i] = -c * std::tanh(x[i]) + offset;
    };
    return F;
}

Drift make_zero_drift(std::size_t d) {
    Drift F;
    F.d = d;
    F.bound = 0.0;
    F.lipschitz = 0.0;
    F.eval = [d](std::span<const double>, std::span<double> out) {
        if (out.size() != d) throw ConfigError("drift dimension mismatch");
        for (auto& v : out) v = 0.0;
    };
    return F;
}

std::size_t DriftGrid::node_count() const {
    std::size_t c = 1;
    for (std::size_t k : n) c *= k;
    return c;
}

void DriftGrid::validate() const {
    if (d < 1) throw ConfigError("drift grid needs d >= 1");
    if (lo.size() != d || hi.size() != d || n.size() != d)
        throw ConfigError("drift grid dimension mismatch");
    for (std::size_t k = 0; k < d; ++k) {
        if (!(lo[k] < hi[k])) throw ConfigError("drift grid box is degenerate");
        if (n[k] < 2) throw ConfigError("drift grid needs >= 2 nodes per dimension");
    }
    if (values.size() != node_count() * d) throw ConfigError("drift grid values missing");
}

namespace {

// multilinear interpolation over the 2^d corners of the containing cell;
// queries outside the box are clamped (constant extension)
void interpolate(const DriftGrid& g, std::span<const double> x, std::span<double> out) {
    const std::size_t d = g.d;
    std::vector<std::size_t> cell(d);
    Vec frac(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double width = (g.hi[k] - g.lo[k]) / static_cast<double>(g.n[k] - 1);
        double u = (x[k] - g.lo[k]) / width;
        if (u < 0.0) u = 0.0;
        const double max_u = static_cast<double>(g.n[k] - 1);
        if (u > max_u) u = max_u;
        auto idx = static_cast<std::size_t>(u);
        if (idx >= g.n[k] - 1) idx = g.n[k] - 2;
        cell[k] = idx;
        frac[k] = u - static_cast<double>(idx);
    }
    for (auto& v : out) v = 0.0;
    const std::size_t corners = std::size_t{1} << d;
    for (std::size_t c = 0; c < corners; ++c) {
        double weight = 1.0;
        std::size_t flat = 0;
        for (std::size_t k = 0; k < d; ++k) {
            const bool high = (c >> k) & 1u;
            weight *= high ? frac[k] : 1.0 - frac[k];
            flat = flat * g.n[k] + cell[k] + (high ? 1 : 0);
        }
        if (weight == 0.0) continue;
        const double* node = g.values.data() + flat * d;
        for (std::size_t i = 0; i < d; ++i) out[i] += weight * node[i];
    }
}

}  // namespace

Drift make_interpolated_drift(DriftGrid grid, double bound, double lipschitz) {
    grid.validate();
    Drift F;
    F.d = grid.d;
    F.bound = bound;
    F.lipschitz = lipschitz;
    F.eval = [g = std::move(grid)](std::span<const double> x, std::span<double> out) {
        if (x.size() != g.d || out.size() != g.d)
            throw ConfigError("drift dimension mismatch");
        interpolate(g, x, out);
    };
    return F;
}

DriftGrid build_drift_grid(const FlowSystem& sys, const Vec& lo, const Vec& hi,
                           const std::vector<std::size_t>& nodes_per_dim,
                           double T_avg, std::span<const double> eta,
                           const IntegratorConfig& cfg, int jobs) {
    DriftGrid grid;
    grid.d = sys.d;
    grid.lo = lo;
    grid.hi = hi;
    grid.n = nodes_per_dim;
    grid.values.assign(grid.node_count() * sys.d, 0.0);
    grid.validate();

    const Vec eta0(eta.begin(), eta.end());
    run_jobs(grid.node_count(), jobs, [&](std::size_t flat) {
        Vec x(sys.d);
        std::size_t rem = flat;
        for (std::size_t k = sys.d; k-- > 0;) {
            const std::size_t idx = rem % grid.n[k];
            rem /= grid.n[k];
            x[k] = grid.lo[k] + (grid.hi[k] - grid.lo[k]) * static_cast<double>(idx) /
                                    static_cast<double>(grid.n[k] - 1);
        }
        ErgodicAverage avg = estimate_F(sys, x, T_avg, eta0, cfg);
        std::copy(avg.value.begin(), avg.value.end(),
                  grid.values.begin() + flat * sys.d);
    });
    return grid;
}

}  // namespace skewflow
