#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "skewflow/flows.hpp"
#include "skewflow/types.hpp"

namespace skewflow {

enum class TimeFrame { Slow, Fast };

// Uniform time grid of state samples. `dt` is the grid spacing in the frame
// given by `time_frame` (slow t, or fast tau = t/eps^2).
struct TrajectoryGrid {
    double t0 = 0.0;
    double dt = 0.0;
    std::size_t dim = 0;
    TimeFrame time_frame = TimeFrame::Fast;
    std::vector<double> data;  // size() * dim, row-major

    std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const double> state(std::size_t k) const {
        return {data.data() + k * dim, dim};
    }
    std::span<const double> back() const { return state(size() - 1); }
    double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
};

struct IntegratorConfig {
    double h_tau = 0.005;           // fast-time step
    std::size_t record_stride = 1;  // 0 = auto for skew runs (slow spacing <= 1e-3*T)
    std::size_t max_stored = std::size_t{1} << 27;  // doubles across all grids (~1 GiB)

    void validate() const {
        if (!(h_tau > 0.0)) throw ConfigError("integrator step h_tau must be positive");
    }
};

// Generic autonomous field on a flat state vector.
using Field = std::function<void(std::span<const double>, std::span<double>)>;

struct Rk4Workspace {
    Vec k1, k2, k3, k4, tmp;
    void resize(std::size_t n) {
        k1.assign(n, 0.0);
        k2.assign(n, 0.0);
        k3.assign(n, 0.0);
        k4.assign(n, 0.0);
        tmp.assign(n, 0.0);
    }
};

// One classical RK4 step in place. Throws NumericalError (tagged with
// `time`) if any stage evaluation produces a non-finite value. The update is
// computed component-wise with a fixed expression, so two systems whose
// shared components have identical derivatives produce bit-identical values
// for those components.
template <class Deriv>
void rk4_step_inplace(Deriv&& deriv, std::span<double> s, double h,
                      Rk4Workspace& ws, double time) {
    const std::size_t n = s.size();
    deriv(std::span<const double>(s), std::span<double>(ws.k1));
    for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = s[i] + 0.5 * h * ws.k1[i];
    deriv(std::span<const double>(ws.tmp), std::span<double>(ws.k2));
    for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = s[i] + 0.5 * h * ws.k2[i];
    deriv(std::span<const double>(ws.tmp), std::span<double>(ws.k3));
    for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = s[i] + h * ws.k3[i];
    deriv(std::span<const double>(ws.tmp), std::span<double>(ws.k4));
    if (!all_finite(ws.k1) || !all_finite(ws.k2) || !all_finite(ws.k3) ||
        !all_finite(ws.k4))
        throw NumericalError("non-finite RK4 stage", time);
    const double w = h / 6.0;
    for (std::size_t i = 0; i < n; ++i)
        s[i] += w * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
}

// Allocating single-step API.
Vec rk4_step(const Field& field, const Vec& state, double h);

// Streams the fast flow dy/dtau = g(y) without storing a trajectory.
// Used by the samplers and the single-pass estimators.
class FastFlowStepper {
public:
    FastFlowStepper(const FlowSystem& sys, std::span<const double> eta, double h);
    void step();
    std::span<const double> y() const { return {y_.data(), y_.size()}; }
    double tau() const { return static_cast<double>(steps_) * h_; }
    double h() const { return h_; }

private:
    const FlowSystem* sys_;
    Vec y_;
    Rk4Workspace ws_;
    double h_;
    std::size_t steps_ = 0;
};

// Trajectory of dy/dtau = g(y) on [0, T_tau], y(0) = eta.
TrajectoryGrid integrate_fast(const FlowSystem& sys, std::span<const double> eta,
                              double T_tau, const IntegratorConfig& cfg);

// Skew product in rescaled fast time:
//   dx/dtau = eps*f0(y) + eps^2*f(x,y),   dy/dtau = g(y)
// on tau in [0, T/eps^2]; returned grids are labeled in slow time t =
// eps^2*tau so the x-grid solves the original equations on [0, T].
std::pair<TrajectoryGrid, TrajectoryGrid> integrate_skew(const FlowSystem& sys,
                                                         std::span<const double> xi,
                                                         std::span<const double> eta,
                                                         double T,
                                                         const IntegratorConfig& cfg);

// Skew run with the integral channels of the limit-theorem decomposition
// carried as extra RK4 state (quadrature consistent with the trajectory):
//   w(t) = integral of eps^{-1} f0(y(s)) ds     (W^eps)
//   z(t) = integral of f(x,y) - F(x) ds          (Z^eps, only if drift given)
struct SkewTrace {
    TrajectoryGrid x, y, w, z;
    double eps = 1.0;
    double h_tau_used = 0.0;
};

SkewTrace integrate_skew_traced(const FlowSystem& sys, std::span<const double> xi,
                                std::span<const double> eta, double T,
                                const IntegratorConfig& cfg,
                                const Field* averaged_drift);

}  // namespace skewflow
