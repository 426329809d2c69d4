#include "skewflow/ode.hpp"

#include <cmath>

namespace skewflow {

namespace {

// rounds the step count up to a stride multiple so the final point lands on
// the recorded grid; the step is shrunk to hit T exactly
struct StepPlan {
    std::size_t n_steps;
    std::size_t stride;
    double h;
};

StepPlan plan_steps(double total, double h_request, std::size_t stride) {
    if (!(total > 0.0)) throw ConfigError("integration horizon must be positive");
    if (stride < 1) stride = 1;
    auto raw = static_cast<std::size_t>(std::ceil(total / h_request - 1e-12));
    if (raw < 1) raw = 1;
    const std::size_t n = ((raw + stride - 1) / stride) * stride;
    return {n, stride, total / static_cast<double>(n)};
}

void check_trap(std::span<const double> y, double radius, double time) {
    if (!all_finite(y)) throw NumericalError("non-finite fast state", time);
    if (norm2(y) > radius)
        throw NumericalError("fast state left the trapping region", time);
}

}  // namespace

Vec rk4_step(const Field& field, const Vec& state, double h) {
    if (!(h > 0.0)) throw ConfigError("rk4_step needs h > 0");
    Vec s = state;
    Rk4Workspace ws;
    ws.resize(s.size());
    auto deriv = [&](std::span<const double> in, std::span<double> out) {
        field(in, out);
    };
    rk4_step_inplace(deriv, std::span<double>(s), h, ws, 0.0);
    return s;
}

FastFlowStepper::FastFlowStepper(const FlowSystem& sys, std::span<const double> eta,
                                 double h)
    : sys_(&sys), y_(eta.begin(), eta.end()), h_(h) {
    if (eta.size() != sys.ell) throw ConfigError("eta dimension mismatch");
    if (!(h > 0.0)) throw ConfigError("stepper needs h > 0");
    ws_.resize(sys.ell);
    check_trap(y(), sys.trap_radius, 0.0);
}

void FastFlowStepper::step() {
    auto deriv = [this](std::span<const double> in, std::span<double> out) {
        sys_->g(in, out);
    };
    rk4_step_inplace(deriv, std::span<double>(y_), h_, ws_, tau());
    ++steps_;
    check_trap(y(), sys_->trap_radius, tau());
}

TrajectoryGrid integrate_fast(const FlowSystem& sys, std::span<const double> eta,
                              double T_tau, const IntegratorConfig& cfg) {
    sys.validate();
    cfg.validate();
    if (eta.size() != sys.ell) throw ConfigError("eta dimension mismatch");
    const std::size_t stride = cfg.record_stride == 0 ? 1 : cfg.record_stride;
    const StepPlan plan = plan_steps(T_tau, cfg.h_tau, stride);

    const std::size_t points = plan.n_steps / plan.stride + 1;
    if (points * sys.ell > cfg.max_stored)
        throw CapacityError("trajectory would store " + std::to_string(points) +
                            " points; increase record_stride");

    TrajectoryGrid grid;
    grid.t0 = 0.0;
    grid.dt = plan.h * static_cast<double>(plan.stride);
    grid.dim = sys.ell;
    grid.time_frame = TimeFrame::Fast;
    grid.data.reserve(points * sys.ell);

    FastFlowStepper stepper(sys, eta, plan.h);
    grid.data.insert(grid.data.end(), eta.begin(), eta.end());
    for (std::size_t k = 1; k <= plan.n_steps; ++k) {
        stepper.step();
        if (k % plan.stride == 0) {
            auto y = stepper.y();
            grid.data.insert(grid.data.end(), y.begin(), y.end());
        }
    }
    return grid;
}

namespace {

// Derivative of the fused skew state [x | y | w | z?]. The y block depends
// only on itself, so its arithmetic is identical to a standalone fast run.
class SkewDeriv {
public:
    SkewDeriv(const FlowSystem& sys, const Field* drift, bool with_z)
        : sys_(&sys), drift_(drift), with_z_(with_z), d_(sys.d), ell_(sys.ell) {
        f0_buf_.resize(d_);
        f_buf_.resize(d_);
        drift_buf_.resize(d_);
    }

    std::size_t dim() const { return d_ + ell_ + d_ + (with_z_ ? d_ : 0); }

    void operator()(std::span<const double> s, std::span<double> out) {
        const auto x = s.subspan(0, d_);
        const auto y = s.subspan(d_, ell_);
        sys_->g(y, out.subspan(d_, ell_));
        sys_->f0(y, std::span<double>(f0_buf_));
        sys_->f(x, y, std::span<double>(f_buf_));
        const double eps = sys_->eps;
        const double eps2 = eps * eps;
        for (std::size_t i = 0; i < d_; ++i) {
            out[i] = eps * f0_buf_[i] + eps2 * f_buf_[i];
            out[d_ + ell_ + i] = eps * f0_buf_[i];
        }
        if (with_z_) {
            (*drift_)(x, std::span<double>(drift_buf_));
            for (std::size_t i = 0; i < d_; ++i)
                out[d_ + ell_ + d_ + i] = eps2 * (f_buf_[i] - drift_buf_[i]);
        }
    }

private:
    const FlowSystem* sys_;
    const Field* drift_;
    bool with_z_;
    std::size_t d_, ell_;
    Vec f0_buf_, f_buf_, drift_buf_;
};

std::size_t auto_stride(double T, double eps, double h_tau) {
    // stored slow-time spacing <= 1e-3 * T where the step allows it
    const double target = 1e-3 * T;
    const double slow_step = h_tau * eps * eps;
    auto stride = static_cast<std::size_t>(std::floor(target / slow_step + 1e-12));
    return stride < 1 ? 1 : stride;
}

}  // namespace

SkewTrace integrate_skew_traced(const FlowSystem& sys, std::span<const double> xi,
                                std::span<const double> eta, double T,
                                const IntegratorConfig& cfg,
                                const Field* averaged_drift) {
    sys.validate();
    cfg.validate();
    if (xi.size() != sys.d) throw ConfigError("xi dimension mismatch");
    if (eta.size() != sys.ell) throw ConfigError("eta dimension mismatch");
    if (!(T > 0.0)) throw ConfigError("horizon T must be positive");

    const double eps = sys.eps;
    const double T_tau = T / (eps * eps);
    const std::size_t stride = cfg.record_stride == 0
                                   ? auto_stride(T, eps, cfg.h_tau)
                                   : cfg.record_stride;
    const StepPlan plan = plan_steps(T_tau, cfg.h_tau, stride);

    const bool with_z = averaged_drift != nullptr;
    SkewDeriv deriv(sys, averaged_drift, with_z);
    const std::size_t points = plan.n_steps / plan.stride + 1;
    const std::size_t per_point = sys.d + sys.ell + sys.d + (with_z ? sys.d : 0);
    if (points * per_point > cfg.max_stored)
        throw CapacityError("skew trajectory would store " + std::to_string(points) +
                            " points; increase record_stride");

    Vec state(deriv.dim(), 0.0);
    std::copy(xi.begin(), xi.end(), state.begin());
    std::copy(eta.begin(), eta.end(), state.begin() + sys.d);

    SkewTrace trace;
    trace.eps = eps;
    trace.h_tau_used = plan.h;
    const double dt_slow = plan.h * static_cast<double>(plan.stride) * eps * eps;
    auto init_grid = [&](TrajectoryGrid& g, std::size_t dim) {
        g.t0 = 0.0;
        g.dt = dt_slow;
        g.dim = dim;
        g.time_frame = TimeFrame::Slow;
        g.data.reserve(points * dim);
    };
    init_grid(trace.x, sys.d);
    init_grid(trace.y, sys.ell);
    init_grid(trace.w, sys.d);
    if (with_z) init_grid(trace.z, sys.d);

    const double f_tol = 1e-12 * (1.0 + sys.f_sup);
    const double f0_tol = 1e-12 * (1.0 + sys.f0_sup);
    Vec fbuf(sys.d), f0buf(sys.d);
    auto record = [&](std::size_t k) {
        const auto x = std::span<const double>(state).subspan(0, sys.d);
        const auto y = std::span<const double>(state).subspan(sys.d, sys.ell);
        const auto w = std::span<const double>(state).subspan(sys.d + sys.ell, sys.d);
        const double t = static_cast<double>(k) * plan.h * eps * eps;
        if (!all_finite(std::span<const double>(state)))
            throw NumericalError("non-finite skew state", t);
        // declared bounds are load-bearing for the proof-side inequalities;
        // a violation means the metadata does not match the fields
        sys.f(x, y, std::span<double>(fbuf));
        if (norm2(fbuf) > sys.f_sup + f_tol)
            throw NumericalError("|f| exceeded declared bound f_sup", t);
        sys.f0(y, std::span<double>(f0buf));
        if (norm2(f0buf) > sys.f0_sup + f0_tol)
            throw NumericalError("|f0| exceeded declared bound f0_sup", t);
        trace.x.data.insert(trace.x.data.end(), x.begin(), x.end());
        trace.y.data.insert(trace.y.data.end(), y.begin(), y.end());
        trace.w.data.insert(trace.w.data.end(), w.begin(), w.end());
        if (with_z) {
            const auto z =
                std::span<const double>(state).subspan(sys.d + sys.ell + sys.d, sys.d);
            trace.z.data.insert(trace.z.data.end(), z.begin(), z.end());
        }
    };

    Rk4Workspace ws;
    ws.resize(deriv.dim());
    record(0);
    for (std::size_t k = 1; k <= plan.n_steps; ++k) {
        const double t_slow = static_cast<double>(k - 1) * plan.h * eps * eps;
        rk4_step_inplace(deriv, std::span<double>(state), plan.h, ws, t_slow);
        check_trap(std::span<const double>(state).subspan(sys.d, sys.ell),
                   sys.trap_radius, static_cast<double>(k) * plan.h * eps * eps);
        if (k % plan.stride == 0) record(k);
    }
    return trace;
}

std::pair<TrajectoryGrid, TrajectoryGrid> integrate_skew(const FlowSystem& sys,
                                                         std::span<const double> xi,
                                                         std::span<const double> eta,
                                                         double T,
                                                         const IntegratorConfig& cfg) {
    SkewTrace trace = integrate_skew_traced(sys, xi, eta, T, cfg, nullptr);
    return {std::move(trace.x), std::move(trace.y)};
}

}  // namespace skewflow
