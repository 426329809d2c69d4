#include "skewflow/limit_laws.hpp"

#include <algorithm>
#include <cmath>

#include "skewflow/parallel.hpp"
#include "skewflow/sde.hpp"
#include "skewflow/stats.hpp"

namespace skewflow {

namespace {

// Streams [y | Q] with dQ/dtau = f0(y); the fast block's arithmetic matches
// FastFlowStepper because the y derivatives are identical componentwise.
class FastQuadStepper {
public:
    FastQuadStepper(const FlowSystem& sys, std::span<const double> eta, double h)
        : sys_(&sys), state_(sys.ell + sys.d, 0.0), h_(h) {
        if (eta.size() != sys.ell) throw ConfigError("eta dimension mismatch");
        std::copy(eta.begin(), eta.end(), state_.begin());
        ws_.resize(state_.size());
    }

    void step() {
        auto deriv = [this](std::span<const double> in, std::span<double> out) {
            const auto y = in.subspan(0, sys_->ell);
            sys_->g(y, out.subspan(0, sys_->ell));
            sys_->f0(y, out.subspan(sys_->ell, sys_->d));
        };
        rk4_step_inplace(deriv, std::span<double>(state_), h_, ws_, tau());
        ++steps_;
        const auto y = this->y();
        if (!all_finite(y)) throw NumericalError("non-finite fast state", tau());
        if (norm2(y) > sys_->trap_radius)
            throw NumericalError("fast state left the trapping region", tau());
    }

    std::span<const double> y() const {
        return std::span<const double>(state_).subspan(0, sys_->ell);
    }
    std::span<const double> quad() const {
        return std::span<const double>(state_).subspan(sys_->ell, sys_->d);
    }
    double tau() const { return static_cast<double>(steps_) * h_; }

private:
    const FlowSystem* sys_;
    Vec state_;
    Rk4Workspace ws_;
    double h_;
    std::size_t steps_ = 0;
};

}  // namespace

WipPath wip_path(const FlowSystem& sys, double n, double T,
                 std::span<const double> eta, const IntegratorConfig& cfg,
                 std::size_t target_points) {
    sys.validate();
    cfg.validate();
    if (!(n > 0.0)) throw ConfigError("wip_path needs n > 0");
    if (!(T > 0.0)) throw ConfigError("wip_path needs T > 0");
    if (target_points < 2) target_points = 2;

    const double tau_end = n * T;
    auto raw = static_cast<std::size_t>(std::ceil(tau_end / cfg.h_tau - 1e-12));
    if (raw < 1) raw = 1;
    std::size_t stride = std::max<std::size_t>(1, raw / target_points);
    const std::size_t steps = ((raw + stride - 1) / stride) * stride;
    const double h = tau_end / static_cast<double>(steps);

    WipPath out;
    out.n = n;
    out.T = T;
    out.path.t0 = 0.0;
    out.path.dt = h * static_cast<double>(stride) / n;
    out.path.dim = sys.d;
    out.path.time_frame = TimeFrame::Slow;
    out.path.data.reserve((steps / stride + 1) * sys.d);

    const double root = 1.0 / std::sqrt(n);
    FastQuadStepper stepper(sys, eta, h);
    for (std::size_t i = 0; i < sys.d; ++i) out.path.data.push_back(0.0);
    for (std::size_t k = 1; k <= steps; ++k) {
        stepper.step();
        if (k % stride == 0) {
            auto q = stepper.quad();
            for (std::size_t i = 0; i < sys.d; ++i)
                out.path.data.push_back(root * q[i]);
        }
    }
    return out;
}

Vec WipEnsemble::column(std::size_t time_idx, std::size_t coord) const {
    Vec out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = at(i, time_idx, coord);
    return out;
}

WipEnsemble wip_ensemble(const FlowSystem& sys, double n, std::size_t m,
                         const Vec& times, const MuSampler& sampler,
                         const IntegratorConfig& cfg, int jobs) {
    // the covariance statistics assume independent members, so each eta gets
    // its own burned-in orbit
    MuSampler disp = sampler;
    disp.mode = MuMode::Dispersed;
    MuSamples etas = sample_mu_parallel(sys, disp, m, cfg, jobs);
    return wip_ensemble_from(sys, n, times, etas, cfg, jobs);
}

WipEnsemble wip_ensemble_from(const FlowSystem& sys, double n, const Vec& times,
                              const MuSamples& etas, const IntegratorConfig& cfg,
                              int jobs) {
    sys.validate();
    const std::size_t m = etas.size();
    if (!(n > 0.0)) throw ConfigError("wip_ensemble needs n > 0");
    if (m < 2 || times.empty()) throw ConfigError("wip_ensemble needs m >= 2 and times");
    for (double t : times)
        if (!(t > 0.0)) throw ConfigError("wip_ensemble times must be positive");
    if (etas.ell != sys.ell) throw ConfigError("wip_ensemble: eta dimension mismatch");

    const double t_max = *std::max_element(times.begin(), times.end());
    const double tau_end = n * t_max;
    auto steps = static_cast<std::size_t>(std::ceil(tau_end / cfg.h_tau - 1e-12));
    if (steps < 1) steps = 1;
    const double h = tau_end / static_cast<double>(steps);
    std::vector<std::size_t> record_steps(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        record_steps[i] = static_cast<std::size_t>(std::llround(n * times[i] / h));

    WipEnsemble ens;
    ens.n = n;
    ens.times = times;
    ens.d = sys.d;
    ens.m = m;
    ens.values.assign(m * times.size() * sys.d, 0.0);
    const double root = 1.0 / std::sqrt(n);

    run_jobs(m, jobs, [&](std::size_t i) {
        FastQuadStepper stepper(sys, etas.state(i), h);
        double* slot = ens.values.data() + i * times.size() * sys.d;
        for (std::size_t k = 1; k <= steps; ++k) {
            stepper.step();
            for (std::size_t ti = 0; ti < times.size(); ++ti) {
                if (record_steps[ti] == k) {
                    auto q = stepper.quad();
                    for (std::size_t c = 0; c < sys.d; ++c)
                        slot[ti * sys.d + c] = root * q[c];
                }
            }
        }
    });
    return ens;
}

CovarianceEstimate sigma_from_samples(std::span<const double> values, std::size_t m,
                                      std::size_t d) {
    if (m < 30) throw ConfigError("covariance ensemble needs M >= 30");
    if (values.size() != m * d) throw ConfigError("sigma_from_samples: size mismatch");

    Vec mean_v(d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < d; ++c) mean_v[c] += values[i * d + c];
    for (auto& v : mean_v) v /= static_cast<double>(m);

    CovarianceEstimate est;
    est.method = SigmaMethod::Ensemble;
    est.n_samples = m;
    est.d = d;
    est.sigma.assign(d * d, 0.0);
    est.std_err.assign(d * d, 0.0);

    // centered sums; upper triangle mirrored for exact symmetry
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                s += (values[i * d + a] - mean_v[a]) * (values[i * d + b] - mean_v[b]);
            const double cov = s / static_cast<double>(m - 1);
            est.sigma[a * d + b] = cov;
            est.sigma[b * d + a] = cov;
        }
    }

    // leave-one-out jackknife per entry
    const double dm = static_cast<double>(m);
    Vec sum_v(d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < d; ++c) sum_v[c] += values[i * d + c];
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            double p_ab = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                p_ab += values[i * d + a] * values[i * d + b];
            Vec loo(m);
            double loo_mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double va = values[i * d + a];
                const double vb = values[i * d + b];
                const double ma = (sum_v[a] - va) / (dm - 1.0);
                const double mb = (sum_v[b] - vb) / (dm - 1.0);
                const double cov =
                    (p_ab - va * vb - (dm - 1.0) * ma * mb) / (dm - 2.0);
                loo[i] = cov;
                loo_mean += cov;
            }
            loo_mean /= dm;
            double ss = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                ss += (loo[i] - loo_mean) * (loo[i] - loo_mean);
            const double se = std::sqrt((dm - 1.0) / dm * ss);
            est.std_err[a * d + b] = se;
            est.std_err[b * d + a] = se;
        }
    }

    PsdProjection proj = psd_project(est.sigma, d);
    est.clipped_mass = proj.clipped_mass;
    est.sigma = std::move(proj.matrix);
    return est;
}

CovarianceEstimate estimate_sigma_ensemble(const FlowSystem& sys, double n,
                                           std::size_t m, const MuSampler& sampler,
                                           const IntegratorConfig& cfg, int jobs) {
    if (m < 30) throw ConfigError("estimate_sigma_ensemble needs M >= 30");
    WipEnsemble ens = wip_ensemble(sys, n, m, Vec{1.0}, sampler, cfg, jobs);
    return sigma_from_samples(ens.values, m, sys.d);
}

CovarianceEstimate estimate_sigma_green_kubo(const FlowSystem& sys, double T_corr,
                                             double T_run, const MuSampler& sampler,
                                             const IntegratorConfig& cfg,
                                             std::size_t record_stride, int jobs) {
    sys.validate();
    if (!(T_corr > 0.0)) throw ConfigError("T_corr must be positive");
    if (T_corr >= T_run / 10.0)
        throw ConfigError("Green-Kubo truncation must satisfy T_corr < T_run/10");
    if (record_stride < 1) record_stride = 1;

    const double dt_s = cfg.h_tau * static_cast<double>(record_stride);
    const auto n_rec = static_cast<std::size_t>(std::floor(T_run / dt_s)) + 1;
    const auto max_lag = static_cast<std::size_t>(std::floor(T_corr / dt_s));
    const std::size_t d = sys.d;

    // one burned-in orbit; f0 recorded every record_stride steps
    Vec series(n_rec * d);
    {
        MuSampler s = sampler;
        MuSamples start = sample_mu(sys, s, 1, cfg);
        FastFlowStepper stepper(sys, start.state(0), cfg.h_tau);
        Vec buf(d);
        sys.f0(stepper.y(), std::span<double>(buf));
        std::copy(buf.begin(), buf.end(), series.begin());
        for (std::size_t i = 1; i < n_rec; ++i) {
            for (std::size_t k = 0; k < record_stride; ++k) stepper.step();
            sys.f0(stepper.y(), std::span<double>(buf));
            std::copy(buf.begin(), buf.end(), series.begin() + i * d);
        }
    }

    // center empirically; Ef0 = 0 holds only up to sampling error
    Vec mean_v(d, 0.0);
    for (std::size_t i = 0; i < n_rec; ++i)
        for (std::size_t c = 0; c < d; ++c) mean_v[c] += series[i * d + c];
    for (auto& v : mean_v) v /= static_cast<double>(n_rec);
    for (std::size_t i = 0; i < n_rec; ++i)
        for (std::size_t c = 0; c < d; ++c) series[i * d + c] -= mean_v[c];

    auto integrate_lags = [&](std::span<const double> data, std::size_t len) -> Vec {
        Vec cov((max_lag + 1) * d * d);
        autocovariance(data, len, d, max_lag, std::span<double>(cov), jobs);
        Vec sigma(d * d, 0.0);
        for (std::size_t lag = 0; lag <= max_lag; ++lag) {
            const double w = (lag == 0 || lag == max_lag) ? 0.5 : 1.0;
            const double* c = cov.data() + lag * d * d;
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b)
                    sigma[a * d + b] += w * dt_s * (c[a * d + b] + c[b * d + a]);
        }
        // exact symmetry regardless of summation order
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a + 1; b < d; ++b) {
                const double avg = 0.5 * (sigma[a * d + b] + sigma[b * d + a]);
                sigma[a * d + b] = avg;
                sigma[b * d + a] = avg;
            }
        return sigma;
    };

    CovarianceEstimate est;
    est.method = SigmaMethod::GreenKubo;
    est.n_samples = n_rec;
    est.d = d;

    Vec sigma_raw = integrate_lags(series, n_rec);

    // segment-wise re-estimates for a standard error
    std::size_t segments = 8;
    while (segments > 2 && n_rec / segments <= 4 * (max_lag + 1)) segments /= 2;
    est.std_err.assign(d * d, 0.0);
    if (segments >= 2) {
        const std::size_t seg_len = n_rec / segments;
        std::vector<Vec> seg_sigma;
        seg_sigma.reserve(segments);
        for (std::size_t s = 0; s < segments; ++s) {
            auto seg = std::span<const double>(series).subspan(s * seg_len * d, seg_len * d);
            seg_sigma.push_back(integrate_lags(seg, seg_len));
        }
        for (std::size_t e = 0; e < d * d; ++e) {
            double m1 = 0.0;
            for (const auto& sg : seg_sigma) m1 += sg[e];
            m1 /= static_cast<double>(segments);
            double ss = 0.0;
            for (const auto& sg : seg_sigma) ss += (sg[e] - m1) * (sg[e] - m1);
            est.std_err[e] = std::sqrt(ss / static_cast<double>(segments - 1) /
                                       static_cast<double>(segments));
        }
    }

    PsdProjection proj = psd_project(sigma_raw, d);
    est.clipped_mass = proj.clipped_mass;
    est.sigma = std::move(proj.matrix);
    return est;
}

BrownianDiagnostics brownian_diagnostics(const WipEnsemble& ens) {
    auto find_time = [&](double t) -> std::size_t {
        for (std::size_t i = 0; i < ens.times.size(); ++i)
            if (std::abs(ens.times[i] - t) < 1e-12) return i;
        throw ConfigError("brownian_diagnostics needs W_n recorded at t = " +
                          std::to_string(t));
    };
    const std::size_t i_half = find_time(0.5);
    const std::size_t i_one = find_time(1.0);
    std::size_t i_two = ens.times.size();
    for (std::size_t i = 0; i < ens.times.size(); ++i)
        if (std::abs(ens.times[i] - 2.0) < 1e-12) i_two = i;

    BrownianDiagnostics diag;
    const std::size_t d = ens.d;
    const double m = static_cast<double>(ens.m);
    diag.corr_se = 1.0 / std::sqrt(m);
    for (std::size_t c = 0; c < d; ++c) {
        Vec w_half = ens.column(i_half, c);
        Vec w_one = ens.column(i_one, c);
        diag.mean.push_back(mean(w_one));
        diag.var_one.push_back(variance(w_one));
        diag.mean_se.push_back(std::sqrt(diag.var_one.back() / m));
        diag.var_half.push_back(variance(w_half));
        diag.var_ratio.push_back(diag.var_half.back() / diag.var_one.back());
        Vec incr(ens.m);
        for (std::size_t i = 0; i < ens.m; ++i) incr[i] = w_one[i] - w_half[i];
        diag.increment_corr.push_back(pearson_correlation(incr, w_half));
        if (i_two < ens.times.size()) diag.var_two.push_back(variance(ens.column(i_two, c)));
    }
    return diag;
}

double LdpEstimate::binomial_se(std::size_t t_idx, std::size_t a_idx) const {
    const double b = at(t_idx, a_idx);
    return std::sqrt(b * (1.0 - b) / static_cast<double>(n_windows));
}

std::vector<LdpEstimate> estimate_ldp_multi(const FlowSystem& sys,
                                            std::span<const Vec> xs,
                                            std::span<const Vec> F_at_xs,
                                            const Vec& a_grid, const Vec& T_grid,
                                            std::size_t n_windows,
                                            const MuSampler& sampler,
                                            const IntegratorConfig& cfg, double gap) {
    sys.validate();
    sampler.validate();
    if (xs.empty() || xs.size() != F_at_xs.size())
        throw ConfigError("estimate_ldp: slow points and F values must pair up");
    if (n_windows < 100) throw ConfigError("estimate_ldp needs n_windows >= 100");
    if (a_grid.empty() || T_grid.empty()) throw ConfigError("estimate_ldp: empty grid");
    for (double a : a_grid)
        if (!(a > 0.0)) throw ConfigError("LDP thresholds must be positive");
    for (double T : T_grid)
        if (!(T > 0.0)) throw ConfigError("LDP horizons must be positive");
    if (gap < 0.0) throw ConfigError("window gap must be >= 0");

    const std::size_t n_x = xs.size();
    const std::size_t d = sys.d;
    const double h = cfg.h_tau;

    struct Row {
        std::size_t steps_window;  // window length in steps
        std::size_t steps_period;  // window + gap
        std::size_t done = 0;      // completed windows
        double T;
    };
    std::vector<Row> rows;
    std::size_t max_total_steps = 0;
    for (double T : T_grid) {
        Row r;
        r.T = T;
        r.steps_window = static_cast<std::size_t>(std::llround(T / h));
        if (r.steps_window < 2) throw ConfigError("LDP horizon below integrator resolution");
        r.steps_period =
            r.steps_window + static_cast<std::size_t>(std::llround(gap / h));
        max_total_steps = std::max(max_total_steps, r.steps_period * n_windows);
        rows.push_back(r);
    }

    // per (row, x): running trapezoid accumulator over the active window
    Vec acc(rows.size() * n_x * d, 0.0);
    // exceedance counts per (row, x, a)
    std::vector<std::size_t> counts(rows.size() * n_x * a_grid.size(), 0);

    Vec f_prev(n_x * d), f_cur(n_x * d);
    auto eval_all = [&](std::span<const double> y, Vec& out) {
        for (std::size_t xi = 0; xi < n_x; ++xi)
            sys.f(std::span<const double>(xs[xi]),
                  y, std::span<double>(out.data() + xi * d, d));
    };

    MuSamples start = sample_mu(sys, sampler, 1, cfg);
    FastFlowStepper stepper(sys, start.state(0), h);
    eval_all(stepper.y(), f_prev);

    for (std::size_t k = 0; k < max_total_steps; ++k) {
        stepper.step();
        eval_all(stepper.y(), f_cur);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            Row& row = rows[r];
            if (row.done >= n_windows) continue;
            const std::size_t pos = k % row.steps_period;
            if (pos >= row.steps_window) continue;  // inside the gap
            for (std::size_t xi = 0; xi < n_x; ++xi) {
                double* dst = acc.data() + (r * n_x + xi) * d;
                for (std::size_t c = 0; c < d; ++c)
                    dst[c] += 0.5 * h * (f_prev[xi * d + c] + f_cur[xi * d + c]);
            }
            if (pos + 1 == row.steps_window) {
                // window complete: convert to averages and count exceedances
                const double window_T = static_cast<double>(row.steps_window) * h;
                for (std::size_t xi = 0; xi < n_x; ++xi) {
                    double* dst = acc.data() + (r * n_x + xi) * d;
                    double dev2 = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        const double diff = dst[c] / window_T - F_at_xs[xi][c];
                        dev2 += diff * diff;
                        dst[c] = 0.0;
                    }
                    const double dev = std::sqrt(dev2);
                    for (std::size_t ai = 0; ai < a_grid.size(); ++ai)
                        if (dev > a_grid[ai])
                            ++counts[(r * n_x + xi) * a_grid.size() + ai];
                }
                ++row.done;
            }
        }
        std::swap(f_prev, f_cur);
    }

    std::vector<LdpEstimate> out(n_x);
    for (std::size_t xi = 0; xi < n_x; ++xi) {
        LdpEstimate& e = out[xi];
        e.a_grid = a_grid;
        e.T_grid = T_grid;
        e.n_windows = n_windows;
        e.x = xs[xi];
        e.F_at_x = F_at_xs[xi];
        e.b_hat.resize(T_grid.size() * a_grid.size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t ai = 0; ai < a_grid.size(); ++ai)
                e.b_hat[r * a_grid.size() + ai] =
                    static_cast<double>(counts[(r * n_x + xi) * a_grid.size() + ai]) /
                    static_cast<double>(n_windows);
    }
    return out;
}

LdpEstimate estimate_ldp(const FlowSystem& sys, std::span<const double> x,
                         std::span<const double> F_at_x, const Vec& a_grid,
                         const Vec& T_grid, std::size_t n_windows,
                         const MuSampler& sampler, const IntegratorConfig& cfg,
                         double gap) {
    std::vector<Vec> xs{Vec(x.begin(), x.end())};
    std::vector<Vec> fs{Vec(F_at_x.begin(), F_at_x.end())};
    return estimate_ldp_multi(sys, xs, fs, a_grid, T_grid, n_windows, sampler, cfg,
                              gap)[0];
}

Prop22Result check_prop22(const FlowSystem& sys, std::span<const double> x,
                          std::span<const double> F_at_x, double a, double T,
                          std::size_t n_shift, std::size_t ensemble, double b_hat_aT,
                          const MuSampler& sampler, const IntegratorConfig& cfg,
                          double gap) {
    sys.validate();
    if (!(a > 0.0) || !(T > 0.0)) throw ConfigError("check_prop22 needs a, T > 0");
    if (ensemble < 30) throw ConfigError("check_prop22 needs an ensemble >= 30");
    if (b_hat_aT < 0.0 || b_hat_aT > 1.0) throw ConfigError("b_hat outside [0,1]");

    const double h = cfg.h_tau;
    const auto steps_T = static_cast<std::size_t>(std::llround(T / h));
    const std::size_t steps_start = steps_T * n_shift;
    const std::size_t steps_period =
        steps_T * (n_shift + 1) + static_cast<std::size_t>(std::llround(gap / h));
    const std::size_t d = sys.d;

    Vec devs;
    devs.reserve(ensemble);
    Vec f_prev(d), f_cur(d), acc(d, 0.0);

    MuSamples start = sample_mu(sys, sampler, 1, cfg);
    FastFlowStepper stepper(sys, start.state(0), h);
    sys.f(x, stepper.y(), std::span<double>(f_prev));

    const std::size_t total = steps_period * ensemble;
    for (std::size_t k = 0; k < total && devs.size() < ensemble; ++k) {
        stepper.step();
        sys.f(x, stepper.y(), std::span<double>(f_cur));
        const std::size_t pos = k % steps_period;
        if (pos >= steps_start && pos < steps_start + steps_T) {
            for (std::size_t c = 0; c < d; ++c)
                acc[c] += 0.5 * h * (f_prev[c] + f_cur[c]);
            if (pos + 1 == steps_start + steps_T) {
                const double window_T = static_cast<double>(steps_T) * h;
                double dev2 = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = acc[c] / window_T - F_at_x[c];
                    dev2 += diff * diff;
                    acc[c] = 0.0;
                }
                devs.push_back(std::sqrt(dev2));
            }
        }
        std::swap(f_prev, f_cur);
    }

    Prop22Result res;
    res.a = a;
    res.T = T;
    res.n_shift = n_shift;
    res.ensemble = devs.size();
    res.lhs = mean(devs);
    res.lhs_std_err = std::sqrt(variance(devs) / static_cast<double>(devs.size()));
    res.rhs = a + 2.0 * sys.f_sup * b_hat_aT;
    res.slack = res.rhs - res.lhs;
    return res;
}

}  // namespace skewflow
