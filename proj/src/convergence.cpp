#include "skewflow/convergence.hpp"

#include <algorithm>
#include <cmath>

#include "skewflow/parallel.hpp"
#include "skewflow/rng.hpp"
#include "skewflow/stats.hpp"

namespace skewflow {

void LadderConfig::validate() const {
    if (eps_ladder.empty()) throw ConfigError("ladder needs at least one eps");
    for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
        const double e = eps_ladder[i];
        if (!(e > 0.0) || e > 1.0) throw ConfigError("ladder eps must lie in (0,1]");
        if (i > 0 && !(e < eps_ladder[i - 1]))
            throw ConfigError("ladder eps must be strictly decreasing");
    }
    if (ensemble < 2) throw ConfigError("ladder ensemble must be >= 2");
    if (!(T > 0.0)) throw ConfigError("ladder horizon must be positive");
    if (eval_times.empty()) throw ConfigError("ladder needs eval times");
    for (double t : eval_times)
        if (!(t > 0.0) || t > T + 1e-12)
            throw ConfigError("eval times must lie in (0, T]");
    if (!(delta_exponent > 1.0) || delta_exponent >= 2.0)
        throw ConfigError("delta exponent must lie in (1,2) so both proof bounds vanish");
    if (!(sde_h > 0.0)) throw ConfigError("sde step must be positive");
    if (sde_ensemble < 2) throw ConfigError("sde ensemble must be >= 2");
}

namespace {

double norm_d(const double* p, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += p[i] * p[i];
    return std::sqrt(s);
}

}  // namespace

ZDecomposition decompose_Z(const TrajectoryGrid& x, const TrajectoryGrid& y,
                           const FlowSystem& sys, const Drift& F, double delta) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("decompose_Z: misaligned trajectories");
    if (std::abs(x.dt - y.dt) > 1e-15 * std::max(1.0, x.dt) || x.t0 != y.t0)
        throw ConfigError("decompose_Z: misaligned grids");
    if (x.time_frame != TimeFrame::Slow || y.time_frame != TimeFrame::Slow)
        throw ConfigError("decompose_Z expects slow-time grids");
    if (x.dim != sys.d || y.dim != sys.ell || F.d != sys.d)
        throw ConfigError("decompose_Z: dimension mismatch");
    const double dt = x.dt;
    if (!(delta >= 10.0 * dt - 1e-12))
        throw ConfigError("decompose_Z needs delta >= 10 grid spacings");

    const std::size_t count = x.size();
    const std::size_t d = sys.d;
    const auto m = static_cast<std::size_t>(std::llround(delta / dt));
    const double delta_used = static_cast<double>(m) * dt;
    const double horizon = static_cast<double>(count - 1) * dt;

    // g(x_k, y_k) = f(x_k, y_k) - F(x_k) on the grid
    Vec g(count * d), fbuf(d), Fbuf(d);
    for (std::size_t k = 0; k < count; ++k) {
        sys.f(x.state(k), y.state(k), std::span<double>(fbuf));
        F(x.state(k), std::span<double>(Fbuf));
        for (std::size_t c = 0; c < d; ++c) g[k * d + c] = fbuf[c] - Fbuf[c];
    }

    // cumulative trapezoid of g
    Vec Z(count * d, 0.0);
    for (std::size_t k = 0; k + 1 < count; ++k)
        for (std::size_t c = 0; c < d; ++c)
            Z[(k + 1) * d + c] = Z[k * d + c] + 0.5 * dt * (g[k * d + c] + g[(k + 1) * d + c]);

    const std::size_t n_windows = (count - 1) / m;

    // per-window freezing error I1_n and ergodic-average error I2_n
    Vec I1_cum((n_windows + 1) * d, 0.0);
    Vec I2_cum((n_windows + 1) * d, 0.0);
    Vec frozen_f(d), frozen_F(d);
    for (std::size_t n = 0; n < n_windows; ++n) {
        const std::size_t k0 = n * m;
        F(x.state(k0), std::span<double>(frozen_F));
        Vec i1(d, 0.0), i2(d, 0.0);
        // frozen-x integrand at the left edge
        sys.f(x.state(k0), y.state(k0), std::span<double>(frozen_f));
        Vec gt_prev(d);
        for (std::size_t c = 0; c < d; ++c) gt_prev[c] = frozen_f[c] - frozen_F[c];
        for (std::size_t k = k0; k < k0 + m; ++k) {
            sys.f(x.state(k0), y.state(k + 1), std::span<double>(frozen_f));
            for (std::size_t c = 0; c < d; ++c) {
                const double gt_next = frozen_f[c] - frozen_F[c];
                i2[c] += 0.5 * dt * (gt_prev[c] + gt_next);
                i1[c] += 0.5 * dt * ((g[k * d + c] - gt_prev[c]) +
                                     (g[(k + 1) * d + c] - gt_next));
                gt_prev[c] = gt_next;
            }
        }
        for (std::size_t c = 0; c < d; ++c) {
            I1_cum[(n + 1) * d + c] = I1_cum[n * d + c] + i1[c];
            I2_cum[(n + 1) * d + c] = I2_cum[n * d + c] + i2[c];
        }
    }

    ZDecomposition out;
    out.delta_used = delta_used;
    out.bound_I0 = 2.0 * sys.f_sup * delta_used;
    out.bound_I1 = 2.0 * sys.lip_f * (sys.f0_sup + sys.f_sup) * horizon * delta_used / sys.eps;

    Vec i0(d), resid(d);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t n = std::min(k / m, n_windows);
        for (std::size_t c = 0; c < d; ++c) {
            i0[c] = Z[k * d + c] - Z[n * m * d + c];
            resid[c] = Z[n * m * d + c] - I1_cum[n * d + c] - I2_cum[n * d + c];
        }
        out.sup_Z = std::max(out.sup_Z, norm_d(&Z[k * d], d));
        out.sup_I0 = std::max(out.sup_I0, norm_d(i0.data(), d));
        out.sup_I1 = std::max(out.sup_I1, norm_d(&I1_cum[n * d], d));
        out.sup_I2 = std::max(out.sup_I2, norm_d(&I2_cum[n * d], d));
        out.telescope_residual =
            std::max(out.telescope_residual, norm_d(resid.data(), d));
    }
    return out;
}

TwoSampleDistance two_sample_distance(std::span<const double> a, std::size_t n,
                                      std::span<const double> b, std::size_t m,
                                      std::size_t dim, int jobs) {
    if (n == 0 || m == 0) throw ConfigError("two_sample_distance: empty sample");
    if (a.size() != n * dim || b.size() != m * dim)
        throw ConfigError("two_sample_distance: dimension mismatch");
    TwoSampleDistance out;
    Vec col_a(n), col_b(m);
    for (std::size_t c = 0; c < dim; ++c) {
        for (std::size_t i = 0; i < n; ++i) col_a[i] = a[i * dim + c];
        for (std::size_t i = 0; i < m; ++i) col_b[i] = b[i * dim + c];
        out.ks.push_back(ks_statistic(col_a, col_b));
    }
    out.energy = energy_distance(a, n, b, m, dim, jobs);
    return out;
}

namespace {

std::size_t grid_index_for_time(const TrajectoryGrid& grid, double t) {
    const auto idx = static_cast<std::size_t>(std::llround((t - grid.t0) / grid.dt));
    if (idx >= grid.size() ||
        std::abs(grid.time(idx) - t) > 1e-9 * std::max(1.0, std::abs(t)))
        throw ConfigError("eval time " + std::to_string(t) +
                          " does not land on the trajectory grid");
    return idx;
}

}  // namespace

LadderReport run_ladder(const FlowSystem& base_system, const LadderConfig& ladder,
                        const Drift& F, const CovarianceEstimate& sigma,
                        const MuSampler& sampler_proto, const IntegratorConfig& cfg,
                        std::uint64_t root_seed, int jobs) {
    base_system.validate();
    ladder.validate();
    const std::size_t d = base_system.d;
    if (sigma.d != d || F.d != d) throw ConfigError("run_ladder: dimension mismatch");
    Vec xi = ladder.xi.empty() ? Vec(d, 0.0) : ladder.xi;
    if (xi.size() != d) throw ConfigError("run_ladder: xi dimension mismatch");

    LadderReport report;
    report.config = ladder;
    report.root_seed = root_seed;
    report.sigma_used = sigma.sigma;
    report.noise_floor = ks_critical(
        1.36, ladder.ensemble, ladder.sde_ensemble);

    const std::size_t n_times = ladder.eval_times.size();

    // ---- SDE reference ensemble (one, shared across rungs) ----
    const Vec noise_root = matrix_sqrt_psd(sigma.sigma, d);
    report.sde_samples.assign(n_times * ladder.sde_ensemble * d, 0.0);
    Vec sde_xT(ladder.sde_ensemble * d, 0.0);
    {
        SdeSpec spec;
        spec.d = d;
        spec.drift = F;
        spec.noise_root = noise_root;
        spec.xi = xi;
        run_jobs(ladder.sde_ensemble, jobs, [&](std::size_t j) {
            const std::uint64_t seed = derive_seed(root_seed, "ladder.sde", j);
            NoisePath noise = make_noise_path(seed, d, ladder.T, ladder.sde_h);
            TrajectoryGrid path = euler_maruyama(spec, ladder.T, ladder.sde_h, noise);
            for (std::size_t ti = 0; ti < n_times; ++ti) {
                const std::size_t idx = grid_index_for_time(path, ladder.eval_times[ti]);
                auto s = path.state(idx);
                std::copy(s.begin(), s.end(),
                          report.sde_samples.begin() + (ti * ladder.sde_ensemble + j) * d);
            }
            auto last = path.back();
            std::copy(last.begin(), last.end(), sde_xT.begin() + j * d);
        });
    }
    report.sde_mean_T.assign(d, 0.0);
    report.sde_var_T.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        Vec col(ladder.sde_ensemble);
        for (std::size_t j = 0; j < ladder.sde_ensemble; ++j) col[j] = sde_xT[j * d + c];
        report.sde_mean_T[c] = mean(col);
        report.sde_var_T[c] = variance(col);
    }

    // ---- skew ensembles, one rung per eps ----
    for (std::size_t r = 0; r < ladder.eps_ladder.size(); ++r) {
        const double eps = ladder.eps_ladder[r];
        FlowSystem sys = base_system;
        sys.eps = eps;

        MuSampler sampler = sampler_proto;
        sampler.seed = derive_seed(root_seed, "ladder.mu", r);
        sampler.mode = MuMode::Dispersed;  // independent members
        MuSamples etas = sample_mu_parallel(sys, sampler, ladder.ensemble, cfg, jobs);

        IntegratorConfig run_cfg = cfg;
        run_cfg.record_stride = 1;  // full-resolution traces, processed per job

        const double delta = std::pow(eps, ladder.delta_exponent);
        const std::size_t M = ladder.ensemble;
        const std::size_t oracle_n = std::min(ladder.oracle_trajectories, M);

        RungReport rung;
        rung.eps = eps;
        rung.oracle_count = oracle_n;
        rung.sup_Z.assign(M, 0.0);
        rung.sup_I0.assign(M, 0.0);
        rung.sup_I1.assign(M, 0.0);
        rung.sup_I2.assign(M, 0.0);
        rung.samples.assign(n_times * M * d, 0.0);
        Vec xT(M * d, 0.0);
        Vec tele(M, 0.0), oracle_res(M, 0.0), delta_used(M, 0.0), b0(M, 0.0), b1(M, 0.0);

        run_jobs(M, jobs, [&](std::size_t j) {
            SkewTrace trace = integrate_skew_traced(sys, xi, etas.state(j), ladder.T,
                                                    run_cfg, &F.eval);
            // sup |Z| from the RK4-carried channel
            double sz = 0.0;
            for (std::size_t k = 0; k < trace.z.size(); ++k)
                sz = std::max(sz, norm_d(&trace.z.data[k * d], d));
            rung.sup_Z[j] = sz;

            ZDecomposition dec = decompose_Z(trace.x, trace.y, sys, F, delta);
            rung.sup_I0[j] = dec.sup_I0;
            rung.sup_I1[j] = dec.sup_I1;
            rung.sup_I2[j] = dec.sup_I2;
            tele[j] = dec.telescope_residual;
            delta_used[j] = dec.delta_used;
            b0[j] = dec.bound_I0;
            b1[j] = dec.bound_I1;

            for (std::size_t ti = 0; ti < n_times; ++ti) {
                const std::size_t idx = grid_index_for_time(trace.x, ladder.eval_times[ti]);
                auto s = trace.x.state(idx);
                std::copy(s.begin(), s.end(), rung.samples.begin() + (ti * M + j) * d);
            }
            auto last = trace.x.back();
            std::copy(last.begin(), last.end(), xT.begin() + j * d);

            if (j < oracle_n) {
                // x = G(W + Z) pathwise; reconstruct u and push it through G
                TrajectoryGrid u = trace.w;
                for (std::size_t i = 0; i < u.data.size(); ++i)
                    u.data[i] += trace.z.data[i];
                TrajectoryGrid v = apply_G(u, xi, F);
                double res = 0.0;
                Vec diff(d);
                for (std::size_t k = 0; k < v.size(); ++k) {
                    for (std::size_t c = 0; c < d; ++c)
                        diff[c] = v.data[k * d + c] - trace.x.data[k * d + c];
                    res = std::max(res, norm_d(diff.data(), d));
                }
                oracle_res[j] = res;
            }
        });

        rung.delta_used = delta_used[0];
        rung.bound_I0 = b0[0];
        rung.bound_I1 = b1[0];
        rung.mean_sup_Z = mean(rung.sup_Z);
        rung.mean_sup_I0 = mean(rung.sup_I0);
        rung.mean_sup_I1 = mean(rung.sup_I1);
        rung.mean_sup_I2 = mean(rung.sup_I2);
        rung.min_margin_I0 = rung.bound_I0 - *std::max_element(rung.sup_I0.begin(),
                                                               rung.sup_I0.end());
        rung.min_margin_I1 = rung.bound_I1 - *std::max_element(rung.sup_I1.begin(),
                                                               rung.sup_I1.end());
        rung.max_telescope_residual = *std::max_element(tele.begin(), tele.end());
        rung.max_oracle_residual =
            oracle_n == 0 ? 0.0
                          : *std::max_element(oracle_res.begin(),
                                              oracle_res.begin() + oracle_n);

        rung.mean_xT.assign(d, 0.0);
        rung.var_xT.assign(d, 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            Vec col(M);
            for (std::size_t j = 0; j < M; ++j) col[j] = xT[j * d + c];
            rung.mean_xT[c] = mean(col);
            rung.var_xT[c] = variance(col);
        }

        for (std::size_t ti = 0; ti < n_times; ++ti) {
            RungMarginal marg;
            marg.t = ladder.eval_times[ti];
            auto a = std::span<const double>(rung.samples)
                         .subspan(ti * M * d, M * d);
            auto b = std::span<const double>(report.sde_samples)
                         .subspan(ti * ladder.sde_ensemble * d, ladder.sde_ensemble * d);
            TwoSampleDistance dist =
                two_sample_distance(a, M, b, ladder.sde_ensemble, d, jobs);
            marg.ks = dist.ks;
            marg.energy = dist.energy;
            rung.marginals.push_back(std::move(marg));
        }

        report.rungs.push_back(std::move(rung));
    }
    return report;
}

}  // namespace skewflow
