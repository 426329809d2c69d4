// skewflow CLI: simulate | estimate sigma|F|ldp | ladder | replay <manifest>
//
// Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 acceptance-check failure (with --check).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "skewflow/config.hpp"
#include "skewflow/convergence.hpp"
#include "skewflow/io.hpp"
#include "skewflow/limit_laws.hpp"
#include "skewflow/manifest.hpp"
#include "skewflow/parallel.hpp"
#include "skewflow/rng.hpp"
#include "skewflow/sde.hpp"
#include "skewflow/stats.hpp"
#include "skewflow/version.hpp"

namespace fs = std::filesystem;
using namespace skewflow;

namespace {

struct CheckLog {
    bool all_ok = true;
    void check(bool ok, const std::string& what) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << '\n';
        all_ok = all_ok && ok;
    }
};

double wall_now() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::string tool_id() {
    return std::string(kToolName) + " " + kToolVersion;
}

Vec broadcast_to_d(const Vec& v, std::size_t d, const char* what) {
    if (v.size() == d) return v;
    if (v.size() == 1) return Vec(d, v[0]);
    throw ConfigError(std::string(what) + " must have dimension d (or be scalar)");
}

MuSamples obtain_mu(const RunConfig& cfg, const FlowSystem& sys,
                    const IntegratorConfig& ic, std::uint64_t seed,
                    std::size_t count, MuMode mode, int jobs) {
    if (!cfg.mu_file.empty()) {
        MuSamples s = read_mu_samples(cfg.mu_file);
        if (s.ell != sys.ell) throw ConfigError("mu_file dimension mismatch");
        if (s.size() < count)
            throw ConfigError("mu_file holds fewer samples than requested");
        return s;
    }
    MuSampler sampler = build_sampler(cfg, seed);
    sampler.mode = mode;
    return sample_mu_parallel(sys, sampler, count, ic, jobs);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
int cmd_simulate(const RunConfig& cfg, int jobs, bool check) {
    FlowSystem sys = build_system(cfg);
    IntegratorConfig ic = build_integrator(cfg);
    const fs::path outdir = cfg.output_dir;
    fs::create_directories(outdir);

    const Vec xi = broadcast_to_d(parse_vector(cfg.sim_xi), sys.d, "simulate.xi");
    Vec eta;
    std::uint64_t mu_seed = 0;
    if (cfg.sim_eta.empty()) {
        mu_seed = derive_seed(cfg.root_seed, "simulate.mu", 0);
        MuSamples s = obtain_mu(cfg, sys, ic, mu_seed, 1, MuMode::Orbit, jobs);
        auto y = s.state(0);
        eta.assign(y.begin(), y.end());
    } else {
        eta = parse_vector(cfg.sim_eta);
        if (eta.size() != sys.ell) throw ConfigError("simulate.eta must have dimension ell");
    }

    const double t0 = wall_now();
    auto [x, y] = integrate_skew(sys, xi, eta, cfg.sim_T, ic);
    write_trajectory_csv(outdir / "x.csv", x, "x");
    write_trajectory_csv(outdir / "y.csv", y, "y");
    write_trajectory_binary(outdir / "x.trj", x);
    write_trajectory_binary(outdir / "y.trj", y);

    RunManifest m;
    m.tool_version = tool_id();
    m.command = "simulate";
    m.config_hash = config_hash(cfg);
    m.root_seed = cfg.root_seed;
    m.wall_seconds = wall_now() - t0;
    if (cfg.sim_eta.empty()) m.seeds.emplace_back("simulate.mu", seed_list_hex({mu_seed}));
    m.config_text = serialize_config(cfg);
    for (const char* f : {"x.csv", "y.csv", "x.trj", "y.trj"}) record_output(m, outdir, f);
    write_manifest_atomic(outdir / "manifest.txt", m);
    std::cout << "simulate: " << x.size() << " points on [0, " << cfg.sim_T
              << "], written to " << outdir.string() << '\n';

    if (check) {
        // determinism contract: an identical rerun must be bit-identical
        auto [x2, y2] = integrate_skew(sys, xi, eta, cfg.sim_T, ic);
        CheckLog log;
        log.check(x2.data == x.data && y2.data == y.data,
                  "rerun reproduces the trajectory bit-identically");
        if (!log.all_ok) return 4;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// estimate sigma
// ---------------------------------------------------------------------------
void write_sigma_csv(const fs::path& path, const CovarianceEstimate& est,
                     const std::string& method) {
    std::ostringstream out;
    out << "method,i,j,sigma,std_err\n";
    for (std::size_t i = 0; i < est.d; ++i)
        for (std::size_t j = 0; j < est.d; ++j)
            out << method << ',' << i << ',' << j << ','
                << format_g17(est.sigma[i * est.d + j]) << ','
                << format_g17(est.std_err[i * est.d + j]) << '\n';
    write_text_atomic(path, out.str());
}

int cmd_estimate_sigma(const RunConfig& cfg, int jobs, bool check) {
    FlowSystem sys = build_system(cfg);
    IntegratorConfig ic = build_integrator(cfg);
    const fs::path outdir = cfg.output_dir;
    fs::create_directories(outdir);
    const double t0 = wall_now();

    const bool do_ens = cfg.sigma_method == "ensemble" || cfg.sigma_method == "both";
    const bool do_gk = cfg.sigma_method == "green_kubo" || cfg.sigma_method == "both";
    const Vec times = parse_vector(cfg.sigma_times);

    RunManifest m;
    m.tool_version = tool_id();
    m.command = "estimate sigma";
    m.config_hash = config_hash(cfg);
    m.root_seed = cfg.root_seed;
    m.config_text = serialize_config(cfg);

    std::ostringstream rep;
    rep << "sigma report (" << tool_id() << ")\n";
    rep << "d: " << sys.d << "\n";

    CovarianceEstimate ens_est, gk_est;
    BrownianDiagnostics diag;
    bool have_diag = false;
    if (do_ens) {
        const std::uint64_t seed = derive_seed(cfg.root_seed, "sigma.mu", 0);
        MuSamples etas = obtain_mu(cfg, sys, ic, seed, cfg.sigma_ensemble,
                                   MuMode::Dispersed, jobs);
        write_mu_samples(outdir / "mu_samples.mus", etas);
        WipEnsemble ens = wip_ensemble_from(sys, cfg.sigma_n, times, etas, ic, jobs);
        std::size_t t1 = times.size();
        for (std::size_t i = 0; i < times.size(); ++i)
            if (std::abs(times[i] - 1.0) < 1e-12) t1 = i;
        if (t1 == times.size())
            throw ConfigError("sigma.times must contain t = 1 (Sigma is read there)");
        Vec col(ens.m * ens.d);
        for (std::size_t i = 0; i < ens.m; ++i)
            for (std::size_t c = 0; c < ens.d; ++c)
                col[i * ens.d + c] = ens.at(i, t1, c);
        ens_est = sigma_from_samples(col, ens.m, ens.d);
        m.seeds.emplace_back("sigma.mu", seed_list_hex({seed}));
        write_sigma_csv(outdir / "sigma_ensemble.csv", ens_est, "ensemble");
        record_output(m, outdir, "mu_samples.mus");
        record_output(m, outdir, "sigma_ensemble.csv");
        rep << "ensemble.n: " << format_g17(cfg.sigma_n) << "\n";
        rep << "ensemble.M: " << ens.m << "\n";
        for (std::size_t i = 0; i < ens.d * ens.d; ++i)
            rep << "ensemble.sigma[" << i << "]: " << format_g17(ens_est.sigma[i])
                << " +- " << format_g17(ens_est.std_err[i]) << "\n";
        rep << "ensemble.clipped_mass: " << format_g17(ens_est.clipped_mass) << "\n";
        const bool has_half = [&] {
            for (double t : times)
                if (std::abs(t - 0.5) < 1e-12) return true;
            return false;
        }();
        if (has_half) {
            diag = brownian_diagnostics(ens);
            have_diag = true;
            for (std::size_t c = 0; c < ens.d; ++c) {
                rep << "wip.mean[" << c << "]: " << format_g17(diag.mean[c]) << " +- "
                    << format_g17(diag.mean_se[c]) << "\n";
                rep << "wip.var_ratio[" << c << "]: " << format_g17(diag.var_ratio[c])
                    << "\n";
                rep << "wip.increment_corr[" << c
                    << "]: " << format_g17(diag.increment_corr[c]) << " (se "
                    << format_g17(diag.corr_se) << ")\n";
                if (!diag.var_two.empty())
                    rep << "wip.var2_over_var1[" << c
                        << "]: " << format_g17(diag.var_two[c] / diag.var_one[c]) << "\n";
            }
        }
    }
    if (do_gk) {
        MuSampler sampler =
            build_sampler(cfg, derive_seed(cfg.root_seed, "sigma.gk", 0));
        gk_est = estimate_sigma_green_kubo(sys, cfg.gk_t_corr, cfg.gk_t_run, sampler,
                                           ic, cfg.gk_stride, jobs);
        write_sigma_csv(outdir / "sigma_green_kubo.csv", gk_est, "green_kubo");
        m.seeds.emplace_back("sigma.gk", seed_list_hex({sampler.seed}));
        record_output(m, outdir, "sigma_green_kubo.csv");
        rep << "green_kubo.t_corr: " << format_g17(cfg.gk_t_corr) << "\n";
        rep << "green_kubo.t_run: " << format_g17(cfg.gk_t_run) << "\n";
        for (std::size_t i = 0; i < gk_est.d * gk_est.d; ++i)
            rep << "green_kubo.sigma[" << i << "]: " << format_g17(gk_est.sigma[i])
                << " +- " << format_g17(gk_est.std_err[i]) << "\n";
        rep << "green_kubo.clipped_mass: " << format_g17(gk_est.clipped_mass) << "\n";
    }
    double rel_frob = 0.0;
    if (do_ens && do_gk) {
        rel_frob = frobenius_distance(ens_est.sigma, gk_est.sigma) /
                   std::max(1e-300, frobenius_norm(gk_est.sigma));
        rep << "cross.rel_frobenius_error: " << format_g17(rel_frob) << "\n";
    }
    write_text_atomic(outdir / "sigma_report.txt", rep.str());
    record_output(m, outdir, "sigma_report.txt");
    m.wall_seconds = wall_now() - t0;
    write_manifest_atomic(outdir / "manifest.txt", m);
    std::cout << "estimate sigma: reports written to " << outdir.string() << '\n';

    if (check) {
        CheckLog log;
        for (const auto* est : {do_ens ? &ens_est : nullptr, do_gk ? &gk_est : nullptr}) {
            if (!est) continue;
            const std::size_t d = est->d;
            bool sym = true;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    sym = sym && est->sigma[i * d + j] == est->sigma[j * d + i];
            log.check(sym, "sigma symmetric exactly");
            SymEigen eig = jacobi_eigensym(est->sigma, d);
            double lmin = eig.eigenvalues[0];
            for (double l : eig.eigenvalues) lmin = std::min(lmin, l);
            log.check(lmin >= -1e-10, "sigma PSD within 1e-10");
        }
        if (do_ens && do_gk)
            log.check(rel_frob <= 0.15,
                      "ensemble vs Green-Kubo within 15% relative Frobenius error");
        if (have_diag) {
            for (std::size_t c = 0; c < ens_est.d; ++c) {
                log.check(std::abs(diag.mean[c]) <= 3.0 * diag.mean_se[c],
                          "mean W_n(1) within 3 standard errors of 0");
                log.check(diag.var_ratio[c] >= 0.4 && diag.var_ratio[c] <= 0.6,
                          "Var W_n(1/2) / Var W_n(1) in [0.4, 0.6]");
                log.check(std::abs(diag.increment_corr[c]) <= 3.0 * diag.corr_se,
                          "increment correlation within 3 standard errors of 0");
                if (!diag.var_two.empty()) {
                    const double r = diag.var_two[c] / diag.var_one[c];
                    log.check(std::abs(r - 2.0) <= 0.3,
                              "Var W_n(2) within 15% of 2 Var W_n(1)");
                }
            }
        }
        if (!log.all_ok) return 4;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// estimate F
// ---------------------------------------------------------------------------
int cmd_estimate_F(const RunConfig& cfg, int jobs, bool check) {
    FlowSystem sys = build_system(cfg);
    IntegratorConfig ic = build_integrator(cfg);
    const fs::path outdir = cfg.output_dir;
    fs::create_directories(outdir);
    const double t0 = wall_now();

    const std::vector<Vec> grid = parse_vector_list(cfg.f_grid);
    std::vector<ErgodicAverage> table(grid.size());
    std::vector<std::uint64_t> seeds(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        seeds[i] = derive_seed(cfg.root_seed, "estimate.F", i);
    run_jobs(grid.size(), jobs, [&](std::size_t i) {
        MuSampler sampler = build_sampler(cfg, seeds[i]);
        MuSamples start = sample_mu(sys, sampler, 1, ic);
        table[i] = estimate_F(sys, grid[i], cfg.f_avg_T, start.state(0), ic,
                              cfg.batches);
    });

    std::ostringstream csv;
    csv << "point";
    for (std::size_t c = 0; c < sys.d; ++c) csv << ",x" << c;
    for (std::size_t c = 0; c < sys.d; ++c) csv << ",F" << c << ",F" << c << "_std_err";
    csv << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i) {
        csv << i;
        for (double v : grid[i]) csv << ',' << format_g17(v);
        for (std::size_t c = 0; c < sys.d; ++c)
            csv << ',' << format_g17(table[i].value[c]) << ','
                << format_g17(table[i].std_err[c]);
        csv << '\n';
    }
    write_text_atomic(outdir / "f_table.csv", csv.str());

    std::ostringstream rep;
    rep << "F report (" << tool_id() << ")\n";
    rep << "averaging_T: " << format_g17(cfg.f_avg_T) << "\n";
    rep << "points: " << grid.size() << "\n";
    rep << "f_sup: " << format_g17(sys.f_sup) << "\n";
    write_text_atomic(outdir / "f_report.txt", rep.str());

    RunManifest m;
    m.tool_version = tool_id();
    m.command = "estimate F";
    m.config_hash = config_hash(cfg);
    m.root_seed = cfg.root_seed;
    m.wall_seconds = wall_now() - t0;
    m.seeds.emplace_back("estimate.F", seed_list_hex(seeds));
    m.config_text = serialize_config(cfg);
    record_output(m, outdir, "f_table.csv");
    record_output(m, outdir, "f_report.txt");
    write_manifest_atomic(outdir / "manifest.txt", m);
    std::cout << "estimate F: table with " << grid.size() << " points written to "
              << outdir.string() << '\n';

    if (check) {
        CheckLog log;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double se = 0.0, norm = 0.0;
            for (std::size_t c = 0; c < sys.d; ++c) {
                norm += table[i].value[c] * table[i].value[c];
                se += table[i].std_err[c] * table[i].std_err[c];
            }
            log.check(std::sqrt(norm) <= sys.f_sup + 3.0 * std::sqrt(se),
                      "|F_hat| <= |f|_inf + 3 std errors");
        }
        // Lipschitz transfer on sampled grid pairs
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            double dx = 0.0, dF = 0.0, se = 0.0;
            for (std::size_t c = 0; c < sys.d; ++c) {
                dx += (grid[i + 1][c] - grid[i][c]) * (grid[i + 1][c] - grid[i][c]);
                dF += (table[i + 1].value[c] - table[i].value[c]) *
                      (table[i + 1].value[c] - table[i].value[c]);
                se += table[i].std_err[c] + table[i + 1].std_err[c];
            }
            log.check(std::sqrt(dF) <= sys.lip_f * std::sqrt(dx) + 6.0 * se,
                      "|F(x) - F(x')| <= L |x - x'| + 6 combined std errors");
        }
        if (!log.all_ok) return 4;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// estimate ldp
// ---------------------------------------------------------------------------
int cmd_estimate_ldp(const RunConfig& cfg, int jobs, bool check) {
    FlowSystem sys = build_system(cfg);
    IntegratorConfig ic = build_integrator(cfg);
    const fs::path outdir = cfg.output_dir;
    fs::create_directories(outdir);
    const double t0 = wall_now();

    const Vec a_grid = parse_vector(cfg.ldp_a_grid);
    const Vec t_grid = parse_vector(cfg.ldp_t_grid);
    const std::vector<Vec> xs = parse_vector_list(cfg.f_grid);

    // F_hat at every x first (precondition of the tail estimate)
    std::vector<Vec> F_at(xs.size());
    std::vector<std::uint64_t> f_seeds(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        f_seeds[i] = derive_seed(cfg.root_seed, "ldp.F", i);
    run_jobs(xs.size(), jobs, [&](std::size_t i) {
        MuSampler sampler = build_sampler(cfg, f_seeds[i]);
        MuSamples start = sample_mu(sys, sampler, 1, ic);
        F_at[i] =
            estimate_F(sys, xs[i], cfg.f_avg_T, start.state(0), ic, cfg.batches).value;
    });

    MuSampler win_sampler =
        build_sampler(cfg, derive_seed(cfg.root_seed, "ldp.windows", 0));
    std::vector<LdpEstimate> estimates = estimate_ldp_multi(
        sys, xs, F_at, a_grid, t_grid, cfg.ldp_windows, win_sampler, ic, cfg.ldp_gap);

    // Prop 2.2 at the configured (a, T); b_hat looked up in the first x row
    std::size_t ai = a_grid.size(), ti = t_grid.size();
    for (std::size_t i = 0; i < a_grid.size(); ++i)
        if (std::abs(a_grid[i] - cfg.p22_a) < 1e-12) ai = i;
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (std::abs(t_grid[i] - cfg.p22_T) < 1e-12) ti = i;
    if (ai == a_grid.size() &&
        std::none_of(a_grid.begin(), a_grid.end(),
                     [&](double a) { return std::abs(a - cfg.p22_a) < 1e-12; }))
        throw ConfigError("ldp.prop22_a must be a member of ldp.a_grid");
    if (ti == t_grid.size())
        throw ConfigError("ldp.prop22_T must be a member of ldp.t_grid");
    const double b_used = estimates[0].at(ti, ai);
    MuSampler p22_s0 = build_sampler(cfg, derive_seed(cfg.root_seed, "ldp.prop22", 0));
    MuSampler p22_s1 = build_sampler(cfg, derive_seed(cfg.root_seed, "ldp.prop22", 1));
    Prop22Result p22_0 = check_prop22(sys, xs[0], F_at[0], cfg.p22_a, cfg.p22_T, 0,
                                      cfg.p22_ensemble, b_used, p22_s0, ic, cfg.ldp_gap);
    Prop22Result p22_n = check_prop22(sys, xs[0], F_at[0], cfg.p22_a, cfg.p22_T,
                                      cfg.p22_shift, cfg.p22_ensemble, b_used, p22_s1,
                                      ic, cfg.ldp_gap);

    std::ostringstream csv;
    csv << "point,T,a,b_hat,binomial_se,n_windows\n";
    for (std::size_t xi_i = 0; xi_i < xs.size(); ++xi_i)
        for (std::size_t t = 0; t < t_grid.size(); ++t)
            for (std::size_t a = 0; a < a_grid.size(); ++a)
                csv << xi_i << ',' << format_g17(t_grid[t]) << ','
                    << format_g17(a_grid[a]) << ','
                    << format_g17(estimates[xi_i].at(t, a)) << ','
                    << format_g17(estimates[xi_i].binomial_se(t, a)) << ','
                    << cfg.ldp_windows << '\n';
    write_text_atomic(outdir / "ldp.csv", csv.str());

    // x-uniformity: spread of b_hat across the x grid at each (a, T)
    double max_spread_sigmas = 0.0;
    for (std::size_t t = 0; t < t_grid.size(); ++t)
        for (std::size_t a = 0; a < a_grid.size(); ++a) {
            double lo = 1.0, hi = 0.0, se2 = 0.0;
            for (const auto& e : estimates) {
                lo = std::min(lo, e.at(t, a));
                hi = std::max(hi, e.at(t, a));
                se2 += e.binomial_se(t, a) * e.binomial_se(t, a);
            }
            const double se = std::sqrt(se2 / static_cast<double>(estimates.size()));
            if (se > 0.0) max_spread_sigmas = std::max(max_spread_sigmas, (hi - lo) / se);
        }

    std::ostringstream rep;
    rep << "ldp report (" << tool_id() << ")\n";
    rep << "n_windows: " << cfg.ldp_windows << "\n";
    rep << "gap: " << format_g17(cfg.ldp_gap) << "\n";
    rep << "x_points: " << xs.size() << "\n";
    rep << "uniformity.max_spread_sigmas: " << format_g17(max_spread_sigmas) << "\n";
    rep << "prop22.a: " << format_g17(cfg.p22_a) << "\n";
    rep << "prop22.T: " << format_g17(cfg.p22_T) << "\n";
    rep << "prop22.b_hat: " << format_g17(b_used) << "\n";
    rep << "prop22.lhs_n0: " << format_g17(p22_0.lhs) << " +- "
        << format_g17(p22_0.lhs_std_err) << "\n";
    rep << "prop22.lhs_n" << cfg.p22_shift << ": " << format_g17(p22_n.lhs) << " +- "
        << format_g17(p22_n.lhs_std_err) << "\n";
    rep << "prop22.rhs: " << format_g17(p22_0.rhs) << "\n";
    rep << "prop22.slack_n0: " << format_g17(p22_0.slack) << "\n";
    write_text_atomic(outdir / "ldp_report.txt", rep.str());

    RunManifest m;
    m.tool_version = tool_id();
    m.command = "estimate ldp";
    m.config_hash = config_hash(cfg);
    m.root_seed = cfg.root_seed;
    m.wall_seconds = wall_now() - t0;
    m.seeds.emplace_back("ldp.F", seed_list_hex(f_seeds));
    m.seeds.emplace_back("ldp.windows", seed_list_hex({win_sampler.seed}));
    m.seeds.emplace_back("ldp.prop22", seed_list_hex({p22_s0.seed, p22_s1.seed}));
    m.config_text = serialize_config(cfg);
    record_output(m, outdir, "ldp.csv");
    record_output(m, outdir, "ldp_report.txt");
    write_manifest_atomic(outdir / "manifest.txt", m);
    std::cout << "estimate ldp: " << xs.size() << " x-points written to "
              << outdir.string() << '\n';

    if (check) {
        CheckLog log;
        bool mono_a = true;
        for (const auto& e : estimates)
            for (std::size_t t = 0; t < t_grid.size(); ++t)
                for (std::size_t a = 1; a < a_grid.size(); ++a)
                    mono_a = mono_a && e.at(t, a) <= e.at(t, a - 1);
        log.check(mono_a, "b_hat nonincreasing in a at fixed T (exact)");
        bool zero_tail = true;
        for (const auto& e : estimates)
            for (std::size_t t = 0; t < t_grid.size(); ++t)
                for (std::size_t a = 0; a < a_grid.size(); ++a)
                    if (a_grid[a] > 2.0 * sys.f_sup)
                        zero_tail = zero_tail && e.at(t, a) == 0.0;
        log.check(zero_tail, "b_hat = 0 for a > 2 |f|_inf");
        if (ai != a_grid.size()) {
            bool mono_T = true;
            for (std::size_t t = 1; t < t_grid.size(); ++t) {
                const double prev = estimates[0].at(t - 1, ai);
                const double cur = estimates[0].at(t, ai);
                const double se = std::sqrt(
                    std::pow(estimates[0].binomial_se(t - 1, ai), 2) +
                    std::pow(estimates[0].binomial_se(t, ai), 2));
                mono_T = mono_T && cur <= prev + 2.0 * se;
            }
            log.check(mono_T, "b_hat(a, .) nonincreasing in T up to 2 binomial SE");
        }
        log.check(p22_0.slack >= -3.0 * p22_0.lhs_std_err,
                  "Prop 2.2 slack >= -3 standard errors (n = 0)");
        log.check(p22_n.slack >= -3.0 * p22_n.lhs_std_err,
                  "Prop 2.2 slack >= -3 standard errors (n = shift)");
        const double comb =
            std::sqrt(p22_0.lhs_std_err * p22_0.lhs_std_err +
                      p22_n.lhs_std_err * p22_n.lhs_std_err);
        log.check(std::abs(p22_0.lhs - p22_n.lhs) <= 3.0 * comb,
                  "window-shift stationarity: n=0 vs n=shift within 3 SE");
        if (!log.all_ok) return 4;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// ladder
// ---------------------------------------------------------------------------
CovarianceEstimate load_sigma_csv(const fs::path& path, std::size_t d) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sigma file " + path.string());
    CovarianceEstimate est;
    est.d = d;
    est.sigma.assign(d * d, 0.0);
    est.std_err.assign(d * d, 0.0);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string method, cell;
        std::getline(ss, method, ',');
        std::getline(ss, cell, ',');
        const std::size_t i = std::strtoull(cell.c_str(), nullptr, 10);
        std::getline(ss, cell, ',');
        const std::size_t j = std::strtoull(cell.c_str(), nullptr, 10);
        std::getline(ss, cell, ',');
        const double v = std::strtod(cell.c_str(), nullptr);
        std::getline(ss, cell, ',');
        const double se = std::strtod(cell.c_str(), nullptr);
        if (i >= d || j >= d) throw ConfigError("sigma file dimension mismatch");
        est.sigma[i * d + j] = v;
        est.std_err[i * d + j] = se;
    }
    est.n_samples = 0;
    return est;
}

int cmd_ladder(const RunConfig& cfg, int jobs, bool check) {
    FlowSystem sys = build_system(cfg);
    IntegratorConfig ic = build_integrator(cfg);
    const fs::path outdir = cfg.output_dir;
    fs::create_directories(outdir);
    const double t0 = wall_now();

    Drift F = build_drift(cfg, sys);

    CovarianceEstimate sigma;
    if (!cfg.ladder_sigma_file.empty()) {
        sigma = load_sigma_csv(cfg.ladder_sigma_file, sys.d);
    } else {
        MuSampler sampler =
            build_sampler(cfg, derive_seed(cfg.root_seed, "ladder.sigma", 0));
        sigma = estimate_sigma_ensemble(sys, cfg.sigma_n, cfg.sigma_ensemble, sampler,
                                        ic, jobs);
    }

    LadderConfig lad;
    lad.eps_ladder = parse_vector(cfg.ladder_eps);
    lad.ensemble = cfg.ladder_ensemble;
    lad.T = cfg.ladder_T;
    lad.eval_times = parse_vector(cfg.ladder_eval_times);
    lad.delta_exponent = cfg.ladder_delta_exponent;
    lad.oracle_trajectories = cfg.ladder_oracle;
    lad.sde_ensemble = cfg.sde_ensemble;
    lad.sde_h = cfg.sde_h;
    lad.xi = broadcast_to_d(parse_vector(cfg.ladder_xi), sys.d, "ladder.xi");

    MuSampler sampler_proto = build_sampler(cfg, 0);
    LadderReport rep =
        run_ladder(sys, lad, F, sigma, sampler_proto, ic, cfg.root_seed, jobs);

    // CSV: one row per (eps, statistic grouping)
    std::ostringstream csv;
    csv << "eps,delta_used,mean_sup_Z,mean_sup_I0,mean_sup_I1,mean_sup_I2,"
           "bound_I0,bound_I1,min_margin_I0,min_margin_I1,max_telescope,"
           "max_oracle_residual";
    for (double t : lad.eval_times)
        for (std::size_t c = 0; c < sys.d; ++c)
            csv << ",ks_t" << format_g17(t) << "_c" << c;
    for (double t : lad.eval_times) csv << ",energy_t" << format_g17(t);
    for (std::size_t c = 0; c < sys.d; ++c) csv << ",mean_xT_c" << c << ",var_xT_c" << c;
    csv << '\n';
    for (const auto& r : rep.rungs) {
        csv << format_g17(r.eps) << ',' << format_g17(r.delta_used) << ','
            << format_g17(r.mean_sup_Z) << ',' << format_g17(r.mean_sup_I0) << ','
            << format_g17(r.mean_sup_I1) << ',' << format_g17(r.mean_sup_I2) << ','
            << format_g17(r.bound_I0) << ',' << format_g17(r.bound_I1) << ','
            << format_g17(r.min_margin_I0) << ',' << format_g17(r.min_margin_I1) << ','
            << format_g17(r.max_telescope_residual) << ','
            << format_g17(r.max_oracle_residual);
        for (const auto& marg : r.marginals)
            for (double ks : marg.ks) csv << ',' << format_g17(ks);
        for (const auto& marg : r.marginals) csv << ',' << format_g17(marg.energy);
        for (std::size_t c = 0; c < sys.d; ++c)
            csv << ',' << format_g17(r.mean_xT[c]) << ',' << format_g17(r.var_xT[c]);
        csv << '\n';
    }
    write_text_atomic(outdir / "ladder.csv", csv.str());

    std::ostringstream txt;
    txt << "ladder report (" << tool_id() << ")\n";
    txt << "root_seed: " << cfg.root_seed << "\n";
    txt << "noise_floor: " << format_g17(rep.noise_floor) << "\n";
    for (std::size_t i = 0; i < sigma.sigma.size(); ++i)
        txt << "sigma[" << i << "]: " << format_g17(sigma.sigma[i]) << "\n";
    for (std::size_t c = 0; c < sys.d; ++c)
        txt << "sde.mean_T[" << c << "]: " << format_g17(rep.sde_mean_T[c])
            << "  sde.var_T[" << c << "]: " << format_g17(rep.sde_var_T[c]) << "\n";
    for (const auto& r : rep.rungs) {
        txt << "rung eps=" << format_g17(r.eps) << " delta=" << format_g17(r.delta_used)
            << " mean_sup_Z=" << format_g17(r.mean_sup_Z)
            << " oracle=" << format_g17(r.max_oracle_residual) << "\n";
        for (const auto& marg : r.marginals) {
            txt << "  t=" << format_g17(marg.t) << " ks=";
            for (std::size_t c = 0; c < marg.ks.size(); ++c)
                txt << (c ? "," : "") << format_g17(marg.ks[c]);
            txt << " energy=" << format_g17(marg.energy) << "\n";
        }
    }
    write_text_atomic(outdir / "ladder_report.txt", txt.str());

    RunManifest m;
    m.tool_version = tool_id();
    m.command = "ladder";
    m.config_hash = config_hash(cfg);
    m.root_seed = cfg.root_seed;
    m.wall_seconds = wall_now() - t0;
    {
        std::vector<std::uint64_t> mu_seeds;
        for (std::size_t r = 0; r < rep.rungs.size(); ++r)
            mu_seeds.push_back(derive_seed(cfg.root_seed, "ladder.mu", r));
        m.seeds.emplace_back("ladder.mu", seed_list_hex(mu_seeds));
        std::vector<std::uint64_t> sde_seeds;
        for (std::size_t j = 0; j < lad.sde_ensemble; ++j)
            sde_seeds.push_back(derive_seed(cfg.root_seed, "ladder.sde", j));
        m.seeds.emplace_back("ladder.sde", seed_list_hex(sde_seeds));
    }
    m.config_text = serialize_config(cfg);
    record_output(m, outdir, "ladder.csv");
    record_output(m, outdir, "ladder_report.txt");

    if (cfg.ladder_dump) {
        for (const auto& r : rep.rungs) {
            std::ostringstream dump;
            dump << "trajectory,sup_Z,sup_I0,sup_I1,sup_I2";
            for (double t : lad.eval_times)
                for (std::size_t c = 0; c < sys.d; ++c)
                    dump << ",x_t" << format_g17(t) << "_c" << c;
            dump << '\n';
            for (std::size_t j = 0; j < lad.ensemble; ++j) {
                dump << j << ',' << format_g17(r.sup_Z[j]) << ','
                     << format_g17(r.sup_I0[j]) << ',' << format_g17(r.sup_I1[j]) << ','
                     << format_g17(r.sup_I2[j]);
                for (std::size_t ti = 0; ti < lad.eval_times.size(); ++ti)
                    for (std::size_t c = 0; c < sys.d; ++c)
                        dump << ','
                             << format_g17(r.samples[(ti * lad.ensemble + j) * sys.d + c]);
                dump << '\n';
            }
            const std::string name = "rung_eps" + format_g17(r.eps) + ".csv";
            write_text_atomic(outdir / name, dump.str());
            record_output(m, outdir, name);
        }
    }
    write_manifest_atomic(outdir / "manifest.txt", m);
    std::cout << "ladder: " << rep.rungs.size() << " rungs written to "
              << outdir.string() << '\n';

    if (check) {
        CheckLog log;
        for (const auto& r : rep.rungs) {
            log.check(r.min_margin_I0 >= -1e-6,
                      "sup |I0| <= 2 |f|_inf delta + 1e-6 on every trajectory");
            log.check(r.min_margin_I1 >= -1e-6,
                      "sup |I1| <= 2 L (|f0|+|f|) T delta / eps + 1e-6");
            log.check(r.max_telescope_residual <= 1e-8,
                      "Z reassembles from I0 + I1 + I2 to 1e-8");
            log.check(r.max_oracle_residual <= 1e-4,
                      "x = G(W + Z) pathwise to 1e-4");
        }
        for (std::size_t r = 1; r < rep.rungs.size(); ++r)
            log.check(rep.rungs[r].mean_sup_Z < rep.rungs[r - 1].mean_sup_Z,
                      "mean sup |Z| strictly decreasing along the ladder");
        for (std::size_t ti = 0; ti < lad.eval_times.size(); ++ti)
            for (std::size_t c = 0; c < sys.d; ++c)
                for (std::size_t r = 1; r < rep.rungs.size(); ++r) {
                    const double prev = rep.rungs[r - 1].marginals[ti].ks[c];
                    const double cur = rep.rungs[r].marginals[ti].ks[c];
                    log.check(cur <= std::max(prev, rep.noise_floor),
                              "KS nonincreasing along the ladder up to the noise floor");
                }
        if (!log.all_ok) return 4;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------
int run_command(const std::string& command, const RunConfig& cfg, int jobs, bool check);

int cmd_replay(const fs::path& manifest_path) {
    RunManifest m = read_manifest(manifest_path);
    RunConfig cfg = parse_config(m.config_text);
    if (config_hash(cfg) != m.config_hash)
        throw ConfigError("manifest config hash does not match its embedded config");

    const fs::path replay_dir =
        manifest_path.parent_path() / ("replay_" + std::to_string(m.config_hash % 100000));
    fs::remove_all(replay_dir);
    cfg.output_dir = replay_dir.string();

    const int rc = run_command(m.command, cfg, static_cast<int>(cfg.jobs), false);
    if (rc != 0) return rc;

    bool all_match = true;
    for (const auto& rec : m.outputs) {
        const fs::path f = replay_dir / rec.relpath;
        bool ok = fs::exists(f) &&
                  static_cast<std::uint64_t>(fs::file_size(f)) == rec.bytes &&
                  hash_file(f) == rec.fnv64;
        std::cout << (ok ? "[match]    " : "[MISMATCH] ") << rec.relpath << '\n';
        all_match = all_match && ok;
    }
    if (!all_match) {
        std::cerr << "replay: outputs differ from the manifest inventory\n";
        return 3;
    }
    std::cout << "replay: all " << m.outputs.size() << " outputs bit-identical\n";
    return 0;
}

int run_command(const std::string& command, const RunConfig& cfg, int jobs, bool check) {
    if (command == "simulate") return cmd_simulate(cfg, jobs, check);
    if (command == "estimate sigma") return cmd_estimate_sigma(cfg, jobs, check);
    if (command == "estimate F") return cmd_estimate_F(cfg, jobs, check);
    if (command == "estimate ldp") return cmd_estimate_ldp(cfg, jobs, check);
    if (command == "ladder") return cmd_ladder(cfg, jobs, check);
    throw ConfigError("unknown command in manifest: '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slow-fast skew-product flow laboratory: simulation, limit-law "
                 "estimation, and diffusion-limit verification"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    int jobs = 0;
    bool check = false;
    app.add_option("--config", config_path, "config file (key = value lines)");
    app.add_option("--set", overrides, "override a config key, e.g. --set system.eps=0.25");
    app.add_option("--jobs", jobs, "worker count (0 = machine parallelism)");
    app.add_flag("--check", check, "run built-in invariant checks; exit 4 on failure");

    auto* sim = app.add_subcommand("simulate", "one skew-product run, persisted");
    auto* est = app.add_subcommand("estimate", "estimate sigma | F | ldp");
    std::string target;
    est->add_option("target", target, "sigma | F | ldp")->required();
    auto* lad = app.add_subcommand("ladder", "eps-ladder diffusion-limit harness");
    auto* rep = app.add_subcommand("replay", "re-run a manifest and verify outputs");
    std::string manifest_path;
    rep->add_option("manifest", manifest_path, "path to manifest.txt")->required();
    for (auto* sub : {sim, est, lad, rep}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config_file(config_path);
        for (const auto& kv : overrides) apply_override(cfg, kv);
        if (jobs > 0) cfg.jobs = static_cast<std::uint64_t>(jobs);
        validate_config(cfg);
        const int eff_jobs = static_cast<int>(cfg.jobs);

        if (sim->parsed()) return cmd_simulate(cfg, eff_jobs, check);
        if (est->parsed()) {
            if (target == "sigma") return cmd_estimate_sigma(cfg, eff_jobs, check);
            if (target == "F") return cmd_estimate_F(cfg, eff_jobs, check);
            if (target == "ldp") return cmd_estimate_ldp(cfg, eff_jobs, check);
            throw ConfigError("estimate target must be sigma, F, or ldp");
        }
        if (lad->parsed()) return cmd_ladder(cfg, eff_jobs, check);
        if (rep->parsed()) return cmd_replay(manifest_path);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
