#include "skewflow/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "skewflow/io.hpp"
#include "skewflow/rng.hpp"

namespace skewflow {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("bad numeric value: '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("bad integer value: '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("bad boolean value: '" + s + "'");
}

struct KeyDef {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define KEY_U64(name, field)                                              \
    KeyDef{name, [](const RunConfig& c) { return std::to_string(c.field); }, \
           [](RunConfig& c, const std::string& v) { c.field = to_u64(v); }}
#define KEY_DBL(name, field)                                           \
    KeyDef{name, [](const RunConfig& c) { return format_g17(c.field); }, \
           [](RunConfig& c, const std::string& v) { c.field = to_double(v); }}
#define KEY_STR(name, field)                                 \
    KeyDef{name, [](const RunConfig& c) { return c.field; }, \
           [](RunConfig& c, const std::string& v) { c.field = v; }}
#define KEY_BOOL(name, field)                                                  \
    KeyDef{name, [](const RunConfig& c) { return c.field ? "true" : "false"; }, \
           [](RunConfig& c, const std::string& v) { c.field = to_bool(v); }}

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = {
        KEY_U64("schema_version", schema_version),
        KEY_U64("run.root_seed", root_seed),
        KEY_STR("run.output_dir", output_dir),
        KEY_U64("run.jobs", jobs),
        KEY_STR("system.fast_flow", fast_flow),
        KEY_U64("system.d", d),
        KEY_DBL("system.eps", eps),
        KEY_STR("system.f0", f0_name),
        KEY_STR("system.f", f_name),
        KEY_DBL("system.f_c", f_c),
        KEY_DBL("system.f_kappa", f_kappa),
        KEY_DBL("system.lorenz_sigma", lorenz_sigma),
        KEY_DBL("system.lorenz_rho", lorenz_rho),
        KEY_DBL("system.lorenz_beta", lorenz_beta),
        KEY_DBL("system.trap_radius", trap_radius),
        KEY_DBL("system.f_sup", f_sup),
        KEY_DBL("system.f0_sup", f0_sup),
        KEY_DBL("system.lip_f", lip_f),
        KEY_DBL("integrator.h_tau", h_tau),
        KEY_U64("integrator.record_stride", record_stride),
        KEY_DBL("sampler.burn_in", burn_in),
        KEY_DBL("sampler.spacing", spacing),
        KEY_DBL("sampler.seed_ball_radius", seed_ball_radius),
        KEY_STR("sampler.mu_file", mu_file),
        KEY_U64("measure.batches", batches),
        KEY_DBL("measure.f_avg_T", f_avg_T),
        KEY_DBL("measure.calibration_T", calibration_T),
        KEY_STR("measure.f_grid", f_grid),
        KEY_DBL("simulate.T", sim_T),
        KEY_STR("simulate.xi", sim_xi),
        KEY_STR("simulate.eta", sim_eta),
        KEY_STR("sigma.method", sigma_method),
        KEY_DBL("sigma.n", sigma_n),
        KEY_U64("sigma.ensemble", sigma_ensemble),
        KEY_STR("sigma.times", sigma_times),
        KEY_DBL("sigma.gk_t_corr", gk_t_corr),
        KEY_DBL("sigma.gk_t_run", gk_t_run),
        KEY_U64("sigma.gk_stride", gk_stride),
        KEY_STR("ldp.a_grid", ldp_a_grid),
        KEY_STR("ldp.t_grid", ldp_t_grid),
        KEY_U64("ldp.n_windows", ldp_windows),
        KEY_DBL("ldp.gap", ldp_gap),
        KEY_DBL("ldp.prop22_a", p22_a),
        KEY_DBL("ldp.prop22_T", p22_T),
        KEY_U64("ldp.prop22_shift", p22_shift),
        KEY_U64("ldp.prop22_ensemble", p22_ensemble),
        KEY_STR("ladder.eps", ladder_eps),
        KEY_U64("ladder.ensemble", ladder_ensemble),
        KEY_DBL("ladder.T", ladder_T),
        KEY_STR("ladder.eval_times", ladder_eval_times),
        KEY_DBL("ladder.delta_exponent", ladder_delta_exponent),
        KEY_U64("ladder.oracle_trajectories", ladder_oracle),
        KEY_U64("ladder.sde_ensemble", sde_ensemble),
        KEY_DBL("ladder.sde_h", sde_h),
        KEY_STR("ladder.xi", ladder_xi),
        KEY_BOOL("ladder.dump_trajectories", ladder_dump),
        KEY_STR("ladder.sigma_file", ladder_sigma_file),
    };
    return table;
}

#undef KEY_U64
#undef KEY_DBL
#undef KEY_STR
#undef KEY_BOOL

const KeyDef& find_key(const std::string& key) {
    for (const auto& def : key_table())
        if (key == def.key) return def;
    throw ConfigError("unknown config key: '" + key + "'");
}

}  // namespace

Vec parse_vector(const std::string& csv) {
    Vec out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(item));
    }
    if (out.empty()) throw ConfigError("empty vector literal: '" + csv + "'");
    return out;
}

std::vector<Vec> parse_vector_list(const std::string& s) {
    std::vector<Vec> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_vector(item));
    }
    if (out.empty()) throw ConfigError("empty vector list: '" + s + "'");
    return out;
}

std::string format_vector(const Vec& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_g17(v[i]);
    }
    return out;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        find_key(key).set(cfg, value);
    }
    if (cfg.schema_version != 1)
        throw ConfigError("unsupported schema_version " +
                          std::to_string(cfg.schema_version));
    return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& def : key_table()) {
        out += def.key;
        out += " = ";
        out += def.get(cfg);
        out += '\n';
    }
    return out;
}

void apply_override(RunConfig& cfg, const std::string& keyval) {
    const auto eq = keyval.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like key=value: '" + keyval + "'");
    const std::string key = trim(keyval.substr(0, eq));
    const std::string value = trim(keyval.substr(eq + 1));
    find_key(key).set(cfg, value);
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string canon = serialize_config(cfg);
    return fnv1a64(canon.data(), canon.size());
}

FlowSystem build_system(const RunConfig& cfg) {
    if (cfg.fast_flow != "lorenz")
        throw ConfigError("unknown fast flow '" + cfg.fast_flow + "'");
    LorenzParams lp;
    lp.sigma = cfg.lorenz_sigma;
    lp.rho = cfg.lorenz_rho;
    lp.beta = cfg.lorenz_beta;
    lp.trap_radius = cfg.trap_radius;

    BenchmarkCoupling bc;
    bc.c = cfg.f_c;
    bc.kappa = cfg.f_kappa;
    FlowSystem sys = make_lorenz_benchmark_system(cfg.d, lp, bc, cfg.eps);

    if (cfg.f0_name == "zero") {
        sys.f0 = zero_field(cfg.d);
        sys.f0_sup = 0.0;
    } else if (cfg.f0_name != "default") {
        throw ConfigError("unknown f0 '" + cfg.f0_name + "'");
    }
    if (cfg.f_name == "zero") {
        sys.f = zero_coupling(cfg.d);
        sys.f_sup = 0.0;
        sys.lip_f = 0.0;
    } else if (cfg.f_name != "benchmark") {
        throw ConfigError("unknown coupling '" + cfg.f_name + "'");
    }
    if (cfg.f_sup > 0.0) sys.f_sup = cfg.f_sup;
    if (cfg.f0_sup > 0.0) sys.f0_sup = cfg.f0_sup;
    if (cfg.lip_f > 0.0) sys.lip_f = cfg.lip_f;
    sys.validate();
    return sys;
}

IntegratorConfig build_integrator(const RunConfig& cfg) {
    IntegratorConfig ic;
    ic.h_tau = cfg.h_tau;
    ic.record_stride = cfg.record_stride;
    ic.validate();
    return ic;
}

MuSampler build_sampler(const RunConfig& cfg, std::uint64_t seed) {
    MuSampler s;
    s.burn_in = cfg.burn_in;
    s.spacing = cfg.spacing;
    s.seed_ball_radius = cfg.seed_ball_radius;
    s.seed = seed;
    s.validate();
    return s;
}

Drift build_drift(const RunConfig& cfg, const FlowSystem& sys) {
    if (cfg.f_name == "zero") return make_zero_drift(sys.d);
    // benchmark coupling: closed form up to the sin-term mean
    if (cfg.f_name == "benchmark") {
        double sin_mean = 0.0;
        if (cfg.f_kappa > 0.0) {
            MuSampler sampler =
                build_sampler(cfg, derive_seed(cfg.root_seed, "drift.calibration", 0));
            IntegratorConfig ic = build_integrator(cfg);
            MuSamples start = sample_mu(sys, sampler, 1, ic);
            Observable obs = [](std::span<const double> y, std::span<double> out) {
                out[0] = std::sin(y[0] / 10.0);
            };
            ErgodicAverage avg =
                ergodic_average(sys, obs, 1, cfg.calibration_T, start.state(0), ic,
                                cfg.batches);
            sin_mean = avg.value[0];
        }
        return make_benchmark_drift(sys.d, cfg.f_c, cfg.f_kappa, sin_mean);
    }
    throw ConfigError("no drift builder for coupling '" + cfg.f_name + "'");
}

void validate_config(const RunConfig& cfg) {
    FlowSystem sys = build_system(cfg);  // validates registry names and bounds
    build_integrator(cfg);
    build_sampler(cfg, 0).validate();
    if (cfg.d != 1 && cfg.d != 2 && cfg.f0_name == "default")
        throw ConfigError("default f0 supports d in {1,2}");
    if (cfg.batches < 2) throw ConfigError("measure.batches must be >= 2");
    for (const auto& x : parse_vector_list(cfg.f_grid))
        if (x.size() != sys.d) throw ConfigError("measure.f_grid entries must have dimension d");
    parse_vector(cfg.sigma_times);
    if (cfg.sigma_method != "ensemble" && cfg.sigma_method != "green_kubo" &&
        cfg.sigma_method != "both")
        throw ConfigError("sigma.method must be ensemble | green_kubo | both");
    if (!(cfg.sigma_n > 0.0)) throw ConfigError("sigma.n must be positive");
    if (cfg.sigma_ensemble < 30) throw ConfigError("sigma.ensemble must be >= 30");
    if (!(cfg.gk_t_corr < cfg.gk_t_run / 10.0))
        throw ConfigError("sigma.gk_t_corr must be < gk_t_run / 10");
    {
        const Vec a = parse_vector(cfg.ldp_a_grid);
        for (double v : a)
            if (!(v > 0.0)) throw ConfigError("ldp.a_grid entries must be positive");
        const Vec t = parse_vector(cfg.ldp_t_grid);
        for (double v : t)
            if (!(v > 0.0)) throw ConfigError("ldp.t_grid entries must be positive");
    }
    if (cfg.ldp_windows < 100) throw ConfigError("ldp.n_windows must be >= 100");
    if (cfg.p22_ensemble < 30) throw ConfigError("ldp.prop22_ensemble must be >= 30");
    {
        const Vec eps = parse_vector(cfg.ladder_eps);
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (!(eps[i] > 0.0) || eps[i] > 1.0)
                throw ConfigError("ladder.eps must lie in (0,1]");
            if (i > 0 && !(eps[i] < eps[i - 1]))
                throw ConfigError("ladder.eps must be strictly decreasing");
        }
        const Vec times = parse_vector(cfg.ladder_eval_times);
        for (double t : times)
            if (!(t > 0.0) || t > cfg.ladder_T + 1e-12)
                throw ConfigError("ladder.eval_times must lie in (0, T]");
        const Vec xi = parse_vector(cfg.ladder_xi);
        if (xi.size() != sys.d && xi.size() != 1)
            throw ConfigError("ladder.xi must have dimension d (or be scalar)");
    }
    if (!(cfg.ladder_delta_exponent > 1.0) || cfg.ladder_delta_exponent >= 2.0)
        throw ConfigError("ladder.delta_exponent must lie in (1,2)");
    if (!(cfg.sde_h > 0.0)) throw ConfigError("ladder.sde_h must be positive");
    if (!(cfg.sim_T > 0.0)) throw ConfigError("simulate.T must be positive");
    if (!(cfg.eps > 0.0) || cfg.eps > 1.0) throw ConfigError("system.eps must lie in (0,1]");
}

}  // namespace skewflow
