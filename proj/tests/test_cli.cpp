// Integration tests that exercise the installed CLI binary end to end.
// The binary path arrives as argv[1] (wired up by ctest).
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "skewflow/io.hpp"
#include "skewflow/manifest.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "skewflow_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// fast settings shared by the CLI runs below
std::string fast_flags(const std::string& outdir) {
    return "--set run.output_dir=" + outdir +
           " --set simulate.T=0.05"
           " --set system.eps=0.5";
}

}  // namespace

TEST_CASE("help exits cleanly; bad input maps to exit code 2") {
    CHECK(run("--help") == 0);
    CHECK(run("simulate --set nonsense.key=1 --set run.output_dir=" +
              (work_dir() / "junk").string()) == 2);
    CHECK(run("estimate nothing --set run.output_dir=" +
              (work_dir() / "junk2").string()) == 2);
    CHECK(run("") == 2);
}

TEST_CASE("simulate writes trajectories, manifest, and is deterministic") {
    const fs::path out_a = work_dir() / "sim_a";
    const fs::path out_b = work_dir() / "sim_b";
    REQUIRE(run("simulate " + fast_flags(out_a.string())) == 0);
    REQUIRE(run("simulate " + fast_flags(out_b.string())) == 0);

    for (const char* f : {"x.csv", "y.csv", "x.trj", "y.trj", "manifest.txt"}) {
        CHECK(fs::exists(out_a / f));
    }
    CHECK(slurp(out_a / "x.csv") == slurp(out_b / "x.csv"));
    CHECK(skewflow::hash_file(out_a / "y.trj") == skewflow::hash_file(out_b / "y.trj"));

    skewflow::RunManifest m = skewflow::read_manifest(out_a / "manifest.txt");
    CHECK(m.command == "simulate");
    CHECK(m.outputs.size() == 4);
}

TEST_CASE("simulate with zero couplings keeps the slow state frozen") {
    const fs::path out = work_dir() / "sim_zero";
    REQUIRE(run("simulate " + fast_flags(out.string()) +
                " --set system.f0=zero --set system.f=zero"
                " --set simulate.xi=2.75") == 0);
    std::ifstream in(out / "x.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "time,x0");
    while (std::getline(in, line))
        CHECK(line.substr(line.find(',') + 1) == "2.75");
}

TEST_CASE("numerical failures exit with code 3") {
    const fs::path out = work_dir() / "sim_blow";
    CHECK(run("simulate " + fast_flags(out.string()) +
              " --set system.trap_radius=0.5") == 3);
    CHECK_FALSE(fs::exists(out / "manifest.txt"));  // no partial manifest
}

TEST_CASE("estimate F reproduces a y-independent coupling exactly") {
    const fs::path out = work_dir() / "est_f";
    REQUIRE(run("estimate F --check --set run.output_dir=" + out.string() +
                " --set system.f_kappa=0 --set measure.f_avg_T=20"
                " --set 'measure.f_grid=-1;0;1'") == 0);
    std::ifstream in(out / "f_table.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "point,x0,F0,F0_std_err");
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        std::getline(ss, cell, ',');
        const double x = std::strtod(cell.c_str(), nullptr);
        std::getline(ss, cell, ',');
        const double F = std::strtod(cell.c_str(), nullptr);
        CHECK(F == doctest::Approx(-std::tanh(x)).epsilon(1e-12));
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("replay reruns a manifest and verifies outputs bit-identically") {
    const fs::path out = work_dir() / "sim_replay";
    REQUIRE(run("simulate " + fast_flags(out.string())) == 0);
    CHECK(run("replay " + (out / "manifest.txt").string()) == 0);

    // corrupt the inventory: replay must now fail with exit 3
    skewflow::RunManifest m = skewflow::read_manifest(out / "manifest.txt");
    m.outputs[0].fnv64 ^= 0x1;
    skewflow::write_manifest_atomic(out / "manifest.txt", m);
    CHECK(run("replay " + (out / "manifest.txt").string()) == 3);
}

TEST_CASE("estimate sigma: zero fluctuation field gives the zero matrix") {
    const fs::path out = work_dir() / "est_sigma_zero";
    REQUIRE(run("estimate sigma --set run.output_dir=" + out.string() +
                " --set system.f0=zero --set sigma.ensemble=40 --set sigma.n=5"
                " --set sigma.gk_t_run=2000 --set sigma.gk_t_corr=10") == 0);
    const std::string ens = slurp(out / "sigma_ensemble.csv");
    CHECK(ens.find("ensemble,0,0,0,0") != std::string::npos);
    const std::string gk = slurp(out / "sigma_green_kubo.csv");
    CHECK(gk.find("green_kubo,0,0,0,0") != std::string::npos);
    CHECK(fs::exists(out / "mu_samples.mus"));
    CHECK(fs::exists(out / "sigma_report.txt"));
}

TEST_CASE("estimate ldp: monotone tail table and prop 2.2 block") {
    const fs::path out = work_dir() / "est_ldp";
    REQUIRE(run("estimate ldp --check --set run.output_dir=" + out.string() +
                " --set 'measure.f_grid=-1;0;1' --set measure.f_avg_T=20"
                " --set ldp.a_grid=0.1,0.5,3.1 --set ldp.t_grid=5,10"
                " --set ldp.n_windows=100 --set ldp.gap=2"
                " --set ldp.prop22_a=0.1 --set ldp.prop22_T=10"
                " --set ldp.prop22_ensemble=60") == 0);
    const std::string rep = slurp(out / "ldp_report.txt");
    CHECK(rep.find("prop22.slack_n0:") != std::string::npos);
    // b_hat monotone in a within each (point, T) row group
    std::ifstream in(out / "ldp.csv");
    std::string line;
    std::getline(in, line);
    double prev_b = 1.0;
    std::string prev_key;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string point, T, a, b;
        std::getline(ss, point, ',');
        std::getline(ss, T, ',');
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        const std::string key = point + "/" + T;
        const double bv = std::strtod(b.c_str(), nullptr);
        if (key == prev_key) CHECK(bv <= prev_b);
        prev_key = key;
        prev_b = bv;
    }
}

TEST_CASE("ladder: outputs, dumps, replay, and a failing --check exits 4") {
    const fs::path out = work_dir() / "ladder_small";
    const std::string small =
        " --set ladder.eps=0.5,0.25 --set ladder.ensemble=60"
        " --set ladder.sde_ensemble=60 --set ladder.oracle_trajectories=6"
        " --set ladder.T=0.5 --set ladder.eval_times=0.25,0.5"
        " --set sigma.ensemble=40 --set sigma.n=20"
        " --set measure.calibration_T=50"
        " --set ladder.dump_trajectories=true";
    REQUIRE(run("ladder --set run.output_dir=" + out.string() + small) == 0);
    CHECK(fs::exists(out / "ladder.csv"));
    CHECK(fs::exists(out / "ladder_report.txt"));
    CHECK(fs::exists(out / "rung_eps0.5.csv"));
    CHECK(fs::exists(out / "rung_eps0.25.csv"));

    // replay the full ladder run bit-identically
    CHECK(run("replay " + (out / "manifest.txt").string()) == 0);

    // a declared Lipschitz constant far below the truth must trip the
    // built-in F checks: exit code 4
    const fs::path out4 = work_dir() / "est_f_bad";
    CHECK(run("estimate F --check --set run.output_dir=" + out4.string() +
              " --set system.f_kappa=0 --set measure.f_avg_T=20"
              " --set 'measure.f_grid=-2;2' --set system.lip_f=0.01") == 4);
}

TEST_CASE("config file plus --set overrides") {
    const fs::path cfg_path = work_dir() / "run.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "simulate.T = 0.05\n";
        cfg << "system.eps = 0.5\n";
        cfg << "run.output_dir = " << (work_dir() / "cfg_a").string() << "\n";
    }
    REQUIRE(run("simulate --config " + cfg_path.string()) == 0);
    CHECK(fs::exists(work_dir() / "cfg_a" / "x.csv"));

    REQUIRE(run("simulate --config " + cfg_path.string() + " --set run.output_dir=" +
                (work_dir() / "cfg_b").string()) == 0);
    CHECK(fs::exists(work_dir() / "cfg_b" / "x.csv"));
}

int main(int argc, char** argv) {
    if (argc > 1) g_cli = argv[1];
    if (g_cli.empty()) {
        std::fprintf(stderr, "usage: test_cli <path-to-skewflow-binary>\n");
        return 1;
    }
    doctest::Context ctx;
    return ctx.run();
}
