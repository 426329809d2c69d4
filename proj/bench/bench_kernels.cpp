// Compares the OpenMP kernels against their serial reference implementations:
// wall time, speedup, and bitwise agreement. Run manually:
//   ./build/bench/bench_kernels [jobs]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "skewflow/convergence.hpp"
#include "skewflow/limit_laws.hpp"
#include "skewflow/parallel.hpp"
#include "skewflow/rng.hpp"
#include "skewflow/stats.hpp"

using namespace skewflow;

namespace {

double now() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

struct Row {
    const char* name;
    double serial_s;
    double parallel_s;
    bool identical;
};

void print_row(const Row& r) {
    std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx   %s\n",
                r.name, r.serial_s, r.parallel_s, r.serial_s / r.parallel_s,
                r.identical ? "bitwise identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const int jobs = argc > 1 ? std::atoi(argv[1]) : 0;
    std::printf("jobs: %d (0 = machine parallelism = %d)\n\n", jobs, hardware_jobs());

    // --- lagged autocovariance -------------------------------------------
    {
        const std::size_t n = 400000, k = 2, lags = 800;
        Vec series(n * k);
        Rng rng(7);
        for (auto& v : series) v = rng.gauss();
        Vec out_s((lags + 1) * k * k), out_p((lags + 1) * k * k);
        double t0 = now();
        autocovariance_serial(series, n, k, lags, out_s);
        double t1 = now();
        autocovariance(series, n, k, lags, out_p, jobs);
        double t2 = now();
        print_row({"autocovariance", t1 - t0, t2 - t1, out_s == out_p});
    }

    // --- energy distance ---------------------------------------------------
    {
        const std::size_t n = 4000, m = 4000, dim = 2;
        Vec a(n * dim), b(m * dim);
        Rng rng(11);
        for (auto& v : a) v = rng.gauss();
        for (auto& v : b) v = rng.gauss() + 0.1;
        double t0 = now();
        const double es = energy_distance_serial(a, n, b, m, dim);
        double t1 = now();
        const double ep = energy_distance(a, n, b, m, dim, jobs);
        double t2 = now();
        print_row({"energy distance", t1 - t0, t2 - t1, es == ep});
    }

    // --- WIP ensemble (trajectory jobs) ------------------------------------
    {
        FlowSystem sys = make_lorenz_benchmark_system(1, LorenzParams{},
                                                      BenchmarkCoupling{}, 1.0);
        IntegratorConfig cfg;
        MuSampler sampler;
        sampler.seed = derive_seed(1, "bench.wip", 0);
        double t0 = now();
        WipEnsemble es = wip_ensemble(sys, 100.0, 200, Vec{1.0}, sampler, cfg, 1);
        double t1 = now();
        WipEnsemble ep = wip_ensemble(sys, 100.0, 200, Vec{1.0}, sampler, cfg, jobs);
        double t2 = now();
        print_row({"wip ensemble (200 paths)", t1 - t0, t2 - t1,
                   es.values == ep.values});
    }

    // --- skew-product ladder rung -------------------------------------------
    {
        FlowSystem sys = make_lorenz_benchmark_system(1, LorenzParams{},
                                                      BenchmarkCoupling{}, 0.25);
        IntegratorConfig cfg;
        Drift F = make_benchmark_drift(1, 1.0, 0.5, 0.0);
        MuSampler sampler;
        sampler.seed = derive_seed(1, "bench.rung", 0);
        sampler.mode = MuMode::Dispersed;
        MuSamples etas = sample_mu_parallel(sys, sampler, 200, cfg, jobs);
        const Vec xi{0.0};
        Vec out_s(200, 0.0), out_p(200, 0.0);
        auto rung = [&](Vec& out, int j) {
            run_jobs(200, j, [&](std::size_t i) {
                SkewTrace tr =
                    integrate_skew_traced(sys, xi, etas.state(i), 1.0, cfg, &F.eval);
                out[i] = tr.x.data.back();
            });
        };
        double t0 = now();
        rung(out_s, 1);
        double t1 = now();
        rung(out_p, jobs);
        double t2 = now();
        print_row({"ladder rung (200 paths)", t1 - t0, t2 - t1, out_s == out_p});
    }

    return 0;
}
