#include "skewflow/stats.hpp"

#include <algorithm>
#include <cmath>

#include "skewflow/parallel.hpp"

namespace skewflow {

double mean(std::span<const double> v) {
    if (v.empty()) throw ConfigError("mean of empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    if (v.size() < 2) throw ConfigError("variance needs at least 2 points");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("correlation: size mismatch");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ConfigError("ks_statistic: empty sample");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        // advance past ties as a block so the CDF jump is counted once
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= v) ++i;
        while (j < sb.size() && sb[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na -
                                 static_cast<double>(j) / nb));
    }
    return d;
}

double ks_critical(double c_alpha, std::size_t n, std::size_t m) {
    const double dn = static_cast<double>(n);
    const double dm = static_cast<double>(m);
    return c_alpha * std::sqrt((dn + dm) / (dn * dm));
}

namespace {

double pair_norm(const double* p, const double* q, std::size_t dim) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
        const double t = p[c] - q[c];
        s += t * t;
    }
    return std::sqrt(s);
}

// mean over all pairs (i,j) of |A_i - B_j|; per-row partials reduced in order
double cross_mean(const double* a, std::size_t n, const double* b, std::size_t m,
                  std::size_t dim, int jobs) {
    std::vector<double> row(n, 0.0);
    run_jobs(n, jobs, [&](std::size_t i) {
        double s = 0.0;
        const double* p = a + i * dim;
        for (std::size_t j = 0; j < m; ++j) s += pair_norm(p, b + j * dim, dim);
        row[i] = s;
    });
    double total = 0.0;
    for (double s : row) total += s;
    return total / (static_cast<double>(n) * static_cast<double>(m));
}

}  // namespace

double energy_distance(std::span<const double> a, std::size_t n,
                       std::span<const double> b, std::size_t m,
                       std::size_t dim, int jobs) {
    if (dim == 0 || n == 0 || m == 0) throw ConfigError("energy_distance: empty input");
    if (a.size() != n * dim || b.size() != m * dim)
        throw ConfigError("energy_distance: dimension mismatch");
    const double ab = cross_mean(a.data(), n, b.data(), m, dim, jobs);
    const double aa = cross_mean(a.data(), n, a.data(), n, dim, jobs);
    const double bb = cross_mean(b.data(), m, b.data(), m, dim, jobs);
    return 2.0 * ab - aa - bb;
}

double energy_distance_serial(std::span<const double> a, std::size_t n,
                              std::span<const double> b, std::size_t m,
                              std::size_t dim) {
    return energy_distance(a, n, b, m, dim, 1);
}

namespace {

void autocov_check_args(std::span<const double> series, std::size_t n, std::size_t k,
                        std::size_t max_lag, std::span<double> out) {
    if (series.size() != n * k) throw ConfigError("autocovariance: size mismatch");
    if (max_lag + 1 > n) throw ConfigError("autocovariance: lag exceeds series");
    if (out.size() != (max_lag + 1) * k * k)
        throw ConfigError("autocovariance: bad output size");
}

}  // namespace

// naive reference: one full pass over the series per lag
void autocovariance_serial(std::span<const double> series, std::size_t n,
                           std::size_t k, std::size_t max_lag,
                           std::span<double> out) {
    autocov_check_args(series, n, k, max_lag, out);
    const double* s = series.data();
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double* c = out.data() + lag * k * k;
        for (std::size_t a = 0; a < k * k; ++a) c[a] = 0.0;
        const std::size_t count = n - lag;
        for (std::size_t i = 0; i < count; ++i) {
            const double* si = s + i * k;
            const double* sl = s + (i + lag) * k;
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = 0; b < k; ++b) c[a * k + b] += sl[a] * si[b];
        }
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t a = 0; a < k * k; ++a) c[a] *= inv;
    }
}

// The sums are memory-bound, so lags are processed in blocks: one pass over
// the series serves a whole block, with the block accumulators kept in a
// local buffer. OpenMP splits the blocks. Per-lag accumulators still add
// terms in ascending i, so the result is bit-identical to the naive
// reference.
void autocovariance(std::span<const double> series, std::size_t n, std::size_t k,
                    std::size_t max_lag, std::span<double> out, int jobs) {
    autocov_check_args(series, n, k, max_lag, out);
    const double* s = series.data();
    constexpr std::size_t block = 16;
    const std::size_t n_blocks = (max_lag + block) / block;
    run_jobs(n_blocks, jobs, [&](std::size_t bi) {
        const std::size_t lag0 = bi * block;
        const std::size_t lag1 = std::min(lag0 + block - 1, max_lag);
        const std::size_t width = lag1 - lag0 + 1;
        double acc[block * 16];  // block x k*k, k <= 4 here
        if (k * k > 16) {
            // large state dimension: fall back to the reference per lag
            for (std::size_t lag = lag0; lag <= lag1; ++lag) {
                auto sub = out.subspan(lag * k * k, k * k);
                double* c = sub.data();
                for (std::size_t a = 0; a < k * k; ++a) c[a] = 0.0;
                for (std::size_t i = 0; i + lag < n; ++i) {
                    const double* si = s + i * k;
                    const double* sl = si + lag * k;
                    for (std::size_t a = 0; a < k; ++a)
                        for (std::size_t b = 0; b < k; ++b) c[a * k + b] += sl[a] * si[b];
                }
                const double inv = 1.0 / static_cast<double>(n - lag);
                for (std::size_t a = 0; a < k * k; ++a) c[a] *= inv;
            }
            return;
        }
        for (std::size_t a = 0; a < width * k * k; ++a) acc[a] = 0.0;
        for (std::size_t i = 0; i + lag0 < n; ++i) {
            const double* si = s + i * k;
            const std::size_t last = std::min(lag1, n - 1 - i);
            for (std::size_t lag = lag0; lag <= last; ++lag) {
                const double* sl = si + lag * k;
                double* c = acc + (lag - lag0) * k * k;
                for (std::size_t a = 0; a < k; ++a)
                    for (std::size_t b = 0; b < k; ++b) c[a * k + b] += sl[a] * si[b];
            }
        }
        for (std::size_t lag = lag0; lag <= lag1; ++lag) {
            const double inv = 1.0 / static_cast<double>(n - lag);
            for (std::size_t a = 0; a < k * k; ++a)
                out[lag * k * k + a] = acc[(lag - lag0) * k * k + a] * inv;
        }
    });
}

}  // namespace skewflow
