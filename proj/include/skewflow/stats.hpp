#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "skewflow/types.hpp"

namespace skewflow {

double mean(std::span<const double> v);
// unbiased sample variance (n-1)
double variance(std::span<const double> v);
double pearson_correlation(std::span<const double> a, std::span<const double> b);

// Exact two-sample Kolmogorov-Smirnov statistic, sorted-merge sweep.
double ks_statistic(std::span<const double> a, std::span<const double> b);

// Two-sample critical value c(alpha)*sqrt((n+m)/(n*m)); c(0.01) = 1.6276...
double ks_critical(double c_alpha, std::size_t n, std::size_t m);

// Energy distance between samples A (n x dim) and B (m x dim), V-statistic
// form (always >= 0):
//   2/(nm) sum|a-b| - 1/n^2 sum|a-a'| - 1/m^2 sum|b-b'|
// The parallel kernel accumulates per-row partials and reduces them in index
// order, so its output is bit-identical to the serial reference.
double energy_distance(std::span<const double> a, std::size_t n,
                       std::span<const double> b, std::size_t m,
                       std::size_t dim, int jobs);
double energy_distance_serial(std::span<const double> a, std::size_t n,
                              std::span<const double> b, std::size_t m,
                              std::size_t dim);

// Empirical lagged autocovariance of a pre-centered series (n x k row-major):
//   C(l)_{ab} = 1/(n-l) * sum_i s[i+l,a]*s[i,b],  l = 0..max_lag
// out must hold (max_lag+1)*k*k doubles. Parallel version splits over lags;
// each lag is summed serially, so outputs match the serial reference bitwise.
void autocovariance(std::span<const double> series, std::size_t n, std::size_t k,
                    std::size_t max_lag, std::span<double> out, int jobs);
void autocovariance_serial(std::span<const double> series, std::size_t n,
                           std::size_t k, std::size_t max_lag,
                           std::span<double> out);

struct BatchMeans {
    Vec value;     // overall mean per component
    Vec std_err;   // batch-means standard error per component
    std::size_t batches = 0;
};

}  // namespace skewflow
