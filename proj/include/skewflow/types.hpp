#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skewflow {

using Vec = std::vector<double>;

// Error taxonomy, mapped to CLI exit codes: ConfigError -> 2, NumericalError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// A run that went numerically bad: non-finite state, trap-region exit,
// exploding drift. Carries the time at which the problem was detected.
class NumericalError : public Error {
public:
    NumericalError(const std::string& msg, double when)
        : Error(msg + " (at time " + std::to_string(when) + ")"), time(when) {}
    double time;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double sup_abs(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

}  // namespace skewflow
