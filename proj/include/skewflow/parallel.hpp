#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "skewflow/types.hpp"

namespace skewflow {

inline int hardware_jobs() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline int effective_jobs(int requested) {
    if (requested <= 0) return hardware_jobs();
    return requested;
}

// Runs fn(i) for i in [0, count). Each job must write only its own output
// slot; reductions happen after the join, in index order, so results are
// identical for any job count. The first exception is captured and rethrown
// with the failing job index attached.
template <class Fn>
void run_jobs(std::size_t count, int jobs, Fn&& fn) {
    jobs = effective_jobs(jobs);
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error = nullptr;
    std::atomic<bool> failed{false};
    long long failed_index = -1;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
#endif
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) {
                first_error = std::current_exception();
                failed_index = i;
            }
        }
    }
    if (first_error) {
        try {
            std::rethrow_exception(first_error);
        } catch (const Error& e) {
            throw Error("job " + std::to_string(failed_index) + " failed: " + e.what());
        }
    }
}

}  // namespace skewflow
