#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>

#include "skewflow/parallel.hpp"

using namespace skewflow;

TEST_CASE("run_jobs visits every index exactly once") {
    const std::size_t n = 1000;
    std::vector<int> hits(n, 0);
    run_jobs(n, 0, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("run_jobs serial path for jobs = 1") {
    std::vector<std::size_t> order;
    run_jobs(5, 1, [&](std::size_t i) { order.push_back(i); });
    CHECK(order == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("run_jobs propagates the first failure with its job index") {
    try {
        run_jobs(100, 2, [&](std::size_t i) {
            if (i == 37) throw NumericalError("synthetic failure", 1.0);
        });
        FAIL("expected an exception");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("37") != std::string::npos);
        CHECK(msg.find("synthetic failure") != std::string::npos);
    }
}

TEST_CASE("effective_jobs resolves zero to the machine width") {
    CHECK(effective_jobs(0) == hardware_jobs());
    CHECK(effective_jobs(3) == 3);
    CHECK(hardware_jobs() >= 1);
}
