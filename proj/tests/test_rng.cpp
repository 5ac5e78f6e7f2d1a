#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rvlab/rng.hpp"

using namespace rvlab;

TEST_CASE("same seed and stream give bitwise-identical sequences") {
    RngStream a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RngStream c(42, 7), d(42, 7);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(c.uniform() == d.uniform());
        REQUIRE(c.normal() == d.normal());
    }
}

TEST_CASE("distinct streams differ") {
    RngStream a(42, 0), b(42, 1);
    int equal = 0;
    for (int i = 0; i < 1000; ++i) equal += a.next_u64() == b.next_u64();
    REQUIRE(equal == 0);
}

TEST_CASE("uniform stays inside the open unit interval") {
    RngStream rng(1, 0);
    for (int i = 0; i < 200000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("uniform moments are sane") {
    RngStream rng(5, 3);
    const int n = 400000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        s += u;
        s2 += u * u;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    REQUIRE(std::abs(mean - 0.5) < 4.0 / std::sqrt(12.0 * n));
    REQUIRE(std::abs(var - 1.0 / 12.0) < 5e-4);
}

TEST_CASE("normal moments are sane") {
    RngStream rng(9, 1);
    const int n = 400000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    REQUIRE(std::abs(s / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    REQUIRE(std::abs(s2 / n - 1.0) < 0.01);
}

TEST_CASE("key derivation is deterministic and spreads") {
    RngKey k{123, 0};
    REQUIRE(k.sub(4).stream == k.sub(4).stream);
    REQUIRE(k.sub(4).stream != k.sub(5).stream);
    REQUIRE(k.sub(4).seed == 123);
    // children of different parents do not collide on small indices
    std::vector<std::uint64_t> seen;
    for (int parent = 0; parent < 32; ++parent)
        for (int child = 0; child < 32; ++child) seen.push_back(RngKey{1, static_cast<std::uint64_t>(parent)}.sub(child).stream);
    std::sort(seen.begin(), seen.end());
    REQUIRE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}
