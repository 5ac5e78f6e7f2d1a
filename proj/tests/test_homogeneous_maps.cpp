#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rvlab/homogeneous_maps.hpp"

using namespace rvlab;
using Catch::Matchers::WithinRel;
using Catch::Matchers::WithinAbs;

TEST_CASE("apply_map pointwise examples") {
    SECTION("matrix product with identity") {
        const auto map = HomogeneousMap::matrix_product(2, 2, 2);
        const std::vector<double> id = {1.0, 0.0, 0.0, 1.0};
        const std::vector<double> m = {1.0, 2.0, 3.0, 4.0};
        CHECK(apply_map(map, id, m) == m);
    }
    SECTION("quadratic form at e1 with identity matrix") {
        const auto map = HomogeneousMap::quadratic_form(2);
        const std::vector<double> x = {1.0, 0.0};
        const std::vector<double> y = {1.0, 0.0, 0.0, 1.0};
        CHECK_THAT(apply_map(map, x, y)[0], WithinRel(1.0, 1e-15));
    }
    SECTION("kronecker of (1,2) and (3)") {
        const auto map = HomogeneousMap::kronecker(2, 1);
        const std::vector<double> x = {1.0, 2.0};
        const std::vector<double> y = {3.0};
        CHECK(apply_map(map, x, y) == std::vector<double>{3.0, 6.0});
    }
    SECTION("dimension mismatch") {
        const auto map = HomogeneousMap::kronecker(2, 1);
        const std::vector<double> x = {1.0};
        const std::vector<double> y = {3.0};
        std::vector<double> out(2);
        CHECK_THROWS_AS(apply_map(map, x, y, out), std::domain_error);
    }
}

TEST_CASE("homogeneity identity holds for built-in maps") {
    const std::vector<std::pair<double, double>> scales = {
        {0.5, 0.5}, {0.5, 1.0}, {0.5, 2.0}, {0.5, 10.0}, {1.0, 0.5}, {1.0, 1.0},
        {1.0, 2.0}, {1.0, 10.0}, {2.0, 0.5}, {2.0, 1.0}, {2.0, 2.0}, {2.0, 10.0},
        {10.0, 0.5}, {10.0, 1.0}, {10.0, 2.0}, {10.0, 10.0}};
    RngStream rng(7, 0);
    for (auto map : {HomogeneousMap::matrix_product(2, 2, 2), HomogeneousMap::kronecker(3, 2),
                     HomogeneousMap::quadratic_form(2)}) {
        const auto rep = check_homogeneity(map, 1000, scales, rng);
        INFO(map_kind_name(map.kind));
        REQUIRE(rep.max_rel_violation < 1e-12);
    }
}

TEST_CASE("mis-declared custom map is caught") {
    // psi(x, y) = ||x|| y is 1-homogeneous in x, declared with degree 2
    auto eval = [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
        const double nx = euclidean_norm(x);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = nx * y[i];
    };
    const auto map = HomogeneousMap::custom(2, 2, 2, 2.0, 1.0, eval);
    RngStream rng(13, 0);
    const auto rep = check_homogeneity(map, 100, {{2.0, 1.0}}, rng);
    REQUIRE(rep.max_rel_violation > 0.1);
}

TEST_CASE("map bound: analytic value 1 with probes as cross-check") {
    RngStream rng(17, 0);
    for (auto map : {HomogeneousMap::matrix_product(2, 2, 2), HomogeneousMap::kronecker(2, 3),
                     HomogeneousMap::quadratic_form(2)}) {
        INFO(map_kind_name(map.kind));
        const double probe = map_bound_probe(map, 500, rng);
        REQUIRE(probe <= 1.0 + 1e-9);
        REQUIRE(probe > 0.05);
        REQUIRE(map_bound(map, 500, rng) == 1.0);
    }
}

TEST_CASE("probe estimate is a running maximum in n_probe") {
    const auto map = HomogeneousMap::quadratic_form(2);
    RngStream a(19, 0), b(19, 0);
    const double m100 = map_bound_probe(map, 100, a);
    const double m500 = map_bound_probe(map, 500, b);
    REQUIRE(m500 >= m100);
}

TEST_CASE("product bound inequality") {
    RngStream rng(23, 0);
    for (auto map : {HomogeneousMap::matrix_product(2, 2, 2), HomogeneousMap::kronecker(2, 2),
                     HomogeneousMap::quadratic_form(2)}) {
        std::vector<double> x(map.d_x), y(map.d_y), z(map.d_z);
        for (int rep = 0; rep < 2000; ++rep) {
            for (auto& v : x) v = rng.normal();
            for (auto& v : y) v = rng.normal();
            apply_map(map, x, y, z);
            const double bound = map_bound(map, 1, rng) *
                                 std::pow(map.norm_of_x(x), map.deg_x) *
                                 std::pow(map.norm_of_y(y), map.deg_y);
            REQUIRE(map.norm_of_z(z) <= bound * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("matrix product agrees with direct triple loop on random 4x4") {
    const auto map = HomogeneousMap::matrix_product(4, 4, 4);
    RngStream rng(29, 0);
    std::vector<double> x(16), y(16), z(16);
    for (int rep = 0; rep < 20; ++rep) {
        for (auto& v : x) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        apply_map(map, x, y, z);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += x[i * 4 + k] * y[k * 4 + j];
                REQUIRE_THAT(z[i * 4 + j], WithinAbs(s, 1e-12 * (1.0 + std::abs(s))));
            }
        }
    }
}

TEST_CASE("scaling factors are exact for specific pairs") {
    RngStream rng(31, 0);
    SECTION("quadratic form, (s,t) = (2,1): factor 4") {
        const auto map = HomogeneousMap::quadratic_form(2);
        const auto rep = check_homogeneity(map, 50, {{2.0, 1.0}}, rng);
        REQUIRE(rep.max_rel_violation < 1e-12);
    }
    SECTION("matrix product, (s,t) = (3,5): factor 15") {
        const auto map = HomogeneousMap::matrix_product(2, 2, 2);
        const auto rep = check_homogeneity(map, 50, {{3.0, 5.0}}, rng);
        REQUIRE(rep.max_rel_violation < 1e-12);
    }
}
