#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rvlab/tail_estimators.hpp"

using namespace rvlab;
using Catch::Matchers::WithinRel;

namespace {

// deterministic Pareto quantile grid: x_i = ((i - 0.5)/n)^{-1/alpha}
std::vector<double> pareto_grid(std::size_t n, double alpha) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = std::pow((static_cast<double>(i) + 0.5) / static_cast<double>(n), -1.0 / alpha);
    return v;
}

}  // namespace

TEST_CASE("hill estimator on the four-point hand example") {
    // samples e^0..e^3, k = 3: mean log excess over the smallest point is 2
    const std::vector<double> xs = {1.0, std::exp(1.0), std::exp(2.0), std::exp(3.0)};
    const auto est = hill_estimate(xs, 3);
    REQUIRE_THAT(est.value, WithinRel(0.5, 1e-12));
    REQUIRE(est.n_exceedances == 3);
    REQUIRE(est.ci_low <= est.value);
    REQUIRE(est.value <= est.ci_high);
}

TEST_CASE("hill estimator on the deterministic Pareto grid") {
    const auto grid = pareto_grid(10000, 2.0);
    const auto est = hill_estimate(grid, 1000);
    REQUIRE(est.value > 1.8);
    REQUIRE(est.value < 2.2);
}

TEST_CASE("hill estimator edge cases") {
    const std::vector<double> flat = {2.0, 2.0, 2.0, 2.0};
    CHECK(std::isinf(hill_estimate(flat, 3).value));
    const std::vector<double> xs = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(hill_estimate(xs, 1), std::domain_error);
    CHECK_THROWS_AS(hill_estimate(xs, 3), std::domain_error);
    const std::vector<double> neg = {1.0, -2.0, 3.0, 4.0};
    CHECK_THROWS_AS(hill_estimate(neg, 2), std::domain_error);
}

TEST_CASE("tail_ratio identities and errors") {
    const auto grid = pareto_grid(10000, 1.0);

    SECTION("identical sequences give exactly 1") {
        const auto est = tail_ratio(grid, grid, 50.0);
        REQUIRE(est.value == 1.0);
    }
    SECTION("numerator scaled by 2 on a Pareto(1) grid") {
        std::vector<double> doubled(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) doubled[i] = 2.0 * grid[i];
        const auto est = tail_ratio(doubled, grid, 100.0);
        // P(2X > t)/P(X > t) = 2 for alpha = 1, up to grid resolution
        REQUIRE_THAT(est.value, WithinRel(2.0, 0.05));
    }
    SECTION("threshold above all samples") {
        CHECK_THROWS_AS(tail_ratio(grid, grid, 1e12), UndefinedRatioError);
    }
}

TEST_CASE("balance constants") {
    const auto grid = pareto_grid(20000, 1.0);

    SECTION("deterministic Y == 1") {
        std::vector<double> ones(grid.size(), 1.0);
        const auto [cx, cy] = balance_constants(grid, ones, 10.0);
        REQUIRE(cx.value == 1.0);
        REQUIRE(cy.value == 0.0);
    }
    SECTION("Y == 2 against log-power X: c_X -> 2^{-alpha}") {
        // exact quantile grid of the log-power(alpha=1, beta=-2, c=e) law
        const RadiusLaw law(TailIndex(1.0), {SvFamily::log_power, std::numbers::e, -2.0});
        const std::size_t n = 20000;
        std::vector<double> xs(n), ys(n, 2.0);
        for (std::size_t i = 0; i < n; ++i)
            xs[i] = law.inverse_survival((static_cast<double>(i) + 0.5) / static_cast<double>(n));
        const double t = law.inverse_survival(2e-3);  // deep interior threshold
        const auto [cx, cy] = balance_constants(xs, ys, t);
        // S(t)/S(t/2) -> 0.5 with a (log t)^{-1} correction at finite t
        REQUIRE_THAT(cx.value, WithinRel(0.5, 0.1));
        REQUIRE(cy.value == 0.0);
    }
    SECTION("nonnegativity and bounded-Y cap") {
        std::vector<double> ybound(grid.size(), 0.5);
        const auto [cx, cy] = balance_constants(grid, ybound, 5.0);
        REQUIRE(cx.value >= 0.0);
        REQUIRE(cy.value >= 0.0);
        REQUIRE(cx.value <= 1.0 + 1e-12);  // {X > t} contains {0.5 X > t}
    }
    SECTION("no product exceedances") {
        std::vector<double> small(100, 0.5);
        CHECK_THROWS_AS(balance_constants(small, small, 10.0), UndefinedRatioError);
    }
}

TEST_CASE("empirical spectral recovery") {
    RegVarSpec spec;
    spec.dimension = 2;
    spec.tail = TailIndex(1.0);
    spec.slowly_varying = {SvFamily::constant, 1.0, 0.0};
    spec.spectral.dimension = 2;
    spec.spectral.sampler = SphereSampler::discrete_atoms;
    spec.spectral.atoms = {{1.0, 0.0}, {0.0, -1.0}, {0.6, 0.8}};
    spec.spectral.probs = {0.5, 0.25, 0.25};
    RngStream rng(43, 0);
    const auto samples = sample_regvar_vector(spec, 20000, rng);

    const auto table = empirical_spectral(samples, 5.0, NormKind::euclidean);
    REQUIRE(table.atoms.size() == 3);
    double wsum = 0.0;
    for (std::size_t a = 0; a < table.atoms.size(); ++a) {
        wsum += table.probs[a];
        REQUIRE_THAT(euclidean_norm(table.atoms[a]), WithinRel(1.0, 1e-12));
        // each recovered atom matches a generating atom
        double best = 1e9;
        for (const auto& gen : spec.spectral.atoms) {
            double d = 0.0;
            for (std::size_t j = 0; j < 2; ++j) d = std::fmax(d, std::abs(gen[j] - table.atoms[a][j]));
            best = std::fmin(best, d);
        }
        REQUIRE(best < 1e-9);
    }
    REQUIRE_THAT(wsum, WithinRel(1.0, 1e-12));

    SECTION("threshold above all norms") {
        CHECK_THROWS_AS(empirical_spectral(samples, 1e15, NormKind::euclidean),
                        InsufficientDataError);
    }
}

TEST_CASE("empirical spectral of an isotropic law is centered") {
    RegVarSpec spec;
    spec.dimension = 2;
    spec.tail = TailIndex(2.0);
    spec.slowly_varying = {SvFamily::constant, 1.0, 0.0};
    spec.spectral.dimension = 2;
    spec.spectral.sampler = SphereSampler::uniform_sphere;
    RngStream rng(47, 0);
    const auto samples = sample_regvar_vector(spec, 50000, rng);
    const auto table = empirical_spectral(samples, 2.0, NormKind::euclidean);
    double m0 = 0.0;
    for (std::size_t a = 0; a < table.atoms.size(); ++a) m0 += table.probs[a] * table.atoms[a][0];
    std::uint64_t n_exc = 0;
    for (std::size_t i = 0; i < samples.n; ++i) n_exc += euclidean_norm(samples.row(i)) > 2.0;
    REQUIRE(std::abs(m0) < 4.0 / std::sqrt(static_cast<double>(n_exc)));
}

TEST_CASE("window diagnostic") {
    const auto grid = pareto_grid(50000, 1.0);

    SECTION("Y == 1 makes the window empty") {
        std::vector<double> ones(grid.size(), 1.0);
        REQUIRE(window_diagnostic(grid, ones, 5.0, 100.0) == 0.0);
    }
    SECTION("nonincreasing in M on fixed data") {
        // pair the grid with a reversed copy as Y
        std::vector<double> ys(grid.rbegin(), grid.rend());
        double prev = 1e300;
        for (double m : {2.0, 3.0, 5.0, 8.0}) {
            const double d = window_diagnostic(grid, ys, m, 100.0);
            REQUIRE(d <= prev);
            prev = d;
        }
    }
    SECTION("precondition violations") {
        std::vector<double> ones(grid.size(), 1.0);
        CHECK_THROWS_AS(window_diagnostic(grid, ones, 1.0, 100.0), std::domain_error);
        CHECK_THROWS_AS(window_diagnostic(grid, ones, 5.0, 20.0), std::domain_error);
    }
}

TEST_CASE("empirical quantile convention") {
    std::vector<double> v = {5.0, 1.0, 4.0, 2.0, 3.0};
    REQUIRE(empirical_quantile(v, 0.5) == 3.0);
    REQUIRE(empirical_quantile(v, 0.9) == 5.0);
    REQUIRE(empirical_quantile(v, 0.1) == 1.0);
}
