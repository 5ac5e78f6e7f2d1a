#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "rvlab/rv_core.hpp"

using namespace rvlab;
using Catch::Matchers::WithinRel;

namespace {

RegVarSpec scalar_spec(double alpha, SvFamily family, double scale, double beta = 0.0) {
    RegVarSpec s;
    s.dimension = 1;
    s.tail = TailIndex(alpha);
    s.slowly_varying = {family, scale, beta};
    s.spectral.dimension = 1;
    s.spectral.sampler = SphereSampler::discrete_atoms;
    s.spectral.atoms = {{1.0}};
    s.spectral.probs = {1.0};
    return s;
}

}  // namespace

TEST_CASE("pareto_quantile closed-form points") {
    CHECK_THAT(pareto_quantile(TailIndex(1.0), 0.5), WithinRel(2.0, 1e-12));
    CHECK_THAT(pareto_quantile(TailIndex(2.0), 0.25), WithinRel(2.0, 1e-12));
    CHECK_THAT(pareto_quantile(TailIndex(0.5), 0.01), WithinRel(10000.0, 1e-12));
    CHECK_THROWS_AS(pareto_quantile(TailIndex(1.0), 0.0), std::domain_error);
    CHECK_THROWS_AS(pareto_quantile(TailIndex(1.0), 1.0), std::domain_error);
    CHECK_THROWS_AS(TailIndex(-1.0), std::domain_error);
}

TEST_CASE("pareto_quantile inverts the survival function") {
    RngStream rng(11, 0);
    for (int i = 0; i < 5000; ++i) {
        const double u = rng.uniform();
        const double alpha = 0.25 + 4.0 * rng.uniform();
        const double q = pareto_quantile(TailIndex(alpha), u);
        REQUIRE_THAT(std::pow(q, -alpha), WithinRel(u, 1e-12));
    }
}

TEST_CASE("constant-family radius reduces to the pareto quantile") {
    const RadiusLaw law(TailIndex(2.0), {SvFamily::constant, 1.0, 0.0});
    CHECK_THAT(law.inverse_survival(0.25), WithinRel(2.0, 1e-12));
    CHECK(law.x0() == 1.0);
}

TEST_CASE("log-power law with x0 = e") {
    // c = e makes S(e) = 1 exactly for alpha=1, beta=-2
    const RadiusLaw law(TailIndex(1.0), {SvFamily::log_power, std::numbers::e, -2.0});
    REQUIRE_THAT(law.x0(), WithinRel(std::numbers::e, 1e-12));
    // survival at e^2: e * e^{-2} * 2^{-2}
    const double expected = std::exp(-1.0) / 4.0;
    REQUIRE_THAT(law.survival(std::exp(2.0)), WithinRel(expected, 1e-12));
    // round trip of the numeric inverse
    for (double u : {0.9, 0.5, 0.1, 1e-3, 1e-6, 1e-12}) {
        const double x = law.inverse_survival(u);
        REQUIRE_THAT(law.survival(x), WithinRel(u, 1e-10));
    }
    // empirical frequency cross-check at x = e^2, n = 1e6
    RngStream rng(3, 1);
    const std::size_t n = 1000000;
    std::size_t count = 0;
    const double x_ref = std::exp(2.0);
    for (std::size_t i = 0; i < n; ++i) count += law.sample(rng) > x_ref;
    const double p_hat = static_cast<double>(count) / static_cast<double>(n);
    const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
    REQUIRE(std::abs(p_hat - expected) < 4.0 * se);
}

TEST_CASE("radius empirical survival matches analytic points within 4 binomial SE") {
    RngStream rng(17, 0);
    const std::size_t n = 1000000;
    for (auto spec : {scalar_spec(2.0, SvFamily::constant, 1.0),
                      scalar_spec(1.0, SvFamily::log_power, 2.0, -2.0)}) {
        const RadiusLaw law = spec.radius_law();
        const auto samples = sample_radius(spec, n, rng);
        for (double p : {0.1, 0.01, 0.001}) {
            const double x = law.inverse_survival(p);
            std::size_t count = 0;
            for (double s : samples) count += s > x;
            const double p_hat = static_cast<double>(count) / static_cast<double>(n);
            const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
            INFO("family " << sv_family_name(spec.slowly_varying.family) << " p=" << p);
            REQUIRE(std::abs(p_hat - p) < 4.0 * se);
        }
    }
}

TEST_CASE("sample_radius rejects n = 0") {
    RngStream rng(1, 0);
    auto spec = scalar_spec(1.0, SvFamily::constant, 1.0);
    CHECK_THROWS_AS(sample_radius(spec, 0, rng), std::domain_error);
}

TEST_CASE("truncated alpha-moment is stable for beta < -1") {
    // log-power beta=-2: E[X^alpha] finite; the truncated moment should not
    // diverge when n doubles.
    auto spec = scalar_spec(1.0, SvFamily::log_power, 2.0, -2.0);
    const RadiusLaw law = spec.radius_law();
    const double q9999 = law.inverse_survival(1e-4);
    RngStream rng(23, 5);
    auto truncated_moment = [&](std::size_t n) {
        double s = 0.0;
        std::size_t kept = 0;
        RngStream local(23, 5);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = law.sample(local);
            if (x <= q9999) {
                s += x;  // alpha = 1
                ++kept;
            }
        }
        return s / static_cast<double>(kept);
    };
    const double m1 = truncated_moment(100000);
    const double m2 = truncated_moment(200000);
    const double m4 = truncated_moment(400000);
    REQUIRE(std::abs(m2 - m1) / m1 < 0.05);
    REQUIRE(std::abs(m4 - m2) / m2 < 0.05);
    // and all three sit near the analytic truncated moment
    const double full = law.moment(1.0);
    REQUIRE(m4 < full);
}

TEST_CASE("polar construction: norm equals the paired radius draw") {
    RegVarSpec spec;
    spec.dimension = 4;
    spec.tail = TailIndex(2.0);
    spec.slowly_varying = {SvFamily::constant, 1.0, 0.0};
    spec.spectral.dimension = 4;
    spec.spectral.norm_kind = NormKind::op;
    spec.spectral.sampler = SphereSampler::rotation_group;
    spec.validate();

    RngStream rng(29, 2);
    RngStream replay(29, 2);
    const auto samples = sample_regvar_vector(spec, 2000, rng);
    const RadiusLaw law = spec.radius_law();
    std::vector<double> dir(4);
    for (std::size_t i = 0; i < samples.n; ++i) {
        const double r = law.sample(replay);
        spec.spectral.sample(replay, dir);
        REQUIRE_THAT(operator_norm(samples.row(i), 2, 2), WithinRel(r, 1e-12));
    }
}

TEST_CASE("discrete atom spectral yields exact rays") {
    RegVarSpec spec;
    spec.dimension = 2;
    spec.tail = TailIndex(2.0);
    spec.slowly_varying = {SvFamily::constant, 1.0, 0.0};
    spec.spectral.dimension = 2;
    spec.spectral.sampler = SphereSampler::discrete_atoms;
    spec.spectral.atoms = {{1.0, 0.0}};
    spec.spectral.probs = {1.0};
    RngStream rng(31, 0);
    const auto m = sample_regvar_vector(spec, 100, rng);
    for (std::size_t i = 0; i < m.n; ++i) {
        REQUIRE(m.row(i)[0] > 0.0);
        REQUIRE(m.row(i)[1] == 0.0);
    }
}

TEST_CASE("uniform sphere directions are centered") {
    RegVarSpec spec;
    spec.dimension = 2;
    spec.tail = TailIndex(2.0);
    spec.slowly_varying = {SvFamily::constant, 1.0, 0.0};
    spec.spectral.dimension = 2;
    spec.spectral.sampler = SphereSampler::uniform_sphere;
    RngStream rng(37, 0);
    const std::size_t n = 100000;
    const auto m = sample_regvar_vector(spec, n, rng);
    double s0 = 0.0, s1 = 0.0;
    std::size_t kept = 0;
    const double u = 2.0;  // condition on ||X|| > 2
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = m.row(i);
        const double nrm = euclidean_norm(row);
        if (nrm > u) {
            s0 += row[0] / nrm;
            s1 += row[1] / nrm;
            ++kept;
        }
    }
    const double se = 1.0 / std::sqrt(static_cast<double>(kept));
    REQUIRE(std::abs(s0 / kept) < 4.0 * se);
    REQUIRE(std::abs(s1 / kept) < 4.0 * se);
}

TEST_CASE("tail-balanced scalar sampler") {
    auto spec = scalar_spec(1.0, SvFamily::constant, 1.0);

    SECTION("missing balance pair is a configuration error") {
        RngStream rng(1, 0);
        CHECK_THROWS_AS(sample_tail_balanced_scalar(spec, 10, rng), ConfigError);
    }

    SECTION("p_plus = 1 gives all-positive samples") {
        spec.balance = {{1.0, 0.0}};
        RngStream rng(1, 0);
        for (double x : sample_tail_balanced_scalar(spec, 1000, rng)) REQUIRE(x > 0.0);
    }

    SECTION("p_plus = 0.5 is symmetric within binomial CI") {
        spec.balance = {{0.5, 0.5}};
        RngStream rng(2, 0);
        const std::size_t n = 100000;
        std::size_t pos = 0;
        for (double x : sample_tail_balanced_scalar(spec, n, rng)) pos += x > 0.0;
        const double se = std::sqrt(0.25 / static_cast<double>(n));
        REQUIRE(std::abs(pos / static_cast<double>(n) - 0.5) < 3.0 * se);
    }

    SECTION("p_plus = 0.7: one-sided tail fraction approaches 0.7") {
        spec.balance = {{0.7, 0.3}};
        RngStream rng(3, 0);
        const std::size_t n = 200000;
        const auto xs = sample_tail_balanced_scalar(spec, n, rng);
        // threshold at the 99.9% quantile of |X|
        std::vector<double> mags(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) mags[i] = std::abs(xs[i]);
        std::vector<double> sorted = mags;
        std::sort(sorted.begin(), sorted.end());
        const double t = sorted[static_cast<std::size_t>(0.999 * n)];
        std::size_t above = 0, pos_above = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mags[i] > t) {
                ++above;
                pos_above += xs[i] > 0.0;
            }
        }
        const double frac = static_cast<double>(pos_above) / static_cast<double>(above);
        const double se = std::sqrt(0.7 * 0.3 / static_cast<double>(above));
        REQUIRE(std::abs(frac - 0.7) < 4.0 * se);
    }
}

TEST_CASE("norm dispatch") {
    const std::vector<double> v34 = {3.0, 4.0};
    CHECK_THAT(norm(v34, NormKind::euclidean), WithinRel(5.0, 1e-12));
    const std::vector<double> id2 = {1.0, 0.0, 0.0, 1.0};
    CHECK_THAT(norm(id2, NormKind::op), WithinRel(1.0, 1e-12));
    // pair (2 Id_2, (0,3)): operator norm 2 plus euclidean norm 3
    const std::vector<double> pair = {2.0, 0.0, 0.0, 2.0, 0.0, 3.0};
    CHECK_THAT(norm(pair, NormKind::pair_sum), WithinRel(5.0, 1e-12));
    const std::vector<double> bad = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(norm(bad, NormKind::op), std::domain_error);
}

TEST_CASE("operator norm agrees with Eigen on random shapes") {
    RngStream rng(41, 1);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> m(4);
        for (auto& x : m) x = rng.normal();
        Eigen::Map<const Eigen::Matrix<double, 2, 2, Eigen::RowMajor>> em(m.data());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(em);
        REQUIRE_THAT(operator_norm(m, 2, 2), WithinRel(svd.singularValues()(0), 1e-10));
    }
}

TEST_CASE("same seed gives bitwise-identical sample vectors") {
    auto spec = scalar_spec(1.5, SvFamily::log_power, 3.0, -2.0);
    RngStream a(99, 4), b(99, 4);
    const auto xs = sample_radius(spec, 500, a);
    const auto ys = sample_radius(spec, 500, b);
    REQUIRE(xs == ys);
}

TEST_CASE("radius moment quadrature matches closed forms") {
    // constant family: E[R^p] = x0^p alpha/(alpha-p)
    const RadiusLaw pareto(TailIndex(2.0), {SvFamily::constant, 1.0, 0.0});
    CHECK_THAT(pareto.moment(1.0), WithinRel(2.0, 1e-9));
    CHECK(std::isinf(pareto.moment(2.0)));
    // log-power p = alpha: x0^a + a c w0^{b+1}/(-(b+1))
    const RadiusLaw lp(TailIndex(1.0), {SvFamily::log_power, std::numbers::e, -2.0});
    CHECK_THAT(lp.moment(1.0), WithinRel(2.0 * std::numbers::e, 1e-9));
    // log-power p < alpha cross-checked against direct quadrature of x^{p-1}S(x)
    const RadiusLaw lp2(TailIndex(2.0), {SvFamily::log_power, 4.0, -2.0});
    const double p = 1.0;
    const double direct = std::pow(lp2.x0(), p) +
                          p * integrate([&](double x) { return std::pow(x, p - 1.0) * lp2.survival(x); },
                                        lp2.x0(), 1e8, 1e-10);
    CHECK_THAT(lp2.moment(p), WithinRel(direct, 1e-6));
}

TEST_CASE("spec validation catches inconsistencies") {
    auto spec = scalar_spec(1.0, SvFamily::constant, 1.0);
    spec.spectral.dimension = 2;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    auto bad_balance = scalar_spec(1.0, SvFamily::constant, 1.0);
    bad_balance.balance = {{0.6, 0.6}};
    CHECK_THROWS_AS(bad_balance.validate(), ConfigError);

    SphereDist atoms;
    atoms.dimension = 2;
    atoms.sampler = SphereSampler::discrete_atoms;
    atoms.atoms = {{0.5, 0.0}};  // not unit norm
    atoms.probs = {1.0};
    CHECK_THROWS_AS(atoms.validate(), ConfigError);
}
