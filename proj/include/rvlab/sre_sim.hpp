#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rvlab/errors.hpp"
#include "rvlab/linalg.hpp"
#include "rvlab/rng.hpp"
#include "rvlab/tail_estimators.hpp"
#include "rvlab/theory_oracles.hpp"

namespace rvlab {

enum class SreRegime { heavy_a, heavy_b };

inline const char* sre_regime_name(SreRegime r) {
    return r == SreRegime::heavy_a ? "heavy-A" : "heavy-B";
}

inline SreRegime parse_sre_regime(const std::string& s) {
    if (s == "heavy-A") return SreRegime::heavy_a;
    if (s == "heavy-B") return SreRegime::heavy_b;
    throw ConfigError("unknown SRE regime: " + s);
}

// Affine recursion R_t = A_t R_{t-1} + B_t. The joint sampler fills one
// (A, B) pair per call (A row-major d x d, B length d); A and B may be
// dependent. declared_tail describes the pair norm ||(A,B)|| = ||A|| + ||B||
// (dimension d*d + d under the pair-sum norm); its spectral table carries the
// limiting directions (theta_a, theta_b).
struct SreModel {
    int dim = 1;
    std::function<void(RngStream&, std::span<double>, std::span<double>)> joint_sampler;
    RegVarSpec declared_tail;
    SreRegime regime = SreRegime::heavy_a;

    void validate() const {
        if (dim <= 0) throw ConfigError("SreModel: dimension must be positive");
        if (!joint_sampler) throw ConfigError("SreModel: joint sampler missing");
        declared_tail.validate();
        if (declared_tail.dimension != dim * dim + dim)
            throw ConfigError("SreModel: declared tail must live on the (A,B) pair space");
        if (declared_tail.spectral.norm_kind != NormKind::pair_sum)
            throw ConfigError("SreModel: declared tail must use the pair-sum norm");
    }
};

// Declared tail of the pair (A, B): a RegVarSpec on the flattened pair space
// with the pair-sum norm; atoms are (theta_a, theta_b) pairs of unit pair norm.
inline RegVarSpec pair_tail_spec(int dim, TailIndex alpha, SlowlyVaryingSpec sv,
                                 std::vector<std::vector<double>> pair_atoms,
                                 std::vector<double> probs) {
    RegVarSpec spec;
    spec.dimension = dim * dim + dim;
    spec.tail = alpha;
    spec.slowly_varying = sv;
    spec.spectral.dimension = spec.dimension;
    spec.spectral.norm_kind = NormKind::pair_sum;
    spec.spectral.sampler = SphereSampler::discrete_atoms;
    spec.spectral.atoms = std::move(pair_atoms);
    spec.spectral.probs = std::move(probs);
    spec.validate();
    return spec;
}

// One SRE coefficient: either a deterministic value or multiplier * (R Theta)
// draws from a regularly varying law.
struct SreCoeffLaw {
    std::vector<double> constant;       // flattened; empty when a law is used
    std::optional<RegVarSpec> law;
    double multiplier = 1.0;

    bool is_constant() const { return !constant.empty(); }

    void validate(std::size_t expected_size) const {
        if (is_constant() == law.has_value())
            throw ConfigError("SreCoeffLaw: exactly one of constant/law must be set");
        if (is_constant() && constant.size() != expected_size)
            throw ConfigError("SreCoeffLaw: constant has the wrong dimension");
        if (law) {
            law->validate();
            if (static_cast<std::size_t>(law->dimension) != expected_size)
                throw ConfigError("SreCoeffLaw: law has the wrong dimension");
        }
        if (!(multiplier > 0.0)) throw ConfigError("SreCoeffLaw: multiplier must be positive");
    }
};

// Model with A and B drawn independently of each other.
inline SreModel make_independent_sre(int dim, const SreCoeffLaw& a_coeff,
                                     const SreCoeffLaw& b_coeff, RegVarSpec declared_tail,
                                     SreRegime regime) {
    const std::size_t dd = static_cast<std::size_t>(dim) * dim;
    a_coeff.validate(dd);
    b_coeff.validate(static_cast<std::size_t>(dim));

    struct CoeffSampler {
        std::vector<double> constant;
        std::optional<RadiusLaw> radius;
        SphereDist spectral;
        double multiplier = 1.0;

        void fill(RngStream& rng, std::span<double> out) const {
            if (!constant.empty()) {
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = constant[i];
                return;
            }
            const double r = multiplier * radius->sample(rng);
            spectral.sample(rng, out);
            for (auto& v : out) v *= r;
        }
    };
    auto build = [](const SreCoeffLaw& c) {
        CoeffSampler s;
        s.constant = c.constant;
        if (c.law) {
            s.radius.emplace(c.law->tail, c.law->slowly_varying);
            s.spectral = c.law->spectral;
            s.multiplier = c.multiplier;
        }
        return s;
    };

    SreModel m;
    m.dim = dim;
    m.declared_tail = std::move(declared_tail);
    m.regime = regime;
    m.joint_sampler = [a = build(a_coeff), b = build(b_coeff)](
                          RngStream& rng, std::span<double> out_a, std::span<double> out_b) {
        a.fill(rng, out_a);
        b.fill(rng, out_b);
    };
    m.validate();
    return m;
}

// Smallest N with q^N <= eps: the discarded tail of the series carries a
// geometrically small share of the alpha-moment.
inline std::size_t series_truncation(double eps, double ea_alpha) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("series_truncation: eps must lie in (0,1)");
    if (!(ea_alpha > 0.0)) throw std::domain_error("series_truncation: moment must be positive");
    if (ea_alpha >= 1.0)
        throw RegimeError("series_truncation: requires E||A||^alpha < 1, got " +
                          std::to_string(ea_alpha));
    std::size_t n = static_cast<std::size_t>(
        std::ceil(std::log(eps) / std::log(ea_alpha)));
    if (n < 1) n = 1;
    while (std::pow(ea_alpha, static_cast<double>(n)) > eps) ++n;           // confirm by powering
    while (n > 1 && std::pow(ea_alpha, static_cast<double>(n - 1)) <= eps) --n;
    return n;
}

struct ConditionReport {
    double ea_alpha = 0.0;       // estimate of E||A||^alpha
    double ea_alpha_se = 0.0;
    bool c1_ok = false;          // Hill on pair norms agrees with declared alpha (15%)
    bool c3_ok = false;          // E||A||^alpha < 1 and A carries part of the pair tail
    double c2_diagnostic = 0.0;  // finite-(M,t) window value on pair norms
    double hill_alpha = 0.0;
    double a_tail_fraction = 0.0;  // P(||A|| > t/2 | pair norm > t)
};

// Estimates the pieces of the condition set (C). A report, not a gate.
inline ConditionReport check_conditions(const SreModel& model, std::size_t n, RngKey key) {
    model.validate();
    if (n < 1000) throw std::domain_error("check_conditions: need n >= 1000");
    const std::size_t dd = static_cast<std::size_t>(model.dim) * model.dim;
    std::vector<double> a(dd), b(model.dim);

    ConditionReport rep;
    const double alpha = model.declared_tail.tail.alpha;

    // E||A||^alpha and pair norms from one stream of pairs
    std::vector<double> pair_norms(n), a_norms(n);
    {
        RngStream rng = key.sub(1).make_stream();
        detail::MeanAcc acc;
        for (std::size_t i = 0; i < n; ++i) {
            model.joint_sampler(rng, a, b);
            const double na = operator_norm(a, model.dim, model.dim);
            a_norms[i] = na;
            pair_norms[i] = na + euclidean_norm(b);
            acc.add(std::pow(na, alpha));
        }
        rep.ea_alpha = acc.mean();
        rep.ea_alpha_se = acc.std_error();
    }

    // (C1) proxy: Hill estimate on the pair norms at the top 1%
    const std::size_t k = std::max<std::size_t>(50, n / 100);
    rep.hill_alpha = hill_estimate(pair_norms, k).value;
    rep.c1_ok = std::isfinite(rep.hill_alpha) && std::abs(rep.hill_alpha - alpha) <= 0.15 * alpha;

    // (C2) proxy: window diagnostic on two independent pair-norm draws at
    // M = 10, t = 99.9% quantile of the products
    {
        RngStream rng = key.sub(2).make_stream();
        std::vector<double> x_norms(n), y_norms(n), products(n);
        for (std::size_t i = 0; i < n; ++i) {
            model.joint_sampler(rng, a, b);
            x_norms[i] = operator_norm(a, model.dim, model.dim) + euclidean_norm(b);
            model.joint_sampler(rng, a, b);
            y_norms[i] = operator_norm(a, model.dim, model.dim) + euclidean_norm(b);
            products[i] = x_norms[i] * y_norms[i];
        }
        const double t = empirical_quantile(products, 0.999);
        const double m_cut = 10.0;
        if (t > m_cut * m_cut) {
            rep.c2_diagnostic = window_diagnostic(x_norms, y_norms, m_cut, t);
        } else {
            rep.c2_diagnostic = std::numeric_limits<double>::quiet_NaN();
        }
    }

    // (C3): contraction plus non-degenerate A share of the pair tail
    {
        const double t = empirical_quantile(pair_norms, 0.999);
        std::uint64_t above = 0, a_above = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pair_norms[i] > t) {
                ++above;
                a_above += a_norms[i] > 0.5 * t;
            }
        }
        rep.a_tail_fraction = above ? static_cast<double>(a_above) / static_cast<double>(above) : 0.0;
        rep.c3_ok = rep.ea_alpha < 1.0 && rep.a_tail_fraction > 0.0;
    }
    return rep;
}

// One realization of the stationary law per path. Series mode evaluates
// sum_{k<N} Pi_k B_{k+1} with Pi_k = A_1 ... A_k; markov mode iterates
// R <- A R + B from zero for burn_in steps. Path i consumes key.sub(i), so
// runs with the same key are pathwise comparable across modes and against
// the norm majorant.
struct StationarySample {
    int dim = 1;
    std::size_t n_paths = 0;
    std::size_t depth = 0;  // series truncation or burn-in
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<double> data;  // n_paths x dim

    std::span<const double> path(std::size_t i) const {
        return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

enum class IterMode { series, markov };

inline StationarySample iterate_sre(const SreModel& model, std::size_t n_paths, IterMode mode,
                                    std::size_t depth, RngKey key) {
    model.validate();
    if (n_paths == 0) throw std::domain_error("iterate_sre: n_paths must be >= 1");
    if (depth == 0) throw std::domain_error("iterate_sre: depth must be >= 1");
    const int d = model.dim;
    const std::size_t dd = static_cast<std::size_t>(d) * d;

    StationarySample out;
    out.dim = d;
    out.n_paths = n_paths;
    out.depth = depth;
    out.seed = key.seed;
    out.stream = key.stream;
    out.data.assign(n_paths * static_cast<std::size_t>(d), 0.0);

    std::vector<double> a(dd), b(d), pi(dd), pi_next(dd), term(d), r(d), r_next(d);
    for (std::size_t p = 0; p < n_paths; ++p) {
        RngStream rng = key.sub(p).make_stream();
        std::span<double> dest(out.data.data() + p * static_cast<std::size_t>(d),
                               static_cast<std::size_t>(d));
        if (mode == IterMode::series) {
            // Pi_0 = Id; after the k-th pair, term = Pi_{k-1} B_k
            for (std::size_t j = 0; j < dd; ++j) pi[j] = 0.0;
            for (int i = 0; i < d; ++i) pi[static_cast<std::size_t>(i) * d + i] = 1.0;
            for (auto& v : dest) v = 0.0;
            for (std::size_t k = 0; k < depth; ++k) {
                model.joint_sampler(rng, a, b);
                mat_mul(pi, d, d, b, d, 1, term);
                for (int i = 0; i < d; ++i) dest[i] += term[i];
                if (k + 1 < depth) {
                    mat_mul(pi, d, d, a, d, d, pi_next);
                    std::swap(pi, pi_next);
                }
            }
        } else {
            for (auto& v : r) v = 0.0;
            for (std::size_t k = 0; k < depth; ++k) {
                model.joint_sampler(rng, a, b);
                mat_mul(a, d, d, r, d, 1, r_next);
                for (int i = 0; i < d; ++i) r[i] = r_next[i] + b[i];
            }
            for (int i = 0; i < d; ++i) dest[i] = r[i];
        }
    }
    return out;
}

struct MajorantResult {
    OracleResult moment;        // E[(sum_k ||B_{k+1}|| prod ||A_j||)^alpha]
    double stability_ratio;     // estimate at depth N over estimate at N/2
};

// Norm-majorant series R = sum ||B_{k+1}|| prod_{j<=k} ||A_j||; dominates the
// norm of the vector series pathwise on the same draws.
inline MajorantResult majorant_moment(const SreModel& model, std::size_t n_paths,
                                      std::size_t depth, RngKey key) {
    model.validate();
    if (model.regime != SreRegime::heavy_a && model.regime != SreRegime::heavy_b)
        throw RegimeError("majorant_moment: unknown regime");
    if (n_paths == 0 || depth == 0)
        throw std::domain_error("majorant_moment: need n_paths >= 1 and depth >= 1");
    const int d = model.dim;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    const double alpha = model.declared_tail.tail.alpha;

    std::vector<double> a(dd), b(d);
    detail::MeanAcc full, half;
    const std::size_t half_depth = std::max<std::size_t>(depth / 2, 1);
    for (std::size_t p = 0; p < n_paths; ++p) {
        RngStream rng = key.sub(p).make_stream();
        double prod = 1.0, sum = 0.0, sum_half = 0.0;
        for (std::size_t k = 0; k < depth; ++k) {
            model.joint_sampler(rng, a, b);
            sum += prod * euclidean_norm(b);
            prod *= operator_norm(a, d, d);
            if (k + 1 == half_depth) sum_half = sum;
        }
        full.add(std::pow(sum, alpha));
        half.add(std::pow(sum_half, alpha));
    }
    MajorantResult res;
    res.moment = OracleResult{full.mean(), OracleMethod::spectral_mc, n_paths, full.std_error()};
    res.stability_ratio = full.mean() / half.mean();
    return res;
}

struct NuResult {
    OracleResult total;
    std::vector<double> term_means;  // per power of the recursion
    double remainder_bound = 0.0;    // geometric bound on the dropped tail
    double ea_alpha = 0.0;           // internal estimate used for the bound
};

// The series limit measure nu evaluated on {||r|| > u} \cap cone:
//   nu(A) = sum_n E[ mu^{(A,B)}({(a,b) : Pi_n (a R_0 + b) in A}) ]
// with the radial mu-integral reduced by homogeneity to
// (||Pi_n (theta_a R_0 + theta_b)||/u)^alpha per pair-spectral direction.
// Pi_n uses full A draws; R_0 is an independent stationary draw from the
// series construction.
inline NuResult nu_measure(const SreModel& model, const LimitMeasureQuery& query,
                           std::size_t n_terms, std::size_t n, RngKey key) {
    model.validate();
    query.validate();
    if (model.regime != SreRegime::heavy_a)
        throw RegimeError("nu_measure: requires the heavy-A regime");
    if (n_terms == 0 || n == 0)
        throw std::domain_error("nu_measure: need n_terms >= 1 and n >= 1");
    const int d = model.dim;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    const double alpha = model.declared_tail.tail.alpha;
    const SphereDist& pair_spectral = model.declared_tail.spectral;

    // contraction estimate for the stationary depth and the remainder bound
    double ea_alpha = 0.0;
    {
        RngStream rng = key.sub(1000001).make_stream();
        std::vector<double> a(dd), b(d);
        detail::MeanAcc acc;
        const std::size_t n_mom = std::max<std::size_t>(n, 10000);
        for (std::size_t i = 0; i < n_mom; ++i) {
            model.joint_sampler(rng, a, b);
            acc.add(std::pow(operator_norm(a, d, d), alpha));
        }
        ea_alpha = acc.mean();
    }
    if (ea_alpha >= 1.0)
        throw RegimeError("nu_measure: estimated E||A||^alpha = " + std::to_string(ea_alpha) +
                          " is not < 1");
    const std::size_t r0_depth = ea_alpha > 0.0 ? series_truncation(1e-6, ea_alpha) : 1;

    NuResult out;
    out.ea_alpha = ea_alpha;
    out.term_means.reserve(n_terms);
    std::vector<double> a(dd), b(d), pi(dd), pi_next(dd), theta(dd + d);
    std::vector<double> r0(d), w(d), z(d), dir(d), term_vec(d);
    double total = 0.0, var = 0.0;
    int rising = 0;
    for (std::size_t m = 0; m < n_terms; ++m) {
        RngStream rng = key.sub(m).make_stream();
        detail::MeanAcc acc;
        for (std::size_t i = 0; i < n; ++i) {
            // Pi_m from m full A draws
            for (std::size_t j = 0; j < dd; ++j) pi[j] = 0.0;
            for (int q = 0; q < d; ++q) pi[static_cast<std::size_t>(q) * d + q] = 1.0;
            for (std::size_t f = 0; f < m; ++f) {
                model.joint_sampler(rng, a, b);
                mat_mul(pi, d, d, a, d, d, pi_next);
                std::swap(pi, pi_next);
            }
            // independent stationary R_0 by the series construction
            {
                std::vector<double> acc_pi(dd, 0.0);
                for (int q = 0; q < d; ++q) acc_pi[static_cast<std::size_t>(q) * d + q] = 1.0;
                for (auto& v : r0) v = 0.0;
                for (std::size_t k = 0; k < r0_depth; ++k) {
                    model.joint_sampler(rng, a, b);
                    mat_mul(acc_pi, d, d, b, d, 1, term_vec);
                    for (int q = 0; q < d; ++q) r0[q] += term_vec[q];
                    if (k + 1 < r0_depth) {
                        mat_mul(acc_pi, d, d, a, d, d, pi_next);
                        std::swap(acc_pi, pi_next);
                    }
                }
            }
            // pair-spectral direction (theta_a, theta_b)
            pair_spectral.sample(rng, theta);
            std::span<const double> theta_a(theta.data(), dd);
            std::span<const double> theta_b(theta.data() + dd, static_cast<std::size_t>(d));
            mat_mul(theta_a, d, d, r0, d, 1, w);
            for (int q = 0; q < d; ++q) w[q] += theta_b[q];
            mat_mul(pi, d, d, w, d, 1, z);
            const double nz = euclidean_norm(z);
            double mass = 0.0;
            if (nz > 0.0) {
                bool in_cone = true;
                if (query.cone) {
                    for (int q = 0; q < d; ++q) dir[q] = z[q] / nz;
                    in_cone = query.cone(dir);
                }
                if (in_cone) mass = std::pow(nz / query.radius, alpha);
            }
            acc.add(mass);
        }
        const double mean = acc.mean();
        if (!out.term_means.empty() && mean > out.term_means.back()) {
            if (++rising >= 5)
                throw RegimeError("nu_measure: term means rising for 5 consecutive terms");
        } else {
            rising = 0;
        }
        out.term_means.push_back(mean);
        total += mean;
        var += acc.std_error() * acc.std_error();
    }
    out.remainder_bound = out.term_means.back() * ea_alpha / (1.0 - ea_alpha);
    out.total = OracleResult{total, OracleMethod::spectral_mc,
                             static_cast<std::uint64_t>(n) * n_terms, std::sqrt(var)};
    return out;
}

// Heavy-B regime analogue, normalized by P(||B|| > t): the truncated series
// sum_k E[mu^B({b : Pi_k b in A})] with the radial part reduced to
// (||Pi_k Theta_B||/u)^alpha. Requires E||A||^alpha < 1 for the truncation
// to make sense; the same divergence guard as nu_measure applies.
inline NuResult heavy_b_measure(const SreModel& model, const RegVarSpec& b_spec,
                                const LimitMeasureQuery& query, std::size_t n_terms,
                                std::size_t n, RngKey key) {
    model.validate();
    b_spec.validate();
    query.validate();
    if (model.regime != SreRegime::heavy_b)
        throw RegimeError("heavy_b_measure: requires the heavy-B regime");
    if (n_terms == 0 || n == 0)
        throw std::domain_error("heavy_b_measure: need n_terms >= 1 and n >= 1");
    const int d = model.dim;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    if (b_spec.dimension != d) throw ConfigError("heavy_b_measure: B spec dimension mismatch");
    const double alpha = b_spec.tail.alpha;

    NuResult out;
    std::vector<double> a(dd), b(d), pi(dd), pi_next(dd), theta_b(d), z(d), dir(d);
    double total = 0.0, var = 0.0;
    int rising = 0;
    for (std::size_t m = 0; m < n_terms; ++m) {
        RngStream rng = key.sub(m).make_stream();
        detail::MeanAcc acc;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dd; ++j) pi[j] = 0.0;
            for (int q = 0; q < d; ++q) pi[static_cast<std::size_t>(q) * d + q] = 1.0;
            for (std::size_t f = 0; f < m; ++f) {
                model.joint_sampler(rng, a, b);
                mat_mul(pi, d, d, a, d, d, pi_next);
                std::swap(pi, pi_next);
            }
            b_spec.spectral.sample(rng, theta_b);
            mat_mul(pi, d, d, theta_b, d, 1, z);
            const double nz = euclidean_norm(z);
            double mass = 0.0;
            if (nz > 0.0) {
                bool in_cone = true;
                if (query.cone) {
                    for (int q = 0; q < d; ++q) dir[q] = z[q] / nz;
                    in_cone = query.cone(dir);
                }
                if (in_cone) mass = std::pow(nz / query.radius, alpha);
            }
            acc.add(mass);
        }
        const double mean = acc.mean();
        if (!out.term_means.empty() && mean > out.term_means.back()) {
            if (++rising >= 5)
                throw RegimeError("heavy_b_measure: term means rising for 5 consecutive terms");
        } else {
            rising = 0;
        }
        out.term_means.push_back(mean);
        total += mean;
        var += acc.std_error() * acc.std_error();
    }
    const double last = out.term_means.back();
    const double first = out.term_means.front();
    double decay = 0.0;  // per-term geometric rate estimated from the run
    if (n_terms > 1 && first > 0.0 && last > 0.0)
        decay = std::fmin(std::pow(last / first, 1.0 / static_cast<double>(n_terms - 1)), 0.99);
    out.remainder_bound = last * decay / (1.0 - decay);
    out.total = OracleResult{total, OracleMethod::spectral_mc,
                             static_cast<std::uint64_t>(n) * n_terms, std::sqrt(var)};
    return out;
}

// One-step lemma check: the empirical tail ratio of ||A X + B|| against the
// pair norm (lhs) versus the spectral-MC evaluation of its limit constant
// E[mu^{(A,B)}({||a X + b|| > u})] + d_X E||A||^alpha u^{-alpha} (rhs).
inline std::pair<OracleResult, OracleResult> one_step_check(const SreModel& model,
                                                            const RegVarSpec& x_spec, double d_x,
                                                            const LimitMeasureQuery& query,
                                                            std::size_t n, RngKey key,
                                                            double threshold_quantile = 0.999) {
    model.validate();
    x_spec.validate();
    query.validate();
    if (!(d_x > 0.0)) throw std::domain_error("one_step_check: d_x must be positive");
    if (n < 1000) throw std::domain_error("one_step_check: need n >= 1000");
    const int d = model.dim;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    if (x_spec.dimension != d) throw ConfigError("one_step_check: X dimension mismatch");
    const double alpha = model.declared_tail.tail.alpha;

    OracleResult lhs;
    {
        RngStream rng = key.sub(1).make_stream();
        const RadiusLaw x_law = x_spec.radius_law();
        std::vector<double> a(dd), b(d), x(d), ax(d), pair_norms(n), axb_norms(n);
        std::vector<double> xdir(d);
        for (std::size_t i = 0; i < n; ++i) {
            model.joint_sampler(rng, a, b);
            const double r = x_law.sample(rng);
            x_spec.spectral.sample(rng, xdir);
            for (int q = 0; q < d; ++q) x[q] = r * xdir[q];
            mat_mul(a, d, d, x, d, 1, ax);
            for (int q = 0; q < d; ++q) ax[q] += b[q];
            axb_norms[i] = euclidean_norm(ax);
            pair_norms[i] = operator_norm(a, d, d) + euclidean_norm(b);
        }
        const double t = empirical_quantile(pair_norms, threshold_quantile);
        const auto est = tail_ratio(axb_norms, pair_norms, t);
        lhs = OracleResult{est.value, OracleMethod::spectral_mc, n,
                           0.5 * (est.ci_high - est.ci_low) / kNormalZ95};
    }

    OracleResult rhs;
    {
        RngStream rng = key.sub(2).make_stream();
        const RadiusLaw x_law = x_spec.radius_law();
        const SphereDist& pair_spectral = model.declared_tail.spectral;
        std::vector<double> theta(dd + d), x(d), xdir(d), w(d), a(dd), b(d);
        detail::MeanAcc mass_acc, ea_acc;
        for (std::size_t i = 0; i < n; ++i) {
            pair_spectral.sample(rng, theta);
            const double r = x_law.sample(rng);
            x_spec.spectral.sample(rng, xdir);
            for (int q = 0; q < d; ++q) x[q] = r * xdir[q];
            std::span<const double> theta_a(theta.data(), dd);
            std::span<const double> theta_b(theta.data() + dd, static_cast<std::size_t>(d));
            mat_mul(theta_a, d, d, x, d, 1, w);
            for (int q = 0; q < d; ++q) w[q] += theta_b[q];
            const double nw = euclidean_norm(w);
            mass_acc.add(nw > 0.0 ? std::pow(nw / query.radius, alpha) : 0.0);
            model.joint_sampler(rng, a, b);
            ea_acc.add(std::pow(operator_norm(a, d, d), alpha));
        }
        const double u_pow = std::pow(query.radius, -alpha);
        const double value = mass_acc.mean() + d_x * ea_acc.mean() * u_pow;
        const double se = std::sqrt(mass_acc.std_error() * mass_acc.std_error() +
                                    d_x * d_x * u_pow * u_pow * ea_acc.std_error() * ea_acc.std_error());
        rhs = OracleResult{value, OracleMethod::spectral_mc, n, se};
    }
    return {lhs, rhs};
}

}  // namespace rvlab
