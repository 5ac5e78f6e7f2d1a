#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rvlab/errors.hpp"
#include "rvlab/homogeneous_maps.hpp"
#include "rvlab/quadrature.hpp"
#include "rvlab/rv_core.hpp"

namespace rvlab {

enum class OracleMethod { enumeration, spectral_mc };

inline const char* oracle_method_name(OracleMethod m) {
    return m == OracleMethod::enumeration ? "enumeration" : "spectral-mc";
}

struct OracleResult {
    double value = 0.0;
    OracleMethod method = OracleMethod::spectral_mc;
    std::uint64_t n = 0;  // samples (mc) or atoms/tuples (enumeration)
    double std_error = 0.0;
};

// Sampleable positive scalar law, usable both as a light factor in Breiman
// products and as an SRE coefficient law. Discrete laws expose their atoms so
// oracles can enumerate instead of sample.
class ScalarLaw {
public:
    enum class Kind { constant, discrete, lognormal, scaled_radius };

    static ScalarLaw constant(double v) {
        if (!(v >= 0.0)) throw ConfigError("ScalarLaw: constant must be nonnegative");
        ScalarLaw l;
        l.kind_ = Kind::constant;
        l.values_ = {v};
        l.probs_ = {1.0};
        return l;
    }

    static ScalarLaw discrete(std::vector<double> values, std::vector<double> probs) {
        if (values.empty() || values.size() != probs.size())
            throw ConfigError("ScalarLaw: values/probs must be nonempty and aligned");
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] >= 0.0)) throw ConfigError("ScalarLaw: negative atom");
            if (probs[i] < 0.0) throw ConfigError("ScalarLaw: negative probability");
            s += probs[i];
        }
        if (std::abs(s - 1.0) > 1e-12) throw ConfigError("ScalarLaw: probabilities must sum to 1");
        ScalarLaw l;
        l.kind_ = Kind::discrete;
        l.values_ = std::move(values);
        l.probs_ = std::move(probs);
        return l;
    }

    static ScalarLaw lognormal(double mu, double sigma) {
        if (!(sigma > 0.0)) throw ConfigError("ScalarLaw: lognormal sigma must be positive");
        ScalarLaw l;
        l.kind_ = Kind::lognormal;
        l.mu_ = mu;
        l.sigma_ = sigma;
        return l;
    }

    // multiplier * R with R from the given radius law.
    static ScalarLaw scaled_radius(TailIndex tail, SlowlyVaryingSpec sv, double multiplier) {
        if (!(multiplier > 0.0)) throw ConfigError("ScalarLaw: multiplier must be positive");
        ScalarLaw l;
        l.kind_ = Kind::scaled_radius;
        l.radius_.emplace(tail, sv);
        l.multiplier_ = multiplier;
        return l;
    }

    // multiplier chosen so that E[(m R)^order] equals the target moment.
    static ScalarLaw scaled_radius_with_moment(TailIndex tail, SlowlyVaryingSpec sv,
                                               double order, double target) {
        const RadiusLaw law(tail, sv);
        const double base = law.moment(order);
        if (!std::isfinite(base))
            throw ConfigError("ScalarLaw: base law has no finite moment of that order");
        return scaled_radius(tail, sv, std::pow(target / base, 1.0 / order));
    }

    Kind kind() const { return kind_; }
    bool is_discrete() const { return kind_ == Kind::constant || kind_ == Kind::discrete; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& probs() const { return probs_; }
    double multiplier() const { return multiplier_; }
    const RadiusLaw& radius() const { return *radius_; }

    double sample(RngStream& rng) const {
        switch (kind_) {
            case Kind::constant:
                return values_[0];
            case Kind::discrete: {
                const double u = rng.uniform();
                double acc = 0.0;
                for (std::size_t i = 0; i < values_.size(); ++i) {
                    acc += probs_[i];
                    if (u <= acc) return values_[i];
                }
                return values_.back();
            }
            case Kind::lognormal:
                return std::exp(mu_ + sigma_ * rng.normal());
            case Kind::scaled_radius:
                return multiplier_ * radius_->sample(rng);
        }
        return 0.0;
    }

    // E[Y^p] through an integration route independent of the sampler:
    // enumeration for discrete laws, adaptive quadrature otherwise.
    double moment_quadrature(double p) const {
        switch (kind_) {
            case Kind::constant:
            case Kind::discrete: {
                double s = 0.0;
                for (std::size_t i = 0; i < values_.size(); ++i)
                    s += probs_[i] * std::pow(values_[i], p);
                return s;
            }
            case Kind::lognormal: {
                const double peak = mu_ + p * sigma_ * sigma_;
                const double lo = peak - 14.0 * sigma_;
                const double hi = peak + 14.0 * sigma_;
                const double inv = 1.0 / (sigma_ * std::sqrt(2.0 * std::numbers::pi));
                auto f = [&](double z) {
                    const double d = (z - mu_) / sigma_;
                    return inv * std::exp(p * z - 0.5 * d * d);
                };
                return integrate(f, lo, hi, 1e-12 * std::exp(p * peak));
            }
            case Kind::scaled_radius:
                return std::pow(multiplier_, p) * radius_->moment(p);
        }
        return 0.0;
    }

private:
    ScalarLaw() = default;

    Kind kind_ = Kind::constant;
    std::vector<double> values_;
    std::vector<double> probs_;
    double mu_ = 0.0, sigma_ = 1.0;
    std::optional<RadiusLaw> radius_;
    double multiplier_ = 1.0;
};

// E[Y^alpha] with a standard error; exact enumeration for discrete laws.
// The caller is responsible for the moment condition that makes the Breiman
// limit valid (E[Y^{alpha+delta}] finite).
inline OracleResult breiman_constant(const ScalarLaw& y_law, TailIndex tail, std::size_t n,
                                     RngStream& rng) {
    if (y_law.is_discrete()) {
        const double v = y_law.moment_quadrature(tail.alpha);
        return OracleResult{v, OracleMethod::enumeration,
                            static_cast<std::uint64_t>(y_law.values().size()), 0.0};
    }
    if (n == 0) throw std::domain_error("breiman_constant: n must be >= 1");
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::pow(y_law.sample(rng), tail.alpha);
        s += v;
        s2 += v * v;
    }
    const double mean = s / static_cast<double>(n);
    const double var = std::fmax(s2 / static_cast<double>(n) - mean * mean, 0.0);
    return OracleResult{mean, OracleMethod::spectral_mc, n,
                        std::sqrt(var / static_cast<double>(n))};
}

// Limit of P(XY > t)/P(X > t) under equal indices: E[X^a] + c0 E[Y^a].
inline double product_limit_constant(double ex_alpha, double ey_alpha, double c0) {
    if (!std::isfinite(ex_alpha) || !std::isfinite(ey_alpha))
        throw std::domain_error("product_limit_constant: moments must be finite");
    if (c0 < 0.0) throw std::domain_error("product_limit_constant: c0 must be >= 0");
    return ex_alpha + c0 * ey_alpha;
}

// Evaluation set {z : ||z|| > u, z/||z|| in cone}; the default cone accepts
// every direction.
struct LimitMeasureQuery {
    double radius = 1.0;
    std::function<bool(std::span<const double>)> cone;

    void validate() const {
        if (!(radius > 0.0)) throw std::domain_error("LimitMeasureQuery: radius must be positive");
    }

    bool in_cone(std::span<const double> dir) const { return !cone || cone(dir); }
};

namespace detail {

struct MeanAcc {
    double sum = 0.0, sum2 = 0.0;
    std::uint64_t count = 0;

    void add(double v) {
        sum += v;
        sum2 += v * v;
        ++count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double std_error() const {
        if (count < 2) return 0.0;
        const double m = mean();
        const double var = std::fmax(sum2 / static_cast<double>(count) - m * m, 0.0);
        return std::sqrt(var / static_cast<double>(count));
    }
};

// mu^X({x : psi(x, y_fixed) in A}) for A = {||z|| > u} \cap cone, reduced in
// closed form through the radial part of the polar measure:
// (||psi(theta_x, y)||/u)^{alpha/a} when psi != 0, else 0. The direction of
// psi(r theta_x, y) does not depend on r, so the cone test uses the unit
// direction of psi itself.
inline double polar_mass(const HomogeneousMap& map, std::span<const double> z_value,
                         double exponent, const LimitMeasureQuery& query,
                         std::vector<double>& dir_scratch) {
    const double nz = map.norm_of_z(z_value);
    if (!(nz > 0.0)) return 0.0;
    if (query.cone) {
        for (std::size_t j = 0; j < z_value.size(); ++j) dir_scratch[j] = z_value[j] / nz;
        if (!query.cone(dir_scratch)) return 0.0;
    }
    return std::pow(nz / query.radius, exponent);
}

}  // namespace detail

// The three-term limit measure of Theorem-type product mappings evaluated on
// {||z|| > u} \cap cone:
//   (1 - c_X momY - c_Y momX) E[mu^X(psi(., Theta_Y) in A)]
//   + c_X E[mu^X(psi(., Y) in A)] + c_Y E[mu^Y(psi(X, .) in A)]
// with every radial integral reduced analytically; only spherical parts are
// sampled. momY = E||Y||^{alpha_X a_Y / a_X}, momX = E||X||^{alpha_Y a_X / a_Y}.
// Routes to exact enumeration when only the first term is active and both
// spectral laws are discrete with at most 10^6 atom pairs.
inline OracleResult eta_measure(const HomogeneousMap& map, const RegVarSpec& spec_x,
                                const RegVarSpec& spec_y, double c_x, double c_y, double mom_y,
                                double mom_x, const LimitMeasureQuery& query, std::size_t n,
                                RngKey key) {
    map.validate();
    spec_x.validate();
    spec_y.validate();
    query.validate();
    if (spec_x.dimension != map.d_x || spec_y.dimension != map.d_y)
        throw ConfigError("eta_measure: spec dimensions do not match the map");
    if (c_x != 0.0 && !std::isfinite(mom_y))
        throw std::domain_error("eta_measure: momY must be finite when c_X != 0");
    if (c_y != 0.0 && !std::isfinite(mom_x))
        throw std::domain_error("eta_measure: momX must be finite when c_Y != 0");
    const double exp_x = spec_x.tail.alpha / map.deg_x;
    const double exp_y = spec_y.tail.alpha / map.deg_y;
    const double coef1 =
        1.0 - (c_x != 0.0 ? c_x * mom_y : 0.0) - (c_y != 0.0 ? c_y * mom_x : 0.0);

    std::vector<double> z(map.d_z), dir(map.d_z);

    const bool both_discrete =
        (spec_x.spectral.sampler == SphereSampler::discrete_atoms ||
         spec_x.spectral.sampler == SphereSampler::custom_table) &&
        (spec_y.spectral.sampler == SphereSampler::discrete_atoms ||
         spec_y.spectral.sampler == SphereSampler::custom_table);
    if (c_x == 0.0 && c_y == 0.0 && both_discrete &&
        spec_x.spectral.atoms.size() * spec_y.spectral.atoms.size() <= 1000000) {
        double total = 0.0;
        for (std::size_t i = 0; i < spec_x.spectral.atoms.size(); ++i) {
            for (std::size_t j = 0; j < spec_y.spectral.atoms.size(); ++j) {
                apply_map(map, spec_x.spectral.atoms[i], spec_y.spectral.atoms[j], z);
                total += spec_x.spectral.probs[i] * spec_y.spectral.probs[j] *
                         detail::polar_mass(map, z, exp_x, query, dir);
            }
        }
        return OracleResult{coef1 * total, OracleMethod::enumeration,
                            spec_x.spectral.atoms.size() * spec_y.spectral.atoms.size(), 0.0};
    }

    if (n == 0) throw std::domain_error("eta_measure: n must be >= 1");
    std::vector<double> x(map.d_x), y(map.d_y);

    detail::MeanAcc term1;
    {
        RngStream rng = key.sub(1).make_stream();
        for (std::size_t i = 0; i < n; ++i) {
            spec_x.spectral.sample(rng, x);
            spec_y.spectral.sample(rng, y);
            apply_map(map, x, y, z);
            term1.add(detail::polar_mass(map, z, exp_x, query, dir));
        }
    }
    detail::MeanAcc term2;
    if (c_x != 0.0) {
        RngStream rng = key.sub(2).make_stream();
        const RadiusLaw law_y = spec_y.radius_law();
        for (std::size_t i = 0; i < n; ++i) {
            spec_x.spectral.sample(rng, x);
            const double r = law_y.sample(rng);
            spec_y.spectral.sample(rng, y);
            for (auto& v : y) v *= r;
            apply_map(map, x, y, z);
            term2.add(detail::polar_mass(map, z, exp_x, query, dir));
        }
    }
    detail::MeanAcc term3;
    if (c_y != 0.0) {
        RngStream rng = key.sub(3).make_stream();
        const RadiusLaw law_x = spec_x.radius_law();
        for (std::size_t i = 0; i < n; ++i) {
            const double r = law_x.sample(rng);
            spec_x.spectral.sample(rng, x);
            for (auto& v : x) v *= r;
            spec_y.spectral.sample(rng, y);
            apply_map(map, x, y, z);
            term3.add(detail::polar_mass(map, z, exp_y, query, dir));
        }
    }

    const double value = coef1 * term1.mean() + c_x * term2.mean() + c_y * term3.mean();
    const double se = std::sqrt(coef1 * coef1 * term1.std_error() * term1.std_error() +
                                c_x * c_x * term2.std_error() * term2.std_error() +
                                c_y * c_y * term3.std_error() * term3.std_error());
    return OracleResult{value, OracleMethod::spectral_mc, n, se};
}

// Two independent estimates of the same limit-measure mass, one integrating
// the radial part on the X side, one on the Y side. Requires matching
// indices alpha_X/a_X = alpha_Y/a_Y; the change of variables makes the two
// integrals equal in the limit.
inline std::pair<OracleResult, OracleResult> symmetry_check(const HomogeneousMap& map,
                                                            const RegVarSpec& spec_x,
                                                            const RegVarSpec& spec_y,
                                                            const LimitMeasureQuery& query,
                                                            std::size_t n, RngKey key) {
    map.validate();
    spec_x.validate();
    spec_y.validate();
    query.validate();
    const double exp_x = spec_x.tail.alpha / map.deg_x;
    const double exp_y = spec_y.tail.alpha / map.deg_y;
    if (std::abs(exp_x - exp_y) > 1e-9 * std::fmax(exp_x, exp_y))
        throw std::domain_error("symmetry_check: alpha_X/a_X must equal alpha_Y/a_Y");
    if (n == 0) throw std::domain_error("symmetry_check: n must be >= 1");

    std::vector<double> x(map.d_x), y(map.d_y), z(map.d_z), dir(map.d_z);
    detail::MeanAcc side_x, side_y;
    {
        RngStream rng = key.sub(1).make_stream();
        for (std::size_t i = 0; i < n; ++i) {
            spec_x.spectral.sample(rng, x);
            spec_y.spectral.sample(rng, y);
            apply_map(map, x, y, z);
            side_x.add(detail::polar_mass(map, z, exp_x, query, dir));
        }
    }
    {
        RngStream rng = key.sub(2).make_stream();
        for (std::size_t i = 0; i < n; ++i) {
            spec_x.spectral.sample(rng, x);
            spec_y.spectral.sample(rng, y);
            apply_map(map, x, y, z);
            side_y.add(detail::polar_mass(map, z, exp_y, query, dir));
        }
    }
    return {OracleResult{side_x.mean(), OracleMethod::spectral_mc, n, side_x.std_error()},
            OracleResult{side_y.mean(), OracleMethod::spectral_mc, n, side_y.std_error()}};
}

namespace detail {

inline int square_matrix_dim(const SphereDist& spectral) {
    const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(spectral.dimension))));
    if (d * d != spectral.dimension || spectral.norm_kind != NormKind::op)
        throw ConfigError("spectral law must be square-matrix valued under the operator norm");
    return d;
}

inline bool spectral_is_discrete(const SphereDist& s) {
    return s.sampler == SphereSampler::discrete_atoms || s.sampler == SphereSampler::custom_table;
}

inline std::uint64_t tuple_count(std::size_t atoms, int n_factors, std::uint64_t cap) {
    std::uint64_t total = 1;
    for (int i = 0; i < n_factors; ++i) {
        total *= atoms;
        if (total > cap) return cap + 1;
    }
    return total;
}

}  // namespace detail

// E|| Theta_{A_1} ... Theta_{A_n} ||^alpha over iid spectral factors;
// exhaustive enumeration for discrete laws up to 10^6 tuples.
inline OracleResult product_norm_constant(const SphereDist& spectral, TailIndex tail,
                                          int n_factors, std::size_t n, RngStream& rng) {
    spectral.validate();
    const int d = detail::square_matrix_dim(spectral);
    if (n_factors < 1) throw std::domain_error("product_norm_constant: n_factors must be >= 1");
    const std::size_t dd = static_cast<std::size_t>(d) * d;

    if (detail::spectral_is_discrete(spectral) &&
        detail::tuple_count(spectral.atoms.size(), n_factors, 1000000) <= 1000000) {
        std::vector<std::size_t> idx(n_factors, 0);
        std::vector<double> prod(dd), next(dd);
        double total = 0.0;
        std::uint64_t tuples = 0;
        while (true) {
            double p = 1.0;
            prod = spectral.atoms[idx[0]];
            p *= spectral.probs[idx[0]];
            for (int f = 1; f < n_factors; ++f) {
                mat_mul(prod, d, d, spectral.atoms[idx[f]], d, d, next);
                std::swap(prod, next);
                p *= spectral.probs[idx[f]];
            }
            total += p * std::pow(operator_norm(prod, d, d), tail.alpha);
            ++tuples;
            int pos = n_factors - 1;
            while (pos >= 0 && ++idx[pos] == spectral.atoms.size()) idx[pos--] = 0;
            if (pos < 0) break;
        }
        return OracleResult{total, OracleMethod::enumeration, tuples, 0.0};
    }

    if (n == 0) throw std::domain_error("product_norm_constant: n must be >= 1");
    detail::MeanAcc acc;
    std::vector<double> factor(dd), prod(dd), next(dd);
    for (std::size_t i = 0; i < n; ++i) {
        spectral.sample(rng, prod);
        for (int f = 1; f < n_factors; ++f) {
            spectral.sample(rng, factor);
            mat_mul(prod, d, d, factor, d, d, next);
            std::swap(prod, next);
        }
        acc.add(std::pow(operator_norm(prod, d, d), tail.alpha));
    }
    return OracleResult{acc.mean(), OracleMethod::spectral_mc, n, acc.std_error()};
}

// The spectral law of the n-fold product: directions Theta_1...Theta_n
// normalized, weighted by ||Theta_1...Theta_n||^alpha; zero products are
// dropped and the weights renormalized.
inline SphereDist product_spectral_law(const SphereDist& spectral, TailIndex tail, int n_factors,
                                       std::size_t n, RngStream& rng) {
    spectral.validate();
    const int d = detail::square_matrix_dim(spectral);
    if (n_factors < 1) throw std::domain_error("product_spectral_law: n_factors must be >= 1");
    const std::size_t dd = static_cast<std::size_t>(d) * d;

    SphereDist out;
    out.dimension = spectral.dimension;
    out.norm_kind = NormKind::op;
    out.sampler = SphereSampler::custom_table;

    auto push_atom = [&](std::span<const double> prod, double weight) {
        const double nrm = operator_norm(prod, d, d);
        if (!(nrm > 0.0)) return;
        const double w = weight * std::pow(nrm, tail.alpha);
        std::vector<double> direction(prod.size());
        for (std::size_t j = 0; j < prod.size(); ++j) direction[j] = prod[j] / nrm;
        for (std::size_t a = 0; a < out.atoms.size(); ++a) {
            double dist = 0.0;
            for (std::size_t j = 0; j < direction.size(); ++j)
                dist = std::fmax(dist, std::abs(out.atoms[a][j] - direction[j]));
            if (dist <= 1e-12) {
                out.probs[a] += w;
                return;
            }
        }
        out.atoms.push_back(std::move(direction));
        out.probs.push_back(w);
    };

    if (detail::spectral_is_discrete(spectral) &&
        detail::tuple_count(spectral.atoms.size(), n_factors, 1000000) <= 1000000) {
        std::vector<std::size_t> idx(n_factors, 0);
        std::vector<double> prod(dd), next(dd);
        while (true) {
            double p = spectral.probs[idx[0]];
            prod = spectral.atoms[idx[0]];
            for (int f = 1; f < n_factors; ++f) {
                mat_mul(prod, d, d, spectral.atoms[idx[f]], d, d, next);
                std::swap(prod, next);
                p *= spectral.probs[idx[f]];
            }
            push_atom(prod, p);
            int pos = n_factors - 1;
            while (pos >= 0 && ++idx[pos] == spectral.atoms.size()) idx[pos--] = 0;
            if (pos < 0) break;
        }
    } else {
        if (n == 0) throw std::domain_error("product_spectral_law: n must be >= 1");
        std::vector<double> factor(dd), prod(dd), next(dd);
        for (std::size_t i = 0; i < n; ++i) {
            spectral.sample(rng, prod);
            for (int f = 1; f < n_factors; ++f) {
                spectral.sample(rng, factor);
                mat_mul(prod, d, d, factor, d, d, next);
                std::swap(prod, next);
            }
            push_atom(prod, 1.0);
        }
    }

    double wsum = 0.0;
    for (double w : out.probs) wsum += w;
    if (!(wsum > 0.0))
        throw DegenerateLawError("product_spectral_law: every product had zero norm");
    for (auto& w : out.probs) w /= wsum;
    out.validate();
    return out;
}

// P(XY > t, M < X <= t/M) / P(X > t) for independent X ~ x_law and Y ~ y_law,
// by integrating P(X > max(t/y, M)) - P(X > t/M) over the Y law. The
// quadrature route is independent of any sampler.
inline double window_probability_oracle(const RadiusLaw& x_law, const ScalarLaw& y_law,
                                        double m_cut, double t) {
    if (!(m_cut > 1.0) || !(t > m_cut * m_cut))
        throw std::domain_error("window_probability_oracle: need M > 1 and t > M^2");
    auto window_given_y = [&](double y) {
        if (!(y > 0.0)) return 0.0;
        const double lo = std::fmax(t / y, m_cut);
        const double hi = t / m_cut;
        if (lo >= hi) return 0.0;
        return std::fmax(x_law.survival(lo) - x_law.survival(hi), 0.0);
    };
    double numer = 0.0;
    if (y_law.is_discrete()) {
        for (std::size_t i = 0; i < y_law.values().size(); ++i)
            numer += y_law.probs()[i] * window_given_y(y_law.values()[i]);
    } else if (y_law.kind() == ScalarLaw::Kind::scaled_radius) {
        const RadiusLaw& base = y_law.radius();
        const double mult = y_law.multiplier();
        // integrate against the Y density from its left endpoint up to the
        // largest y that can contribute (t/M < X forces y <= t/(M... window
        // needs t/y < t/M always true; upper limit where survival negligible)
        const double y_lo = mult * base.x0();
        const double y_hi = mult * base.inverse_survival(1e-14);
        auto f = [&](double y) { return base.density(y / mult) / mult * window_given_y(y); };
        numer = integrate(f, y_lo, y_hi, 1e-14);
    } else {
        throw ConfigError("window_probability_oracle: unsupported Y law");
    }
    return numer / x_law.survival(t);
}

struct EquivalentTailResult {
    OracleResult total;
    std::vector<double> weights;           // p_k, sum to 1
    std::vector<OracleResult> summands;    // E||Pi_{k-1} Theta_{A_k} Pi_{k+1,n}||^alpha
};

// Tail-equivalent product case: sum over the position of the spectral slot,
// with full iid draws of A in the remaining factors.
inline EquivalentTailResult equivalent_tail_constant(const RegVarSpec& spec, int n_factors,
                                                     std::size_t n, RngKey key) {
    spec.validate();
    const int d = detail::square_matrix_dim(spec.spectral);
    if (n_factors < 2) throw std::domain_error("equivalent_tail_constant: n_factors must be >= 2");
    if (n == 0) throw std::domain_error("equivalent_tail_constant: n must be >= 1");
    const RadiusLaw law = spec.radius_law();
    if (!std::isfinite(law.moment(spec.tail.alpha)))
        throw ConfigError("equivalent_tail_constant: declared law has E||A||^alpha = infinity");
    const std::size_t dd = static_cast<std::size_t>(d) * d;

    EquivalentTailResult result;
    result.summands.reserve(n_factors);
    double total = 0.0, var = 0.0;
    for (int k = 1; k <= n_factors; ++k) {
        RngStream rng = key.sub(static_cast<std::uint64_t>(k)).make_stream();
        detail::MeanAcc acc;
        std::vector<double> prod(dd), next(dd), factor(dd);
        for (std::size_t i = 0; i < n; ++i) {
            bool first = true;
            for (int f = 1; f <= n_factors; ++f) {
                if (f == k) {
                    spec.spectral.sample(rng, factor);
                } else {
                    const double r = law.sample(rng);
                    spec.spectral.sample(rng, factor);
                    for (auto& v : factor) v *= r;
                }
                if (first) {
                    prod = factor;
                    first = false;
                } else {
                    mat_mul(prod, d, d, factor, d, d, next);
                    std::swap(prod, next);
                }
            }
            acc.add(std::pow(operator_norm(prod, d, d), spec.tail.alpha));
        }
        result.summands.push_back(
            OracleResult{acc.mean(), OracleMethod::spectral_mc, n, acc.std_error()});
        total += acc.mean();
        var += acc.std_error() * acc.std_error();
    }
    result.total = OracleResult{total, OracleMethod::spectral_mc,
                                static_cast<std::uint64_t>(n) * n_factors, std::sqrt(var)};
    result.weights.resize(n_factors);
    for (int k = 0; k < n_factors; ++k) result.weights[k] = result.summands[k].value / total;
    return result;
}

}  // namespace rvlab
