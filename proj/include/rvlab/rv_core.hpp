#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rvlab/errors.hpp"
#include "rvlab/linalg.hpp"
#include "rvlab/quadrature.hpp"
#include "rvlab/rng.hpp"

namespace rvlab {

struct TailIndex {
    double alpha = 1.0;

    TailIndex() = default;
    explicit TailIndex(double a) : alpha(a) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw std::domain_error("TailIndex: alpha must be a positive real");
    }
};

// Inverse survival function of the Pareto law P(Z > y) = y^{-alpha}, y >= 1.
inline double pareto_quantile(TailIndex tail, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("pareto_quantile: u must lie in (0,1)");
    return std::pow(u, -1.0 / tail.alpha);
}

enum class SvFamily { constant, log_power };

inline const char* sv_family_name(SvFamily f) {
    return f == SvFamily::constant ? "constant" : "log-power";
}

inline SvFamily parse_sv_family(const std::string& s) {
    if (s == "constant") return SvFamily::constant;
    if (s == "log-power") return SvFamily::log_power;
    throw ConfigError("unknown slowly varying family: " + s);
}

struct SlowlyVaryingSpec {
    SvFamily family = SvFamily::constant;
    double scale = 1.0;  // c
    double beta = 0.0;   // log exponent; log-power family only

    void validate() const {
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw ConfigError("SlowlyVaryingSpec: scale must be a positive real");
        if (family == SvFamily::log_power && !std::isfinite(beta))
            throw ConfigError("SlowlyVaryingSpec: beta must be finite");
    }
};

// Radius law with survival S(x) = c x^{-alpha} (log x)^beta on [x0, inf).
// x0 is the smallest point where S is <= 1 and nonincreasing; the law puts
// no mass below x0 (an atom sits at x0 when S(x0) < 1, which can only happen
// for beta > 0). Work happens on the w = log x axis where the survival is
// g(w) = log c - alpha w + beta log w.
class RadiusLaw {
public:
    RadiusLaw(TailIndex tail, SlowlyVaryingSpec sv)
        : alpha_(tail.alpha), sv_(sv), log_scale_(std::log(sv.scale)) {
        sv.validate();
        if (sv_.family == SvFamily::constant) {
            sv_.beta = 0.0;
            w0_ = log_scale_ / alpha_;
            x0_ = std::pow(sv_.scale, 1.0 / alpha_);
            log_surv_x0_ = 0.0;
        } else {
            const double w_peak = sv_.beta > 0.0 ? sv_.beta / alpha_ : 0.0;
            if (sv_.beta > 0.0 && log_survival_w(w_peak) <= 0.0) {
                w0_ = w_peak;  // survival already <= 1 where it turns monotone
            } else {
                double lo = sv_.beta > 0.0 ? w_peak : 1e-300;
                double hi = std::fmax(w_peak, std::fmax(log_scale_ / alpha_, 1.0)) + 1.0;
                while (log_survival_w(hi) > 0.0) hi *= 2.0;
                for (int i = 0; i < 200 && (hi - lo) > 1e-16 * hi; ++i) {
                    const double mid = 0.5 * (lo + hi);
                    (log_survival_w(mid) > 0.0 ? lo : hi) = mid;
                }
                w0_ = 0.5 * (lo + hi);
            }
            x0_ = std::exp(w0_);
            log_surv_x0_ = std::fmin(log_survival_w(w0_), 0.0);
        }
    }

    double alpha() const { return alpha_; }
    double x0() const { return x0_; }
    const SlowlyVaryingSpec& sv() const { return sv_; }

    // P(R > x); equals 1 below x0.
    double survival(double x) const {
        if (x <= x0_) return 1.0;
        return std::exp(log_survival_w(std::log(x)));
    }

    // Density of the absolutely continuous part, zero below x0.
    double density(double x) const {
        if (x <= x0_) return 0.0;
        const double w = std::log(x);
        double d = alpha_;
        if (sv_.family == SvFamily::log_power) d = alpha_ - sv_.beta / w;
        return std::exp(log_survival_w(w)) * d / x;
    }

    // Smallest x with S(x) <= u (so that P(sample > x) = u for u in the
    // continuous range). Constant family in closed form, log-power by
    // bracketed bisection refined with safeguarded Newton steps, 1e-12
    // relative.
    double inverse_survival(double u) const {
        if (!(u > 0.0 && u < 1.0))
            throw std::domain_error("inverse_survival: u must lie in (0,1)");
        if (sv_.family == SvFamily::constant)
            return x0_ * std::pow(u, -1.0 / alpha_);
        const double target = std::log(u);
        if (target >= log_surv_x0_) return x0_;
        double lo = w0_;
        // pure power-law guess; the log factor only shifts it by O(log w)
        double hi = std::fmax((log_scale_ - target) / alpha_, w0_) + 1.0;
        while (log_survival_w(hi) > target) hi = w0_ + 2.0 * (hi - w0_);
        double w = 0.5 * (lo + hi);
        for (int i = 0; i < 80; ++i) {
            const double g = log_survival_w(w) - target;
            if (g > 0.0) lo = w; else hi = w;
            const double gp = -alpha_ + sv_.beta / w;  // strictly negative beyond w0
            double w_next = w - g / gp;
            if (!(w_next > lo && w_next < hi)) w_next = 0.5 * (lo + hi);
            if (std::abs(w_next - w) <= 1e-13) {  // Delta(log x) is the relative error in x
                w = w_next;
                break;
            }
            w = w_next;
        }
        return std::exp(w);
    }

    double sample(RngStream& rng) const { return inverse_survival(rng.uniform()); }

    // E[R^p] = x0^p + p \int_{x0}^inf x^{p-1} S(x) dx, evaluated on the log
    // axis by adaptive quadrature plus an analytic tail. Returns +inf when
    // the moment diverges (p > alpha, or p = alpha without beta < -1).
    double moment(double p) const {
        if (!(p > 0.0)) throw std::domain_error("moment: order must be positive");
        const double head = std::pow(x0_, p);
        if (p > alpha_) return std::numeric_limits<double>::infinity();
        if (p == alpha_ && (sv_.family == SvFamily::constant || sv_.beta >= -1.0))
            return std::numeric_limits<double>::infinity();
        const double c = sv_.scale, beta = sv_.beta;
        if (p == alpha_) {
            // integrand reduces to c p w^beta exactly
            return head + c * p * std::pow(w0_, beta + 1.0) / (-(beta + 1.0));
        }
        const double rate = alpha_ - p;
        auto integrand = [&](double w) {
            const double logs = beta == 0.0 ? -rate * w : -rate * w + beta * std::log(w);
            return c * p * std::exp(logs);
        };
        const double w_cut = w0_ + (60.0 + 10.0 * std::fabs(beta)) / rate;
        const double body = integrate(integrand, w0_, w_cut, 1e-13 * head + 1e-300);
        const double tail = integrand(w_cut) / rate;  // exact for beta=0, first order otherwise
        return head + body + tail;
    }

private:
    double log_survival_w(double w) const {
        double v = log_scale_ - alpha_ * w;
        if (sv_.family == SvFamily::log_power && sv_.beta != 0.0) v += sv_.beta * std::log(w);
        return v;
    }

    double alpha_;
    SlowlyVaryingSpec sv_;
    double log_scale_;
    double x0_;
    double w0_;
    double log_surv_x0_;
};

enum class SphereSampler { uniform_sphere, discrete_atoms, rotation_group, custom_table };

inline const char* sphere_sampler_name(SphereSampler s) {
    switch (s) {
        case SphereSampler::uniform_sphere: return "uniform-sphere";
        case SphereSampler::discrete_atoms: return "discrete-atoms";
        case SphereSampler::rotation_group: return "rotation-group";
        case SphereSampler::custom_table: return "custom-table";
    }
    return "?";
}

inline SphereSampler parse_sphere_sampler(const std::string& s) {
    if (s == "uniform-sphere") return SphereSampler::uniform_sphere;
    if (s == "discrete-atoms") return SphereSampler::discrete_atoms;
    if (s == "rotation-group") return SphereSampler::rotation_group;
    if (s == "custom-table") return SphereSampler::custom_table;
    throw ConfigError("unknown spectral sampler: " + s);
}

// Distribution on the unit sphere of the declared norm. Every emitted sample
// has unit norm to 1e-12.
struct SphereDist {
    int dimension = 1;  // flattened length of emitted samples
    NormKind norm_kind = NormKind::euclidean;
    SphereSampler sampler = SphereSampler::uniform_sphere;
    std::vector<std::vector<double>> atoms;  // discrete-atoms / custom-table
    std::vector<double> probs;

    void validate() const {
        if (dimension <= 0) throw ConfigError("SphereDist: dimension must be positive");
        if (sampler == SphereSampler::rotation_group) {
            const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(dimension))));
            if (d * d != dimension)
                throw ConfigError("SphereDist: rotation-group needs a square matrix dimension");
            if (norm_kind != NormKind::op)
                throw ConfigError("SphereDist: rotation-group requires the operator norm");
        }
        if (sampler == SphereSampler::discrete_atoms || sampler == SphereSampler::custom_table) {
            if (atoms.empty() || atoms.size() != probs.size())
                throw ConfigError("SphereDist: atoms/probs must be nonempty and aligned");
            double psum = 0.0;
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                if (atoms[i].size() != static_cast<std::size_t>(dimension))
                    throw ConfigError("SphereDist: atom dimension mismatch");
                if (probs[i] < 0.0) throw ConfigError("SphereDist: negative atom probability");
                psum += probs[i];
                const double nrm = norm(std::span<const double>(atoms[i]), norm_kind);
                if (std::abs(nrm - 1.0) > 1e-12)
                    throw ConfigError("SphereDist: atom " + std::to_string(i) + " is not unit norm");
            }
            if (std::abs(psum - 1.0) > 1e-12)
                throw ConfigError("SphereDist: atom probabilities must sum to 1");
        }
    }

    void sample(RngStream& rng, std::span<double> out) const {
        if (out.size() != static_cast<std::size_t>(dimension))
            throw std::domain_error("SphereDist::sample: bad output size");
        switch (sampler) {
            case SphereSampler::uniform_sphere: {
                double nrm = 0.0;
                do {
                    for (auto& x : out) x = rng.normal();
                    nrm = norm(out, norm_kind);
                } while (nrm == 0.0);
                for (auto& x : out) x /= nrm;
                return;
            }
            case SphereSampler::rotation_group: {
                const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(dimension))));
                sample_haar_orthogonal(rng, d, out);
                return;
            }
            case SphereSampler::discrete_atoms:
            case SphereSampler::custom_table: {
                const double u = rng.uniform();
                double acc = 0.0;
                std::size_t pick = atoms.size() - 1;
                for (std::size_t i = 0; i < atoms.size(); ++i) {
                    acc += probs[i];
                    if (u <= acc) {
                        pick = i;
                        break;
                    }
                }
                for (std::size_t j = 0; j < out.size(); ++j) out[j] = atoms[pick][j];
                return;
            }
        }
    }
};

// Full parametric description of a regularly varying law, built as the exact
// polar product R * Theta so that the conditional direction law above any
// threshold equals the spectral law identically.
struct RegVarSpec {
    int dimension = 1;
    TailIndex tail{1.0};
    SlowlyVaryingSpec slowly_varying{};
    SphereDist spectral{};
    std::optional<std::pair<double, double>> balance;  // (p_plus, p_minus)

    void validate() const {
        if (dimension <= 0) throw ConfigError("RegVarSpec: dimension must be positive");
        if (!(tail.alpha > 0.0)) throw ConfigError("RegVarSpec: alpha must be positive");
        slowly_varying.validate();
        spectral.validate();
        if (spectral.dimension != dimension)
            throw ConfigError("RegVarSpec: spectral dimension != dimension");
        if (balance) {
            const auto [pp, pm] = *balance;
            if (pp < 0.0 || pm < 0.0 || pp > 1.0 || pm > 1.0 || std::abs(pp + pm - 1.0) > 1e-12)
                throw ConfigError("RegVarSpec: balance weights must be in [0,1] and sum to 1");
            if (dimension != 1) throw ConfigError("RegVarSpec: balance only applies to scalar laws");
        }
    }

    RadiusLaw radius_law() const { return RadiusLaw(tail, slowly_varying); }
};

inline std::vector<double> sample_radius(const RegVarSpec& spec, std::size_t n, RngStream& rng) {
    spec.validate();
    if (n == 0) throw std::domain_error("sample_radius: n must be >= 1");
    const RadiusLaw law = spec.radius_law();
    std::vector<double> out(n);
    for (auto& x : out) x = law.sample(rng);
    return out;
}

// R * Theta draws; each row's norm equals its radius draw exactly (up to
// floating point rounding of the product).
inline SampleMatrix sample_regvar_vector(const RegVarSpec& spec, std::size_t n, RngStream& rng) {
    spec.validate();
    if (n == 0) throw std::domain_error("sample_regvar_vector: n must be >= 1");
    const RadiusLaw law = spec.radius_law();
    SampleMatrix out(n, static_cast<std::size_t>(spec.dimension));
    std::vector<double> dir(spec.dimension);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = law.sample(rng);
        spec.spectral.sample(rng, dir);
        auto row = out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = r * dir[j];
    }
    return out;
}

// Signed scalar law: sign +1 with probability p_plus, independent of the
// magnitude, so both one-sided survivals are p_{+/-} times the radius survival.
inline std::vector<double> sample_tail_balanced_scalar(const RegVarSpec& spec, std::size_t n,
                                                       RngStream& rng) {
    spec.validate();
    if (!spec.balance) throw ConfigError("sample_tail_balanced_scalar: balance pair missing");
    if (spec.dimension != 1)
        throw ConfigError("sample_tail_balanced_scalar: requires a scalar law");
    if (n == 0) throw std::domain_error("sample_tail_balanced_scalar: n must be >= 1");
    const RadiusLaw law = spec.radius_law();
    const double p_plus = spec.balance->first;
    std::vector<double> out(n);
    for (auto& x : out) {
        const double r = law.sample(rng);
        x = rng.uniform() <= p_plus ? r : -r;
    }
    return out;
}

}  // namespace rvlab
