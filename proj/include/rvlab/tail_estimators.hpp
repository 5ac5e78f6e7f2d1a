#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "rvlab/errors.hpp"
#include "rvlab/linalg.hpp"
#include "rvlab/rv_core.hpp"

namespace rvlab {

inline constexpr double kNormalZ95 = 1.959963984540054;

struct TailEstimate {
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double threshold = 0.0;
    std::uint64_t n_exceedances = 0;
    std::uint64_t n_total = 0;
};

// Deterministic empirical quantile: ascending order statistic at 1-based rank
// ceil(q * n).
inline double empirical_quantile(std::span<const double> samples, double q) {
    if (samples.empty()) throw std::domain_error("empirical_quantile: empty sample");
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("empirical_quantile: q must lie in (0,1)");
    std::vector<double> v(samples.begin(), samples.end());
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    rank = std::min(std::max<std::size_t>(rank, 1), v.size());
    std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
    return v[rank - 1];
}

// Hill estimator over the k largest order statistics:
// 1 / mean log(X_(i) / X_(k+1)); CI = value (1 +- z k^{-1/2}).
inline TailEstimate hill_estimate(std::span<const double> samples, std::size_t k) {
    const std::size_t n = samples.size();
    if (k < 2 || k >= n) throw std::domain_error("hill_estimate: need 2 <= k < n");
    std::vector<double> v(samples.begin(), samples.end());
    for (double x : v)
        if (!(x > 0.0)) throw std::domain_error("hill_estimate: samples must be positive");
    std::nth_element(v.begin(), v.begin() + k, v.end(), std::greater<double>());
    const double x_k1 = v[k];  // (k+1)-th largest
    double mean_log = 0.0;
    for (std::size_t i = 0; i < k; ++i) mean_log += std::log(v[i] / x_k1);
    mean_log /= static_cast<double>(k);
    const double value = mean_log > 0.0 ? 1.0 / mean_log : std::numeric_limits<double>::infinity();
    const double half = kNormalZ95 / std::sqrt(static_cast<double>(k));
    return TailEstimate{value, value * (1.0 - half), value * (1.0 + half), x_k1,
                        static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(n)};
}

namespace detail {

// Ratio of two binomial proportions with a delta-method CI.
inline TailEstimate ratio_estimate(std::uint64_t k_num, std::uint64_t n_num, std::uint64_t k_den,
                                   std::uint64_t n_den, double threshold) {
    const double p_num = static_cast<double>(k_num) / static_cast<double>(n_num);
    const double p_den = static_cast<double>(k_den) / static_cast<double>(n_den);
    const double value = p_num / p_den;
    double half = 0.0;
    if (k_num > 0) {
        const double rel_var = (1.0 - p_num) / (p_num * static_cast<double>(n_num)) +
                               (1.0 - p_den) / (p_den * static_cast<double>(n_den));
        half = kNormalZ95 * value * std::sqrt(rel_var);
    } else {
        half = kNormalZ95 * (1.0 / static_cast<double>(n_num)) / p_den;  // rule-of-thumb upper arm
    }
    return TailEstimate{value, value - half, value + half, threshold, k_num, n_num};
}

}  // namespace detail

// P(num > t) / P(den > t) from two (possibly unpaired) sample sets.
inline TailEstimate tail_ratio(std::span<const double> samples_num,
                               std::span<const double> samples_den, double t) {
    if (samples_num.empty() || samples_den.empty())
        throw std::domain_error("tail_ratio: empty sample");
    if (!(t > 0.0)) throw std::domain_error("tail_ratio: threshold must be positive");
    std::uint64_t k_num = 0, k_den = 0;
    for (double x : samples_num) k_num += x > t;
    for (double x : samples_den) k_den += x > t;
    if (k_den == 0)
        throw UndefinedRatioError("tail_ratio: no denominator exceedances", k_num, 0,
                                  samples_den.size());
    return detail::ratio_estimate(k_num, samples_num.size(), k_den, samples_den.size(), t);
}

// Balance constants of the product ||X||^{a_X} ||Y||^{a_Y}: inputs are the
// already-powered norm samples, paired elementwise.
inline std::pair<TailEstimate, TailEstimate> balance_constants(std::span<const double> x_pow,
                                                               std::span<const double> y_pow,
                                                               double t) {
    if (x_pow.size() != y_pow.size() || x_pow.empty())
        throw std::domain_error("balance_constants: need nonempty paired samples");
    if (!(t > 0.0)) throw std::domain_error("balance_constants: threshold must be positive");
    const std::size_t n = x_pow.size();
    std::uint64_t k_x = 0, k_y = 0, k_prod = 0;
    for (std::size_t i = 0; i < n; ++i) {
        k_x += x_pow[i] > t;
        k_y += y_pow[i] > t;
        k_prod += x_pow[i] * y_pow[i] > t;
    }
    if (k_prod == 0)
        throw UndefinedRatioError("balance_constants: no product exceedances", k_x + k_y, 0, n);
    return {detail::ratio_estimate(k_x, n, k_prod, n, t),
            detail::ratio_estimate(k_y, n, k_prod, n, t)};
}

// Empirical spectral law: directions of the samples whose norm exceeds the
// threshold, as a weighted atom table. Nearby directions (sup distance 1e-9)
// are merged.
inline SphereDist empirical_spectral(const SampleMatrix& samples, double threshold,
                                     NormKind norm_kind) {
    if (!(threshold > 0.0)) throw std::domain_error("empirical_spectral: threshold must be positive");
    SphereDist out;
    out.dimension = static_cast<int>(samples.dim);
    out.norm_kind = norm_kind;
    out.sampler = SphereSampler::custom_table;
    std::vector<std::uint64_t> counts;
    std::uint64_t n_exc = 0;
    std::vector<double> dir(samples.dim);
    for (std::size_t i = 0; i < samples.n; ++i) {
        const auto row = samples.row(i);
        const double nrm = norm(row, norm_kind);
        if (!(nrm > threshold)) continue;
        ++n_exc;
        for (std::size_t j = 0; j < dir.size(); ++j) dir[j] = row[j] / nrm;
        bool merged = false;
        for (std::size_t a = 0; a < out.atoms.size(); ++a) {
            double dist = 0.0;
            for (std::size_t j = 0; j < dir.size(); ++j)
                dist = std::fmax(dist, std::abs(out.atoms[a][j] - dir[j]));
            if (dist <= 1e-9) {
                ++counts[a];
                merged = true;
                break;
            }
        }
        if (!merged) {
            out.atoms.push_back(dir);
            counts.push_back(1);
        }
    }
    if (n_exc < 100)
        throw InsufficientDataError("empirical_spectral: too few exceedances", n_exc, 100);
    out.probs.resize(counts.size());
    for (std::size_t a = 0; a < counts.size(); ++a)
        out.probs[a] = static_cast<double>(counts[a]) / static_cast<double>(n_exc);
    return out;
}

// Finite-(M, t) value of the inner window quantity
// P(XY > t, M < X <= t/M) / P(X > t), paired samples. A diagnostic number,
// not a verdict: the double limit it probes cannot be certified from data.
inline double window_diagnostic(std::span<const double> x_samples,
                                std::span<const double> y_samples, double m_cut, double t) {
    if (x_samples.size() != y_samples.size() || x_samples.empty())
        throw std::domain_error("window_diagnostic: need nonempty paired samples");
    if (!(m_cut > 1.0)) throw std::domain_error("window_diagnostic: M must exceed 1");
    if (!(t > m_cut * m_cut)) throw std::domain_error("window_diagnostic: require t > M^2");
    std::uint64_t k_win = 0, k_x = 0;
    for (std::size_t i = 0; i < x_samples.size(); ++i) {
        const double x = x_samples[i];
        k_x += x > t;
        k_win += (x_samples[i] * y_samples[i] > t) && (m_cut < x) && (x <= t / m_cut);
    }
    if (k_x == 0)
        throw UndefinedRatioError("window_diagnostic: no X exceedances", k_win, 0,
                                  x_samples.size());
    return static_cast<double>(k_win) / static_cast<double>(k_x);
}

}  // namespace rvlab
