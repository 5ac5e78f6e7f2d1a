#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rvlab/errors.hpp"
#include "rvlab/homogeneous_maps.hpp"
#include "rvlab/rv_core.hpp"
#include "rvlab/sre_sim.hpp"
#include "rvlab/tail_estimators.hpp"
#include "rvlab/theory_oracles.hpp"

namespace rvlab {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Deterministic parallel execution: a fixed shard plan, one substream per
// shard, per-shard results merged in shard order. The outcome is identical
// for every worker count.
// ---------------------------------------------------------------------------

struct ShardPlan {
    std::uint64_t total = 0;
    int shards = 1;

    std::uint64_t begin(int s) const {
        const std::uint64_t base = total / shards, rem = total % shards;
        const std::uint64_t su = static_cast<std::uint64_t>(s);
        return su * base + std::min<std::uint64_t>(su, rem);
    }
    std::uint64_t count(int s) const { return begin(s + 1) - begin(s); }
};

inline int resolve_workers(int workers) {
    if (workers > 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

template <typename Result, typename Fn>
std::vector<Result> run_sharded(const ShardPlan& plan, int workers, Fn&& shard_fn) {
    std::vector<Result> results(plan.shards);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int s = next.fetch_add(1); s < plan.shards; s = next.fetch_add(1))
            results[s] = shard_fn(s, plan.begin(s), plan.count(s));
    };
    const int n_workers = std::min(resolve_workers(workers), plan.shards);
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return results;
}

// Mean accumulator with exact merge, usable as parallel_mc sufficient stats.
struct MeanStats {
    double sum = 0.0, sum2 = 0.0;
    std::uint64_t count = 0;

    void add(double v) {
        sum += v;
        sum2 += v * v;
        ++count;
    }
    MeanStats& merge(const MeanStats& o) {
        sum += o.sum;
        sum2 += o.sum2;
        count += o.count;
        return *this;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double std_error() const {
        if (count < 2) return 0.0;
        const double m = mean();
        return std::sqrt(std::fmax(sum2 / static_cast<double>(count) - m * m, 0.0) /
                         static_cast<double>(count));
    }
};

// Shards a pure per-draw task over substreams of `key` and merges the
// sufficient statistics by exact summation in shard order.
template <typename Stats, typename PerDraw>
Stats parallel_mc(std::uint64_t total, int shards, int workers, RngKey key, PerDraw&& per_draw) {
    if (shards < 1) throw std::domain_error("parallel_mc: shards must be >= 1");
    const ShardPlan plan{total, shards};
    auto results = run_sharded<Stats>(plan, workers, [&](int s, std::uint64_t, std::uint64_t n) {
        auto local_draw = per_draw;  // per-shard copy keeps captured scratch thread-local
        Stats st{};
        RngStream rng = key.sub(static_cast<std::uint64_t>(s)).make_stream();
        for (std::uint64_t i = 0; i < n; ++i) local_draw(rng, st);
        return st;
    });
    Stats merged{};
    for (const auto& r : results) merged.merge(r);
    return merged;
}

// ---------------------------------------------------------------------------
// Two-pass sharded ratio estimator. Pass 1 resolves the threshold as an exact
// order statistic of the denominator (per-shard top blocks merged globally);
// pass 2 replays the same streams and counts exceedances, optionally at
// sample-size checkpoints with the final threshold held fixed.
// ---------------------------------------------------------------------------

struct Checkpoint {
    std::uint64_t n = 0;
    double value = 0.0;
};

struct RatioRunResult {
    TailEstimate estimate;
    std::vector<Checkpoint> checkpoints;
};

// draw(rng, num, den) fills one (numerator, denominator) pair.
template <typename DrawFn>
RatioRunResult mc_tail_ratio(DrawFn&& draw, std::uint64_t n, double quantile, double u_scale,
                             RngKey key, int shards, int workers, bool with_checkpoints) {
    if (n < 100) throw std::domain_error("mc_tail_ratio: need n >= 100");
    if (!(quantile > 0.0 && quantile < 1.0))
        throw std::domain_error("mc_tail_ratio: quantile must lie in (0,1)");
    const std::uint64_t rank = static_cast<std::uint64_t>(
        std::ceil(quantile * static_cast<double>(n)));
    const std::uint64_t top_k = n - rank + 1;  // #values at or above the threshold
    const ShardPlan plan{n, shards};

    // pass 1: per-shard top blocks of the denominator. Each shard works on
    // its own copy of the draw functor: per-draw scratch buffers captured by
    // value stay thread-local.
    auto tops = run_sharded<std::vector<double>>(
        plan, workers, [&](int s, std::uint64_t, std::uint64_t count) {
            auto local_draw = draw;
            RngStream rng = key.sub(static_cast<std::uint64_t>(s)).make_stream();
            std::priority_queue<double, std::vector<double>, std::greater<double>> heap;
            double num = 0.0, den = 0.0;
            for (std::uint64_t i = 0; i < count; ++i) {
                local_draw(rng, num, den);
                if (heap.size() < top_k) {
                    heap.push(den);
                } else if (den > heap.top()) {
                    heap.pop();
                    heap.push(den);
                }
            }
            std::vector<double> v;
            v.reserve(heap.size());
            while (!heap.empty()) {
                v.push_back(heap.top());
                heap.pop();
            }
            return v;
        });
    std::vector<double> merged;
    for (const auto& t : tops) merged.insert(merged.end(), t.begin(), t.end());
    if (merged.size() < top_k) throw std::logic_error("mc_tail_ratio: top-k merge underflow");
    std::nth_element(merged.begin(), merged.begin() + (top_k - 1), merged.end(),
                     std::greater<double>());
    const double threshold = merged[top_k - 1];
    const double num_threshold = threshold * u_scale;

    // pass 2: replay the same streams and count exceedances
    std::vector<std::uint64_t> cp_levels;
    if (with_checkpoints)
        for (std::uint64_t level = 10000; level < n; level *= 10) cp_levels.push_back(level);
    cp_levels.push_back(n);

    struct Counts {
        std::vector<std::uint64_t> num, den;
    };
    auto counts = run_sharded<Counts>(
        plan, workers, [&](int s, std::uint64_t begin, std::uint64_t count) {
            auto local_draw = draw;
            RngStream rng = key.sub(static_cast<std::uint64_t>(s)).make_stream();
            Counts c{std::vector<std::uint64_t>(cp_levels.size(), 0),
                     std::vector<std::uint64_t>(cp_levels.size(), 0)};
            double num = 0.0, den = 0.0;
            for (std::uint64_t i = 0; i < count; ++i) {
                local_draw(rng, num, den);
                const std::uint64_t global = begin + i;
                const bool hit_num = num > num_threshold;
                const bool hit_den = den > threshold;
                if (!hit_num && !hit_den) continue;
                for (std::size_t l = 0; l < cp_levels.size(); ++l) {
                    if (global < cp_levels[l]) {
                        c.num[l] += hit_num;
                        c.den[l] += hit_den;
                    }
                }
            }
            return c;
        });
    std::vector<std::uint64_t> k_num(cp_levels.size(), 0), k_den(cp_levels.size(), 0);
    for (const auto& c : counts) {
        for (std::size_t l = 0; l < cp_levels.size(); ++l) {
            k_num[l] += c.num[l];
            k_den[l] += c.den[l];
        }
    }

    const std::size_t last = cp_levels.size() - 1;
    if (k_den[last] == 0)
        throw UndefinedRatioError("mc_tail_ratio: no denominator exceedances", k_num[last], 0, n);
    RatioRunResult out;
    out.estimate = detail::ratio_estimate(k_num[last], n, k_den[last], n, threshold);
    if (with_checkpoints) {
        for (std::size_t l = 0; l < cp_levels.size(); ++l) {
            if (k_den[l] == 0) continue;
            out.checkpoints.push_back(
                {cp_levels[l], static_cast<double>(k_num[l]) / static_cast<double>(k_den[l])});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Configuration (JSON) <-> domain objects
// ---------------------------------------------------------------------------

inline void to_json(json& j, const SphereDist& s) {
    j = json{{"dimension", s.dimension},
             {"norm", norm_kind_name(s.norm_kind)},
             {"sampler", sphere_sampler_name(s.sampler)}};
    if (!s.atoms.empty()) {
        j["atoms"] = s.atoms;
        j["probs"] = s.probs;
    }
}

inline void from_json(const json& j, SphereDist& s) {
    s.dimension = j.at("dimension").get<int>();
    s.norm_kind = parse_norm_kind(j.value("norm", "euclidean"));
    s.sampler = parse_sphere_sampler(j.at("sampler").get<std::string>());
    if (j.contains("atoms")) {
        s.atoms = j.at("atoms").get<std::vector<std::vector<double>>>();
        s.probs = j.at("probs").get<std::vector<double>>();
    }
}

inline void to_json(json& j, const RegVarSpec& s) {
    j = json{{"dimension", s.dimension},
             {"alpha", s.tail.alpha},
             {"sv_family", sv_family_name(s.slowly_varying.family)},
             {"sv_scale", s.slowly_varying.scale},
             {"sv_beta", s.slowly_varying.beta},
             {"spectral", s.spectral}};
    if (s.balance) j["balance"] = std::vector<double>{s.balance->first, s.balance->second};
}

inline void from_json(const json& j, RegVarSpec& s) {
    s.dimension = j.at("dimension").get<int>();
    s.tail = TailIndex(j.at("alpha").get<double>());
    s.slowly_varying.family = parse_sv_family(j.value("sv_family", "constant"));
    s.slowly_varying.scale = j.value("sv_scale", 1.0);
    s.slowly_varying.beta = j.value("sv_beta", 0.0);
    s.spectral = j.at("spectral").get<SphereDist>();
    if (j.contains("balance")) {
        const auto b = j.at("balance").get<std::vector<double>>();
        if (b.size() != 2) throw ConfigError("balance must have two entries");
        s.balance = {{b[0], b[1]}};
    }
    s.validate();
}

// Scalar law description; "scaled-radius" resolves a moment target into the
// multiplier through the quadrature moment.
struct ScalarLawSpec {
    std::string type = "constant";
    double value = 1.0;
    std::vector<double> values, probs;
    double mu = 0.0, sigma = 1.0;
    double alpha = 1.0, sv_scale = 1.0, sv_beta = 0.0;
    std::string sv_family = "constant";
    double multiplier = 1.0;
    std::optional<double> moment_target;
    double moment_order = 1.0;

    ScalarLaw build() const {
        if (type == "constant") return ScalarLaw::constant(value);
        if (type == "discrete") return ScalarLaw::discrete(values, probs);
        if (type == "lognormal") return ScalarLaw::lognormal(mu, sigma);
        if (type == "scaled-radius") {
            const SlowlyVaryingSpec sv{parse_sv_family(sv_family), sv_scale, sv_beta};
            if (moment_target)
                return ScalarLaw::scaled_radius_with_moment(TailIndex(alpha), sv, moment_order,
                                                            *moment_target);
            return ScalarLaw::scaled_radius(TailIndex(alpha), sv, multiplier);
        }
        throw ConfigError("unknown scalar law type: " + type);
    }
};

inline void to_json(json& j, const ScalarLawSpec& s) {
    j = json{{"type", s.type}};
    if (s.type == "constant") j["value"] = s.value;
    if (s.type == "discrete") {
        j["values"] = s.values;
        j["probs"] = s.probs;
    }
    if (s.type == "lognormal") {
        j["mu"] = s.mu;
        j["sigma"] = s.sigma;
    }
    if (s.type == "scaled-radius") {
        j["alpha"] = s.alpha;
        j["sv_family"] = s.sv_family;
        j["sv_scale"] = s.sv_scale;
        j["sv_beta"] = s.sv_beta;
        if (s.moment_target) {
            j["moment_target"] = *s.moment_target;
            j["moment_order"] = s.moment_order;
        } else {
            j["multiplier"] = s.multiplier;
        }
    }
}

inline void from_json(const json& j, ScalarLawSpec& s) {
    s.type = j.at("type").get<std::string>();
    s.value = j.value("value", 1.0);
    if (j.contains("values")) s.values = j.at("values").get<std::vector<double>>();
    if (j.contains("probs")) s.probs = j.at("probs").get<std::vector<double>>();
    s.mu = j.value("mu", 0.0);
    s.sigma = j.value("sigma", 1.0);
    s.alpha = j.value("alpha", 1.0);
    s.sv_family = j.value("sv_family", "constant");
    s.sv_scale = j.value("sv_scale", 1.0);
    s.sv_beta = j.value("sv_beta", 0.0);
    s.multiplier = j.value("multiplier", 1.0);
    if (j.contains("moment_target")) {
        s.moment_target = j.at("moment_target").get<double>();
        s.moment_order = j.value("moment_order", 1.0);
    }
}

struct MapSpec {
    std::string kind = "matrix-product";
    int n1 = 2, d1 = 2, m1 = 2;  // matrix-product
    int d_x = 2, d_y = 2;        // kronecker
    int d = 2;                   // quadratic-form

    HomogeneousMap build() const {
        if (kind == "matrix-product") return HomogeneousMap::matrix_product(n1, d1, m1);
        if (kind == "kronecker") return HomogeneousMap::kronecker(d_x, d_y);
        if (kind == "quadratic-form") return HomogeneousMap::quadratic_form(d);
        throw ConfigError("unknown or non-serializable map kind: " + kind);
    }
};

inline void to_json(json& j, const MapSpec& m) {
    j = json{{"kind", m.kind}};
    if (m.kind == "matrix-product") {
        j["n1"] = m.n1;
        j["d1"] = m.d1;
        j["m1"] = m.m1;
    } else if (m.kind == "kronecker") {
        j["d_x"] = m.d_x;
        j["d_y"] = m.d_y;
    } else if (m.kind == "quadratic-form") {
        j["d"] = m.d;
    }
}

inline void from_json(const json& j, MapSpec& m) {
    m.kind = j.at("kind").get<std::string>();
    m.n1 = j.value("n1", 2);
    m.d1 = j.value("d1", 2);
    m.m1 = j.value("m1", 2);
    m.d_x = j.value("d_x", 2);
    m.d_y = j.value("d_y", 2);
    m.d = j.value("d", 2);
}

struct SreCoeffSpec {
    std::vector<double> constant;
    std::optional<RegVarSpec> law;
    double multiplier = 1.0;
    std::optional<double> moment_target;  // resolves the multiplier at build time

    SreCoeffLaw build(double alpha) const {
        SreCoeffLaw c;
        c.constant = constant;
        c.law = law;
        c.multiplier = multiplier;
        if (law && moment_target) {
            const RadiusLaw base(law->tail, law->slowly_varying);
            const double m = base.moment(alpha);
            if (!std::isfinite(m))
                throw ConfigError("SreCoeffSpec: moment target on a law without that moment");
            c.multiplier = std::pow(*moment_target / m, 1.0 / alpha);
        }
        return c;
    }
};

inline void to_json(json& j, const SreCoeffSpec& s) {
    j = json::object();
    if (!s.constant.empty()) j["constant"] = s.constant;
    if (s.law) j["law"] = *s.law;
    if (s.moment_target)
        j["moment_target"] = *s.moment_target;
    else if (s.law)
        j["multiplier"] = s.multiplier;
}

inline void from_json(const json& j, SreCoeffSpec& s) {
    if (j.contains("constant")) s.constant = j.at("constant").get<std::vector<double>>();
    if (j.contains("law")) s.law = j.at("law").get<RegVarSpec>();
    s.multiplier = j.value("multiplier", 1.0);
    if (j.contains("moment_target")) s.moment_target = j.at("moment_target").get<double>();
}

struct SreSpec {
    int dim = 1;
    SreCoeffSpec a, b;
    double declared_alpha = 1.0;
    std::string declared_sv_family = "constant";
    double declared_sv_scale = 1.0;
    double declared_sv_beta = 0.0;
    std::vector<std::vector<double>> pair_atoms;
    std::vector<double> pair_probs;
    double depth_eps = 1e-6;
    double term_eps = 1e-4;
    std::optional<double> ea_alpha;  // E||A||^alpha if known in closed form

    SreModel build(SreRegime regime) const {
        const SlowlyVaryingSpec sv{parse_sv_family(declared_sv_family), declared_sv_scale,
                                   declared_sv_beta};
        RegVarSpec declared =
            pair_tail_spec(dim, TailIndex(declared_alpha), sv, pair_atoms, pair_probs);
        return make_independent_sre(dim, a.build(declared_alpha), b.build(declared_alpha),
                                    std::move(declared), regime);
    }
};

inline void to_json(json& j, const SreSpec& s) {
    j = json{{"dim", s.dim},
             {"a", s.a},
             {"b", s.b},
             {"declared_alpha", s.declared_alpha},
             {"declared_sv_family", s.declared_sv_family},
             {"declared_sv_scale", s.declared_sv_scale},
             {"declared_sv_beta", s.declared_sv_beta},
             {"pair_atoms", s.pair_atoms},
             {"pair_probs", s.pair_probs},
             {"depth_eps", s.depth_eps},
             {"term_eps", s.term_eps}};
    if (s.ea_alpha) j["ea_alpha"] = *s.ea_alpha;
}

inline void from_json(const json& j, SreSpec& s) {
    s.dim = j.value("dim", 1);
    s.a = j.at("a").get<SreCoeffSpec>();
    s.b = j.at("b").get<SreCoeffSpec>();
    s.declared_alpha = j.at("declared_alpha").get<double>();
    s.declared_sv_family = j.value("declared_sv_family", "constant");
    s.declared_sv_scale = j.value("declared_sv_scale", 1.0);
    s.declared_sv_beta = j.value("declared_sv_beta", 0.0);
    s.pair_atoms = j.at("pair_atoms").get<std::vector<std::vector<double>>>();
    s.pair_probs = j.at("pair_probs").get<std::vector<double>>();
    s.depth_eps = j.value("depth_eps", 1e-6);
    s.term_eps = j.value("term_eps", 1e-4);
    if (j.contains("ea_alpha")) s.ea_alpha = j.at("ea_alpha").get<double>();
}

enum class ExperimentKind {
    breiman,
    univariate_product,
    eta,
    matrix_product_light,
    matrix_product_equivalent,
    sre_heavy_a,
    sre_heavy_b,
    diagnostics
};

inline const char* experiment_kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::breiman: return "breiman";
        case ExperimentKind::univariate_product: return "univariate-product";
        case ExperimentKind::eta: return "eta";
        case ExperimentKind::matrix_product_light: return "matrix-product-light";
        case ExperimentKind::matrix_product_equivalent: return "matrix-product-equivalent";
        case ExperimentKind::sre_heavy_a: return "sre-heavy-A";
        case ExperimentKind::sre_heavy_b: return "sre-heavy-B";
        case ExperimentKind::diagnostics: return "diagnostics";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
    for (auto k : {ExperimentKind::breiman, ExperimentKind::univariate_product,
                   ExperimentKind::eta, ExperimentKind::matrix_product_light,
                   ExperimentKind::matrix_product_equivalent, ExperimentKind::sre_heavy_a,
                   ExperimentKind::sre_heavy_b, ExperimentKind::diagnostics})
        if (s == experiment_kind_name(k)) return k;
    throw ConfigError("unknown experiment kind: " + s);
}

struct ExperimentConfig {
    std::string id = "experiment";
    ExperimentKind kind = ExperimentKind::breiman;
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = hardware
    int shards = 64;
    std::uint64_t samples = 100000;
    std::uint64_t oracle_samples = 100000;
    double threshold_quantile = 0.999;
    double query_radius = 1.0;
    double tolerance = 0.2;
    bool checkpoints = false;
    json params;  // kind-specific block, kept verbatim for hashing/round-trip

    void validate() const {
        if (id.empty()) throw ConfigError("config: id must be nonempty");
        if (samples < 100) throw ConfigError("config: samples must be >= 100");
        if (shards < 1) throw ConfigError("config: shards must be >= 1");
        if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0))
            throw ConfigError("config: threshold_quantile must lie in (0,1)");
        if (!(query_radius > 0.0)) throw ConfigError("config: query_radius must be positive");
        if (!(tolerance > 0.0)) throw ConfigError("config: tolerance must be positive");
    }
};

inline void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"id", c.id},
             {"kind", experiment_kind_name(c.kind)},
             {"seed", c.seed},
             {"workers", c.workers},
             {"shards", c.shards},
             {"samples", c.samples},
             {"oracle_samples", c.oracle_samples},
             {"threshold_quantile", c.threshold_quantile},
             {"query_radius", c.query_radius},
             {"tolerance", c.tolerance},
             {"checkpoints", c.checkpoints},
             {"params", c.params}};
}

inline void from_json(const json& j, ExperimentConfig& c) {
    c.id = j.at("id").get<std::string>();
    c.kind = parse_experiment_kind(j.at("kind").get<std::string>());
    c.seed = j.value("seed", 1ULL);
    c.workers = j.value("workers", 0);
    c.shards = j.value("shards", 64);
    c.samples = j.value("samples", 100000ULL);
    c.oracle_samples = j.value("oracle_samples", 100000ULL);
    c.threshold_quantile = j.value("threshold_quantile", 0.999);
    c.query_radius = j.value("query_radius", 1.0);
    c.tolerance = j.value("tolerance", 0.2);
    c.checkpoints = j.value("checkpoints", false);
    c.params = j.value("params", json::object());
    c.validate();
}

inline std::string config_hash(const ExperimentConfig& c) {
    const json j = c;
    const std::string s = j.dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// RunRecord and reporting
// ---------------------------------------------------------------------------

struct RunRecord {
    std::string id;
    std::string estimator;
    std::string config_hash;
    std::uint64_t seed = 0;
    TailEstimate empirical;
    OracleResult oracle;
    double relative_gap = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    double wall_time_ms = 0.0;
    std::vector<Checkpoint> checkpoints;

    static double gap(double empirical_value, double oracle_value) {
        return std::abs(empirical_value - oracle_value) / std::fmax(std::abs(oracle_value), 1e-12);
    }
};

inline void to_json(json& j, const Checkpoint& c) { j = json{{"n", c.n}, {"value", c.value}}; }
inline void from_json(const json& j, Checkpoint& c) {
    c.n = j.at("n").get<std::uint64_t>();
    c.value = j.at("value").get<double>();
}

inline void to_json(json& j, const RunRecord& r) {
    j = json{{"id", r.id},
             {"estimator", r.estimator},
             {"config_hash", r.config_hash},
             {"seed", r.seed},
             {"value", r.empirical.value},
             {"ci_low", r.empirical.ci_low},
             {"ci_high", r.empirical.ci_high},
             {"threshold", r.empirical.threshold},
             {"n_exceedances", r.empirical.n_exceedances},
             {"n_total", r.empirical.n_total},
             {"oracle_method", oracle_method_name(r.oracle.method)},
             {"oracle_value", r.oracle.value},
             {"oracle_std_error", r.oracle.std_error},
             {"oracle_n", r.oracle.n},
             {"relative_gap", r.relative_gap},
             {"tolerance", r.tolerance},
             {"pass", r.pass},
             {"wall_time_ms", r.wall_time_ms},
             {"checkpoints", r.checkpoints}};
}

inline void from_json(const json& j, RunRecord& r) {
    r.id = j.at("id").get<std::string>();
    r.estimator = j.at("estimator").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.empirical.value = j.at("value").get<double>();
    r.empirical.ci_low = j.at("ci_low").get<double>();
    r.empirical.ci_high = j.at("ci_high").get<double>();
    r.empirical.threshold = j.at("threshold").get<double>();
    r.empirical.n_exceedances = j.at("n_exceedances").get<std::uint64_t>();
    r.empirical.n_total = j.at("n_total").get<std::uint64_t>();
    const std::string m = j.at("oracle_method").get<std::string>();
    r.oracle.method = m == "enumeration" ? OracleMethod::enumeration : OracleMethod::spectral_mc;
    r.oracle.value = j.at("oracle_value").get<double>();
    r.oracle.std_error = j.at("oracle_std_error").get<double>();
    r.oracle.n = j.at("oracle_n").get<std::uint64_t>();
    r.relative_gap = j.at("relative_gap").get<double>();
    r.tolerance = j.at("tolerance").get<double>();
    r.pass = j.at("pass").get<bool>();
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    r.checkpoints = j.at("checkpoints").get<std::vector<Checkpoint>>();
}

inline bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.n == b.n && a.value == b.value;
}

inline bool operator==(const RunRecord& a, const RunRecord& b) {
    return a.id == b.id && a.estimator == b.estimator && a.config_hash == b.config_hash &&
           a.seed == b.seed && a.empirical.value == b.empirical.value &&
           a.empirical.ci_low == b.empirical.ci_low && a.empirical.ci_high == b.empirical.ci_high &&
           a.empirical.threshold == b.empirical.threshold &&
           a.empirical.n_exceedances == b.empirical.n_exceedances &&
           a.empirical.n_total == b.empirical.n_total && a.oracle.method == b.oracle.method &&
           a.oracle.value == b.oracle.value && a.oracle.std_error == b.oracle.std_error &&
           a.oracle.n == b.oracle.n && a.relative_gap == b.relative_gap &&
           a.tolerance == b.tolerance && a.pass == b.pass && a.wall_time_ms == b.wall_time_ms &&
           a.checkpoints == b.checkpoints;
}

inline std::string csv_escape_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* kRecordCsvHeader =
    "id,estimator,value,ci_low,ci_high,threshold,n_exceedances,n_total,seed,"
    "oracle_method,oracle_value,oracle_std_error,oracle_n,relative_gap,tolerance,pass,"
    "wall_time_ms";

inline std::string record_csv_row(const RunRecord& r) {
    std::ostringstream os;
    os << r.id << ',' << r.estimator << ',' << csv_escape_double(r.empirical.value) << ','
       << csv_escape_double(r.empirical.ci_low) << ',' << csv_escape_double(r.empirical.ci_high)
       << ',' << csv_escape_double(r.empirical.threshold) << ',' << r.empirical.n_exceedances
       << ',' << r.empirical.n_total << ',' << r.seed << ',' << oracle_method_name(r.oracle.method)
       << ',' << csv_escape_double(r.oracle.value) << ',' << csv_escape_double(r.oracle.std_error)
       << ',' << r.oracle.n << ',' << csv_escape_double(r.relative_gap) << ','
       << csv_escape_double(r.tolerance) << ',' << (r.pass ? "true" : "false") << ','
       << csv_escape_double(r.wall_time_ms);
    return os.str();
}

struct ReportResult {
    std::vector<std::filesystem::path> files;
    std::string summary;
};

// Writes records to <stem>.csv / <stem>.json (plus <stem>_checkpoints.csv when
// any record carries a convergence curve) and returns a summary with failing
// records listed first.
inline ReportResult emit_report(std::span<const RunRecord> records, const std::string& format,
                                const std::filesystem::path& stem) {
    if (records.empty()) throw std::domain_error("emit_report: no records");
    ReportResult result;
    if (!stem.parent_path().empty()) std::filesystem::create_directories(stem.parent_path());

    if (format == "csv") {
        const auto path = std::filesystem::path(stem.string() + ".csv");
        std::ofstream os(path);
        if (!os) throw std::runtime_error("emit_report: cannot write " + path.string());
        os << kRecordCsvHeader << '\n';
        for (const auto& r : records) os << record_csv_row(r) << '\n';
        result.files.push_back(path);
        bool any_cp = false;
        for (const auto& r : records) any_cp |= !r.checkpoints.empty();
        if (any_cp) {
            const auto cpath = std::filesystem::path(stem.string() + "_checkpoints.csv");
            std::ofstream cs(cpath);
            cs << "id,n,value\n";
            for (const auto& r : records)
                for (const auto& c : r.checkpoints)
                    cs << r.id << ',' << c.n << ',' << csv_escape_double(c.value) << '\n';
            result.files.push_back(cpath);
        }
    } else if (format == "json") {
        const auto path = std::filesystem::path(stem.string() + ".json");
        std::ofstream os(path);
        if (!os) throw std::runtime_error("emit_report: cannot write " + path.string());
        os << json(std::vector<RunRecord>(records.begin(), records.end())).dump(2) << '\n';
        result.files.push_back(path);
    } else {
        throw ConfigError("emit_report: unknown format " + format);
    }

    std::size_t n_pass = 0;
    std::ostringstream fail_lines, pass_lines;
    for (const auto& r : records) {
        std::ostringstream line;
        line << (r.pass ? "  [pass] " : "  [FAIL] ") << r.id << ": value=" << r.empirical.value
             << " oracle=" << r.oracle.value << " gap=" << r.relative_gap
             << " tol=" << r.tolerance << '\n';
        if (r.pass) {
            ++n_pass;
            pass_lines << line.str();
        } else {
            fail_lines << line.str();
        }
    }
    std::ostringstream summary;
    summary << n_pass << "/" << records.size() << " pass\n" << fail_lines.str() << pass_lines.str();
    result.summary = summary.str();
    return result;
}

inline std::vector<RunRecord> parse_records(const std::filesystem::path& json_path) {
    std::ifstream is(json_path);
    if (!is) throw std::runtime_error("parse_records: cannot read " + json_path.string());
    json j;
    is >> j;
    return j.get<std::vector<RunRecord>>();
}

// ---------------------------------------------------------------------------
// run_experiment: one config -> one RunRecord (empirical estimate + oracle)
// ---------------------------------------------------------------------------

namespace detail {

// norms of matrix draws A = R Theta have ||A|| = R exactly because the
// spectral atoms are unit-norm; radii are therefore reused as norms
struct MatrixFactorSampler {
    RadiusLaw law;
    const SphereDist* spectral;
    int d;

    double draw(RngStream& rng, std::span<double> out) const {
        const double r = law.sample(rng);
        spectral->sample(rng, out);
        for (auto& v : out) v *= r;
        return r;
    }
};

}  // namespace detail

inline RunRecord run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.id = config.id;
    rec.config_hash = config_hash(config);
    rec.seed = config.seed;
    rec.tolerance = config.tolerance;
    const RngKey root{config.seed, 0};
    const RngKey empirical_key = root.sub(1);
    const RngKey oracle_key = root.sub(2);
    const double u = config.query_radius;

    switch (config.kind) {
        case ExperimentKind::breiman: {
            const auto x_spec = config.params.at("x").get<RegVarSpec>();
            if (x_spec.dimension != 1) throw ConfigError("breiman: X must be scalar");
            const auto y_spec = config.params.at("y").get<ScalarLawSpec>();
            const ScalarLaw y_law = y_spec.build();
            const RadiusLaw x_law = x_spec.radius_law();
            rec.estimator = "tail_ratio";
            auto run = mc_tail_ratio(
                [&](RngStream& rng, double& num, double& den) {
                    const double x = x_law.sample(rng);
                    const double y = y_law.sample(rng);
                    num = x * y;
                    den = x;
                },
                config.samples, config.threshold_quantile, u, empirical_key, config.shards,
                config.workers, config.checkpoints);
            rec.empirical = run.estimate;
            rec.checkpoints = std::move(run.checkpoints);
            const double m = y_law.moment_quadrature(x_spec.tail.alpha) * std::pow(u, -x_spec.tail.alpha);
            rec.oracle = OracleResult{m, OracleMethod::enumeration, 0, 0.0};
            break;
        }
        case ExperimentKind::univariate_product: {
            const auto x_spec = config.params.at("x").get<RegVarSpec>();
            if (x_spec.dimension != 1) throw ConfigError("univariate-product: X must be scalar");
            const double c0 = config.params.value("c0", 1.0);
            const RadiusLaw x_law = x_spec.radius_law();
            rec.estimator = "tail_ratio";
            auto run = mc_tail_ratio(
                [&](RngStream& rng, double& num, double& den) {
                    const double x = x_law.sample(rng);
                    const double y = x_law.sample(rng);
                    num = x * y;
                    den = x;
                },
                config.samples, config.threshold_quantile, u, empirical_key, config.shards,
                config.workers, config.checkpoints);
            rec.empirical = run.estimate;
            rec.checkpoints = std::move(run.checkpoints);
            const double m = x_law.moment(x_spec.tail.alpha);
            if (!std::isfinite(m))
                throw ConfigError("univariate-product: E[X^alpha] is infinite for this law");
            rec.oracle = OracleResult{product_limit_constant(m, m, c0) * std::pow(u, -x_spec.tail.alpha),
                                      OracleMethod::enumeration, 0, 0.0};
            break;
        }
        case ExperimentKind::eta: {
            const auto map = config.params.at("map").get<MapSpec>().build();
            const auto spec_x = config.params.at("x").get<RegVarSpec>();
            const auto spec_y = config.params.at("y").get<RegVarSpec>();
            const int balance_case = config.params.value("case", 2);
            const RadiusLaw x_law = spec_x.radius_law();
            const RadiusLaw y_law = spec_y.radius_law();
            double c_x = 0.0, c_y = 0.0, mom_x = 0.0, mom_y = 0.0;
            if (balance_case == 1) {
                mom_y = y_law.moment(spec_x.tail.alpha * map.deg_y / map.deg_x);
                if (!std::isfinite(mom_y)) throw ConfigError("eta case 1: momY infinite");
                c_x = 1.0 / mom_y;
                c_y = 0.0;
            } else if (balance_case == 2) {
                c_x = c_y = 0.0;
            } else if (balance_case == 3) {
                const double c0 = config.params.at("c0").get<double>();
                mom_x = x_law.moment(spec_x.tail.alpha);
                mom_y = y_law.moment(spec_y.tail.alpha);
                if (!std::isfinite(mom_x) || !std::isfinite(mom_y))
                    throw ConfigError("eta case 3: moments must be finite");
                c_x = 1.0 / (mom_y + c0 * mom_x);
                c_y = c0 * c_x;
            } else {
                throw ConfigError("eta: case must be 1, 2 or 3");
            }
            rec.estimator = "tail_ratio";
            std::vector<double> xbuf(map.d_x), ybuf(map.d_y), zbuf(map.d_z);
            auto run = mc_tail_ratio(
                [&, xb = xbuf, yb = ybuf, zb = zbuf](RngStream& rng, double& num,
                                                     double& den) mutable {
                    const double rx = x_law.sample(rng);
                    spec_x.spectral.sample(rng, xb);
                    for (auto& v : xb) v *= rx;
                    const double ry = y_law.sample(rng);
                    spec_y.spectral.sample(rng, yb);
                    for (auto& v : yb) v *= ry;
                    apply_map(map, xb, yb, zb);
                    num = map.norm_of_z(zb);
                    den = std::pow(rx, map.deg_x) * std::pow(ry, map.deg_y);
                },
                config.samples, config.threshold_quantile, u, empirical_key, config.shards,
                config.workers, config.checkpoints);
            rec.empirical = run.estimate;
            rec.checkpoints = std::move(run.checkpoints);
            LimitMeasureQuery query{u, nullptr};
            rec.oracle = eta_measure(map, spec_x, spec_y, c_x, c_y, mom_y, mom_x, query,
                                     config.oracle_samples, oracle_key);
            break;
        }
        case ExperimentKind::matrix_product_light: {
            const auto a_spec = config.params.at("a").get<RegVarSpec>();
            const int n_factors = config.params.at("n_factors").get<int>();
            const int d = detail::square_matrix_dim(a_spec.spectral);
            const detail::MatrixFactorSampler factor{a_spec.radius_law(), &a_spec.spectral, d};
            rec.estimator = "tail_ratio";
            const std::size_t dd = static_cast<std::size_t>(d) * d;
            std::vector<double> fbuf(dd), prod(dd), nextbuf(dd);
            auto run = mc_tail_ratio(
                [&, f = fbuf, p = prod, nx = nextbuf](RngStream& rng, double& num,
                                                      double& den) mutable {
                    double radius_product = factor.draw(rng, p);
                    for (int k = 1; k < n_factors; ++k) {
                        radius_product *= factor.draw(rng, f);
                        mat_mul(p, d, d, f, d, d, nx);
                        std::swap(p, nx);
                    }
                    num = operator_norm(p, d, d);
                    den = radius_product;
                },
                config.samples, config.threshold_quantile, u, empirical_key, config.shards,
                config.workers, config.checkpoints);
            rec.empirical = run.estimate;
            rec.checkpoints = std::move(run.checkpoints);
            RngStream orng = oracle_key.make_stream();
            rec.oracle = product_norm_constant(a_spec.spectral, a_spec.tail, n_factors,
                                               config.oracle_samples, orng);
            rec.oracle.value *= std::pow(u, -a_spec.tail.alpha);
            break;
        }
        case ExperimentKind::matrix_product_equivalent: {
            const auto a_spec = config.params.at("a").get<RegVarSpec>();
            const int n_factors = config.params.at("n_factors").get<int>();
            const int d = detail::square_matrix_dim(a_spec.spectral);
            const detail::MatrixFactorSampler factor{a_spec.radius_law(), &a_spec.spectral, d};
            rec.estimator = "tail_ratio";
            const std::size_t dd = static_cast<std::size_t>(d) * d;
            std::vector<double> fbuf(dd), prod(dd), nextbuf(dd);
            auto run = mc_tail_ratio(
                [&, f = fbuf, p = prod, nx = nextbuf](RngStream& rng, double& num,
                                                      double& den) mutable {
                    factor.draw(rng, p);
                    for (int k = 1; k < n_factors; ++k) {
                        factor.draw(rng, f);
                        mat_mul(p, d, d, f, d, d, nx);
                        std::swap(p, nx);
                    }
                    num = operator_norm(p, d, d);
                    den = factor.law.sample(rng);  // independent ||A|| draw
                },
                config.samples, config.threshold_quantile, u, empirical_key, config.shards,
                config.workers, config.checkpoints);
            rec.empirical = run.estimate;
            rec.checkpoints = std::move(run.checkpoints);
            const auto oracle = equivalent_tail_constant(a_spec, n_factors, config.oracle_samples,
                                                         oracle_key);
            rec.oracle = oracle.total;
            rec.oracle.value *= std::pow(u, -a_spec.tail.alpha);
            break;
        }
        case ExperimentKind::sre_heavy_a: {
            const auto sre_spec = config.params.at("sre").get<SreSpec>();
            const SreModel model = sre_spec.build(SreRegime::heavy_a);
            const int d = model.dim;
            const std::size_t dd = static_cast<std::size_t>(d) * d;
            double ea = 0.0;
            if (sre_spec.ea_alpha) {
                ea = *sre_spec.ea_alpha;
            } else {
                RngStream rng = oracle_key.sub(99).make_stream();
                std::vector<double> a(dd), b(d);
                MeanStats acc;
                for (int i = 0; i < 100000; ++i) {
                    model.joint_sampler(rng, a, b);
                    acc.add(std::pow(operator_norm(a, d, d), model.declared_tail.tail.alpha));
                }
                ea = acc.mean();
            }
            if (!(ea > 0.0 && ea < 1.0))
                throw RegimeError("sre-heavy-A: E||A||^alpha must lie in (0,1)");
            const std::size_t depth = series_truncation(sre_spec.depth_eps, ea);
            const std::size_t n_terms = series_truncation(sre_spec.term_eps, ea);
            rec.estimator = "tail_ratio";
            std::vector<double> abuf(dd), bbuf(d), pibuf(dd), pinext(dd), term(d), racc(d);
            auto run = mc_tail_ratio(
                [&, a = abuf, b = bbuf, pi = pibuf, pn = pinext, tv = term,
                 r = racc](RngStream& rng, double& num, double& den) mutable {
                    // one series path
                    for (std::size_t j = 0; j < dd; ++j) pi[j] = 0.0;
                    for (int q = 0; q < d; ++q) pi[static_cast<std::size_t>(q) * d + q] = 1.0;
                    for (auto& v : r) v = 0.0;
                    for (std::size_t k = 0; k < depth; ++k) {
                        model.joint_sampler(rng, a, b);
                        mat_mul(pi, d, d, b, d, 1, tv);
                        for (int q = 0; q < d; ++q) r[q] += tv[q];
                        if (k + 1 < depth) {
                            mat_mul(pi, d, d, a, d, d, pn);
                            std::swap(pi, pn);
                        }
                    }
                    num = euclidean_norm(r);
                    // independent pair draw for the denominator
                    model.joint_sampler(rng, a, b);
                    den = operator_norm(a, d, d) + euclidean_norm(b);
                },
                config.samples, config.threshold_quantile, u, empirical_key, config.shards,
                config.workers, config.checkpoints);
            rec.empirical = run.estimate;
            rec.checkpoints = std::move(run.checkpoints);
            LimitMeasureQuery query{u, nullptr};
            const auto nu = nu_measure(model, query, n_terms, config.oracle_samples, oracle_key);
            rec.oracle = nu.total;
            break;
        }
        case ExperimentKind::sre_heavy_b: {
            const auto sre_spec = config.params.at("sre").get<SreSpec>();
            const SreModel model = sre_spec.build(SreRegime::heavy_b);
            if (!sre_spec.b.law) throw ConfigError("sre-heavy-B: B must carry a law");
            const RegVarSpec b_spec = *sre_spec.b.law;
            const int d = model.dim;
            const std::size_t dd = static_cast<std::size_t>(d) * d;
            double ea = 0.0;
            {
                RngStream rng = oracle_key.sub(99).make_stream();
                std::vector<double> a(dd), b(d);
                MeanStats acc;
                for (int i = 0; i < 100000; ++i) {
                    model.joint_sampler(rng, a, b);
                    acc.add(std::pow(operator_norm(a, d, d), b_spec.tail.alpha));
                }
                ea = acc.mean();
            }
            if (!(ea >= 0.0 && ea < 1.0))
                throw RegimeError("sre-heavy-B: E||A||^alpha must be < 1");
            const std::size_t depth = ea > 0.0 ? series_truncation(sre_spec.depth_eps, ea) : 1;
            const std::size_t n_terms = ea > 0.0 ? series_truncation(sre_spec.term_eps, ea) : 1;
            rec.estimator = "tail_ratio";
            const double b_mult = sre_spec.b.build(b_spec.tail.alpha).multiplier;
            const RadiusLaw b_law = b_spec.radius_law();
            std::vector<double> abuf(dd), bbuf(d), pibuf(dd), pinext(dd), term(d), racc(d);
            auto run = mc_tail_ratio(
                [&, a = abuf, b = bbuf, pi = pibuf, pn = pinext, tv = term,
                 r = racc](RngStream& rng, double& num, double& den) mutable {
                    for (std::size_t j = 0; j < dd; ++j) pi[j] = 0.0;
                    for (int q = 0; q < d; ++q) pi[static_cast<std::size_t>(q) * d + q] = 1.0;
                    for (auto& v : r) v = 0.0;
                    for (std::size_t k = 0; k < depth; ++k) {
                        model.joint_sampler(rng, a, b);
                        mat_mul(pi, d, d, b, d, 1, tv);
                        for (int q = 0; q < d; ++q) r[q] += tv[q];
                        if (k + 1 < depth) {
                            mat_mul(pi, d, d, a, d, d, pn);
                            std::swap(pi, pn);
                        }
                    }
                    num = euclidean_norm(r);
                    den = b_mult * b_law.sample(rng);  // independent ||B|| draw
                },
                config.samples, config.threshold_quantile, u, empirical_key, config.shards,
                config.workers, config.checkpoints);
            rec.empirical = run.estimate;
            rec.checkpoints = std::move(run.checkpoints);
            LimitMeasureQuery query{u, nullptr};
            // normalization by P(||B|| > t): the scaled B law keeps alpha
            const auto nu = heavy_b_measure(model, b_spec, query, n_terms, config.oracle_samples,
                                            oracle_key);
            rec.oracle = nu.total;
            break;
        }
        case ExperimentKind::diagnostics: {
            const auto x_spec = config.params.at("x").get<RegVarSpec>();
            if (x_spec.dimension != 1) throw ConfigError("diagnostics: X must be scalar");
            const auto y_spec = config.params.at("y").get<ScalarLawSpec>();
            const double m_cut = config.params.value("m_cut", 10.0);
            const ScalarLaw y_law = y_spec.build();
            const RadiusLaw x_law = x_spec.radius_law();
            rec.estimator = "window_diagnostic";
            const double t = x_law.inverse_survival(1.0 - config.threshold_quantile);
            MeanStats win = parallel_mc<MeanStats>(
                config.samples, config.shards, config.workers, empirical_key,
                [&](RngStream& rng, MeanStats& st) {
                    const double x = x_law.sample(rng);
                    const double y = y_law.sample(rng);
                    const bool in_window = (x * y > t) && (m_cut < x) && (x <= t / m_cut);
                    st.add(in_window ? 1.0 : 0.0);
                });
            MeanStats exc = parallel_mc<MeanStats>(
                config.samples, config.shards, config.workers, empirical_key.sub(7),
                [&](RngStream& rng, MeanStats& st) { st.add(x_law.sample(rng) > t ? 1.0 : 0.0); });
            if (exc.sum == 0.0)
                throw UndefinedRatioError("diagnostics: no X exceedances",
                                          static_cast<std::uint64_t>(win.sum), 0, config.samples);
            const double value = win.mean() / exc.mean();
            rec.empirical = TailEstimate{value, 0.0, 0.0, t,
                                         static_cast<std::uint64_t>(win.sum), config.samples};
            rec.oracle = OracleResult{window_probability_oracle(x_law, y_law, m_cut, t),
                                      OracleMethod::enumeration, 0, 0.0};
            break;
        }
    }

    rec.relative_gap = RunRecord::gap(rec.empirical.value, rec.oracle.value);
    rec.pass = rec.relative_gap <= rec.tolerance;
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
    return rec;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file: " + path.string());
    json j;
    is >> j;
    return j.get<ExperimentConfig>();
}

}  // namespace rvlab
