#pragma once

#include <cfloat>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rvlab/errors.hpp"
#include "rvlab/linalg.hpp"
#include "rvlab/rng.hpp"

namespace rvlab {

enum class MapKind { matrix_product, kronecker, quadratic_form, custom };

inline const char* map_kind_name(MapKind k) {
    switch (k) {
        case MapKind::matrix_product: return "matrix-product";
        case MapKind::kronecker: return "kronecker";
        case MapKind::quadratic_form: return "quadratic-form";
        case MapKind::custom: return "custom";
    }
    return "?";
}

inline MapKind parse_map_kind(const std::string& s) {
    if (s == "matrix-product") return MapKind::matrix_product;
    if (s == "kronecker") return MapKind::kronecker;
    if (s == "quadratic-form") return MapKind::quadratic_form;
    if (s == "custom") return MapKind::custom;
    throw ConfigError("unknown map kind: " + s);
}

// A map psi(x, y) homogeneous of degree deg_x in x and deg_y in y, together
// with the norms of its three spaces.
//   matrix-product : (n1 x d1) . (d1 x m1), operator norms, degrees (1,1)
//   kronecker      : vector outer product flattened, euclidean norms, (1,1)
//   quadratic-form : x^T y x with y a d x d matrix, scalar output, (2,1)
struct HomogeneousMap {
    MapKind kind = MapKind::matrix_product;
    int d_x = 0, d_y = 0, d_z = 0;
    double deg_x = 1.0, deg_y = 1.0;
    int n1 = 0, d1 = 0, m1 = 0;  // matrix-product factor shapes
    NormKind norm_x = NormKind::euclidean;
    NormKind norm_y = NormKind::euclidean;
    NormKind norm_z = NormKind::euclidean;
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> eval;

    static HomogeneousMap matrix_product(int n1, int d1, int m1) {
        HomogeneousMap m;
        m.kind = MapKind::matrix_product;
        m.n1 = n1;
        m.d1 = d1;
        m.m1 = m1;
        m.d_x = n1 * d1;
        m.d_y = d1 * m1;
        m.d_z = n1 * m1;
        m.norm_x = m.norm_y = m.norm_z = NormKind::op;
        m.validate();
        return m;
    }

    static HomogeneousMap kronecker(int d_x, int d_y) {
        HomogeneousMap m;
        m.kind = MapKind::kronecker;
        m.d_x = d_x;
        m.d_y = d_y;
        m.d_z = d_x * d_y;
        m.validate();
        return m;
    }

    static HomogeneousMap quadratic_form(int d) {
        HomogeneousMap m;
        m.kind = MapKind::quadratic_form;
        m.d_x = d;
        m.d_y = d * d;
        m.d_z = 1;
        m.deg_x = 2.0;
        m.deg_y = 1.0;
        m.norm_y = NormKind::op;
        m.validate();
        return m;
    }

    static HomogeneousMap custom(
        int d_x, int d_y, int d_z, double deg_x, double deg_y,
        std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> f,
        NormKind nx = NormKind::euclidean, NormKind ny = NormKind::euclidean,
        NormKind nz = NormKind::euclidean) {
        HomogeneousMap m;
        m.kind = MapKind::custom;
        m.d_x = d_x;
        m.d_y = d_y;
        m.d_z = d_z;
        m.deg_x = deg_x;
        m.deg_y = deg_y;
        m.norm_x = nx;
        m.norm_y = ny;
        m.norm_z = nz;
        m.eval = std::move(f);
        m.validate();
        return m;
    }

    void validate() const {
        if (d_x <= 0 || d_y <= 0 || d_z <= 0)
            throw ConfigError("HomogeneousMap: dimensions must be positive");
        if (!(deg_x > 0.0) || !(deg_y > 0.0))
            throw ConfigError("HomogeneousMap: homogeneity degrees must be positive");
        switch (kind) {
            case MapKind::matrix_product:
                if (n1 <= 0 || d1 <= 0 || m1 <= 0 || d_x != n1 * d1 || d_y != d1 * m1 ||
                    d_z != n1 * m1 || deg_x != 1.0 || deg_y != 1.0)
                    throw ConfigError("HomogeneousMap: inconsistent matrix-product metadata");
                break;
            case MapKind::kronecker:
                if (d_z != d_x * d_y || deg_x != 1.0 || deg_y != 1.0)
                    throw ConfigError("HomogeneousMap: inconsistent kronecker metadata");
                break;
            case MapKind::quadratic_form:
                if (d_y != d_x * d_x || d_z != 1 || deg_x != 2.0 || deg_y != 1.0)
                    throw ConfigError("HomogeneousMap: inconsistent quadratic-form metadata");
                break;
            case MapKind::custom:
                if (!eval) throw ConfigError("HomogeneousMap: custom map without evaluator");
                break;
        }
    }

    double norm_of_x(std::span<const double> v) const { return slot_norm(v, norm_x, n1, d1); }
    double norm_of_y(std::span<const double> v) const { return slot_norm(v, norm_y, d1, m1); }
    double norm_of_z(std::span<const double> v) const { return slot_norm(v, norm_z, n1, m1); }

private:
    double slot_norm(std::span<const double> v, NormKind k, int r, int c) const {
        if (kind == MapKind::matrix_product && k == NormKind::op)
            return operator_norm(v, r, c);
        if (kind == MapKind::quadratic_form && k == NormKind::op)
            return operator_norm(v, d_x, d_x);
        return norm(v, k);
    }
};

inline void apply_map(const HomogeneousMap& map, std::span<const double> x,
                      std::span<const double> y, std::span<double> out) {
    if (x.size() != static_cast<std::size_t>(map.d_x) ||
        y.size() != static_cast<std::size_t>(map.d_y) ||
        out.size() != static_cast<std::size_t>(map.d_z))
        throw std::domain_error("apply_map: dimension mismatch");
    switch (map.kind) {
        case MapKind::matrix_product:
            mat_mul(x, map.n1, map.d1, y, map.d1, map.m1, out);
            return;
        case MapKind::kronecker:
            for (int i = 0; i < map.d_x; ++i)
                for (int j = 0; j < map.d_y; ++j) out[i * map.d_y + j] = x[i] * y[j];
            return;
        case MapKind::quadratic_form: {
            const int d = map.d_x;
            double s = 0.0;
            for (int i = 0; i < d; ++i) {
                double row = 0.0;
                for (int j = 0; j < d; ++j) row += y[i * d + j] * x[j];
                s += x[i] * row;
            }
            out[0] = s;
            return;
        }
        case MapKind::custom:
            map.eval(x, y, out);
            return;
    }
}

inline std::vector<double> apply_map(const HomogeneousMap& map, std::span<const double> x,
                                     std::span<const double> y) {
    std::vector<double> out(map.d_z);
    apply_map(map, x, y, out);
    return out;
}

struct HomogeneityReport {
    double max_rel_violation = 0.0;
    std::size_t n_probes = 0;
};

namespace detail {
inline void gaussian_fill(RngStream& rng, std::span<double> v) {
    for (auto& x : v) x = rng.normal();
}
}  // namespace detail

// Evaluates || psi(s x, t y) - s^{a_X} t^{a_Y} psi(x, y) || / (|| psi(x,y) || + eps)
// over random probes and reports the worst case. Custom maps must pass this
// before they are trusted by any oracle.
inline HomogeneityReport check_homogeneity(const HomogeneousMap& map, std::size_t n_probe,
                                           const std::vector<std::pair<double, double>>& scales,
                                           RngStream& rng) {
    map.validate();
    if (n_probe == 0) throw std::domain_error("check_homogeneity: n_probe must be >= 1");
    std::vector<double> x(map.d_x), y(map.d_y), sx(map.d_x), ty(map.d_y);
    std::vector<double> base(map.d_z), scaled(map.d_z);
    HomogeneityReport report;
    report.n_probes = n_probe;
    for (std::size_t p = 0; p < n_probe; ++p) {
        detail::gaussian_fill(rng, x);
        detail::gaussian_fill(rng, y);
        apply_map(map, x, y, base);
        const double base_norm = map.norm_of_z(base);
        for (const auto& [s, t] : scales) {
            for (int i = 0; i < map.d_x; ++i) sx[i] = s * x[i];
            for (int i = 0; i < map.d_y; ++i) ty[i] = t * y[i];
            apply_map(map, sx, ty, scaled);
            const double factor = std::pow(s, map.deg_x) * std::pow(t, map.deg_y);
            double diff = 0.0;
            for (int i = 0; i < map.d_z; ++i) {
                const double e = scaled[i] - factor * base[i];
                diff += e * e;
            }
            // euclidean on the difference is equivalent for the violation test
            const double rel = std::sqrt(diff) / (base_norm + DBL_EPSILON);
            if (rel > report.max_rel_violation) report.max_rel_violation = rel;
        }
    }
    return report;
}

// Running maximum of || psi(theta_x, theta_y) || over unit-sphere probe pairs.
inline double map_bound_probe(const HomogeneousMap& map, std::size_t n_probe, RngStream& rng) {
    map.validate();
    if (n_probe == 0) throw std::domain_error("map_bound_probe: n_probe must be >= 1");
    std::vector<double> x(map.d_x), y(map.d_y), z(map.d_z);
    double best = 0.0;
    for (std::size_t p = 0; p < n_probe; ++p) {
        detail::gaussian_fill(rng, x);
        detail::gaussian_fill(rng, y);
        const double nx = map.norm_of_x(x);
        const double ny = map.norm_of_y(y);
        if (nx == 0.0 || ny == 0.0) continue;
        for (auto& v : x) v /= nx;
        for (auto& v : y) v /= ny;
        apply_map(map, x, y, z);
        best = std::fmax(best, map.norm_of_z(z));
    }
    return best;
}

// M_psi = sup{ || psi(x,y) || : ||x|| = ||y|| = 1 }. The three built-in maps
// attain exactly 1 under their norms; probing is their cross-check. Custom
// maps fall back to the probe estimate (a lower bound).
inline double map_bound(const HomogeneousMap& map, std::size_t n_probe, RngStream& rng) {
    const double probe = map_bound_probe(map, n_probe, rng);
    if (map.kind == MapKind::custom) return probe;
    if (probe > 1.0 + 1e-9)
        throw std::logic_error("map_bound: probe exceeded the analytic bound");
    return 1.0;
}

}  // namespace rvlab
