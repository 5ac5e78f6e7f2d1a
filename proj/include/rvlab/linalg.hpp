#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rvlab/errors.hpp"
#include "rvlab/rng.hpp"

namespace rvlab {

// Matrices are stored flattened in row-major order.

enum class NormKind { euclidean, op, pair_sum };

inline const char* norm_kind_name(NormKind k) {
    switch (k) {
        case NormKind::euclidean: return "euclidean";
        case NormKind::op: return "operator";
        case NormKind::pair_sum: return "pair-sum";
    }
    return "?";
}

inline NormKind parse_norm_kind(const std::string& s) {
    if (s == "euclidean") return NormKind::euclidean;
    if (s == "operator") return NormKind::op;
    if (s == "pair-sum") return NormKind::pair_sum;
    throw ConfigError("unknown norm kind: " + s);
}

inline double euclidean_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Largest singular value. 2x2 and rank-1 shapes have closed forms; larger
// matrices go through Eigen.
inline double operator_norm(std::span<const double> m, int rows, int cols) {
    if (rows <= 0 || cols <= 0 || static_cast<std::size_t>(rows) * cols != m.size())
        throw std::domain_error("operator_norm: shape does not match buffer");
    if (rows == 1 || cols == 1) return euclidean_norm(m);
    if (rows == 2 && cols == 2) {
        const double a = m[0], b = m[1], c = m[2], d = m[3];
        const double t = a * a + b * b + c * c + d * d;
        const double det = a * d - b * c;
        const double disc = std::sqrt(std::fmax(t * t - 4.0 * det * det, 0.0));
        return std::sqrt(0.5 * (t + disc));
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        mat(m.data(), rows, cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
    return svd.singularValues()(0);
}

// A (matrix, vector) pair flattened as d*d matrix entries followed by d
// vector entries: ||(a,b)|| = op_norm(a) + eucl(b).
inline int pair_dim_of(std::size_t size) {
    const int d = static_cast<int>(std::llround((std::sqrt(4.0 * static_cast<double>(size) + 1.0) - 1.0) / 2.0));
    if (d <= 0 || static_cast<std::size_t>(d) * d + d != size)
        throw std::domain_error("pair norm: buffer size is not d*d+d");
    return d;
}

inline double pair_sum_norm(std::span<const double> v) {
    const int d = pair_dim_of(v.size());
    return operator_norm(v.subspan(0, static_cast<std::size_t>(d) * d), d, d) +
           euclidean_norm(v.subspan(static_cast<std::size_t>(d) * d, d));
}

// Norm dispatch for flat buffers; operator norm assumes a square matrix.
inline double norm(std::span<const double> v, NormKind kind) {
    switch (kind) {
        case NormKind::euclidean:
            return euclidean_norm(v);
        case NormKind::op: {
            const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(v.size()))));
            if (static_cast<std::size_t>(d) * d != v.size())
                throw std::domain_error("operator norm: buffer is not a square matrix");
            return operator_norm(v, d, d);
        }
        case NormKind::pair_sum:
            return pair_sum_norm(v);
    }
    throw std::domain_error("norm: bad kind");
}

inline void mat_mul(std::span<const double> a, int ra, int ca,
                    std::span<const double> b, int rb, int cb, std::span<double> out) {
    if (ca != rb) throw std::domain_error("mat_mul: inner dimensions differ");
    if (out.size() != static_cast<std::size_t>(ra) * cb)
        throw std::domain_error("mat_mul: bad output size");
    for (int i = 0; i < ra; ++i) {
        for (int j = 0; j < cb; ++j) {
            double s = 0.0;
            for (int k = 0; k < ca; ++k) s += a[i * ca + k] * b[k * cb + j];
            out[i * cb + j] = s;
        }
    }
}

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the sign
// of the R diagonal folded into Q.
inline void sample_haar_orthogonal(RngStream& rng, int d, std::span<double> out) {
    if (out.size() != static_cast<std::size_t>(d) * d)
        throw std::domain_error("sample_haar_orthogonal: bad output size");
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out[i * d + j] = q(i, j);
}

// Flat n-by-d sample storage (each row one draw).
struct SampleMatrix {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    SampleMatrix() = default;
    SampleMatrix(std::size_t n_, std::size_t d_) : n(n_), dim(d_), data(n_ * d_, 0.0) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

}  // namespace rvlab
