// Copyright 2026 The qmeas Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense complex linear algebra kernel.
//
// Everything here works on row-major dense matrices of std::complex<double>.
// Qubit k of an n-qubit register is bit (n - 1 - k) of a computational-basis
// index, i.e. qubit 0 is the most significant bit and the leftmost factor of
// every Kronecker product.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iterator>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qmeas/error.hpp"

namespace qmeas {

using cplx = std::complex<double>;
using Vector = std::vector<cplx>;

/// Tolerance used for structural validation of states, projectors, effects
/// and Kraus sets.
inline constexpr double kStructuralTol = 1e-10;
/// Tolerance used when checking spectral reconstructions.
inline constexpr double kSpectralTol = 1e-8;
/// Below this probability an outcome cannot be conditioned on.
inline constexpr double kZeroProbability = 1e-12;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            fail(ErrorCode::DimensionMismatch, "entry count does not match rows * cols");
        }
    }
    Matrix(std::initializer_list<std::initializer_list<cplx>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : rows) {
            if (row.size() != cols_) fail(ErrorCode::DimensionMismatch, "ragged matrix literal");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
    static Matrix diagonal(std::span<const cplx> diag) {
        Matrix m(diag.size(), diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }
    static Matrix column(std::span<const cplx> v) {
        return Matrix(v.size(), 1, std::vector<cplx>(v.begin(), v.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    Vector col(std::size_t c) const {
        Vector v(rows_);
        for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
        return v;
    }

    Matrix& operator+=(const Matrix& other) {
        require_same_shape(other);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& other) {
        require_same_shape(other);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
        return *this;
    }
    Matrix& operator*=(cplx s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, cplx s) { return a *= s; }
    friend Matrix operator*(cplx s, Matrix a) { return a *= s; }
    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) fail(ErrorCode::DimensionMismatch, "matrix product shapes do not conform");
        Matrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                const cplx* brow = &b.data_[k * b.cols_];
                cplx* orow = &out.data_[i * out.cols_];
                for (std::size_t j = 0; j < b.cols_; ++j) orow[j] += aik * brow[j];
            }
        }
        return out;
    }
    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    void require_same_shape(const Matrix& other) const {
        if (rows_ != other.rows_ || cols_ != other.cols_) {
            fail(ErrorCode::DimensionMismatch, "matrix shapes differ");
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

// ---------------------------------------------------------------------------
// Index and dimension helpers

inline bool is_power_of_two(std::size_t d) { return d != 0 && std::has_single_bit(d); }

/// Number of qubits of a 2^n-dimensional space; BadDimension otherwise.
inline int qubits_for_dim(std::size_t dim) {
    if (!is_power_of_two(dim)) fail(ErrorCode::BadDimension, "dimension " + std::to_string(dim) + " is not a power of 2");
    return std::countr_zero(dim);
}

inline std::size_t qubit_mask(int qubit, int num_qubits) {
    return std::size_t{1} << (num_qubits - 1 - qubit);
}

// ---------------------------------------------------------------------------
// Vector helpers

inline cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "inner product of vectors of different length");
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline double norm_squared(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return s;
}

inline Vector kron(std::span<const cplx> a, std::span<const cplx> b) {
    Vector out;
    out.reserve(a.size() * b.size());
    for (const auto& x : a) {
        for (const auto& y : b) out.push_back(x * y);
    }
    return out;
}

inline Vector operator*(const Matrix& m, std::span<const cplx> v) {
    if (m.cols() != v.size()) fail(ErrorCode::DimensionMismatch, "matrix-vector shapes do not conform");
    Vector out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        cplx s{};
        for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * v[c];
        out[r] = s;
    }
    return out;
}
inline Vector operator*(const Matrix& m, const Vector& v) { return m * std::span<const cplx>(v); }

/// |a><b|
inline Matrix outer(std::span<const cplx> a, std::span<const cplx> b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * std::conj(b[j]);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Core operations

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const cplx aij = a(i, j);
            if (aij == cplx{}) continue;
            for (std::size_t k = 0; k < b.rows(); ++k) {
                for (std::size_t l = 0; l < b.cols(); ++l) {
                    out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
                }
            }
        }
    }
    return out;
}

inline Matrix kron(std::initializer_list<Matrix> factors) {
    Matrix out = Matrix::identity(1);
    for (const auto& f : factors) out = kron(out, f);
    return out;
}

inline Matrix dagger(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = std::conj(a(i, j));
    }
    return out;
}

inline cplx trace(const Matrix& a) {
    if (!a.is_square()) fail(ErrorCode::NonSquare, "trace of a non-square matrix");
    cplx s{};
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

/// tr(a * b) without forming the product.
inline cplx trace_of_product(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows() || a.rows() != b.cols()) fail(ErrorCode::DimensionMismatch, "trace_of_product shapes");
    cplx s{};
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, i);
    }
    return s;
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (const auto& x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorCode::DimensionMismatch, "max_abs_diff shapes");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (const auto& x : a.data()) s += std::norm(x);
    return std::sqrt(s);
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

enum class Subsystem { A, B };

/// Partial trace of an operator on H_A (x) H_B, with A the most-significant
/// index block. Tracing A returns a dB x dB matrix, tracing B a dA x dA one.
inline Matrix partial_trace(const Matrix& rho, std::size_t dim_a, std::size_t dim_b, Subsystem over) {
    if (!rho.is_square() || rho.rows() != dim_a * dim_b) {
        fail(ErrorCode::DimensionMismatch, "partial_trace: operator is not (dA*dB) x (dA*dB)");
    }
    if (over == Subsystem::A) {
        Matrix out(dim_b, dim_b);
        for (std::size_t a = 0; a < dim_a; ++a) {
            for (std::size_t i = 0; i < dim_b; ++i) {
                for (std::size_t j = 0; j < dim_b; ++j) out(i, j) += rho(a * dim_b + i, a * dim_b + j);
            }
        }
        return out;
    }
    Matrix out(dim_a, dim_a);
    for (std::size_t i = 0; i < dim_a; ++i) {
        for (std::size_t j = 0; j < dim_a; ++j) {
            cplx s{};
            for (std::size_t b = 0; b < dim_b; ++b) s += rho(i * dim_b + b, j * dim_b + b);
            out(i, j) = s;
        }
    }
    return out;
}

/// max |a - a^dagger|
inline double hermitian_deviation(const Matrix& a) {
    if (!a.is_square()) fail(ErrorCode::NonSquare, "hermitian check on a non-square matrix");
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - std::conj(a(j, i))));
    }
    return m;
}

inline Matrix hermitian_part(const Matrix& a) {
    Matrix h = a;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) h(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
    }
    return h;
}

// ---------------------------------------------------------------------------
// Hermitian spectral decomposition

struct SpectralDecomposition {
    std::vector<double> eigenvalues;  // descending
    std::vector<Vector> eigenvectors;

    Matrix reconstruct() const {
        const std::size_t n = eigenvectors.empty() ? 0 : eigenvectors.front().size();
        Matrix out(n, n);
        for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
            const auto& v = eigenvectors[k];
            for (std::size_t i = 0; i < n; ++i) {
                const cplx vi = eigenvalues[k] * v[i];
                for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * std::conj(v[j]);
            }
        }
        return out;
    }
};

namespace detail {

// Right-multiplies columns p and q of m by the 2x2 block g.
inline void rotate_columns(Matrix& m, std::size_t p, std::size_t q, const cplx g[2][2]) {
    for (std::size_t k = 0; k < m.rows(); ++k) {
        const cplx mp = m(k, p);
        const cplx mq = m(k, q);
        m(k, p) = mp * g[0][0] + mq * g[1][0];
        m(k, q) = mp * g[0][1] + mq * g[1][1];
    }
}

// Left-multiplies rows p and q of m by the adjoint of the 2x2 block g.
inline void rotate_rows_adjoint(Matrix& m, std::size_t p, std::size_t q, const cplx g[2][2]) {
    for (std::size_t k = 0; k < m.cols(); ++k) {
        const cplx mp = m(p, k);
        const cplx mq = m(q, k);
        m(p, k) = std::conj(g[0][0]) * mp + std::conj(g[1][0]) * mq;
        m(q, k) = std::conj(g[0][1]) * mp + std::conj(g[1][1]) * mq;
    }
}

inline double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (i != j) s += std::norm(a(i, j));
        }
    }
    return std::sqrt(s);
}

// Fixes the phase of an eigenvector so its largest component is real and
// positive. Makes outputs reproducible for non-degenerate spectra.
inline void canonicalize_phase(Vector& v) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (a > best_abs + 1e-12) {
            best_abs = a;
            best = i;
        }
    }
    if (best_abs <= 0.0) return;
    const cplx phase = std::conj(v[best]) / best_abs;
    for (auto& x : v) x *= phase;
    v[best] = cplx(v[best].real(), 0.0);
}

}  // namespace detail

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation first removes the phase of the pivot a_pq with a diagonal
/// unitary and then applies the classical real Jacobi rotation, so the
/// transformation G = diag(1, e^{-i phi}) R is unitary and G^dagger A G has a
/// zero (p, q) entry. Sweeps stop once the off-diagonal Frobenius norm drops
/// below 1e-12 * max(1, ||H||_F) or after 100 sweeps.
inline SpectralDecomposition eig_hermitian(const Matrix& h, double tol = kStructuralTol) {
    if (!h.is_square()) fail(ErrorCode::NonSquare, "eig_hermitian of a non-square matrix");
    const double dev = hermitian_deviation(h);
    if (dev > tol) fail(ErrorCode::NotHermitian, "deviation " + std::to_string(dev) + " exceeds tolerance");

    const std::size_t n = h.rows();
    Matrix a = hermitian_part(h);
    Matrix v = Matrix::identity(n);
    const double stop = 1e-12 * std::max(1.0, frobenius_norm(a));

    for (int sweep = 0; sweep < 100; ++sweep) {
        if (detail::off_diagonal_norm(a) < stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cplx b = a(p, q);
                const double abs_b = std::abs(b);
                if (abs_b == 0.0) continue;
                const cplx phase = b / abs_b;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double zeta = (aqq - app) / (2.0 * abs_b);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx g[2][2] = {{c, s}, {-s * std::conj(phase), c * std::conj(phase)}};
                detail::rotate_columns(a, p, q, g);
                detail::rotate_rows_adjoint(a, p, q, g);
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                detail::rotate_columns(v, p, q, g);
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });

    SpectralDecomposition out;
    out.eigenvalues.reserve(n);
    out.eigenvectors.reserve(n);
    for (const auto k : order) {
        out.eigenvalues.push_back(a(k, k).real());
        Vector col = v.col(k);
        detail::canonicalize_phase(col);
        out.eigenvectors.push_back(std::move(col));
    }
    return out;
}

/// One group of (numerically) equal eigenvalues and an orthonormal basis of
/// its eigenspace.
struct Eigenspace {
    double value;
    std::vector<Vector> vectors;
};

/// Eigenvalues closer than 1e-8 * max(1, scale) to their neighbour are merged
/// into one degenerate eigenspace.
inline std::vector<Eigenspace> group_eigenvalues(const SpectralDecomposition& spec, double scale) {
    const double gap = kSpectralTol * std::max(1.0, scale);
    std::vector<Eigenspace> groups;
    std::vector<double> sums;
    for (std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
        const double lambda = spec.eigenvalues[k];
        if (groups.empty() || spec.eigenvalues[k - 1] - lambda >= gap) {
            groups.push_back({lambda, {}});
            sums.push_back(0.0);
        }
        groups.back().vectors.push_back(spec.eigenvectors[k]);
        sums.back() += lambda;
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        groups[g].value = sums[g] / static_cast<double>(groups[g].vectors.size());
    }
    return groups;
}

/// Singular values (descending) by one-sided Jacobi orthogonalisation of the
/// columns. Accurate to high relative precision, which the rank tests rely on.
inline std::vector<double> singular_values(const Matrix& m) {
    Matrix w = m.rows() >= m.cols() ? m : dagger(m);
    const std::size_t rows = w.rows();
    const std::size_t cols = w.cols();
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double alpha = 0.0;
                double beta = 0.0;
                cplx gamma{};
                for (std::size_t k = 0; k < rows; ++k) {
                    alpha += std::norm(w(k, p));
                    beta += std::norm(w(k, q));
                    gamma += std::conj(w(k, p)) * w(k, q);
                }
                const double abs_g = std::abs(gamma);
                if (abs_g == 0.0 || abs_g <= 1e-15 * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const cplx phase = gamma / abs_g;
                const double zeta = (beta - alpha) / (2.0 * abs_g);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < rows; ++k) {
                    const cplx wp = w(k, p);
                    const cplx wq = w(k, q) * std::conj(phase);
                    w(k, p) = c * wp - s * wq;
                    w(k, q) = s * wp + c * wq;
                }
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sv(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < rows; ++k) s += std::norm(w(k, c));
        sv[c] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

/// Smallest eigenvalue of the Hermitian part.
inline double min_eigenvalue(const Matrix& h) {
    if (h.rows() == 0) return 0.0;
    const auto spec = eig_hermitian(hermitian_part(h), std::numeric_limits<double>::infinity());
    return spec.eigenvalues.back();
}

/// Positive semidefinite square root via the spectral decomposition.
/// Eigenvalues within rounding noise of zero are clamped so that the square
/// root of an exact projector is that projector.
inline Matrix sqrt_psd(const Matrix& m, double tol = kStructuralTol) {
    if (!m.is_square()) fail(ErrorCode::NonSquare, "sqrt_psd of a non-square matrix");
    if (hermitian_deviation(m) > tol) fail(ErrorCode::NotPsd, "matrix is not Hermitian");
    const auto spec = eig_hermitian(m, tol);
    if (!spec.eigenvalues.empty() && spec.eigenvalues.back() < -tol) {
        fail(ErrorCode::NotPsd, "eigenvalue " + std::to_string(spec.eigenvalues.back()) + " below -tol");
    }
    const double top = spec.eigenvalues.empty() ? 0.0 : std::max(1.0, spec.eigenvalues.front());
    const double clamp = 1e-13 * top;
    SpectralDecomposition roots = spec;
    for (auto& lambda : roots.eigenvalues) lambda = lambda <= clamp ? 0.0 : std::sqrt(lambda);
    return roots.reconstruct();
}

// ---------------------------------------------------------------------------
// Pauli strings and decomposition

/// Single-qubit Pauli matrix: 0 -> I, 1 -> X, 2 -> Y, 3 -> Z.
inline Matrix pauli(int k) {
    using namespace std::complex_literals;
    switch (k) {
        case 0: return {{1.0, 0.0}, {0.0, 1.0}};
        case 1: return {{0.0, 1.0}, {1.0, 0.0}};
        case 2: return {{0.0, -1i}, {1i, 0.0}};
        case 3: return {{1.0, 0.0}, {0.0, -1.0}};
        default: fail(ErrorCode::BadSelector, "Pauli index must be 0..3");
    }
}

namespace detail {

// A Pauli string P = (x) sigma_{s_k} is a monomial matrix: column c has its
// single non-zero entry in row c ^ x_mask with value
// i^{#Y} * (-1)^{popcount(c & z_mask)}.
struct PauliMonomial {
    std::size_t x_mask = 0;
    std::size_t z_mask = 0;
    cplx y_phase = 1.0;

    cplx entry(std::size_t c) const {
        return (std::popcount(c & z_mask) & 1) ? -y_phase : y_phase;
    }
};

inline PauliMonomial monomial(std::span<const int> digits) {
    PauliMonomial m;
    const int n = static_cast<int>(digits.size());
    int num_y = 0;
    for (int k = 0; k < n; ++k) {
        const std::size_t bit = qubit_mask(k, n);
        switch (digits[k]) {
            case 0: break;
            case 1: m.x_mask |= bit; break;
            case 2: m.x_mask |= bit; m.z_mask |= bit; ++num_y; break;
            case 3: m.z_mask |= bit; break;
            default: fail(ErrorCode::BadSelector, "Pauli digit must be 0..3");
        }
    }
    static constexpr cplx kPowersOfI[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    m.y_phase = kPowersOfI[num_y % 4];
    return m;
}

inline std::vector<int> digits_of(std::size_t index, int n) {
    std::vector<int> d(n);
    for (int k = n - 1; k >= 0; --k) {
        d[k] = static_cast<int>(index & 3u);
        index >>= 2;
    }
    return d;
}

}  // namespace detail

/// Parses "IXYZ" letters or "0123" digits into Pauli digits.
inline std::vector<int> parse_pauli_digits(std::string_view label) {
    std::vector<int> d;
    d.reserve(label.size());
    for (const char ch : label) {
        switch (ch) {
            case 'I': case 'i': case '0': d.push_back(0); break;
            case 'X': case 'x': case '1': d.push_back(1); break;
            case 'Y': case 'y': case '2': d.push_back(2); break;
            case 'Z': case 'z': case '3': d.push_back(3); break;
            default: fail(ErrorCode::BadSelector, std::string("invalid Pauli label character '") + ch + "'");
        }
    }
    return d;
}

inline Matrix pauli_string_matrix(std::span<const int> digits) {
    const int n = static_cast<int>(digits.size());
    const auto mono = detail::monomial(digits);
    const std::size_t dim = std::size_t{1} << n;
    Matrix m(dim, dim);
    for (std::size_t c = 0; c < dim; ++c) m(c ^ mono.x_mask, c) = mono.entry(c);
    return m;
}

/// tr(P_s * rho) in O(dim) operations.
inline cplx pauli_trace(std::span<const int> digits, const Matrix& rho) {
    const int n = static_cast<int>(digits.size());
    if (!rho.is_square() || rho.rows() != (std::size_t{1} << n)) {
        fail(ErrorCode::DimensionMismatch, "Pauli string length does not match operator dimension");
    }
    const auto mono = detail::monomial(digits);
    cplx s{};
    for (std::size_t c = 0; c < rho.rows(); ++c) s += mono.entry(c) * rho(c, c ^ mono.x_mask);
    return s;
}

/// Coefficients a_s of A = sum_s a_s P_s over all 4^n Pauli strings. Index s
/// is read in base 4 with qubit 0 as the most significant digit.
struct PauliCoefficients {
    int num_qubits = 0;
    std::vector<cplx> coeffs;

    cplx operator[](std::string_view label) const { return at(parse_pauli_digits(label)); }
    cplx at(std::span<const int> digits) const {
        if (static_cast<int>(digits.size()) != num_qubits) fail(ErrorCode::DimensionMismatch, "Pauli label length");
        std::size_t idx = 0;
        for (const int d : digits) idx = idx * 4 + static_cast<std::size_t>(d);
        return coeffs[idx];
    }
    static std::string label(std::size_t index, int n) {
        static constexpr char kLetters[] = {'I', 'X', 'Y', 'Z'};
        std::string s;
        for (const int d : detail::digits_of(index, n)) s.push_back(kLetters[d]);
        return s;
    }
    std::vector<int> digits(std::size_t index) const { return detail::digits_of(index, num_qubits); }
};

inline PauliCoefficients pauli_decompose(const Matrix& a) {
    if (!a.is_square()) fail(ErrorCode::BadDimension, "pauli_decompose needs a square matrix");
    const int n = qubits_for_dim(a.rows());
    const std::size_t count = std::size_t{1} << (2 * n);
    const double inv_dim = 1.0 / static_cast<double>(a.rows());
    PauliCoefficients out{n, std::vector<cplx>(count)};
    for (std::size_t s = 0; s < count; ++s) {
        out.coeffs[s] = pauli_trace(detail::digits_of(s, n), a) * inv_dim;
    }
    return out;
}

inline Matrix pauli_reconstruct(const PauliCoefficients& pc) {
    const std::size_t dim = std::size_t{1} << pc.num_qubits;
    Matrix m(dim, dim);
    for (std::size_t s = 0; s < pc.coeffs.size(); ++s) {
        const cplx a = pc.coeffs[s];
        if (a == cplx{}) continue;
        const auto mono = detail::monomial(detail::digits_of(s, pc.num_qubits));
        for (std::size_t c = 0; c < dim; ++c) m(c ^ mono.x_mask, c) += a * mono.entry(c);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Local operators on a subset of qubits

namespace detail {

// offsets[j] is the full-register bit pattern that places the bits of the
// local index j (targets[0] most significant) on the target qubits.
inline std::vector<std::size_t> target_offsets(std::span<const int> targets, int num_qubits) {
    const std::size_t k = targets.size();
    std::vector<std::size_t> offsets(std::size_t{1} << k, 0);
    for (std::size_t j = 0; j < offsets.size(); ++j) {
        for (std::size_t i = 0; i < k; ++i) {
            if (j & (std::size_t{1} << (k - 1 - i))) offsets[j] |= qubit_mask(targets[i], num_qubits);
        }
    }
    return offsets;
}

inline std::size_t target_mask(std::span<const int> targets, int num_qubits) {
    std::size_t mask = 0;
    for (const int t : targets) mask |= qubit_mask(t, num_qubits);
    return mask;
}

}  // namespace detail

inline void check_targets(std::span<const int> targets, int num_qubits) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0 || targets[i] >= num_qubits) {
            fail(ErrorCode::BadTarget, "qubit index " + std::to_string(targets[i]) + " out of range");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (targets[i] == targets[j]) fail(ErrorCode::BadTarget, "repeated target qubit " + std::to_string(targets[i]));
        }
    }
}

/// Dense matrix of op acting on `targets` (targets[0] is op's most
/// significant qubit) and identity on the rest of an n-qubit register.
/// op may be rectangular only when targets is empty on one side, so it must
/// be square here.
inline Matrix embed_operator(const Matrix& op, std::span<const int> targets, int num_qubits) {
    check_targets(targets, num_qubits);
    if (!op.is_square() || op.rows() != (std::size_t{1} << targets.size())) {
        fail(ErrorCode::BadTarget, "operator dimension does not match target count");
    }
    const auto offsets = detail::target_offsets(targets, num_qubits);
    const std::size_t mask = detail::target_mask(targets, num_qubits);
    const std::size_t dim = std::size_t{1} << num_qubits;
    Matrix out(dim, dim);
    for (std::size_t base = 0; base < dim; ++base) {
        if (base & mask) continue;
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            for (std::size_t j = 0; j < offsets.size(); ++j) out(base | offsets[i], base | offsets[j]) = op(i, j);
        }
    }
    return out;
}

/// In-place state <- op_targets * state.
inline void apply_operator(const Matrix& op, std::span<const int> targets, int num_qubits, std::span<cplx> state) {
    check_targets(targets, num_qubits);
    if (!op.is_square() || op.rows() != (std::size_t{1} << targets.size())) {
        fail(ErrorCode::DimensionMismatch, "operator dimension does not match target count");
    }
    if (state.size() != (std::size_t{1} << num_qubits)) fail(ErrorCode::DimensionMismatch, "state length");
    const auto offsets = detail::target_offsets(targets, num_qubits);
    const std::size_t mask = detail::target_mask(targets, num_qubits);
    const std::size_t k = offsets.size();
    Vector in(k);
    for (std::size_t base = 0; base < state.size(); ++base) {
        if (base & mask) continue;
        for (std::size_t j = 0; j < k; ++j) in[j] = state[base | offsets[j]];
        for (std::size_t i = 0; i < k; ++i) {
            cplx s{};
            for (std::size_t j = 0; j < k; ++j) s += op(i, j) * in[j];
            state[base | offsets[i]] = s;
        }
    }
}

/// In-place rho <- op_targets * rho * op_targets^dagger.
inline void conjugate_operator(const Matrix& op, std::span<const int> targets, int num_qubits, Matrix& rho) {
    const std::size_t dim = std::size_t{1} << num_qubits;
    if (rho.rows() != dim || rho.cols() != dim) fail(ErrorCode::DimensionMismatch, "density dimension");
    Vector buf(dim);
    for (std::size_t c = 0; c < dim; ++c) {
        for (std::size_t r = 0; r < dim; ++r) buf[r] = rho(r, c);
        apply_operator(op, targets, num_qubits, buf);
        for (std::size_t r = 0; r < dim; ++r) rho(r, c) = buf[r];
    }
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = 0; c < dim; ++c) buf[c] = std::conj(rho(r, c));
        apply_operator(op, targets, num_qubits, buf);
        for (std::size_t c = 0; c < dim; ++c) rho(r, c) = std::conj(buf[c]);
    }
}

// ---------------------------------------------------------------------------
// Structural validation

enum class MatrixKind { Unitary, Hermitian, Psd, Projector, Density };

inline std::string_view matrix_kind_name(MatrixKind k) {
    switch (k) {
        case MatrixKind::Unitary: return "unitary";
        case MatrixKind::Hermitian: return "hermitian";
        case MatrixKind::Psd: return "psd";
        case MatrixKind::Projector: return "projector";
        case MatrixKind::Density: return "density";
    }
    return "unknown";
}

struct ValidationCheck {
    std::string predicate;
    double deviation;
    bool passed;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    std::vector<ValidationCheck> failures() const {
        std::vector<ValidationCheck> f;
        std::copy_if(checks.begin(), checks.end(), std::back_inserter(f), [](const auto& c) { return !c.passed; });
        return f;
    }
    /// Deviation recorded for a predicate, or -1 when it was not checked.
    double deviation(std::string_view predicate) const {
        for (const auto& c : checks) {
            if (c.predicate == predicate) return c.deviation;
        }
        return -1.0;
    }
    void add(std::string predicate, double deviation, double tol) {
        checks.push_back({std::move(predicate), deviation, deviation <= tol});
    }
    void merge(const ValidationReport& other) {
        checks.insert(checks.end(), other.checks.begin(), other.checks.end());
    }
};

inline double unitarity_deviation(const Matrix& u) {
    if (!u.is_square()) return std::numeric_limits<double>::infinity();
    return max_abs_diff(dagger(u) * u, Matrix::identity(u.rows()));
}

inline ValidationReport validate(const Matrix& m, MatrixKind kind, double tol = kStructuralTol) {
    ValidationReport report;
    if (!m.is_square()) {
        report.checks.push_back({"square", std::numeric_limits<double>::infinity(), false});
        return report;
    }
    switch (kind) {
        case MatrixKind::Unitary:
            report.add("unitary", unitarity_deviation(m), tol);
            break;
        case MatrixKind::Hermitian:
            report.add("hermitian", hermitian_deviation(m), tol);
            break;
        case MatrixKind::Psd:
        case MatrixKind::Density: {
            report.add("hermitian", hermitian_deviation(m), tol);
            report.add("psd", std::max(0.0, -min_eigenvalue(m)), tol);
            if (kind == MatrixKind::Density) report.add("trace", std::abs(trace(m) - 1.0), tol);
            break;
        }
        case MatrixKind::Projector:
            report.add("hermitian", hermitian_deviation(m), tol);
            report.add("idempotent", max_abs_diff(m * m, m), tol);
            break;
    }
    return report;
}

}  // namespace qmeas
