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

// Shared fixtures for the unit tests. Oracles here deliberately avoid the
// library's own kernels: dense reference arithmetic goes through Eigen, and
// random objects are built from std::mt19937_64 rather than qmeas::Rng.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qmeas/qmeas.hpp"

namespace qmeas::testing {

using EMatrix = Eigen::MatrixXcd;
using EVector = Eigen::VectorXcd;

inline EMatrix to_eigen(const Matrix& m) {
    EMatrix e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    }
    return e;
}

inline EVector to_eigen(std::span<const cplx> v) {
    EVector e(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) e(i) = v[i];
    return e;
}

inline Matrix from_eigen(const EMatrix& e) {
    Matrix m(e.rows(), e.cols());
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
        for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
    }
    return m;
}

inline Vector from_eigen(const EVector& e) {
    Vector v(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) v[i] = e(i);
    return v;
}

/// Reference Kronecker product written from the definition.
inline EMatrix kron_ref(const EMatrix& a, const EMatrix& b) {
    EMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
    return out;
}

inline double max_abs_diff(const EMatrix& a, const EMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double normal() { return normal_(eng_); }
    double uniform() { return uniform_(eng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
    std::mt19937_64& engine() { return eng_; }

    EMatrix gaussian(Eigen::Index rows, Eigen::Index cols) {
        EMatrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = cplx(normal(), normal());
        }
        return m;
    }

    Vector state_vector(int num_qubits) {
        EVector v = gaussian(Eigen::Index{1} << num_qubits, 1).col(0);
        v.normalize();
        return from_eigen(v);
    }

    PureState state(int num_qubits) { return PureState(state_vector(num_qubits)); }

    /// Haar unitary from the QR decomposition of a Ginibre matrix with the
    /// phases of R's diagonal moved into Q.
    EMatrix unitary_eigen(Eigen::Index dim) {
        const EMatrix g = gaussian(dim, dim);
        Eigen::HouseholderQR<EMatrix> qr(g);
        EMatrix q = qr.householderQ();
        const EMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index k = 0; k < dim; ++k) {
            const cplx d = r(k, k);
            q.col(k) *= d / std::abs(d);
        }
        return q;
    }

    Matrix unitary(std::size_t dim) { return from_eigen(unitary_eigen(static_cast<Eigen::Index>(dim))); }

    Matrix hermitian(std::size_t dim) {
        const EMatrix g = gaussian(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        return from_eigen(EMatrix(0.5 * (g + g.adjoint())));
    }

    Matrix psd(std::size_t dim, std::size_t rank) {
        const EMatrix a = gaussian(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(dim));
        return from_eigen(EMatrix(a.adjoint() * a));
    }

    /// Random density matrix of the given rank.
    DensityState density(int num_qubits, std::size_t rank) {
        EMatrix a = to_eigen(psd(std::size_t{1} << num_qubits, rank));
        a /= a.trace();
        return DensityState(from_eigen(a));
    }

    /// Random orthonormal basis of 2^n vectors (columns of a Haar unitary).
    std::vector<Vector> basis(int num_qubits) {
        const EMatrix u = unitary_eigen(Eigen::Index{1} << num_qubits);
        std::vector<Vector> out;
        for (Eigen::Index k = 0; k < u.cols(); ++k) out.push_back(from_eigen(EVector(u.col(k))));
        return out;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), eng_);
    }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// 3-sigma binomial band with a small floor for rare outcomes.
inline bool within_sigma(double freq, double p, std::size_t shots, double k = 3.0) {
    const double sigma = std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(shots));
    return std::abs(freq - p) <= k * sigma + 1e-12;
}

}  // namespace qmeas::testing
