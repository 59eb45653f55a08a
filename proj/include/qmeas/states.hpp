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

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qmeas/error.hpp"
#include "qmeas/linalg.hpp"
#include "qmeas/random.hpp"

namespace qmeas {

/// Normalized amplitude vector of an n-qubit register. Construction rejects
/// vectors whose squared norm is off by more than 1e-10; use renormalized()
/// when a fixture needs scaling.
class PureState {
public:
    explicit PureState(Vector amplitudes) : amps_(std::move(amplitudes)) {
        n_ = qubits_for_dim(amps_.size());
        const double norm2 = norm_squared(amps_);
        if (std::abs(norm2 - 1.0) > kStructuralTol) {
            fail(ErrorCode::NotNormalized, "squared norm " + std::to_string(norm2));
        }
    }

    static PureState renormalized(Vector amplitudes) {
        const double norm = std::sqrt(norm_squared(amplitudes));
        if (norm == 0.0) fail(ErrorCode::NotNormalized, "cannot renormalize the zero vector");
        for (auto& a : amplitudes) a /= norm;
        return PureState(std::move(amplitudes));
    }

    static PureState basis(int num_qubits, std::size_t index) {
        const std::size_t dim = std::size_t{1} << num_qubits;
        if (index >= dim) fail(ErrorCode::DimensionMismatch, "basis index out of range");
        Vector v(dim);
        v[index] = 1.0;
        return PureState(std::move(v));
    }

    /// "010" -> |010>, qubit 0 leftmost.
    static PureState from_bits(std::string_view bits) {
        std::size_t index = 0;
        for (const char ch : bits) {
            if (ch != '0' && ch != '1') fail(ErrorCode::BadSelector, "basis label must be a 0/1 string");
            index = (index << 1) | static_cast<std::size_t>(ch == '1');
        }
        return basis(static_cast<int>(bits.size()), index);
    }

    /// "phi+", "phi-", "psi+", "psi-".
    static PureState bell(std::string_view which) {
        const double h = std::numbers::sqrt2 / 2.0;
        if (which == "phi+") return PureState({h, 0.0, 0.0, h});
        if (which == "phi-") return PureState({h, 0.0, 0.0, -h});
        if (which == "psi+") return PureState({0.0, h, h, 0.0});
        if (which == "psi-") return PureState({0.0, h, -h, 0.0});
        fail(ErrorCode::BadSelector, "unknown Bell state '" + std::string(which) + "'");
    }

    /// |+>^{(x) n}
    static PureState plus(int num_qubits = 1) {
        const std::size_t dim = std::size_t{1} << num_qubits;
        return PureState(Vector(dim, cplx(1.0 / std::sqrt(static_cast<double>(dim)))));
    }

    static PureState minus() {
        const double h = std::numbers::sqrt2 / 2.0;
        return PureState({h, -h});
    }

    /// (|0...0> + |1...1>) / sqrt(2)
    static PureState ghz(int num_qubits) {
        Vector v(std::size_t{1} << num_qubits);
        v.front() = std::numbers::sqrt2 / 2.0;
        v.back() += std::numbers::sqrt2 / 2.0;
        return PureState(std::move(v));
    }

    int num_qubits() const noexcept { return n_; }
    std::size_t dim() const noexcept { return amps_.size(); }
    std::span<const cplx> amplitudes() const noexcept { return amps_; }
    const Vector& vector() const noexcept { return amps_; }
    cplx operator[](std::size_t i) const { return amps_[i]; }

    PureState tensor(const PureState& other) const { return PureState(kron(amps_, other.amps_)); }

private:
    int n_ = 0;
    Vector amps_;
};

/// Unit-trace positive semidefinite operator.
class DensityState {
public:
    explicit DensityState(Matrix rho, double tol = kStructuralTol) : rho_(std::move(rho)) {
        if (!rho_.is_square()) fail(ErrorCode::NonSquare, "density matrix must be square");
        n_ = qubits_for_dim(rho_.rows());
        const double herm = hermitian_deviation(rho_);
        if (herm > tol) fail(ErrorCode::NotHermitian, "density deviation " + std::to_string(herm));
        const double tr_dev = std::abs(trace(rho_) - 1.0);
        if (tr_dev > tol) fail(ErrorCode::NotNormalized, "trace deviation " + std::to_string(tr_dev));
        const double min_eig = min_eigenvalue(rho_);
        if (min_eig < -tol) fail(ErrorCode::NotPsd, "minimum eigenvalue " + std::to_string(min_eig));
    }

    /// Wraps the output of an operation that preserves density-ness by
    /// construction. Only the Hermitian part is kept; no spectral check.
    static DensityState unchecked(Matrix rho) {
        DensityState d;
        d.n_ = qubits_for_dim(rho.rows());
        d.rho_ = hermitian_part(rho);
        return d;
    }

    /// The zero-qubit state rho = 1, input of preparation channels.
    static DensityState scalar() { return unchecked(Matrix::identity(1)); }

    static DensityState maximally_mixed(int num_qubits) {
        const std::size_t dim = std::size_t{1} << num_qubits;
        return unchecked(Matrix::identity(dim) * cplx(1.0 / static_cast<double>(dim)));
    }

    int num_qubits() const noexcept { return n_; }
    std::size_t dim() const noexcept { return rho_.rows(); }
    const Matrix& matrix() const noexcept { return rho_; }
    cplx operator()(std::size_t r, std::size_t c) const { return rho_(r, c); }

private:
    DensityState() = default;

    int n_ = 0;
    Matrix rho_;
};

struct EnsembleMember {
    double probability;
    PureState state;
};

using Ensemble = std::vector<EnsembleMember>;

inline void check_ensemble(const Ensemble& e) {
    if (e.empty()) fail(ErrorCode::ProbabilityMismatch, "empty ensemble");
    double total = 0.0;
    for (const auto& m : e) {
        if (m.probability < 0.0 || m.probability > 1.0) {
            fail(ErrorCode::ProbabilityMismatch, "member probability outside [0, 1]");
        }
        if (m.state.num_qubits() != e.front().state.num_qubits()) {
            fail(ErrorCode::DimensionMismatch, "ensemble members have different qubit counts");
        }
        total += m.probability;
    }
    if (std::abs(total - 1.0) > kStructuralTol) {
        fail(ErrorCode::ProbabilityMismatch, "ensemble probabilities sum to " + std::to_string(total));
    }
}

inline DensityState to_density(const PureState& psi) {
    return DensityState::unchecked(outer(psi.amplitudes(), psi.amplitudes()));
}

inline DensityState ensemble_to_density(const Ensemble& e) {
    check_ensemble(e);
    const std::size_t dim = e.front().state.dim();
    Matrix rho(dim, dim);
    for (const auto& m : e) rho += outer(m.state.amplitudes(), m.state.amplitudes()) * cplx(m.probability);
    return DensityState::unchecked(std::move(rho));
}

/// |<a|b>|^2
inline double fidelity(const PureState& a, const PureState& b) {
    if (a.num_qubits() != b.num_qubits()) fail(ErrorCode::DimensionMismatch, "fidelity of states of different size");
    return std::min(1.0, std::norm(inner(a.amplitudes(), b.amplitudes())));
}

/// <psi| rho |psi>, the pure-vs-mixed fidelity used for branch comparisons.
inline double fidelity(const PureState& psi, const DensityState& rho) {
    if (psi.dim() != rho.dim()) fail(ErrorCode::DimensionMismatch, "fidelity of states of different size");
    return std::min(1.0, inner(psi.amplitudes(), rho.matrix() * psi.vector()).real());
}

/// tr(rho^2)
inline double purity(const DensityState& rho) {
    return trace_of_product(rho.matrix(), rho.matrix()).real();
}

/// Haar-random pure state (normalized complex Gaussian vector).
inline PureState random_state(int num_qubits, Rng& rng) {
    Vector v(std::size_t{1} << num_qubits);
    for (auto& a : v) {
        // Box-Muller; 1 - u keeps the logarithm finite.
        const double r = std::sqrt(-2.0 * std::log(1.0 - rng.uniform()));
        const double theta = 2.0 * std::numbers::pi * rng.uniform();
        a = cplx(r * std::cos(theta), r * std::sin(theta));
    }
    return PureState::renormalized(std::move(v));
}

/// Removes qubits that sit in a definite computational-basis state (e.g.
/// measured ancillas) and returns the state of the remaining qubits, in
/// their original order. NotNormalized if the qubits are entangled with
/// the rest or not in a basis state.
inline PureState discard_qubits(const PureState& psi, std::span<const int> qubits) {
    const int n = psi.num_qubits();
    check_targets(qubits, n);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < psi.dim(); ++i) {
        if (std::abs(psi[i]) > std::abs(psi[peak])) peak = i;
    }
    std::size_t mask = 0;
    for (const int q : qubits) mask |= qubit_mask(q, n);
    const std::size_t fixed = peak & mask;

    std::vector<int> kept;
    for (int q = 0; q < n; ++q) {
        if (!(mask & qubit_mask(q, n))) kept.push_back(q);
    }
    const int m = static_cast<int>(kept.size());
    Vector out(std::size_t{1} << m);
    for (std::size_t j = 0; j < out.size(); ++j) {
        std::size_t idx = fixed;
        for (int i = 0; i < m; ++i) {
            if (j & qubit_mask(i, m)) idx |= qubit_mask(kept[i], n);
        }
        out[j] = psi[idx];
    }
    const double norm2 = norm_squared(out);
    if (std::abs(norm2 - 1.0) > 1e-9) {
        fail(ErrorCode::NotNormalized, "discarded qubits are not in a definite basis state");
    }
    return PureState::renormalized(std::move(out));
}

}  // namespace qmeas
