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

// Quantum channels in Kraus form, rho -> sum_y K_y rho K_y^dagger.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qmeas/error.hpp"
#include "qmeas/linalg.hpp"
#include "qmeas/measure.hpp"
#include "qmeas/random.hpp"
#include "qmeas/states.hpp"

namespace qmeas {

/// Kraus maps from n_in to n_out qubits. Shapes are checked on
/// construction; completeness is checked by kraus_validate() and enforced by
/// apply(), so an incomplete set can still be built and inspected.
class KrausChannel {
public:
    explicit KrausChannel(std::vector<Matrix> kraus) : kraus_(std::move(kraus)) {
        if (kraus_.empty()) fail(ErrorCode::InvalidChannel, "channel needs at least one Kraus matrix");
        const auto rows = kraus_.front().rows();
        const auto cols = kraus_.front().cols();
        for (const auto& k : kraus_) {
            if (k.rows() != rows || k.cols() != cols) fail(ErrorCode::DimensionMismatch, "Kraus matrices differ in shape");
        }
        n_out_ = qubits_for_dim(rows);
        n_in_ = qubits_for_dim(cols);
    }

    int input_qubits() const noexcept { return n_in_; }
    int output_qubits() const noexcept { return n_out_; }
    const std::vector<Matrix>& kraus() const noexcept { return kraus_; }

    /// Diagnostics attached by constructors, e.g. an unconventional
    /// flip probability.
    const std::vector<std::string>& notes() const noexcept { return notes_; }
    KrausChannel& with_note(std::string note) {
        notes_.push_back(std::move(note));
        return *this;
    }

private:
    int n_in_ = 0;
    int n_out_ = 0;
    std::vector<Matrix> kraus_;
    std::vector<std::string> notes_;
};

/// Reports max |sum_y K_y^dagger K_y - I|.
inline ValidationReport kraus_validate(const KrausChannel& c, double tol = kStructuralTol) {
    const std::size_t dim_in = std::size_t{1} << c.input_qubits();
    Matrix sum(dim_in, dim_in);
    for (const auto& k : c.kraus()) sum += dagger(k) * k;
    ValidationReport report;
    report.add("completeness", max_abs_diff(sum, Matrix::identity(dim_in)), tol);
    return report;
}

inline DensityState apply(const KrausChannel& c, const DensityState& rho) {
    if (rho.num_qubits() != c.input_qubits()) fail(ErrorCode::DimensionMismatch, "channel input size differs from state size");
    const auto report = kraus_validate(c);
    if (!report.ok()) {
        fail(ErrorCode::InvalidChannel, "completeness deviation " + std::to_string(report.deviation("completeness")));
    }
    const std::size_t dim_out = std::size_t{1} << c.output_qubits();
    Matrix out(dim_out, dim_out);
    for (const auto& k : c.kraus()) out += k * rho.matrix() * dagger(k);
    return DensityState::unchecked(std::move(out));
}

/// K_y = (<y| (x) I) U (|0> (x) I) with the n' ancillas leading.
inline KrausChannel channel_from_dilation(const Matrix& u, int num_ancillas) {
    return KrausChannel(dilation_blocks(u, num_ancillas));
}

namespace detail {

inline void check_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::BadProbabilities, "probability " + std::to_string(p) + " outside [0, 1]");
}

}  // namespace detail

/// Kraus set {sqrt(p0) I, sqrt(p1) X, sqrt(p2) Y, sqrt(p3) Z}.
inline KrausChannel pauli_channel(double p0, double p1, double p2, double p3) {
    const double ps[] = {p0, p1, p2, p3};
    for (const double p : ps) detail::check_probability(p);
    const double total = p0 + p1 + p2 + p3;
    if (std::abs(total - 1.0) > kStructuralTol) fail(ErrorCode::BadProbabilities, "Pauli probabilities sum to " + std::to_string(total));
    std::vector<Matrix> kraus;
    for (int k = 0; k < 4; ++k) kraus.push_back(pauli(k) * cplx(std::sqrt(ps[k])));
    return KrausChannel(std::move(kraus));
}

/// (1 - p) rho + p X rho X
inline KrausChannel bit_flip(double p) {
    detail::check_probability(p);
    auto c = pauli_channel(1.0 - p, p, 0.0, 0.0);
    if (p > 0.5) c.with_note("bit-flip probability above 0.5; equivalent to X followed by bit_flip(1 - p)");
    return c;
}

/// (1 - p) rho + p Z rho Z
inline KrausChannel dephasing(double p) {
    detail::check_probability(p);
    auto c = pauli_channel(1.0 - p, 0.0, 0.0, p);
    if (p > 0.5) c.with_note("dephasing probability above 0.5; equivalent to Z followed by dephasing(1 - p)");
    return c;
}

/// Zero-input channel whose output is the ensemble's density matrix;
/// K_x = sqrt(p_x)|v_x> as 2^n x 1 columns.
inline KrausChannel state_prep_channel(const Ensemble& e) {
    check_ensemble(e);
    std::vector<Matrix> kraus;
    for (const auto& m : e) kraus.push_back(Matrix::column(m.state.amplitudes()) * cplx(std::sqrt(m.probability)));
    return KrausChannel(std::move(kraus));
}

/// K_x = |x><x|: full decoherence in the computational basis.
inline KrausChannel classical_channel(int num_qubits) {
    if (num_qubits < 1) fail(ErrorCode::BadDimension, "classical channel needs at least one qubit");
    const std::size_t dim = std::size_t{1} << num_qubits;
    std::vector<Matrix> kraus;
    for (std::size_t x = 0; x < dim; ++x) {
        Matrix k(dim, dim);
        k(x, x) = 1.0;
        kraus.push_back(std::move(k));
    }
    return KrausChannel(std::move(kraus));
}

/// Lifts c to act on `targets` of an n_total-qubit register.
inline KrausChannel embed(const KrausChannel& c, std::span<const int> targets, int num_qubits) {
    if (c.input_qubits() != c.output_qubits() || static_cast<std::size_t>(c.input_qubits()) != targets.size()) {
        fail(ErrorCode::BadTarget, "target count must equal the channel's qubit count");
    }
    std::vector<Matrix> kraus;
    for (const auto& k : c.kraus()) kraus.push_back(embed_operator(k, targets, num_qubits));
    KrausChannel out(std::move(kraus));
    for (const auto& note : c.notes()) out.with_note(note);
    return out;
}

inline KrausChannel embed(const KrausChannel& c, std::initializer_list<int> targets, int num_qubits) {
    return embed(c, std::span<const int>(targets.begin(), targets.size()), num_qubits);
}

/// second after first: Kraus set {K2_i K1_j}, dropping products with
/// Frobenius norm below 1e-14.
inline KrausChannel compose(const KrausChannel& second, const KrausChannel& first) {
    if (first.output_qubits() != second.input_qubits()) fail(ErrorCode::DimensionMismatch, "channel composition sizes do not chain");
    std::vector<Matrix> kraus;
    for (const auto& k2 : second.kraus()) {
        for (const auto& k1 : first.kraus()) {
            Matrix k = k2 * k1;
            if (frobenius_norm(k) >= 1e-14) kraus.push_back(std::move(k));
        }
    }
    if (kraus.empty()) {
        kraus.push_back(Matrix(second.kraus().front().rows(), first.kraus().front().cols()));
    }
    return KrausChannel(std::move(kraus));
}

struct TrajectorySample {
    std::size_t kraus_index;
    PureState state;
};

/// One quantum-trajectory step: picks K_y with probability ||K_y psi||^2
/// and returns the normalized K_y psi.
inline TrajectorySample sample_kraus(const KrausChannel& c, const PureState& psi, Rng& rng) {
    if (psi.num_qubits() != c.input_qubits()) fail(ErrorCode::DimensionMismatch, "channel input size differs from state size");
    std::vector<Vector> branches;
    std::vector<double> probs;
    for (const auto& k : c.kraus()) {
        branches.push_back(k * psi.vector());
        probs.push_back(norm_squared(branches.back()));
    }
    const std::size_t y = sample_index(probs, rng, kZeroProbability);
    return {y, PureState::renormalized(std::move(branches[y]))};
}

}  // namespace qmeas
