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

// Three-qubit repetition codes against single bit flips (or, in the
// Hadamard-rotated variant, single phase flips).

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qmeas/channels.hpp"
#include "qmeas/circuit.hpp"
#include "qmeas/error.hpp"
#include "qmeas/linalg.hpp"
#include "qmeas/measure.hpp"
#include "qmeas/random.hpp"
#include "qmeas/states.hpp"

namespace qmeas {

enum class CodeKind { BitFlip, PhaseFlip };

inline std::string_view code_kind_name(CodeKind k) { return k == CodeKind::BitFlip ? "bit-flip" : "phase-flip"; }

inline CodeKind parse_code_kind(std::string_view s) {
    if (s == "bit-flip" || s == "bit_flip" || s == "bitflip") return CodeKind::BitFlip;
    if (s == "phase-flip" || s == "phase_flip" || s == "phaseflip") return CodeKind::PhaseFlip;
    fail(ErrorCode::BadSelector, "unknown code kind '" + std::string(s) + "'");
}

/// Two syndrome bits: y0 is the parity of qubits 0 and 1, y1 of qubits 1
/// and 2 (in the rotated basis for the phase-flip code).
struct Syndrome {
    int y0 = 0;
    int y1 = 0;

    std::size_t index() const noexcept { return static_cast<std::size_t>(2 * y0 + y1); }
    static Syndrome from_index(std::size_t y) { return {static_cast<int>((y >> 1) & 1u), static_cast<int>(y & 1u)}; }
    std::string str() const { return std::string{static_cast<char>('0' + y0), static_cast<char>('0' + y1)}; }
    bool operator==(const Syndrome&) const = default;

    /// Qubit to correct: 10 -> 0, 11 -> 1, 01 -> 2, 00 -> none (-1).
    int correction_qubit() const noexcept {
        if (y0 && !y1) return 0;
        if (y0 && y1) return 1;
        if (!y0 && y1) return 2;
        return -1;
    }
};

/// none (qubit = -1) or a single flip on qubit 0, 1 or 2.
struct ErrorCase {
    int qubit = -1;

    static ErrorCase none() { return {}; }
    static ErrorCase flip(int q) {
        if (q < 0 || q > 2) fail(ErrorCode::BadSelector, "flip qubit must be 0, 1 or 2");
        return {q};
    }
    /// "none", "flip(1)" or "flip1".
    static ErrorCase parse(std::string_view s) {
        if (s == "none") return none();
        if (s.starts_with("flip")) {
            s.remove_prefix(4);
            if (s.size() == 3 && s.front() == '(' && s.back() == ')') s = s.substr(1, 1);
            if (s.size() == 1 && s[0] >= '0' && s[0] <= '2') return flip(s[0] - '0');
        }
        fail(ErrorCode::BadSelector, "unknown error selector");
    }
    std::string str() const { return qubit < 0 ? "none" : "flip(" + std::to_string(qubit) + ")"; }
};

class RepetitionCode {
public:
    explicit RepetitionCode(CodeKind kind) : kind_(kind) {
        // Pi_00 = span{000, 111}, Pi_01 = {001, 110}, Pi_10 = {100, 011},
        // Pi_11 = {010, 101}: basis index b lies in the block of its syndrome.
        std::vector<Matrix> projectors(4, Matrix(8, 8));
        for (std::size_t b = 0; b < 8; ++b) {
            const int q0 = (b >> 2) & 1, q1 = (b >> 1) & 1, q2 = b & 1;
            const Syndrome s{q0 ^ q1, q1 ^ q2};
            projectors[s.index()](b, b) = 1.0;
        }
        if (kind_ == CodeKind::PhaseFlip) {
            const Matrix h3 = hadamard3();
            for (auto& p : projectors) p = h3 * p * h3;
        }
        syndrome_ = ProjectiveMeasurement(std::move(projectors));
    }

    CodeKind kind() const noexcept { return kind_; }
    static constexpr int n = 3;
    static constexpr int k = 1;

    /// Outcome index 2 * y0 + y1.
    const ProjectiveMeasurement& syndrome_measurement() const noexcept { return *syndrome_; }
    const Matrix& projector(Syndrome s) const { return syndrome_->projector(s.index()); }

    /// X for the bit-flip code, Z for the phase-flip code.
    Matrix error_operator() const { return pauli(kind_ == CodeKind::BitFlip ? 1 : 3); }

    static Matrix hadamard3() {
        const Matrix h = named_gate("H");
        return kron({h, h, h});
    }

private:
    CodeKind kind_;
    std::optional<ProjectiveMeasurement> syndrome_;
};

/// a|0> + b|1> -> a|000> + b|111> via two CNOTs. The phase-flip encoder is
/// the same circuit conjugated by Hadamards: H on the input qubit first, H
/// on every qubit after, so |+> -> |+++> and |-> -> |--->.
inline PureState encode(const PureState& psi, const RepetitionCode& code) {
    if (psi.num_qubits() != 1) fail(ErrorCode::DimensionMismatch, "encoder takes a single-qubit state");
    Vector v = kron(psi.amplitudes(), PureState::basis(2, 0).amplitudes());
    if (code.kind() == CodeKind::PhaseFlip) apply_operator(named_gate("H"), std::vector<int>{0}, 3, v);
    const Matrix cnot = named_gate("CNOT");
    apply_operator(cnot, std::vector<int>{0, 1}, 3, v);
    apply_operator(cnot, std::vector<int>{0, 2}, 3, v);
    if (code.kind() == CodeKind::PhaseFlip) {
        const Matrix h = named_gate("H");
        for (int q = 0; q < 3; ++q) apply_operator(h, std::vector<int>{q}, 3, v);
    }
    return PureState::renormalized(std::move(v));
}

inline PureState apply_error(const PureState& state, ErrorCase e, const RepetitionCode& code) {
    if (state.num_qubits() != 3) fail(ErrorCode::DimensionMismatch, "code states have 3 qubits");
    if (e.qubit < -1 || e.qubit > 2) fail(ErrorCode::BadSelector, "flip qubit must be 0, 1 or 2");
    Vector v = state.vector();
    if (e.qubit >= 0) apply_operator(code.error_operator(), std::vector<int>{e.qubit}, 3, v);
    return PureState(std::move(v));
}

namespace detail {

inline PureState correct(const PureState& state, Syndrome s, const RepetitionCode& code) {
    return apply_error(state, ErrorCase{s.correction_qubit()}, code);
}

}  // namespace detail

struct DecodeResult {
    Syndrome syndrome;
    PureState corrected;
};

struct DecodeBranch {
    Syndrome syndrome;
    double probability;
    PureState corrected;
};

/// Every syndrome outcome with its probability and corrected state. A
/// codeword hit by at most one flip yields a single branch.
inline std::vector<DecodeBranch> decode_distribution(const PureState& state, const RepetitionCode& code) {
    const auto& m = code.syndrome_measurement();
    const auto probs = born_probabilities(m, state);
    std::vector<DecodeBranch> out;
    for (std::size_t y = 0; y < probs.size(); ++y) {
        if (probs[y] <= kZeroProbability) continue;
        const Syndrome s = Syndrome::from_index(y);
        out.push_back({s, probs[y], detail::correct(post_state(m, y, state), s, code)});
    }
    return out;
}

/// Measures the syndrome projectors, then flips the qubit the syndrome
/// points to. The rng only matters for inputs outside the correctable set.
inline DecodeResult decode_projective(const PureState& state, const RepetitionCode& code, Rng& rng) {
    const auto& m = code.syndrome_measurement();
    const auto probs = born_probabilities(m, state);
    const std::size_t y = sample_index(probs, rng, kZeroProbability);
    const Syndrome s = Syndrome::from_index(y);
    return {s, detail::correct(post_state(m, y, state), s, code)};
}

/// Five-qubit decoder: data qubits 0..2, ancillas 3 and 4. Ancilla 3
/// collects the parity of qubits 0 and 1 into y0, ancilla 4 that of qubits
/// 1 and 2 into y1, then X^{y0 !y1}, X^{y0 y1}, X^{!y0 y1} correct qubits
/// 0, 1, 2. The phase-flip variant is wrapped in H on the data qubits.
inline Circuit decoder_circuit(const RepetitionCode& code) {
    Circuit c(5);
    const bool rotate = code.kind() == CodeKind::PhaseFlip;
    if (rotate) c.gate("H", {0}).gate("H", {1}).gate("H", {2});
    c.gate("CNOT", {0, 3}).gate("CNOT", {1, 3}).gate("CNOT", {1, 4}).gate("CNOT", {2, 4});
    c.measure({3, 4}, {"y0", "y1"});
    c.controlled("X", {0}, Condition::parse("y0 & !y1"));
    c.controlled("X", {1}, Condition::parse("y0 & y1"));
    c.controlled("X", {2}, Condition::parse("!y0 & y1"));
    if (rotate) c.gate("H", {0}).gate("H", {1}).gate("H", {2});
    return c;
}

/// Runs decoder_circuit with two fresh ancillas and drops them afterwards.
inline DecodeResult decode_circuit(const PureState& state, const RepetitionCode& code, Rng& rng) {
    if (state.num_qubits() != 3) fail(ErrorCode::DimensionMismatch, "code states have 3 qubits");
    const auto record = run(decoder_circuit(code), state.tensor(PureState::basis(2, 0)), rng);
    const Syndrome s{record.bits.at("y0"), record.bits.at("y1")};
    const int ancillas[] = {3, 4};
    return {s, discard_qubits(record.final_state, ancillas)};
}

/// Smallest n with 2^n >= 2^k (m + 1).
inline int hamming_bound(int k, int m) {
    if (k < 1 || m < 0) fail(ErrorCode::BadDimension, "need k >= 1 and m >= 0");
    int n = k;
    while ((std::uint64_t{1} << (n - k)) < static_cast<std::uint64_t>(m) + 1) ++n;
    return n;
}

/// 2 Pi_00 - I: +1 on codewords, -1 on single-flip corruptions.
inline Observable error_detect_observable(const RepetitionCode& code) {
    return observable_from_hermitian(code.projector({0, 0}) * cplx(2.0) - Matrix::identity(8));
}

enum class NoiseModel {
    Independent,  // each qubit flipped with probability p
    AtMostOne,    // with probability p one uniformly chosen qubit is flipped
};

inline std::string_view noise_model_name(NoiseModel m) { return m == NoiseModel::Independent ? "independent" : "single"; }

inline NoiseModel parse_noise_model(std::string_view s) {
    if (s == "independent") return NoiseModel::Independent;
    if (s == "single" || s == "at-most-one") return NoiseModel::AtMostOne;
    fail(ErrorCode::BadSelector, "unknown noise model '" + std::string(s) + "'");
}

struct LogicalErrorEstimate {
    std::size_t shots = 0;
    std::size_t failures = 0;
    double rate() const { return shots ? static_cast<double>(failures) / static_cast<double>(shots) : 0.0; }
    double standard_error() const {
        const double r = rate();
        return shots ? std::sqrt(r * (1.0 - r) / static_cast<double>(shots)) : 0.0;
    }
};

/// Monte-Carlo logical error rate: encode the logical state whose code word
/// is |000> in the code's own frame (|0> for bit-flip, |+> for phase-flip,
/// so a logical flip is visible), push it through the noise as quantum
/// trajectories, decode with the ancilla circuit and count shots whose
/// fidelity with the encoded state drops below 1/2. Shot s uses the stream
/// Rng(seed, s).
inline LogicalErrorEstimate logical_error_rate(const RepetitionCode& code, double p, std::size_t shots,
                                               std::uint64_t seed, NoiseModel model = NoiseModel::Independent) {
    const KrausChannel flip = code.kind() == CodeKind::BitFlip ? bit_flip(p) : dephasing(p);
    std::vector<KrausChannel> per_qubit;
    for (int q = 0; q < 3; ++q) per_qubit.push_back(embed(flip, {q}, 3));
    const PureState encoded = encode(code.kind() == CodeKind::BitFlip ? PureState::basis(1, 0) : PureState::plus(), code);

    LogicalErrorEstimate est;
    est.shots = shots;
    for (std::size_t s = 0; s < shots; ++s) {
        Rng rng(seed, s);
        PureState noisy = encoded;
        if (model == NoiseModel::Independent) {
            for (const auto& c : per_qubit) noisy = sample_kraus(c, noisy, rng).state;
        } else if (rng.uniform() < p) {
            noisy = apply_error(noisy, ErrorCase::flip(static_cast<int>(rng() % 3)), code);
        }
        const auto decoded = decode_circuit(noisy, code, rng);
        if (fidelity(decoded.corrected, encoded) < 0.5) ++est.failures;
    }
    return est;
}

}  // namespace qmeas
