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

// State-vector circuit simulator with mid-circuit computational-basis
// measurements and classically conditioned gates, plus builders for the
// standard measurement circuits (change of basis, basis copying, parity and
// balanced measurements with and without ancillas).

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qmeas/error.hpp"
#include "qmeas/linalg.hpp"
#include "qmeas/measure.hpp"
#include "qmeas/random.hpp"
#include "qmeas/states.hpp"

namespace qmeas {

/// Named gates: I, X, Y, Z, H, S, CNOT (control first), CZ.
inline Matrix named_gate(std::string_view name) {
    using namespace std::complex_literals;
    const double h = std::numbers::sqrt2 / 2.0;
    if (name == "I") return Matrix::identity(2);
    if (name == "X") return pauli(1);
    if (name == "Y") return pauli(2);
    if (name == "Z") return pauli(3);
    if (name == "H") return {{h, h}, {h, -h}};
    if (name == "S") return {{1.0, 0.0}, {0.0, 1i}};
    if (name == "CNOT" || name == "CX") {
        return {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 1.0}, {0.0, 0.0, 1.0, 0.0}};
    }
    if (name == "CZ") {
        return {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, -1.0}};
    }
    fail(ErrorCode::InvalidCircuit, "unknown gate '" + std::string(name) + "'");
}

/// Classical bits in the order they were first written.
class ClassicalBits {
public:
    std::optional<int> get(std::string_view name) const {
        for (const auto& [k, v] : entries_) {
            if (k == name) return v;
        }
        return std::nullopt;
    }
    int at(std::string_view name) const {
        const auto v = get(name);
        if (!v) fail(ErrorCode::InvalidCircuit, "classical bit '" + std::string(name) + "' is not set");
        return *v;
    }
    void set(const std::string& name, int value) {
        for (auto& [k, v] : entries_) {
            if (k == name) {
                v = value;
                return;
            }
        }
        entries_.emplace_back(name, value);
    }
    /// Integer value of the named bits, first name most significant.
    std::size_t value(std::span<const std::string> names) const {
        std::size_t y = 0;
        for (const auto& n : names) y = (y << 1) | static_cast<std::size_t>(at(n));
        return y;
    }
    /// Bit values concatenated in write order, e.g. "10".
    std::string str() const {
        std::string s;
        for (const auto& e : entries_) s.push_back(e.second ? '1' : '0');
        return s;
    }
    const std::vector<std::pair<std::string, int>>& entries() const noexcept { return entries_; }
    bool operator==(const ClassicalBits&) const = default;

private:
    std::vector<std::pair<std::string, int>> entries_;
};

/// Conjunction of bit literals such as "y0 & !y1".
struct Condition {
    std::vector<std::pair<std::string, bool>> literals;  // (bit name, required value)

    static Condition parse(std::string_view text) {
        Condition c;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t amp = std::min(text.find('&', pos), text.size());
            std::string_view term = text.substr(pos, amp - pos);
            while (!term.empty() && term.front() == ' ') term.remove_prefix(1);
            while (!term.empty() && term.back() == ' ') term.remove_suffix(1);
            bool value = true;
            if (!term.empty() && term.front() == '!') {
                value = false;
                term.remove_prefix(1);
                while (!term.empty() && term.front() == ' ') term.remove_prefix(1);
            }
            if (term.empty()) fail(ErrorCode::InvalidCircuit, "malformed condition '" + std::string(text) + "'");
            for (const char ch : term) {
                if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) {
                    fail(ErrorCode::InvalidCircuit, "malformed condition '" + std::string(text) + "'");
                }
            }
            c.literals.emplace_back(std::string(term), value);
            pos = amp + 1;
        }
        return c;
    }

    bool eval(const ClassicalBits& bits) const {
        return std::all_of(literals.begin(), literals.end(),
                           [&](const auto& lit) { return (bits.at(lit.first) != 0) == lit.second; });
    }

    std::string str() const {
        std::string s;
        for (const auto& [name, value] : literals) {
            if (!s.empty()) s += " & ";
            if (!value) s += "!";
            s += name;
        }
        return s;
    }
};

struct GateOp {
    std::string name;
    Matrix matrix;
    std::vector<int> targets;
    std::optional<Condition> condition;
};

struct MeasureOp {
    std::vector<int> targets;
    std::vector<std::string> store;
};

using CircuitOp = std::variant<GateOp, MeasureOp>;

class Circuit {
public:
    explicit Circuit(int num_qubits) : n_(num_qubits) {}

    Circuit& gate(std::string_view name, std::vector<int> targets) {
        ops_.push_back(GateOp{std::string(name), named_gate(name), std::move(targets), std::nullopt});
        return *this;
    }
    Circuit& unitary(Matrix m, std::vector<int> targets, std::string name = "U") {
        ops_.push_back(GateOp{std::move(name), std::move(m), std::move(targets), std::nullopt});
        return *this;
    }
    Circuit& controlled(std::string_view name, std::vector<int> targets, Condition condition) {
        ops_.push_back(GateOp{std::string(name), named_gate(name), std::move(targets), std::move(condition)});
        return *this;
    }
    Circuit& controlled(Matrix m, std::vector<int> targets, Condition condition, std::string name = "U") {
        ops_.push_back(GateOp{std::move(name), std::move(m), std::move(targets), std::move(condition)});
        return *this;
    }
    Circuit& measure(std::vector<int> targets, std::vector<std::string> store) {
        ops_.push_back(MeasureOp{std::move(targets), std::move(store)});
        return *this;
    }

    int num_qubits() const noexcept { return n_; }
    const std::vector<CircuitOp>& ops() const noexcept { return ops_; }

    /// Distinct classical bit names in order of first measurement.
    std::vector<std::string> bit_names() const {
        std::vector<std::string> names;
        for (const auto& op : ops_) {
            if (const auto* m = std::get_if<MeasureOp>(&op)) {
                for (const auto& s : m->store) {
                    if (std::find(names.begin(), names.end(), s) == names.end()) names.push_back(s);
                }
            }
        }
        return names;
    }

    std::size_t measured_bit_count() const {
        std::size_t count = 0;
        for (const auto& op : ops_) {
            if (const auto* m = std::get_if<MeasureOp>(&op)) count += m->targets.size();
        }
        return count;
    }

    /// Throws InvalidCircuit unless every qubit index is in range, every gate
    /// is unitary with a matching target count, measurement targets are
    /// distinct, and every condition reads bits written earlier.
    void validate() const {
        if (n_ < 0) fail(ErrorCode::InvalidCircuit, "negative qubit count");
        std::vector<std::string> written;
        auto check_range = [&](const std::vector<int>& targets, std::size_t index) {
            for (std::size_t i = 0; i < targets.size(); ++i) {
                if (targets[i] < 0 || targets[i] >= n_) {
                    fail(ErrorCode::InvalidCircuit, "op " + std::to_string(index) + ": qubit " + std::to_string(targets[i]) + " out of range");
                }
                for (std::size_t j = 0; j < i; ++j) {
                    if (targets[i] == targets[j]) fail(ErrorCode::InvalidCircuit, "op " + std::to_string(index) + ": repeated target");
                }
            }
        };
        for (std::size_t i = 0; i < ops_.size(); ++i) {
            if (const auto* g = std::get_if<GateOp>(&ops_[i])) {
                check_range(g->targets, i);
                if (!g->matrix.is_square() || g->matrix.rows() != (std::size_t{1} << g->targets.size())) {
                    fail(ErrorCode::InvalidCircuit, "op " + std::to_string(i) + ": gate size does not match its targets");
                }
                const double dev = unitarity_deviation(g->matrix);
                if (dev > kStructuralTol) {
                    fail(ErrorCode::InvalidCircuit, "op " + std::to_string(i) + ": gate is not unitary (deviation " + std::to_string(dev) + ")");
                }
                if (g->condition) {
                    for (const auto& lit : g->condition->literals) {
                        if (std::find(written.begin(), written.end(), lit.first) == written.end()) {
                            fail(ErrorCode::InvalidCircuit, "op " + std::to_string(i) + ": condition reads unset bit '" + lit.first + "'");
                        }
                    }
                }
            } else {
                const auto& m = std::get<MeasureOp>(ops_[i]);
                check_range(m.targets, i);
                if (m.store.size() != m.targets.size()) {
                    fail(ErrorCode::InvalidCircuit, "op " + std::to_string(i) + ": one bit name per measured qubit required");
                }
                written.insert(written.end(), m.store.begin(), m.store.end());
            }
        }
    }

private:
    int n_;
    std::vector<CircuitOp> ops_;
};

namespace detail {

// Outcome value of the measured targets (targets[0] most significant) for
// basis index idx.
inline std::size_t measured_value(std::size_t idx, std::span<const int> targets, int n) {
    std::size_t y = 0;
    for (const int t : targets) y = (y << 1) | static_cast<std::size_t>((idx & qubit_mask(t, n)) != 0);
    return y;
}

inline std::vector<double> outcome_probabilities(const Vector& state, std::span<const int> targets, int n) {
    std::vector<double> p(std::size_t{1} << targets.size(), 0.0);
    for (std::size_t i = 0; i < state.size(); ++i) p[measured_value(i, targets, n)] += std::norm(state[i]);
    return p;
}

inline std::vector<double> outcome_probabilities(const Matrix& rho, std::span<const int> targets, int n) {
    std::vector<double> p(std::size_t{1} << targets.size(), 0.0);
    for (std::size_t i = 0; i < rho.rows(); ++i) p[measured_value(i, targets, n)] += rho(i, i).real();
    for (auto& x : p) x = std::max(0.0, x);
    return p;
}

inline Vector collapse(const Vector& state, std::span<const int> targets, int n, std::size_t y, double prob) {
    Vector out(state.size());
    const double scale = 1.0 / std::sqrt(prob);
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (measured_value(i, targets, n) == y) out[i] = state[i] * scale;
    }
    return out;
}

inline Matrix collapse(const Matrix& rho, std::span<const int> targets, int n, std::size_t y, double prob) {
    Matrix out(rho.rows(), rho.cols());
    const double scale = 1.0 / prob;
    for (std::size_t i = 0; i < rho.rows(); ++i) {
        if (measured_value(i, targets, n) != y) continue;
        for (std::size_t j = 0; j < rho.cols(); ++j) {
            if (measured_value(j, targets, n) == y) out(i, j) = rho(i, j) * scale;
        }
    }
    return out;
}

inline void store_bits(ClassicalBits& bits, const MeasureOp& m, std::size_t y) {
    const std::size_t k = m.targets.size();
    for (std::size_t i = 0; i < k; ++i) bits.set(m.store[i], static_cast<int>((y >> (k - 1 - i)) & 1u));
}

inline void prepare_run(const Circuit& c, int input_qubits) {
    c.validate();
    if (input_qubits != c.num_qubits()) fail(ErrorCode::DimensionMismatch, "input state size differs from circuit register");
}

inline void check_branch_budget(const Circuit& c) {
    if (c.measured_bit_count() > 20) fail(ErrorCode::TooManyBranches, "more than 20 measured bits");
}

}  // namespace detail

struct RunRecord {
    PureState final_state;
    ClassicalBits bits;
    double trajectory_probability;
};

/// Runs one shot: gates in order, each measurement sampled from the
/// marginal Born distribution of its targets and the state collapsed onto
/// the observed value.
inline RunRecord run(const Circuit& c, const PureState& input, Rng& rng) {
    detail::prepare_run(c, input.num_qubits());
    const int n = c.num_qubits();
    Vector state = input.vector();
    ClassicalBits bits;
    double prob = 1.0;
    for (const auto& op : c.ops()) {
        if (const auto* g = std::get_if<GateOp>(&op)) {
            if (!g->condition || g->condition->eval(bits)) apply_operator(g->matrix, g->targets, n, state);
            continue;
        }
        const auto& m = std::get<MeasureOp>(op);
        const auto probs = detail::outcome_probabilities(state, m.targets, n);
        const std::size_t y = sample_index(probs, rng, kZeroProbability);
        state = detail::collapse(state, m.targets, n, y, probs[y]);
        detail::store_bits(bits, m, y);
        prob *= probs[y];
    }
    return {PureState::renormalized(std::move(state)), std::move(bits), prob};
}

struct Branch {
    ClassicalBits bits;
    double probability;
    PureState state;
};

struct DensityBranch {
    ClassicalBits bits;
    double probability;
    DensityState state;
};

namespace detail {

template <class State, class Emit>
void enumerate_branches(const Circuit& c, std::size_t op_index, State state, ClassicalBits bits, double prob, Emit& emit) {
    const int n = c.num_qubits();
    for (; op_index < c.ops().size(); ++op_index) {
        const auto& op = c.ops()[op_index];
        if (const auto* g = std::get_if<GateOp>(&op)) {
            if (g->condition && !g->condition->eval(bits)) continue;
            if constexpr (std::is_same_v<State, Vector>) {
                apply_operator(g->matrix, g->targets, n, state);
            } else {
                conjugate_operator(g->matrix, g->targets, n, state);
            }
            continue;
        }
        const auto& m = std::get<MeasureOp>(op);
        const auto probs = outcome_probabilities(state, m.targets, n);
        for (std::size_t y = 0; y < probs.size(); ++y) {
            if (probs[y] <= kZeroProbability) continue;
            ClassicalBits next_bits = bits;
            store_bits(next_bits, m, y);
            enumerate_branches(c, op_index + 1, collapse(state, m.targets, n, y, probs[y]), std::move(next_bits),
                               prob * probs[y], emit);
        }
        return;
    }
    emit(std::move(bits), prob, std::move(state));
}

}  // namespace detail

/// Every measurement branch with its exact probability and conditioned
/// final state, in depth-first order of measurement outcomes.
inline std::vector<Branch> run_distribution(const Circuit& c, const PureState& input) {
    detail::prepare_run(c, input.num_qubits());
    detail::check_branch_budget(c);
    std::vector<Branch> out;
    auto emit = [&](ClassicalBits bits, double p, Vector state) {
        out.push_back({std::move(bits), p, PureState::renormalized(std::move(state))});
    };
    detail::enumerate_branches(c, 0, input.vector(), ClassicalBits{}, 1.0, emit);
    return out;
}

/// Density-matrix version of run_distribution, used when the register is
/// mixed (e.g. after a noise channel).
inline std::vector<DensityBranch> run_distribution(const Circuit& c, const DensityState& input) {
    detail::prepare_run(c, input.num_qubits());
    detail::check_branch_budget(c);
    std::vector<DensityBranch> out;
    auto emit = [&](ClassicalBits bits, double p, Matrix rho) {
        out.push_back({std::move(bits), p, DensityState::unchecked(std::move(rho))});
    };
    detail::enumerate_branches(c, 0, input.matrix(), ClassicalBits{}, 1.0, emit);
    return out;
}

/// Product of all gate matrices with measurements removed and conditions
/// ignored.
inline Matrix net_unitary(const Circuit& c) {
    const std::size_t dim = std::size_t{1} << c.num_qubits();
    Matrix u = Matrix::identity(dim);
    for (const auto& op : c.ops()) {
        if (const auto* g = std::get_if<GateOp>(&op)) u = embed_operator(g->matrix, g->targets, c.num_qubits()) * u;
    }
    return u;
}

// ---------------------------------------------------------------------------
// Measurement circuit builders

/// U|x, y> = |x, x xor y> on a source block of n qubits followed by n
/// target qubits.
inline Matrix basis_copy(int num_qubits) {
    const std::size_t d = std::size_t{1} << num_qubits;
    Matrix u(d * d, d * d);
    for (std::size_t x = 0; x < d; ++x) {
        for (std::size_t y = 0; y < d; ++y) u(x * d + (x ^ y), x * d + y) = 1.0;
    }
    return u;
}

/// U = sum_k |k><v_k|, mapping the k-th basis vector to |k>.
inline Matrix change_of_basis(std::span<const Vector> basis) {
    const std::size_t dim = basis.size();
    qubits_for_dim(dim);
    for (const auto& v : basis) {
        if (v.size() != dim) fail(ErrorCode::DimensionMismatch, "basis vector length differs from basis size");
    }
    const double dev = orthonormality_deviation(basis);
    if (dev > kStructuralTol) fail(ErrorCode::NotOrthonormal, "Gram deviation " + std::to_string(dev));
    Matrix u(dim, dim);
    for (std::size_t k = 0; k < dim; ++k) {
        for (std::size_t j = 0; j < dim; ++j) u(k, j) = std::conj(basis[k][j]);
    }
    return u;
}

inline std::vector<std::string> bit_names(std::string_view prefix, std::size_t count) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < count; ++i) names.push_back(std::string(prefix) + std::to_string(i));
    return names;
}

/// Partition of basis indices k = x * 2^{n'} + y into the 2^{n'} blocks
/// X_y = {k : k mod 2^{n'} = y} realized by balanced_measurement_circuit.
inline std::vector<std::vector<std::size_t>> balanced_partition(int num_qubits, int measured_qubits) {
    if (measured_qubits < 1 || measured_qubits > num_qubits) fail(ErrorCode::NotBalanced, "need 1 <= n' <= n");
    const std::size_t outcomes = std::size_t{1} << measured_qubits;
    std::vector<std::vector<std::size_t>> blocks(outcomes);
    for (std::size_t k = 0; k < (std::size_t{1} << num_qubits); ++k) blocks[k % outcomes].push_back(k);
    return blocks;
}

/// Balanced projective measurement through a partial measurement: change
/// of basis |v_{x,y}> -> |x,y>, computational measurement of the last n'
/// qubits into bits y0..y{n'-1}, inverse change of basis. `basis` is ordered
/// by k = x * 2^{n'} + y.
inline Circuit balanced_measurement_circuit(std::span<const Vector> basis, int measured_qubits) {
    const int n = qubits_for_dim(basis.size());
    if (measured_qubits < 1 || measured_qubits > n) fail(ErrorCode::NotBalanced, "need 1 <= n' <= n");
    const Matrix u = change_of_basis(basis);
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> measured(all.end() - measured_qubits, all.end());
    Circuit c(n);
    c.unitary(u, all, "U_basis");
    c.measure(measured, bit_names("y", static_cast<std::size_t>(measured_qubits)));
    c.unitary(dagger(u), all, "U_basis_dag");
    return c;
}

/// Two-qubit parity measurement by partial measurement: CNOT, measure the
/// second qubit into "y", CNOT.
inline Circuit parity_partial_circuit() {
    Circuit c(2);
    c.gate("CNOT", {0, 1}).measure({1}, {"y"}).gate("CNOT", {0, 1});
    return c;
}

/// Von Neumann measurement in an arbitrary basis with n ancillas appended
/// after the n system qubits. Ancilla bits are stored as x0..x{n-1}.
inline Circuit ancilla_von_neumann_circuit(std::span<const Vector> basis) {
    const int n = qubits_for_dim(basis.size());
    const Matrix u = change_of_basis(basis);
    std::vector<int> system(n);
    std::iota(system.begin(), system.end(), 0);
    std::vector<int> all(2 * n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> ancillas(all.begin() + n, all.end());
    Circuit c(2 * n);
    c.unitary(u, system, "U_basis");
    c.unitary(basis_copy(n), all, "U_copy");
    c.measure(ancillas, bit_names("x", static_cast<std::size_t>(n)));
    c.unitary(dagger(u), system, "U_basis_dag");
    return c;
}

enum class ParityVariant { ThreeCnot, Compact };

/// Parity of qubits 0 and 1 read out through ancilla qubit 2 into bit "y".
/// ThreeCnot wraps a basis copy from qubit 1 in the parity change of basis;
/// Compact lets the ancilla accumulate the parity with two CNOTs.
inline Circuit parity_ancilla_circuit(ParityVariant variant) {
    Circuit c(3);
    if (variant == ParityVariant::ThreeCnot) {
        c.gate("CNOT", {0, 1}).gate("CNOT", {1, 2}).measure({2}, {"y"}).gate("CNOT", {0, 1});
    } else {
        c.gate("CNOT", {0, 2}).gate("CNOT", {1, 2}).measure({2}, {"y"});
    }
    return c;
}

}  // namespace qmeas
