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

#include <map>
#include <numeric>
#include <numbers>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace qmeas {
namespace {

using testing::EMatrix;
using testing::Gen;

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no qmeas::Error thrown";
    return ErrorCode::InvalidCircuit;
}

const Matrix kCnot{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}};

double total_probability(const std::vector<Branch>& branches) {
    double t = 0.0;
    for (const auto& b : branches) t += b.probability;
    return t;
}

// Tensor a system state with |0...0> on `ancillas` trailing qubits.
PureState with_ancillas(const PureState& psi, int ancillas) { return psi.tensor(PureState::basis(ancillas, 0)); }

TEST(Gates, NamedAndUnknown) {
    EXPECT_EQ(named_gate("CNOT"), kCnot);
    EXPECT_EQ(named_gate("CX"), kCnot);
    EXPECT_LT(unitarity_deviation(named_gate("H")), 1e-15);
    EXPECT_EQ(named_gate("CZ")(3, 3), cplx(-1));
    EXPECT_EQ(code_of([] { named_gate("T2"); }), ErrorCode::InvalidCircuit);
}

TEST(Condition, ParseAndEval) {
    const auto c = Condition::parse("y0 & !y1");
    EXPECT_EQ(c.str(), "y0 & !y1");
    ClassicalBits bits;
    bits.set("y0", 1);
    bits.set("y1", 0);
    EXPECT_TRUE(c.eval(bits));
    bits.set("y1", 1);
    EXPECT_FALSE(c.eval(bits));
    EXPECT_EQ(bits.str(), "11");
    const std::string names[] = {"y1", "y0"};
    EXPECT_EQ(bits.value(names), 3u);
    EXPECT_EQ(code_of([] { Condition::parse("y0 &"); }), ErrorCode::InvalidCircuit);
    EXPECT_EQ(code_of([] { Condition::parse("y0 | y1"); }), ErrorCode::InvalidCircuit);
}

TEST(Validate, RejectsBadCircuits) {
    EXPECT_EQ(code_of([] { Circuit(2).gate("X", {2}).validate(); }), ErrorCode::InvalidCircuit);
    EXPECT_EQ(code_of([] { Circuit(2).unitary(Matrix{{1, 1}, {0, 1}}, {0}).validate(); }), ErrorCode::InvalidCircuit);
    EXPECT_EQ(code_of([] { Circuit(2).measure({0, 0}, {"a", "b"}).validate(); }), ErrorCode::InvalidCircuit);
    EXPECT_EQ(code_of([] { Circuit(2).controlled("X", {1}, Condition::parse("a")).measure({0}, {"a"}).validate(); }),
              ErrorCode::InvalidCircuit);
    EXPECT_EQ(code_of([] { Circuit(2).gate("CNOT", {0}).validate(); }), ErrorCode::InvalidCircuit);
    EXPECT_NO_THROW(Circuit(2).measure({0}, {"a"}).controlled("X", {1}, Condition::parse("a")).validate());
}

TEST(Run, Examples) {
    Circuit hm(1);
    hm.gate("H", {0}).measure({0}, {"b"});
    std::size_t ones = 0;
    const std::size_t shots = 20000;
    for (std::size_t s = 0; s < shots; ++s) {
        Rng rng(1, s);
        const auto rec = run(hm, PureState::basis(1, 0), rng);
        ones += rec.bits.at("b");
        EXPECT_NEAR(rec.trajectory_probability, 0.5, 1e-12);
    }
    EXPECT_TRUE(testing::within_sigma(static_cast<double>(ones) / shots, 0.5, shots));

    Circuit cx(2);
    cx.measure({0}, {"b"}).controlled("X", {1}, Condition::parse("b"));
    Rng rng(9);
    const auto rec = run(cx, PureState::from_bits("10"), rng);
    EXPECT_EQ(rec.bits.at("b"), 1);
    EXPECT_NEAR(rec.trajectory_probability, 1.0, 1e-12);
    EXPECT_NEAR(fidelity(rec.final_state, PureState::from_bits("11")), 1.0, 1e-12);

    EXPECT_EQ(code_of([&] { run(cx, PureState::basis(3, 0), rng); }), ErrorCode::DimensionMismatch);
}

TEST(Run, PartialParityCircuit) {
    const auto branches = run_distribution(parity_partial_circuit(), PureState::plus(2));
    ASSERT_EQ(branches.size(), 2u);
    for (const auto& b : branches) {
        EXPECT_NEAR(b.probability, 0.5, 1e-12);
        const auto& expected = b.bits.at("y") == 0 ? PureState::bell("phi+") : PureState::bell("psi+");
        EXPECT_NEAR(fidelity(b.state, expected), 1.0, 1e-12);
    }
}

TEST(RunDistribution, Examples) {
    Circuit hm(1);
    hm.gate("H", {0}).measure({0}, {"b"});
    const auto d = run_distribution(hm, PureState::basis(1, 0));
    ASSERT_EQ(d.size(), 2u);
    for (const auto& b : d) {
        EXPECT_NEAR(b.probability, 0.5, 1e-12);
        EXPECT_NEAR(fidelity(b.state, PureState::basis(1, static_cast<std::size_t>(b.bits.at("b")))), 1.0, 1e-12);
    }

    const auto single = run_distribution(parity_partial_circuit(), PureState::bell("phi+"));
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0].bits.at("y"), 0);
    EXPECT_NEAR(single[0].probability, 1.0, 1e-12);
    EXPECT_NEAR(fidelity(single[0].state, PureState::bell("phi+")), 1.0, 1e-12);

    Circuit wide(21);
    std::vector<int> all(21);
    std::iota(all.begin(), all.end(), 0);
    wide.measure(all, bit_names("b", 21));
    EXPECT_EQ(code_of([&] { run_distribution(wide, PureState::basis(1, 0).tensor(PureState::basis(20, 0))); }),
              ErrorCode::TooManyBranches);
}

TEST(RunDistribution, SampledRunsMatchExactBranches) {
    Gen g(71);
    const auto circuit = parity_ancilla_circuit(ParityVariant::Compact);
    const auto sys = g.state(2);
    const auto input = with_ancillas(sys, 1);
    const auto branches = run_distribution(circuit, input);
    EXPECT_NEAR(total_probability(branches), 1.0, 1e-9);
    std::map<std::string, double> expected;
    for (const auto& b : branches) expected[b.bits.str()] = b.probability;

    const std::size_t shots = 100000;
    std::map<std::string, std::size_t> counts;
    for (std::size_t s = 0; s < shots; ++s) {
        Rng rng(5, s);
        const auto rec = run(circuit, input, rng);
        ++counts[rec.bits.str()];
        EXPECT_NEAR(rec.trajectory_probability, expected.at(rec.bits.str()), 1e-12);
    }
    for (const auto& [key, p] : expected) {
        EXPECT_TRUE(testing::within_sigma(static_cast<double>(counts[key]) / shots, p, shots)) << key;
    }
}

TEST(RunDistribution, DensityMatchesPure) {
    Gen g(72);
    const auto psi = with_ancillas(g.state(2), 1);
    const auto circuit = parity_ancilla_circuit(ParityVariant::ThreeCnot);
    const auto pure = run_distribution(circuit, psi);
    const auto mixed = run_distribution(circuit, to_density(psi));
    ASSERT_EQ(pure.size(), mixed.size());
    for (std::size_t i = 0; i < pure.size(); ++i) {
        EXPECT_EQ(pure[i].bits, mixed[i].bits);
        EXPECT_NEAR(pure[i].probability, mixed[i].probability, 1e-12);
        EXPECT_NEAR(fidelity(pure[i].state, mixed[i].state), 1.0, 1e-10);
    }
}

TEST(BasisCopy, Examples) {
    EXPECT_EQ(basis_copy(1), kCnot);
    const Matrix u = basis_copy(2);
    const Vector out = u * PureState::from_bits("1000").vector();
    EXPECT_NEAR(std::abs(out[0b1010]), 1.0, 1e-15);
    EXPECT_LT(max_abs_diff(u * u, Matrix::identity(16)), 1e-15);
    EXPECT_LT(max_abs_diff(basis_copy(3) * basis_copy(3), Matrix::identity(64)), 1e-15);
}

TEST(ChangeOfBasis, Examples) {
    EXPECT_LT(max_abs_diff(change_of_basis(computational_basis(2)), Matrix::identity(4)), 1e-15);
    const std::vector<Vector> diag = {PureState::plus().vector(), PureState::minus().vector()};
    EXPECT_LT(max_abs_diff(change_of_basis(diag), named_gate("H")), 1e-15);
    // Labels k = 2x + y: (0,0) |00>, (0,1) |01>, (1,0) |11>, (1,1) |10>.
    const std::vector<Vector> parity = {Vector{1, 0, 0, 0}, Vector{0, 1, 0, 0}, Vector{0, 0, 0, 1}, Vector{0, 0, 1, 0}};
    EXPECT_LT(max_abs_diff(change_of_basis(parity), kCnot), 1e-15);
    const std::vector<Vector> skew = {Vector{1, 0}, PureState::plus().vector()};
    EXPECT_EQ(code_of([&] { change_of_basis(skew); }), ErrorCode::NotOrthonormal);
}

TEST(ChangeOfBasis, Unitary) {
    Gen g(73);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix u = change_of_basis(g.basis(1 + trial % 3));
        EXPECT_LT(max_abs_diff(u * dagger(u), Matrix::identity(u.rows())), 1e-10);
    }
}

// Circuit branches against the direct projective measurement built from
// the same partition: probabilities within 1e-10, states with fidelity 1.
void expect_equivalent(const Circuit& c, std::span<const Vector> basis, const std::vector<std::vector<std::size_t>>& blocks,
                       const PureState& psi, std::span<const std::string> bits) {
    const auto direct = measurement_from_partition(basis, blocks);
    const auto probs = born_probabilities(direct, psi);
    const auto branches = run_distribution(c, psi);
    EXPECT_NEAR(total_probability(branches), 1.0, 1e-9);
    for (const auto& b : branches) {
        const std::size_t y = b.bits.value(bits);
        EXPECT_NEAR(b.probability, probs[y], 1e-10);
        EXPECT_NEAR(fidelity(b.state, post_state(direct, y, psi)), 1.0, 1e-9);
    }
    for (std::size_t y = 0; y < probs.size(); ++y) {
        if (probs[y] > 1e-9) {
            EXPECT_TRUE(std::any_of(branches.begin(), branches.end(), [&](const Branch& b) { return b.bits.value(bits) == y; }));
        }
    }
}

TEST(Balanced, ParityOrdering) {
    const std::vector<Vector> basis = {Vector{1, 0, 0, 0}, Vector{0, 1, 0, 0}, Vector{0, 0, 0, 1}, Vector{0, 0, 1, 0}};
    const auto c = balanced_measurement_circuit(basis, 1);
    const auto blocks = balanced_partition(2, 1);
    const std::string y[] = {"y0"};
    Gen g(74);
    for (int trial = 0; trial < 10; ++trial) {
        const auto psi = g.state(2);
        expect_equivalent(c, basis, blocks, psi, y);
        // Same behaviour as the two-CNOT partial circuit.
        const auto a = run_distribution(c, psi);
        const auto b = run_distribution(parity_partial_circuit(), psi);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].bits.at("y0"), b[i].bits.at("y"));
            EXPECT_NEAR(a[i].probability, b[i].probability, 1e-10);
            EXPECT_NEAR(fidelity(a[i].state, b[i].state), 1.0, 1e-10);
        }
    }
}

TEST(Balanced, FullMeasurement) {
    const auto basis = computational_basis(2);
    const auto c = balanced_measurement_circuit(basis, 2);
    const auto blocks = balanced_partition(2, 2);
    const std::string y[] = {"y0", "y1"};
    expect_equivalent(c, basis, blocks, Gen(75).state(2), y);
}

TEST(Balanced, RandomBasisEquivalence) {
    Gen g(76);
    const std::string y1[] = {"y0"};
    const std::string y2[] = {"y0", "y1"};
    for (int trial = 0; trial < 10; ++trial) {
        const auto basis = g.basis(3);
        const int np = 1 + trial % 2;
        expect_equivalent(balanced_measurement_circuit(basis, np), basis, balanced_partition(3, np), g.state(3),
                          np == 1 ? std::span<const std::string>(y1) : std::span<const std::string>(y2));
    }
    EXPECT_EQ(code_of([&] { balanced_measurement_circuit(g.basis(2), 3); }), ErrorCode::NotBalanced);
    EXPECT_EQ(code_of([&] { balanced_measurement_circuit(g.basis(2), 0); }), ErrorCode::NotBalanced);
}

TEST(AncillaVonNeumann, Examples) {
    const auto comp = ancilla_von_neumann_circuit(computational_basis(1));
    const auto branches = run_distribution(comp, with_ancillas(PureState::plus(), 1));
    ASSERT_EQ(branches.size(), 2u);
    for (const auto& b : branches) {
        EXPECT_NEAR(b.probability, 0.5, 1e-12);
        const std::size_t x = static_cast<std::size_t>(b.bits.at("x0"));
        EXPECT_NEAR(fidelity(b.state, PureState::basis(2, x * 3)), 1.0, 1e-12);
    }

    const std::vector<Vector> diag = {PureState::plus().vector(), PureState::minus().vector()};
    const auto one = run_distribution(ancilla_von_neumann_circuit(diag), with_ancillas(PureState::plus(), 1));
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].bits.at("x0"), 0);
    EXPECT_NEAR(fidelity(one[0].state, with_ancillas(PureState::plus(), 1)), 1.0, 1e-12);
}

TEST(AncillaVonNeumann, RandomBasis) {
    Gen g(77);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 1 + trial % 2;
        const auto basis = g.basis(n);
        const auto c = ancilla_von_neumann_circuit(basis);
        const auto names = bit_names("x", static_cast<std::size_t>(n));
        // Eigenvector input: deterministic branch.
        const std::size_t k = static_cast<std::size_t>(g.integer(0, (1 << n) - 1));
        const auto det = run_distribution(c, with_ancillas(PureState(basis[k]), n));
        ASSERT_EQ(det.size(), 1u);
        EXPECT_EQ(det[0].bits.value(names), k);

        const auto psi = g.state(n);
        for (const auto& b : run_distribution(c, with_ancillas(psi, n))) {
            const std::size_t x = b.bits.value(names);
            EXPECT_NEAR(b.probability, std::norm(inner(basis[x], psi.amplitudes())), 1e-10);
            const PureState expected(kron(basis[x], PureState::basis(n, x).vector()));
            EXPECT_NEAR(fidelity(b.state, expected), 1.0, 1e-10);
        }
    }
}

TEST(ParityAncilla, Examples) {
    for (const auto v : {ParityVariant::ThreeCnot, ParityVariant::Compact}) {
        const auto c = parity_ancilla_circuit(v);
        const auto branches = run_distribution(c, with_ancillas(PureState::plus(2), 1));
        ASSERT_EQ(branches.size(), 2u);
        for (const auto& b : branches) {
            EXPECT_NEAR(b.probability, 0.5, 1e-12);
            const int y = b.bits.at("y");
            const auto sys = y == 0 ? PureState::bell("phi+") : PureState::bell("psi+");
            EXPECT_NEAR(fidelity(b.state, sys.tensor(PureState::basis(1, static_cast<std::size_t>(y)))), 1.0, 1e-12);
        }
        EXPECT_EQ(run_distribution(c, with_ancillas(PureState::bell("phi+"), 1)).size(), 1u);
    }
}

TEST(ParityAncilla, VariantsAgreeAndMatchParity) {
    Gen g(78);
    const auto m = parity_measurement(2);
    for (int trial = 0; trial < 30; ++trial) {
        const auto sys = g.state(2);
        const auto input = with_ancillas(sys, 1);
        const auto a = run_distribution(parity_ancilla_circuit(ParityVariant::ThreeCnot), input);
        const auto b = run_distribution(parity_ancilla_circuit(ParityVariant::Compact), input);
        ASSERT_EQ(a.size(), b.size());
        const auto probs = born_probabilities(m, sys);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].bits, b[i].bits);
            EXPECT_NEAR(a[i].probability, b[i].probability, 1e-10);
            EXPECT_NEAR(fidelity(a[i].state, b[i].state), 1.0, 1e-10);
            const std::size_t y = static_cast<std::size_t>(a[i].bits.at("y"));
            EXPECT_NEAR(a[i].probability, probs[y], 1e-10);
            EXPECT_NEAR(fidelity(a[i].state, post_state(m, y, sys).tensor(PureState::basis(1, y))), 1.0, 1e-9);
        }
    }
}

TEST(NetUnitary, ComposedCircuitsAreUnitary) {
    Gen g(79);
    const Circuit circuits[] = {
        parity_partial_circuit(),
        parity_ancilla_circuit(ParityVariant::ThreeCnot),
        ancilla_von_neumann_circuit(g.basis(2)),
        balanced_measurement_circuit(g.basis(3), 1),
    };
    for (const auto& c : circuits) {
        const Matrix u = net_unitary(c);
        EXPECT_LT(unitarity_deviation(u), 1e-9);
    }
    // Reference: net unitary of [H(0), CNOT(0,1)] from Eigen kron.
    Circuit bell(2);
    bell.gate("H", {0}).gate("CNOT", {0, 1});
    const EMatrix h = testing::to_eigen(named_gate("H"));
    const EMatrix expected = testing::to_eigen(kCnot) * testing::kron_ref(h, EMatrix::Identity(2, 2));
    EXPECT_LT(testing::max_abs_diff(testing::to_eigen(net_unitary(bell)), expected), 1e-14);
}

TEST(NonAdjacentGates, IndexPermutation) {
    // CNOT from qubit 2 to qubit 0 on |001> gives |101>.
    Circuit c(3);
    c.gate("CNOT", {2, 0});
    const auto d = run_distribution(c, PureState::from_bits("001"));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_NEAR(fidelity(d[0].state, PureState::from_bits("101")), 1.0, 1e-15);
}

}  // namespace
}  // namespace qmeas
