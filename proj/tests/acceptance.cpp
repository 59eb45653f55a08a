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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Every check runs even after an earlier failure.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

namespace {

using namespace qmeas;
using testing::EMatrix;
using testing::EVector;
using testing::Gen;

class Criterion {
public:
    explicit Criterion(std::string id) : id_(std::move(id)) {}

    void require(bool ok, const std::string& what) {
        ++checks_;
        if (!ok && first_failure_.empty()) first_failure_ = what;
        failed_ += ok ? 0 : 1;
    }
    void near(double got, double want, double tol, const std::string& what) {
        std::ostringstream ss;
        ss << what << ": got " << got << ", want " << want << " +/- " << tol;
        require(std::abs(got - want) <= tol, ss.str());
    }

    bool report() const {
        std::cout << id_ << (failed_ ? " FAIL " : " PASS ") << checks_ << " checks";
        if (failed_) std::cout << ", " << failed_ << " failed; first: " << first_failure_;
        std::cout << "\n";
        return failed_ == 0;
    }

private:
    std::string id_;
    std::size_t checks_ = 0;
    std::size_t failed_ = 0;
    std::string first_failure_;
};

// Runs a criterion body, turning a stray exception into a failure line.
template <class Body>
bool criterion(const std::string& id, Body body) {
    Criterion c(id);
    try {
        body(c);
    } catch (const std::exception& e) {
        c.require(false, std::string("exception: ") + e.what());
    }
    return c.report();
}

DensityState rho_of(const PureState& psi) { return to_density(psi); }

// ---------------------------------------------------------------------------

void parity_closed_forms(Criterion& c) {
    Gen g(1001);
    const auto m = parity_measurement(2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto psi = g.state(2);
        const cplx a00 = psi[0], a01 = psi[1], a10 = psi[2], a11 = psi[3];
        const double even = std::norm(a00) + std::norm(a11);
        const double odd = std::norm(a01) + std::norm(a10);
        const auto probs = born_probabilities(m, psi);
        c.near(probs[0], even, 1e-12, "even parity probability");
        c.near(probs[1], odd, 1e-12, "odd parity probability");
        const PureState want_even(Vector{a00 / std::sqrt(even), 0, 0, a11 / std::sqrt(even)});
        const PureState want_odd(Vector{0, a01 / std::sqrt(odd), a10 / std::sqrt(odd), 0});
        c.require(fidelity(post_state(m, 0, psi), want_even) >= 1 - 1e-10, "even post-state");
        c.require(fidelity(post_state(m, 1, psi), want_odd) >= 1 - 1e-10, "odd post-state");
    }
}

void bell_basis_identity(Criterion& c) {
    const Matrix bell = projector_from_vectors({PureState::bell("phi+").vector(), PureState::bell("phi-").vector()});
    const Matrix comp = projector_from_vectors({Vector{1, 0, 0, 0}, Vector{0, 0, 0, 1}});
    c.near(max_abs_diff(bell, comp), 0.0, 1e-12, "Bell-basis even projector");
}

// Compares circuit branches, keyed by the named bits, with a direct
// projective measurement acting on the first system qubits.
void compare_branches(Criterion& c, const std::vector<Branch>& branches, std::span<const std::string> bits,
                      const ProjectiveMeasurement& direct, const PureState& sys, int ancillas, const std::string& tag) {
    const auto probs = born_probabilities(direct, sys);
    double total = 0.0;
    for (const auto& b : branches) {
        const std::size_t y = b.bits.value(bits);
        total += b.probability;
        c.near(b.probability, probs[y], 1e-10, tag + " branch probability");
        PureState want = post_state(direct, y, sys);
        if (ancillas > 0) want = want.tensor(PureState::basis(ancillas, y));
        c.require(fidelity(b.state, want) >= 1 - 1e-9, tag + " conditioned state");
    }
    c.near(total, 1.0, 1e-9, tag + " total probability");
}

void circuit_equivalences(Criterion& c) {
    Gen g(1003);
    const auto direct = parity_measurement(2);
    const std::string y[] = {"y"};
    for (int trial = 0; trial < 30; ++trial) {
        const auto sys = g.state(2);
        compare_branches(c, run_distribution(parity_partial_circuit(), sys), y, direct, sys, 0, "two-CNOT");
        const auto padded = sys.tensor(PureState::basis(1, 0));
        compare_branches(c, run_distribution(parity_ancilla_circuit(ParityVariant::ThreeCnot), padded), y, direct, sys, 1,
                         "three-CNOT ancilla");
        compare_branches(c, run_distribution(parity_ancilla_circuit(ParityVariant::Compact), padded), y, direct, sys, 1,
                         "two-CNOT ancilla");
    }
    // Random balanced measurement on three qubits via change of basis.
    for (int trial = 0; trial < 10; ++trial) {
        const int np = 1 + trial % 2;
        const auto basis = g.basis(3);
        const auto m = measurement_from_partition(basis, balanced_partition(3, np));
        const auto names = bit_names("y", static_cast<std::size_t>(np));
        const auto psi = g.state(3);
        compare_branches(c, run_distribution(balanced_measurement_circuit(basis, np), psi), names, m, psi, 0, "balanced");
    }
}

Syndrome expected_syndrome(ErrorCase e) {
    switch (e.qubit) {
        case 0: return {1, 0};
        case 1: return {1, 1};
        case 2: return {0, 1};
        default: return {0, 0};
    }
}

void qec_roundtrip(Criterion& c) {
    Gen g(1004);
    const ErrorCase errors[] = {ErrorCase::none(), ErrorCase::flip(0), ErrorCase::flip(1), ErrorCase::flip(2)};
    for (const auto kind : {CodeKind::BitFlip, CodeKind::PhaseFlip}) {
        const RepetitionCode code(kind);
        for (int trial = 0; trial < 50; ++trial) {
            const auto enc = encode(g.state(1), code);
            for (const auto e : errors) {
                const auto noisy = apply_error(enc, e, code);
                Rng rng(static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(e.qubit + 1));
                const auto proj = decode_projective(noisy, code, rng);
                const auto circ = decode_circuit(noisy, code, rng);
                const std::string tag = std::string(code_kind_name(kind)) + " " + e.str();
                c.require(proj.syndrome == expected_syndrome(e), tag + " projective syndrome " + proj.syndrome.str());
                c.require(circ.syndrome == expected_syndrome(e), tag + " circuit syndrome " + circ.syndrome.str());
                c.require(fidelity(proj.corrected, enc) >= 1 - 1e-10, tag + " projective fidelity");
                c.require(fidelity(circ.corrected, enc) >= 1 - 1e-10, tag + " circuit fidelity");
            }
        }
    }
    c.require(hamming_bound(1, 3) == 3, "smallest n for k = 1, m = 3");
    c.require((1 << 3) == (1 << 1) * (3 + 1), "2^3 = 2^1 * 4");
}

void usd_numbers(Criterion& c) {
    Gen g(1005);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 2;
        const auto psi0 = g.state(n);
        const auto psi1 = g.state(n);
        const double overlap = std::abs(inner(psi0.amplitudes(), psi1.amplitudes()));
        const auto p = povm_probabilities(usd_povm(psi0, psi1), rho_of(psi0));
        c.near(p[0], 1 - overlap, 1e-12, "conclusive outcome");
        c.near(p[1], 0.0, 1e-12, "wrong outcome");
        c.near(p[2], overlap, 1e-12, "inconclusive outcome");
    }
    const auto psi0 = g.state(1);
    const auto psi1 = g.state(1);
    const auto povm = usd_povm(psi0, psi1);
    const auto rho = rho_of(psi0);
    const auto exact = povm_probabilities(povm, rho);
    const std::size_t shots = 100000;
    std::vector<std::size_t> counts(povm.size());
    Rng rng(1005);
    for (std::size_t s = 0; s < shots; ++s) ++counts[sample(povm, rho, rng).outcome];
    for (std::size_t y = 0; y < counts.size(); ++y) {
        const double f = static_cast<double>(counts[y]) / static_cast<double>(shots);
        c.require(testing::within_sigma(f, exact[y], shots, 3.0), "sampled frequency of outcome " + std::to_string(y));
    }
}

void povm_dilation(Criterion& c) {
    Gen g(1006);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 2;
        const int na = 1 + (trial / 2) % 2;
        const std::size_t sys = std::size_t{1} << n;
        const std::size_t total = sys << na;
        const Matrix u = g.unitary(total);
        const auto p = povm_from_dilation(u, na);
        Matrix sum(sys, sys);
        for (const auto& e : p.effects()) {
            c.require(min_eigenvalue(e) >= -1e-10, "effect PSD");
            sum += e;
        }
        c.near(max_abs_diff(sum, Matrix::identity(sys)), 0.0, 1e-10, "completeness");

        // Ancillas are the leading qubits of U's input and output.
        const auto psi = g.state(n);
        EVector in = EVector::Zero(static_cast<Eigen::Index>(total));
        for (std::size_t i = 0; i < sys; ++i) in(static_cast<Eigen::Index>(i)) = psi[i];
        const EVector out = testing::to_eigen(u) * in;
        const auto probs = povm_probabilities(p, rho_of(psi));
        for (std::size_t y = 0; y < probs.size(); ++y) {
            const double marginal =
                out.segment(static_cast<Eigen::Index>(y * sys), static_cast<Eigen::Index>(sys)).squaredNorm();
            c.near(probs[y], marginal, 1e-10, "ancilla marginal");
        }
    }
}

EMatrix dilation_oracle(const EMatrix& u, const EMatrix& rho, Eigen::Index anc_dim) {
    const Eigen::Index sys = rho.rows();
    EMatrix big = EMatrix::Zero(anc_dim * sys, anc_dim * sys);
    big.topLeftCorner(sys, sys) = rho;
    const EMatrix out = u * big * u.adjoint();
    EMatrix reduced = EMatrix::Zero(sys, sys);
    for (Eigen::Index a = 0; a < anc_dim; ++a) reduced += out.block(a * sys, a * sys, sys, sys);
    return reduced;
}

void channel_properties(Criterion& c) {
    Gen g(1007);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 2;
        const std::size_t dim = std::size_t{1} << n;
        const std::size_t r = static_cast<std::size_t>(g.integer(1, 4));
        const EMatrix u = g.unitary_eigen(static_cast<Eigen::Index>(dim * r));
        std::vector<Matrix> kraus;
        for (std::size_t y = 0; y < r; ++y) {
            const auto off = static_cast<Eigen::Index>(y * dim);
            const auto d = static_cast<Eigen::Index>(dim);
            kraus.push_back(testing::from_eigen(EMatrix(u.block(off, 0, d, d))));
        }
        const KrausChannel ch(std::move(kraus));
        const auto out = apply(ch, g.density(n, static_cast<std::size_t>(g.integer(1, 4))));
        c.near(trace(out.matrix()).real(), 1.0, 1e-10, "trace preserved");
    }
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 2;
        const int na = 1 + (trial / 2) % 2;
        const Matrix u = g.unitary((std::size_t{1} << n) << na);
        const auto rho = g.density(n, 2);
        const auto out = apply(channel_from_dilation(u, na), rho);
        const EMatrix oracle = dilation_oracle(testing::to_eigen(u), testing::to_eigen(rho.matrix()), Eigen::Index{1} << na);
        c.near(testing::max_abs_diff(testing::to_eigen(out.matrix()), oracle), 0.0, 1e-10, "dilation vs partial trace");
    }
    const auto flipped = apply(bit_flip(0.25), rho_of(PureState::basis(1, 0)));
    c.near(max_abs_diff(flipped.matrix(), Matrix{{0.75, 0}, {0, 0.25}}), 0.0, 1e-12, "bit_flip(0.25) on |0>");
    const auto dephased = apply(dephasing(0.5), rho_of(PureState::plus()));
    c.near(max_abs_diff(dephased.matrix(), Matrix{{0.5, 0}, {0, 0.5}}), 0.0, 1e-12, "dephasing(0.5) on |+>");
}

void observable_machinery(Criterion& c) {
    Gen g(1008);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = std::size_t{1} << (1 + trial % 3);
        const Matrix h = g.hermitian(dim);
        c.near(max_abs_diff(eig_hermitian(h).reconstruct(), h), 0.0, 1e-8, "spectral reconstruction");
        const auto pc = pauli_decompose(h);
        double imag = 0.0;
        for (const auto a : pc.coeffs) imag = std::max(imag, std::abs(a.imag()));
        c.near(imag, 0.0, 1e-10, "real Pauli coefficients");
        c.near(max_abs_diff(pauli_reconstruct(pc), h), 0.0, 1e-10, "Pauli roundtrip");
        const auto o = observable_from_hermitian(h);
        const auto rho = g.density(qubits_for_dim(dim), 2);
        c.near(expectation(o, rho), expectation_via_pauli(o, rho), 1e-8, "expectation routes");
    }

    const auto zz = PauliString::parse("ZZ");
    c.near(expectation(observable_from_pauli(zz), PureState::bell("phi+")), 1.0, 1e-12, "<ZZ> on phi+");
    const auto psi = g.state(2);
    const double even = born_probabilities(parity_measurement(2), psi)[0];
    c.near(pauli_local_plus_probability(zz, psi), even, 1e-10, "local product vs joint parity");
    const std::size_t shots = 100000;
    std::size_t plus = 0;
    Rng rng(1008);
    for (std::size_t s = 0; s < shots; ++s) plus += sample_pauli_local(zz, psi, rng) == 1;
    c.require(testing::within_sigma(static_cast<double>(plus) / static_cast<double>(shots), even, shots, 3.0),
              "sampled local ZZ vs parity");
}

void compatibility(Criterion& c) {
    c.require(compatible(kron(pauli(3), pauli(0)), kron(pauli(3), pauli(3))), "ZI and ZZ compatible");
    c.require(!compatible(pauli(3), pauli(1)), "Z and X incompatible");
    Gen g(1009);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a, b;
        if (trial % 2 == 0) {
            const Matrix w = g.unitary(4);
            a = w * Matrix::diagonal(Vector{g.normal(), g.normal(), g.normal(), g.normal()}) * dagger(w);
            b = w * Matrix::diagonal(Vector{g.normal(), g.normal(), g.normal(), g.normal()}) * dagger(w);
        } else {
            a = g.hermitian(4);
            b = g.hermitian(4);
        }
        const Matrix v = g.unitary(4);
        const bool ab = compatible(a, b);
        c.require(ab == (trial % 2 == 0), "commuting pairs detected");
        c.require(ab == compatible(v * a * dagger(v), v * b * dagger(v)), "conjugation invariance");
    }
}

void repeatability(Criterion& c) {
    Gen g(1010);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 2;
        const auto m = measurement_from_partition(g.basis(n), balanced_partition(n, 1));
        const auto report = repeat_measurement_check(m, g.density(n, 2));
        c.near(report.min_repeat_probability(), 1.0, 1e-10, "projective repeat probability");
    }
    const double a = std::sqrt(2.0 / 3.0), b = std::sqrt(1.0 / 3.0);
    const PureState psi(Vector{a, 0, 0, b});
    const Matrix m0 = kron(Matrix{{b * b / (a * a), 0}, {0, 1}}, Matrix::identity(2));
    const Povm povm({m0, Matrix::identity(4) - m0});
    c.near(povm_probabilities(povm, rho_of(psi))[0], 2.0 / 3.0, 1e-12, "outcome-0 probability");
    c.near(fidelity(PureState::bell("phi+"), povm_post_state(povm, 0, rho_of(psi))), 1.0, 1e-10, "post-state phi+");
    const auto report = repeat_measurement_check(povm, rho_of(psi));
    c.require(!report.entries.empty() && report.entries[0].outcome == 0, "outcome 0 reported");
    if (!report.entries.empty()) c.require(report.entries[0].repeat_probability < 1 - 1e-6, "POVM not repeatable");
}

// Captures stdout of a shell command; the exit status goes to *status.
std::string capture(const std::string& cmd, int* status) {
    std::string out;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        *status = -1;
        return out;
    }
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
    *status = ::pclose(pipe);
    return out;
}

void cli_determinism(Criterion& c) {
    const std::string cli = QMEAS_CLI_PATH;
    const std::string run =
        cli + " run " + std::string(QMEAS_EXPERIMENTS_DIR) + "/noisy_bell.json --seed 11 --shots 5000 --mode both";
    int s1 = 0, s2 = 0;
    const auto a = capture(run, &s1);
    const auto b = capture(run, &s2);
    c.require(s1 == 0 && s2 == 0, "run exits 0");
    c.require(!a.empty() && a == b, "byte-identical run output");

    const double p = 0.1;
    const double target = 3 * p * p - 2 * p * p * p;
    int s3 = 0;
    const auto qec = capture(cli + " qec --p 0.1 --shots 10000 --seed 2026", &s3);
    c.require(s3 == 0, "qec exits 0");
    const auto doc = nlohmann::json::parse(qec, nullptr, false);
    c.require(!doc.is_discarded() && doc.contains("logical_error_rate"), "qec output is JSON with a rate");
    if (!doc.is_discarded() && doc.contains("logical_error_rate")) {
        c.near(doc["logical_error_rate"].get<double>(), target, 0.006, "CLI bit-flip logical error rate");
    }
    int s4 = 0;
    const auto again = capture(cli + " qec --p 0.1 --shots 10000 --seed 2026", &s4);
    c.require(again == qec, "byte-identical qec output");

    const auto phase = logical_error_rate(RepetitionCode(CodeKind::PhaseFlip), p, 10000, 2026);
    c.near(phase.rate(), target, 0.006, "library phase-flip logical error rate");
}

}  // namespace

int main() {
    bool ok = true;
    ok &= criterion("AC1", parity_closed_forms);
    ok &= criterion("AC2", bell_basis_identity);
    ok &= criterion("AC3", circuit_equivalences);
    ok &= criterion("AC4", qec_roundtrip);
    ok &= criterion("AC5", usd_numbers);
    ok &= criterion("AC6", povm_dilation);
    ok &= criterion("AC7", channel_properties);
    ok &= criterion("AC8", observable_machinery);
    ok &= criterion("AC9", compatibility);
    ok &= criterion("AC10", repeatability);
    ok &= criterion("AC11", cli_determinism);
    return ok ? 0 : 1;
}
