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

// Projective measurements, observables and POVMs.
//
// Outcome labels are always the position of the projector (or effect) in
// its list: partition-built measurements number outcomes in declaration
// order, dilation-built POVMs by the ancilla basis index y.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qmeas/error.hpp"
#include "qmeas/linalg.hpp"
#include "qmeas/random.hpp"
#include "qmeas/states.hpp"

namespace qmeas {

// ---------------------------------------------------------------------------
// Structural checks shared by constructors and the CLI validator

/// Max deviation of the Gram matrix of `vectors` from the identity.
inline double orthonormality_deviation(std::span<const Vector> vectors) {
    double dev = 0.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i; j < vectors.size(); ++j) {
            const cplx g = inner(vectors[i], vectors[j]);
            dev = std::max(dev, std::abs(g - (i == j ? cplx(1.0) : cplx(0.0))));
        }
    }
    return dev;
}

inline ValidationReport validate_projectors(std::span<const Matrix> projectors, double tol = kStructuralTol) {
    ValidationReport report;
    if (projectors.empty()) {
        report.checks.push_back({"nonempty", 1.0, false});
        return report;
    }
    const std::size_t dim = projectors.front().rows();
    double herm = 0.0;
    double idem = 0.0;
    double orth = 0.0;
    Matrix sum(dim, dim);
    for (std::size_t y = 0; y < projectors.size(); ++y) {
        const Matrix& p = projectors[y];
        if (!p.is_square() || p.rows() != dim) {
            report.checks.push_back({"shape", std::numeric_limits<double>::infinity(), false});
            return report;
        }
        herm = std::max(herm, hermitian_deviation(p));
        idem = std::max(idem, max_abs_diff(p * p, p));
        for (std::size_t z = 0; z < y; ++z) orth = std::max(orth, max_abs(p * projectors[z]));
        sum += p;
    }
    report.add("hermitian", herm, tol);
    report.add("idempotent", idem, tol);
    report.add("orthogonal", orth, tol);
    report.add("completeness", max_abs_diff(sum, Matrix::identity(dim)), tol);
    return report;
}

inline ValidationReport validate_effects(std::span<const Matrix> effects, double tol = kStructuralTol) {
    ValidationReport report;
    if (effects.empty()) {
        report.checks.push_back({"nonempty", 1.0, false});
        return report;
    }
    const std::size_t dim = effects.front().rows();
    double herm = 0.0;
    double neg = 0.0;
    Matrix sum(dim, dim);
    for (const auto& m : effects) {
        if (!m.is_square() || m.rows() != dim) {
            report.checks.push_back({"shape", std::numeric_limits<double>::infinity(), false});
            return report;
        }
        herm = std::max(herm, hermitian_deviation(m));
        neg = std::max(neg, -min_eigenvalue(m));
        sum += m;
    }
    report.add("hermitian", herm, tol);
    report.add("psd", std::max(0.0, neg), tol);
    report.add("completeness", max_abs_diff(sum, Matrix::identity(dim)), tol);
    return report;
}

namespace detail {

inline void throw_if_invalid(const ValidationReport& report, const char* what) {
    if (report.ok()) return;
    std::string msg = what;
    for (const auto& f : report.failures()) msg += "; " + f.predicate + " deviation " + std::to_string(f.deviation);
    fail(ErrorCode::InvalidMeasurement, msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Measurement types

/// Orthogonal idempotent projectors resolving the identity.
class ProjectiveMeasurement {
public:
    explicit ProjectiveMeasurement(std::vector<Matrix> projectors, double tol = kStructuralTol)
        : projectors_(std::move(projectors)) {
        detail::throw_if_invalid(validate_projectors(projectors_, tol), "invalid projective measurement");
        n_ = qubits_for_dim(projectors_.front().rows());
    }

    int num_qubits() const noexcept { return n_; }
    std::size_t dim() const noexcept { return projectors_.front().rows(); }
    std::size_t size() const noexcept { return projectors_.size(); }
    const Matrix& projector(std::size_t y) const { return projectors_.at(y); }
    const std::vector<Matrix>& projectors() const noexcept { return projectors_; }

private:
    int n_ = 0;
    std::vector<Matrix> projectors_;
};

/// Positive semidefinite effects summing to the identity.
class Povm {
public:
    explicit Povm(std::vector<Matrix> effects, double tol = kStructuralTol) : effects_(std::move(effects)) {
        detail::throw_if_invalid(validate_effects(effects_, tol), "invalid POVM");
        n_ = qubits_for_dim(effects_.front().rows());
    }

    static Povm from_projective(const ProjectiveMeasurement& m) { return Povm(m.projectors()); }

    int num_qubits() const noexcept { return n_; }
    std::size_t dim() const noexcept { return effects_.front().rows(); }
    std::size_t size() const noexcept { return effects_.size(); }
    const Matrix& effect(std::size_t y) const { return effects_.at(y); }
    const std::vector<Matrix>& effects() const noexcept { return effects_; }

private:
    int n_ = 0;
    std::vector<Matrix> effects_;
};

/// Hermitian operator together with its spectral measurement: outcome y
/// carries value values()[y] and projector measurement().projector(y).
class Observable {
public:
    Observable(Matrix matrix, std::vector<double> values, ProjectiveMeasurement measurement)
        : matrix_(std::move(matrix)), values_(std::move(values)), measurement_(std::move(measurement)) {}

    int num_qubits() const noexcept { return measurement_.num_qubits(); }
    const Matrix& matrix() const noexcept { return matrix_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const ProjectiveMeasurement& measurement() const noexcept { return measurement_; }

private:
    Matrix matrix_;
    std::vector<double> values_;
    ProjectiveMeasurement measurement_;
};

/// Tensor product of single-qubit Paulis; digit 0..3 is I, X, Y, Z.
struct PauliString {
    std::vector<int> digits;

    static PauliString parse(std::string_view label) { return {parse_pauli_digits(label)}; }

    int num_qubits() const noexcept { return static_cast<int>(digits.size()); }
    Matrix matrix() const { return pauli_string_matrix(digits); }
    std::string label() const {
        static constexpr char kLetters[] = {'I', 'X', 'Y', 'Z'};
        std::string s;
        for (const int d : digits) s.push_back(kLetters[d]);
        return s;
    }
};

// ---------------------------------------------------------------------------
// Construction

/// sum_x |v_x><v_x| over pairwise orthonormal vectors.
inline Matrix projector_from_vectors(std::span<const Vector> vectors) {
    if (vectors.empty()) fail(ErrorCode::NotOrthonormal, "no vectors given");
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != dim) fail(ErrorCode::DimensionMismatch, "vectors of different length");
    }
    const double dev = orthonormality_deviation(vectors);
    if (dev > kStructuralTol) fail(ErrorCode::NotOrthonormal, "Gram deviation " + std::to_string(dev));
    Matrix p(dim, dim);
    for (const auto& v : vectors) p += outer(v, v);
    return p;
}

inline Matrix projector_from_vectors(std::initializer_list<Vector> vectors) {
    return projector_from_vectors(std::span<const Vector>(vectors.begin(), vectors.size()));
}

/// Pi_y = sum_{x in partition[y]} |v_x><v_x|.
inline ProjectiveMeasurement measurement_from_partition(std::span<const Vector> basis,
                                                         std::span<const std::vector<std::size_t>> partition) {
    const std::size_t dim = basis.size();
    qubits_for_dim(dim);
    for (const auto& v : basis) {
        if (v.size() != dim) fail(ErrorCode::DimensionMismatch, "basis vector length differs from basis size");
    }
    const double dev = orthonormality_deviation(basis);
    if (dev > kStructuralTol) fail(ErrorCode::NotOrthonormal, "Gram deviation " + std::to_string(dev));

    std::vector<int> seen(dim, 0);
    for (const auto& block : partition) {
        if (block.empty()) fail(ErrorCode::BadPartition, "empty partition block");
        for (const auto x : block) {
            if (x >= dim) fail(ErrorCode::BadPartition, "index " + std::to_string(x) + " out of range");
            if (seen[x]++) fail(ErrorCode::BadPartition, "index " + std::to_string(x) + " appears twice");
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) fail(ErrorCode::BadPartition, "partition does not cover all indices");

    std::vector<Matrix> projectors;
    projectors.reserve(partition.size());
    for (const auto& block : partition) {
        Matrix p(dim, dim);
        for (const auto x : block) p += outer(basis[x], basis[x]);
        projectors.push_back(std::move(p));
    }
    return ProjectiveMeasurement(std::move(projectors));
}

inline std::vector<Vector> computational_basis(int num_qubits) {
    const std::size_t dim = std::size_t{1} << num_qubits;
    std::vector<Vector> basis(dim, Vector(dim));
    for (std::size_t x = 0; x < dim; ++x) basis[x][x] = 1.0;
    return basis;
}

/// Rank-1 projectors onto the computational basis (von Neumann measurement).
inline ProjectiveMeasurement computational_measurement(int num_qubits) {
    const std::size_t dim = std::size_t{1} << num_qubits;
    std::vector<Matrix> projectors;
    for (std::size_t x = 0; x < dim; ++x) {
        Matrix p(dim, dim);
        p(x, x) = 1.0;
        projectors.push_back(std::move(p));
    }
    return ProjectiveMeasurement(std::move(projectors));
}

/// Outcome 0 projects onto even Hamming weight basis states, outcome 1 onto
/// odd ones.
inline ProjectiveMeasurement parity_measurement(int num_qubits) {
    if (num_qubits < 1) fail(ErrorCode::BadDimension, "parity needs at least one qubit");
    const std::size_t dim = std::size_t{1} << num_qubits;
    Matrix even(dim, dim);
    Matrix odd(dim, dim);
    for (std::size_t x = 0; x < dim; ++x) {
        if (std::popcount(x) % 2 == 0) {
            even(x, x) = 1.0;
        } else {
            odd(x, x) = 1.0;
        }
    }
    return ProjectiveMeasurement({std::move(even), std::move(odd)});
}

/// Embeds every projector of m on `targets` of an n-qubit register.
inline ProjectiveMeasurement embed(const ProjectiveMeasurement& m, std::span<const int> targets, int num_qubits) {
    std::vector<Matrix> projectors;
    for (const auto& p : m.projectors()) projectors.push_back(embed_operator(p, targets, num_qubits));
    return ProjectiveMeasurement(std::move(projectors));
}

inline Povm embed(const Povm& m, std::span<const int> targets, int num_qubits) {
    std::vector<Matrix> effects;
    for (const auto& e : m.effects()) effects.push_back(embed_operator(e, targets, num_qubits));
    return Povm(std::move(effects));
}

// ---------------------------------------------------------------------------
// Born rule and post-measurement states

namespace detail {

inline void check_dims(std::size_t a, std::size_t b) {
    if (a != b) fail(ErrorCode::DimensionMismatch, "measurement and state dimensions differ");
}

inline std::vector<double> trace_probabilities(std::span<const Matrix> ops, const Matrix& rho) {
    std::vector<double> p;
    p.reserve(ops.size());
    for (const auto& op : ops) p.push_back(std::max(0.0, trace_of_product(op, rho).real()));
    return p;
}

// Exact sandwich op * rho * op^dagger / tr.
inline DensityState conditioned(const Matrix& op, const Matrix& rho, double prob) {
    Matrix out = op * rho * dagger(op);
    out *= cplx(1.0 / prob);
    return DensityState::unchecked(std::move(out));
}

}  // namespace detail

/// p_y = tr(Pi_y rho)
inline std::vector<double> born_probabilities(const ProjectiveMeasurement& m, const DensityState& rho) {
    detail::check_dims(m.dim(), rho.dim());
    return detail::trace_probabilities(m.projectors(), rho.matrix());
}

/// p_y = <psi|Pi_y|psi>
inline std::vector<double> born_probabilities(const ProjectiveMeasurement& m, const PureState& psi) {
    detail::check_dims(m.dim(), psi.dim());
    std::vector<double> p;
    for (const auto& proj : m.projectors()) p.push_back(norm_squared(proj * psi.vector()));
    return p;
}

/// Pi_y rho Pi_y / tr(Pi_y rho)
inline DensityState post_state(const ProjectiveMeasurement& m, std::size_t y, const DensityState& rho) {
    detail::check_dims(m.dim(), rho.dim());
    const Matrix& proj = m.projector(y);
    const double p = trace_of_product(proj, rho.matrix()).real();
    if (p <= kZeroProbability) fail(ErrorCode::ZeroProbabilityOutcome, "outcome " + std::to_string(y) + " has probability " + std::to_string(p));
    return detail::conditioned(proj, rho.matrix(), p);
}

/// Pi_y |psi> / ||Pi_y |psi>||
inline PureState post_state(const ProjectiveMeasurement& m, std::size_t y, const PureState& psi) {
    detail::check_dims(m.dim(), psi.dim());
    Vector v = m.projector(y) * psi.vector();
    const double p = norm_squared(v);
    if (p <= kZeroProbability) fail(ErrorCode::ZeroProbabilityOutcome, "outcome " + std::to_string(y) + " has probability " + std::to_string(p));
    return PureState::renormalized(std::move(v));
}

struct MeasurementSample {
    std::size_t outcome;
    DensityState state;
};

/// Draws y from the Born distribution by inverse CDF and conditions on it.
inline MeasurementSample sample(const ProjectiveMeasurement& m, const DensityState& rho, Rng& rng) {
    const auto probs = born_probabilities(m, rho);
    const std::size_t y = sample_index(probs, rng, kZeroProbability);
    return {y, post_state(m, y, rho)};
}

// ---------------------------------------------------------------------------
// Observables

inline Observable observable_from_hermitian(const Matrix& h, double tol = kStructuralTol) {
    if (!h.is_square()) fail(ErrorCode::NonSquare, "observable matrix must be square");
    qubits_for_dim(h.rows());
    const auto spec = eig_hermitian(h, tol);
    const auto groups = group_eigenvalues(spec, max_abs(h));
    std::vector<double> values;
    std::vector<Matrix> projectors;
    for (const auto& g : groups) {
        values.push_back(g.value);
        projectors.push_back(projector_from_vectors(g.vectors));
    }
    return Observable(h, std::move(values), ProjectiveMeasurement(std::move(projectors)));
}

inline Observable observable_from_pauli(const PauliString& p) { return observable_from_hermitian(p.matrix()); }

/// tr(O rho)
inline double expectation(const Observable& o, const DensityState& rho) {
    detail::check_dims(o.matrix().rows(), rho.dim());
    return trace_of_product(o.matrix(), rho.matrix()).real();
}

inline double expectation(const Observable& o, const PureState& psi) {
    detail::check_dims(o.matrix().rows(), psi.dim());
    return inner(psi.amplitudes(), o.matrix() * psi.vector()).real();
}

/// sum_s a_s <P_s>_rho over the Pauli decomposition of O.
inline double expectation_via_pauli(const Observable& o, const DensityState& rho) {
    detail::check_dims(o.matrix().rows(), rho.dim());
    const auto pc = pauli_decompose(o.matrix());
    double total = 0.0;
    for (std::size_t s = 0; s < pc.coeffs.size(); ++s) {
        if (pc.coeffs[s] == cplx{}) continue;
        total += (pc.coeffs[s] * pauli_trace(pc.digits(s), rho.matrix())).real();
    }
    return total;
}

namespace detail {

// Projector (I + s sigma)/2 onto the s = +1/-1 eigenspace of a Pauli.
inline Matrix pauli_eigenprojector(int digit, int sign) {
    Matrix p = Matrix::identity(2) + pauli(digit) * cplx(static_cast<double>(sign));
    return p * cplx(0.5);
}

inline std::vector<int> local_order(const PauliString& p, std::span<const int> order) {
    std::vector<int> qubits;
    if (order.empty()) {
        for (int k = 0; k < p.num_qubits(); ++k) qubits.push_back(k);
    } else {
        qubits.assign(order.begin(), order.end());
        check_targets(qubits, p.num_qubits());
        if (static_cast<int>(qubits.size()) != p.num_qubits()) fail(ErrorCode::BadTarget, "order must list every qubit");
    }
    std::erase_if(qubits, [&](int k) { return p.digits[k] == 0; });
    return qubits;
}

// Probability of outcome `sign` for the factor on `qubit`, and the
// unnormalized branch state.
inline std::pair<double, Vector> local_branch(const PauliString& p, int qubit, int sign, const Vector& psi) {
    Vector v = psi;
    const int target[] = {qubit};
    apply_operator(pauli_eigenprojector(p.digits[qubit], sign), target, p.num_qubits(), v);
    const double prob = norm_squared(v);
    return {prob, std::move(v)};
}

inline double plus_probability(const PauliString& p, std::span<const int> qubits, std::size_t pos, const Vector& psi, int product) {
    if (pos == qubits.size()) return product > 0 ? 1.0 : 0.0;
    double total = 0.0;
    for (const int sign : {+1, -1}) {
        auto [prob, v] = local_branch(p, qubits[pos], sign, psi);
        if (prob <= kZeroProbability) continue;
        for (auto& a : v) a /= std::sqrt(prob);
        total += prob * plus_probability(p, qubits, pos + 1, v, product * sign);
    }
    return total;
}

}  // namespace detail

/// Measures each non-identity factor of p on its own qubit, in the order
/// given (default qubit 0 first), and returns the product of the +-1 results.
inline int sample_pauli_local(const PauliString& p, const PureState& psi, Rng& rng, std::span<const int> order = {}) {
    if (p.num_qubits() != psi.num_qubits()) fail(ErrorCode::DimensionMismatch, "Pauli string length differs from state size");
    Vector state = psi.vector();
    int product = 1;
    for (const int q : detail::local_order(p, order)) {
        auto [p_plus, v_plus] = detail::local_branch(p, q, +1, state);
        const double probs[] = {p_plus, 1.0 - p_plus};
        const bool plus = sample_index(probs, rng, kZeroProbability) == 0;
        if (plus) {
            state = std::move(v_plus);
        } else {
            state = detail::local_branch(p, q, -1, state).second;
            product = -product;
        }
        const double norm = std::sqrt(norm_squared(state));
        for (auto& a : state) a /= norm;
    }
    return product;
}

/// Exact probability that sample_pauli_local returns +1, by enumerating
/// every branch of the sequential local measurements.
inline double pauli_local_plus_probability(const PauliString& p, const PureState& psi, std::span<const int> order = {}) {
    if (p.num_qubits() != psi.num_qubits()) fail(ErrorCode::DimensionMismatch, "Pauli string length differs from state size");
    const auto qubits = detail::local_order(p, order);
    return detail::plus_probability(p, qubits, 0, psi.vector(), 1);
}

/// True iff ||AB - BA||_max <= tol.
inline bool compatible(const Matrix& a, const Matrix& b, double tol = kSpectralTol) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorCode::DimensionMismatch, "observables act on different spaces");
    return max_abs(commutator(a, b)) <= tol;
}

inline bool compatible(const Observable& a, const Observable& b, double tol = kSpectralTol) {
    return compatible(a.matrix(), b.matrix(), tol);
}

/// True iff every projector factors as A_y (x) B_y across a dA x dB split.
/// Rearranges Pi into the dA^2 x dB^2 matrix R[(i1,j1),(i2,j2)] =
/// Pi[(i1,i2),(j1,j2)], which has rank one exactly for product operators.
inline bool is_local(const ProjectiveMeasurement& m, std::size_t dim_a, std::size_t dim_b) {
    if (dim_a == 0 || dim_b == 0 || dim_a * dim_b != m.dim()) fail(ErrorCode::BadSplit, "dA * dB must equal the measurement dimension");
    for (const auto& p : m.projectors()) {
        Matrix r(dim_a * dim_a, dim_b * dim_b);
        for (std::size_t i1 = 0; i1 < dim_a; ++i1) {
            for (std::size_t j1 = 0; j1 < dim_a; ++j1) {
                for (std::size_t i2 = 0; i2 < dim_b; ++i2) {
                    for (std::size_t j2 = 0; j2 < dim_b; ++j2) {
                        r(i1 * dim_a + j1, i2 * dim_b + j2) = p(i1 * dim_b + i2, j1 * dim_b + j2);
                    }
                }
            }
        }
        const auto sv = singular_values(r);
        if (sv.size() > 1 && sv[1] >= 1e-8 * sv[0]) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// POVMs

inline std::vector<double> povm_probabilities(const Povm& p, const DensityState& rho) {
    detail::check_dims(p.dim(), rho.dim());
    return detail::trace_probabilities(p.effects(), rho.matrix());
}

/// M_y^{1/2} rho M_y^{1/2} / tr(M_y rho)
inline DensityState povm_post_state(const Povm& p, std::size_t y, const DensityState& rho) {
    detail::check_dims(p.dim(), rho.dim());
    const double prob = trace_of_product(p.effect(y), rho.matrix()).real();
    if (prob <= kZeroProbability) fail(ErrorCode::ZeroProbabilityOutcome, "outcome " + std::to_string(y) + " has probability " + std::to_string(prob));
    return detail::conditioned(sqrt_psd(p.effect(y)), rho.matrix(), prob);
}

struct PovmSample {
    std::size_t outcome;
    DensityState state;
};

inline PovmSample sample(const Povm& p, const DensityState& rho, Rng& rng) {
    const auto probs = povm_probabilities(p, rho);
    const std::size_t y = sample_index(probs, rng, kZeroProbability);
    return {y, povm_post_state(p, y, rho)};
}

/// Blocks U_{y0} = (<y| (x) I) U (|0> (x) I) of a unitary on n' ancillas
/// (most significant) followed by n system qubits.
inline std::vector<Matrix> dilation_blocks(const Matrix& u, int num_ancillas) {
    if (!u.is_square()) fail(ErrorCode::NotUnitary, "dilation unitary must be square");
    const int total = qubits_for_dim(u.rows());
    if (num_ancillas < 0 || num_ancillas > total) fail(ErrorCode::DimensionMismatch, "ancilla count exceeds register");
    const double dev = unitarity_deviation(u);
    if (dev > kStructuralTol) fail(ErrorCode::NotUnitary, "unitarity deviation " + std::to_string(dev));
    const std::size_t sys_dim = std::size_t{1} << (total - num_ancillas);
    const std::size_t anc_dim = std::size_t{1} << num_ancillas;
    std::vector<Matrix> blocks;
    blocks.reserve(anc_dim);
    for (std::size_t y = 0; y < anc_dim; ++y) {
        Matrix b(sys_dim, sys_dim);
        for (std::size_t i = 0; i < sys_dim; ++i) {
            for (std::size_t j = 0; j < sys_dim; ++j) b(i, j) = u(y * sys_dim + i, j);
        }
        blocks.push_back(std::move(b));
    }
    return blocks;
}

/// M_y = U_{y0}^dagger U_{y0}. Every ancilla outcome keeps its label, even
/// when its effect is zero.
inline Povm povm_from_dilation(const Matrix& u, int num_ancillas) {
    std::vector<Matrix> effects;
    for (const auto& b : dilation_blocks(u, num_ancillas)) effects.push_back(hermitian_part(dagger(b) * b));
    return Povm(std::move(effects));
}

/// Unambiguous discrimination of two pure states: outcome 0 means psi0,
/// 1 means psi1, 2 means "don't know".
///
/// With a = 1/(1 + |<psi0|psi1>|), M0 = a(P - |psi1><psi1|) and
/// M1 = a(P - |psi0><psi0|), where P projects onto span{psi0, psi1}. For a
/// single qubit P = I. Restricting to the span keeps M2 = I - M0 - M1 PSD
/// in higher dimensions without changing any probability on the two states.
inline Povm usd_povm(const PureState& psi0, const PureState& psi1) {
    if (psi0.num_qubits() != psi1.num_qubits()) fail(ErrorCode::DimensionMismatch, "USD states differ in size");
    const cplx overlap = inner(psi0.amplitudes(), psi1.amplitudes());
    const double c = std::abs(overlap);
    const std::size_t dim = psi0.dim();

    Vector residual = psi1.vector();
    for (std::size_t i = 0; i < dim; ++i) residual[i] -= overlap * psi0[i];
    const double res_norm2 = norm_squared(residual);
    if (res_norm2 < kZeroProbability) fail(ErrorCode::IdenticalStates, "states are equal up to a global phase");

    Matrix span_projector;
    if (dim == 2) {
        span_projector = Matrix::identity(2);
    } else {
        for (auto& x : residual) x /= std::sqrt(res_norm2);
        span_projector = outer(psi0.amplitudes(), psi0.amplitudes()) + outer(residual, residual);
    }

    const double a = 1.0 / (1.0 + c);
    Matrix m0 = (span_projector - outer(psi1.amplitudes(), psi1.amplitudes())) * cplx(a);
    Matrix m1 = (span_projector - outer(psi0.amplitudes(), psi0.amplitudes())) * cplx(a);
    Matrix m2 = Matrix::identity(dim) - m0 - m1;
    return Povm({hermitian_part(m0), hermitian_part(m1), hermitian_part(m2)});
}

// ---------------------------------------------------------------------------
// Repeatability

struct RepeatEntry {
    std::size_t outcome;
    double probability;         // of the first measurement
    double repeat_probability;  // P(second = first | first)
};

struct RepeatReport {
    std::vector<RepeatEntry> entries;

    double min_repeat_probability() const {
        double m = 1.0;
        for (const auto& e : entries) m = std::min(m, e.repeat_probability);
        return m;
    }
};

/// Measures, conditions on each outcome with non-zero probability, and
/// evaluates analytically the probability that re-measuring returns it again.
inline RepeatReport repeat_measurement_check(const Povm& p, const DensityState& rho) {
    RepeatReport report;
    const auto probs = povm_probabilities(p, rho);
    for (std::size_t y = 0; y < probs.size(); ++y) {
        if (probs[y] <= kZeroProbability) continue;
        const auto post = povm_post_state(p, y, rho);
        report.entries.push_back({y, probs[y], trace_of_product(p.effect(y), post.matrix()).real()});
    }
    return report;
}

inline RepeatReport repeat_measurement_check(const ProjectiveMeasurement& m, const DensityState& rho) {
    RepeatReport report;
    const auto probs = born_probabilities(m, rho);
    for (std::size_t y = 0; y < probs.size(); ++y) {
        if (probs[y] <= kZeroProbability) continue;
        const auto post = post_state(m, y, rho);
        report.entries.push_back({y, probs[y], trace_of_product(m.projector(y), post.matrix()).real()});
    }
    return report;
}

}  // namespace qmeas
