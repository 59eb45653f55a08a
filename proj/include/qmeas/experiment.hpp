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

// JSON experiment files: a register, an initial state and an ordered list of
// circuit, channel and measurement stages, evaluated exactly (density
// matrices and branch enumeration), by seeded sampling, or both.
//
// Requires nlohmann/json.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qmeas/channels.hpp"
#include "qmeas/circuit.hpp"
#include "qmeas/error.hpp"
#include "qmeas/linalg.hpp"
#include "qmeas/measure.hpp"
#include "qmeas/random.hpp"
#include "qmeas/states.hpp"

namespace qmeas::io {

using json = nlohmann::ordered_json;

/// Malformed JSON or a document that does not follow the schema.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultMaxQubits = 12;

/// Register cap, overridable through QMEAS_MAX_QUBITS.
inline int max_qubits() {
    if (const char* env = std::getenv("QMEAS_MAX_QUBITS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0 && v < 31) return static_cast<int>(v);
    }
    return kDefaultMaxQubits;
}

inline json parse_document(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports "parse error at line L, column C: ...".
        throw ParseError(e.what());
    }
}

// ---------------------------------------------------------------------------
// Schema helpers

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
    throw ParseError(path + ": " + what);
}

inline const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) schema_error(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) schema_error(path, std::string("missing key '") + key + "'");
    return *it;
}

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) schema_error(path, "expected a number");
    return j.get<double>();
}

inline std::int64_t get_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) schema_error(path, "expected an integer");
    return j.get<std::int64_t>();
}

inline std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) schema_error(path, "expected a string");
    return j.get<std::string>();
}

inline std::vector<int> get_int_list(const json& j, const std::string& path) {
    if (!j.is_array()) schema_error(path, "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(static_cast<int>(get_int(j[i], path + "/" + std::to_string(i))));
    return out;
}

inline std::vector<std::string> get_string_list(const json& j, const std::string& path) {
    if (!j.is_array()) schema_error(path, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], path + "/" + std::to_string(i)));
    return out;
}

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Values

/// A real number or [re, im].
inline cplx parse_complex(const json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
    detail::schema_error(path, "expected a number or [re, im]");
}

inline Vector parse_vector(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) detail::schema_error(path, "expected a non-empty array of complex numbers");
    Vector v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(parse_complex(j[i], detail::child(path, i)));
    return v;
}

/// Array of rows.
inline Matrix parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) detail::schema_error(path, "expected a non-empty array of rows");
    std::vector<Vector> rows;
    for (std::size_t r = 0; r < j.size(); ++r) {
        rows.push_back(parse_vector(j[r], detail::child(path, r)));
        if (rows.back().size() != rows.front().size()) detail::schema_error(detail::child(path, r), "ragged matrix row");
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

inline std::vector<Matrix> parse_matrix_list(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) detail::schema_error(path, "expected a non-empty array of matrices");
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_matrix(j[i], detail::child(path, i)));
    return out;
}

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(to_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json to_json(const ValidationReport& report) {
    json checks = json::array();
    for (const auto& c : report.checks) {
        checks.push_back({{"predicate", c.predicate}, {"deviation", c.deviation}, {"passed", c.passed}});
    }
    return checks;
}

/// {"basis": "010"}, {"amplitudes": [...], "normalize": false},
/// {"bell": "phi+"}, "plus", "minus", "ghz3", or {"preset": name}.
/// `num_qubits` sizes the "plus" preset; pass 0 to default to one qubit.
inline PureState parse_state(const json& j, const std::string& path, int num_qubits = 0) {
    auto preset = [&](const std::string& name) -> PureState {
        if (name == "plus") return PureState::plus(num_qubits > 0 ? num_qubits : 1);
        if (name == "minus") return PureState::minus();
        if (name.starts_with("ghz") && name.size() > 3) {
            const int n = std::atoi(name.c_str() + 3);
            if (n >= 1) return PureState::ghz(n);
        }
        if (name.starts_with("phi") || name.starts_with("psi")) return PureState::bell(name);
        detail::schema_error(path, "unknown state preset '" + name + "'");
    };
    if (j.is_string()) return preset(j.get<std::string>());
    if (!j.is_object()) detail::schema_error(path, "expected a state object or preset name");
    if (j.contains("basis")) return PureState::from_bits(detail::get_string(j["basis"], detail::child(path, "basis")));
    if (j.contains("bell")) return PureState::bell(detail::get_string(j["bell"], detail::child(path, "bell")));
    if (j.contains("preset")) return preset(detail::get_string(j["preset"], detail::child(path, "preset")));
    if (j.contains("amplitudes")) {
        Vector v = parse_vector(j["amplitudes"], detail::child(path, "amplitudes"));
        if (j.value("normalize", false)) return PureState::renormalized(std::move(v));
        return PureState(std::move(v));
    }
    detail::schema_error(path, "state needs one of basis, amplitudes, bell, preset");
}

// ---------------------------------------------------------------------------
// Measurements, channels, circuits

/// Generic measurement: outcome y has effect E_y, measurement operator K_y
/// (E_y = K_y^dagger K_y) and an optional numeric value.
struct MeasurementStage {
    std::string type;
    std::vector<Matrix> effects;
    std::vector<Matrix> operators;
    std::vector<double> values;  // empty unless the measurement is an observable
    std::optional<Matrix> observable;

    std::size_t size() const noexcept { return effects.size(); }
    std::size_t dim() const noexcept { return effects.front().rows(); }
};

/// Raw matrices of a measurement spec before validation, for cmd_validate.
struct RawMeasurement {
    std::string type;
    std::vector<Matrix> matrices;  // projectors, effects, or the observable
};

namespace detail {

inline MeasurementStage from_projective(std::string type, const ProjectiveMeasurement& m) {
    MeasurementStage s{std::move(type), m.projectors(), m.projectors(), {}, std::nullopt};
    return s;
}

inline MeasurementStage from_povm(std::string type, const Povm& p) {
    MeasurementStage s{std::move(type), p.effects(), {}, {}, std::nullopt};
    for (const auto& e : p.effects()) s.operators.push_back(sqrt_psd(e));
    return s;
}

inline MeasurementStage from_observable(std::string type, const Observable& o) {
    MeasurementStage s = from_projective(std::move(type), o.measurement());
    s.values = o.values();
    s.observable = o.matrix();
    return s;
}

inline MeasurementStage embed_stage(MeasurementStage s, const std::vector<int>& targets, int num_qubits) {
    for (auto& e : s.effects) e = embed_operator(e, targets, num_qubits);
    for (auto& k : s.operators) k = embed_operator(k, targets, num_qubits);
    if (s.observable) s.observable = embed_operator(*s.observable, targets, num_qubits);
    return s;
}

}  // namespace detail

/// Types: projective, povm, observable, pauli, parity, computational, usd.
/// An optional "targets" list embeds the measurement into the register.
inline MeasurementStage parse_measurement(const json& j, const std::string& path, int num_qubits) {
    using namespace detail;
    const std::string type = get_string(require(j, "type", path), child(path, "type"));
    MeasurementStage s;
    if (type == "projective") {
        s = from_projective(type, ProjectiveMeasurement(parse_matrix_list(require(j, "projectors", path), child(path, "projectors"))));
    } else if (type == "povm") {
        s = from_povm(type, Povm(parse_matrix_list(require(j, "effects", path), child(path, "effects"))));
    } else if (type == "observable") {
        s = from_observable(type, observable_from_hermitian(parse_matrix(require(j, "matrix", path), child(path, "matrix"))));
    } else if (type == "pauli") {
        s = from_observable(type, observable_from_pauli(PauliString::parse(get_string(require(j, "label", path), child(path, "label")))));
    } else if (type == "parity") {
        s = from_projective(type, parity_measurement(static_cast<int>(get_int(require(j, "n", path), child(path, "n")))));
    } else if (type == "computational") {
        const int n = j.contains("n") ? static_cast<int>(get_int(j["n"], child(path, "n"))) : num_qubits;
        s = from_projective(type, computational_measurement(n));
    } else if (type == "usd") {
        const PureState psi0 = parse_state(require(j, "psi0", path), child(path, "psi0"));
        const PureState psi1 = parse_state(require(j, "psi1", path), child(path, "psi1"));
        s = from_povm(type, usd_povm(psi0, psi1));
    } else {
        schema_error(child(path, "type"), "unknown measurement type '" + type + "'");
    }
    if (j.contains("targets")) {
        const auto targets = get_int_list(j["targets"], child(path, "targets"));
        if ((std::size_t{1} << targets.size()) != s.dim()) fail(ErrorCode::BadTarget, path + ": target count does not match the measurement size");
        s = embed_stage(std::move(s), targets, num_qubits);
    }
    return s;
}

/// Matrices of a measurement spec without structural validation; null for
/// types that are valid by construction.
inline std::optional<RawMeasurement> raw_measurement(const json& j, const std::string& path) {
    using namespace detail;
    const std::string type = get_string(require(j, "type", path), child(path, "type"));
    if (type == "projective") return RawMeasurement{type, parse_matrix_list(require(j, "projectors", path), child(path, "projectors"))};
    if (type == "povm") return RawMeasurement{type, parse_matrix_list(require(j, "effects", path), child(path, "effects"))};
    if (type == "observable") return RawMeasurement{type, {parse_matrix(require(j, "matrix", path), child(path, "matrix"))}};
    return std::nullopt;
}

/// Types: pauli, bitflip, dephasing, kraus, classical, embed. A
/// stage-level "targets" list is shorthand for embed.
inline KrausChannel parse_channel(const json& j, const std::string& path, int num_qubits) {
    using namespace detail;
    const std::string type = get_string(require(j, "type", path), child(path, "type"));
    auto prob = [&] { return get_number(require(j, "p", path), child(path, "p")); };
    std::optional<KrausChannel> c;
    if (type == "pauli") {
        const json& p = require(j, "p", path);
        if (!p.is_array() || p.size() != 4) schema_error(child(path, "p"), "expected [p0, p1, p2, p3]");
        c = pauli_channel(get_number(p[0], child(path, "p/0")), get_number(p[1], child(path, "p/1")),
                          get_number(p[2], child(path, "p/2")), get_number(p[3], child(path, "p/3")));
    } else if (type == "bitflip" || type == "bit_flip") {
        c = bit_flip(prob());
    } else if (type == "dephasing") {
        c = dephasing(prob());
    } else if (type == "kraus") {
        c = KrausChannel(parse_matrix_list(require(j, "matrices", path), child(path, "matrices")));
    } else if (type == "classical") {
        c = classical_channel(static_cast<int>(get_int(require(j, "n", path), child(path, "n"))));
    } else if (type == "embed") {
        const KrausChannel inner = parse_channel(require(j, "inner", path), child(path, "inner"), num_qubits);
        c = embed(inner, get_int_list(require(j, "targets", path), child(path, "targets")), num_qubits);
        return *c;
    } else {
        schema_error(child(path, "type"), "unknown channel type '" + type + "'");
    }
    if (j.contains("targets")) c = embed(*c, get_int_list(j["targets"], child(path, "targets")), num_qubits);
    return *c;
}

/// {"n": k, "ops": [...]} with ops {"gate", "targets", "if"?},
/// {"unitary", "targets", "name"?, "if"?} and {"measure", "store"}.
inline Circuit parse_circuit(const json& j, const std::string& path) {
    using namespace detail;
    Circuit c(static_cast<int>(get_int(require(j, "n", path), child(path, "n"))));
    const json& ops = require(j, "ops", path);
    if (!ops.is_array()) schema_error(child(path, "ops"), "expected an array");
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const json& op = ops[i];
        const std::string p = child(child(path, "ops"), i);
        if (op.contains("measure")) {
            c.measure(get_int_list(op["measure"], child(p, "measure")), get_string_list(require(op, "store", p), child(p, "store")));
            continue;
        }
        const auto targets = get_int_list(require(op, "targets", p), child(p, "targets"));
        std::optional<Condition> cond;
        if (op.contains("if")) cond = Condition::parse(get_string(op["if"], child(p, "if")));
        Matrix m;
        std::string name;
        if (op.contains("gate")) {
            name = get_string(op["gate"], child(p, "gate"));
            m = named_gate(name);
        } else if (op.contains("unitary")) {
            m = parse_matrix(op["unitary"], child(p, "unitary"));
            name = op.contains("name") ? get_string(op["name"], child(p, "name")) : "U";
        } else {
            schema_error(p, "op needs one of gate, unitary, measure");
        }
        if (cond) {
            c.controlled(std::move(m), targets, std::move(*cond), std::move(name));
        } else {
            c.unitary(std::move(m), targets, std::move(name));
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Experiments

enum class Mode { Exact, Sample, Both };

inline Mode parse_mode(const std::string& s) {
    if (s == "exact") return Mode::Exact;
    if (s == "sample") return Mode::Sample;
    if (s == "both") return Mode::Both;
    throw ParseError("mode must be exact, sample or both");
}

inline std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Exact: return "exact";
        case Mode::Sample: return "sample";
        case Mode::Both: return "both";
    }
    return "exact";
}

struct Stage {
    enum class Kind { Circuit, Channel, Measurement };
    Kind kind;
    std::string label;
    std::optional<Circuit> circuit;
    std::optional<KrausChannel> channel;
    std::optional<MeasurementStage> measurement;
};

inline std::string stage_kind_name(Stage::Kind k) {
    switch (k) {
        case Stage::Kind::Circuit: return "circuit";
        case Stage::Kind::Channel: return "channel";
        case Stage::Kind::Measurement: return "measurement";
    }
    return "";
}

struct Experiment {
    int qubits = 0;
    PureState initial = PureState::basis(0, 0);
    std::vector<Stage> stages;
    std::size_t shots = 1000;
    std::uint64_t seed = 0;
    Mode mode = Mode::Exact;
};

struct Overrides {
    std::optional<std::size_t> shots;
    std::optional<std::uint64_t> seed;
    std::optional<Mode> mode;
};

namespace detail {

inline void check_register(int qubits, const std::string& path) {
    const int cap = max_qubits();
    if (qubits < 1 || qubits > cap) {
        fail(ErrorCode::BadDimension, path + ": register of " + std::to_string(qubits) + " qubits outside 1.." + std::to_string(cap) +
                                          " (set QMEAS_MAX_QUBITS to raise the cap)");
    }
}

inline std::pair<Stage::Kind, const json*> stage_body(const json& s, const std::string& path) {
    if (!s.is_object()) schema_error(path, "expected a stage object");
    if (s.contains("circuit")) return {Stage::Kind::Circuit, &s["circuit"]};
    if (s.contains("channel")) return {Stage::Kind::Channel, &s["channel"]};
    if (s.contains("measurement")) return {Stage::Kind::Measurement, &s["measurement"]};
    schema_error(path, "stage needs one of circuit, channel, measurement");
}

}  // namespace detail

/// Builds and validates an experiment. Schema problems raise ParseError,
/// invalid physics raises qmeas::Error.
inline Experiment build_experiment(const json& doc, const Overrides& overrides = {}) {
    using namespace detail;
    Experiment e;
    e.qubits = static_cast<int>(get_int(require(doc, "qubits", ""), "/qubits"));
    if (doc.contains("shots")) {
        const auto shots = get_int(doc["shots"], "/shots");
        if (shots < 0) schema_error("/shots", "must be non-negative");
        e.shots = static_cast<std::size_t>(shots);
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer()) schema_error("/seed", "expected an integer");
        e.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("mode")) e.mode = parse_mode(get_string(doc["mode"], "/mode"));
    if (overrides.shots) e.shots = *overrides.shots;
    if (overrides.seed) e.seed = *overrides.seed;
    if (overrides.mode) e.mode = *overrides.mode;

    check_register(e.qubits, "/qubits");
    e.initial = doc.contains("state") ? parse_state(doc["state"], "/state", e.qubits) : PureState::basis(e.qubits, 0);
    if (e.initial.num_qubits() != e.qubits) fail(ErrorCode::DimensionMismatch, "/state: size differs from the register");
    if (e.mode != Mode::Exact && e.shots < 1) fail(ErrorCode::BadProbabilities, "/shots: sampling needs at least one shot");

    const json& stages = require(doc, "stages", "");
    if (!stages.is_array()) schema_error("/stages", "expected an array");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string path = child("/stages", i);
        const auto [kind, body] = stage_body(stages[i], path);
        Stage st{kind, stages[i].contains("label") ? get_string(stages[i]["label"], child(path, "label")) : "", {}, {}, {}};
        const std::string bpath = child(path, stage_kind_name(kind));
        if (kind == Stage::Kind::Circuit) {
            st.circuit = parse_circuit(*body, bpath);
            st.circuit->validate();
            if (st.circuit->num_qubits() != e.qubits) fail(ErrorCode::DimensionMismatch, bpath + ": circuit size differs from the register");
        } else if (kind == Stage::Kind::Channel) {
            st.channel = parse_channel(*body, bpath, e.qubits);
            const auto report = kraus_validate(*st.channel);
            if (!report.ok()) fail(ErrorCode::InvalidChannel, bpath + ": completeness deviation " + std::to_string(report.deviation("completeness")));
            if (st.channel->input_qubits() != e.qubits || st.channel->output_qubits() != e.qubits) {
                fail(ErrorCode::DimensionMismatch, bpath + ": channel must map the register to itself");
            }
        } else {
            st.measurement = parse_measurement(*body, bpath, e.qubits);
            if (st.measurement->dim() != e.initial.dim()) fail(ErrorCode::DimensionMismatch, bpath + ": measurement size differs from the register");
        }
        e.stages.push_back(std::move(st));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Evaluation

struct OutcomeRow {
    std::string label;
    std::optional<double> value;
    std::optional<double> exact;
    std::size_t count = 0;
};

struct StageResult {
    std::vector<OutcomeRow> outcomes;
    std::optional<double> exact_expectation;
    double sample_sum = 0.0;
    double sample_sum_sq = 0.0;

    OutcomeRow& row(const std::string& label) {
        for (auto& r : outcomes) {
            if (r.label == label) return r;
        }
        outcomes.push_back({label, std::nullopt, std::nullopt, 0});
        return outcomes.back();
    }
};

namespace detail {

inline std::string outcome_label(std::size_t y) { return std::to_string(y); }

/// Applies the exact stage map to rho and fills the exact columns.
inline Matrix exact_stage(const Stage& st, Matrix rho, StageResult& res) {
    switch (st.kind) {
        case Stage::Kind::Circuit: {
            if (st.circuit->measured_bit_count() == 0) {
                const Matrix u = net_unitary(*st.circuit);
                return u * rho * dagger(u);
            }
            const auto branches = run_distribution(*st.circuit, DensityState::unchecked(rho));
            Matrix out(rho.rows(), rho.cols());
            for (const auto& b : branches) {
                auto& r = res.row(b.bits.str());
                r.exact = r.exact.value_or(0.0) + b.probability;
                out += b.state.matrix() * cplx(b.probability);
            }
            return out;
        }
        case Stage::Kind::Channel:
            return apply(*st.channel, DensityState::unchecked(rho)).matrix();
        case Stage::Kind::Measurement: {
            const auto& m = *st.measurement;
            Matrix out(rho.rows(), rho.cols());
            for (std::size_t y = 0; y < m.size(); ++y) {
                auto& r = res.row(outcome_label(y));
                r.exact = std::max(0.0, trace_of_product(m.effects[y], rho).real());
                if (!m.values.empty()) r.value = m.values[y];
                out += m.operators[y] * rho * dagger(m.operators[y]);
            }
            if (m.observable) res.exact_expectation = trace_of_product(*m.observable, rho).real();
            return out;
        }
    }
    return rho;
}

// Outcome distribution of one stage from one pure state, with the
// conditioned children. Channel outcomes are Kraus indices and carry no
// label.
struct Node {
    std::vector<double> probs;
    std::vector<std::string> labels;
    std::vector<std::optional<PureState>> children;
};

inline Node expand(const Stage& st, const PureState& psi) {
    Node node;
    auto push_operator = [&](const Matrix& k, std::string label) {
        Vector v = k * psi.vector();
        const double p = norm_squared(v);
        node.probs.push_back(p);
        node.labels.push_back(std::move(label));
        node.children.push_back(p > kZeroProbability ? std::optional<PureState>(PureState::renormalized(std::move(v))) : std::nullopt);
    };
    switch (st.kind) {
        case Stage::Kind::Circuit:
            for (auto& b : run_distribution(*st.circuit, psi)) {
                node.probs.push_back(b.probability);
                node.labels.push_back(b.bits.str());
                node.children.emplace_back(std::move(b.state));
            }
            break;
        case Stage::Kind::Channel:
            for (const auto& k : st.channel->kraus()) push_operator(k, "");
            break;
        case Stage::Kind::Measurement:
            for (std::size_t y = 0; y < st.measurement->size(); ++y) push_operator(st.measurement->operators[y], outcome_label(y));
            break;
    }
    return node;
}

inline constexpr std::size_t kMemoLimit = 1 << 16;

}  // namespace detail

struct ExperimentResult {
    const Experiment* experiment = nullptr;
    std::vector<StageResult> stages;
    std::optional<Matrix> final_density;
};

/// Runs the exact pipeline on a density matrix and/or `shots` seeded
/// trajectories (shot s draws from Rng(seed, s)). Conditioned states are
/// memoized per outcome history, so sampling cost grows with the number of
/// distinct histories rather than with shots.
inline ExperimentResult run_experiment(const Experiment& e) {
    ExperimentResult result;
    result.experiment = &e;
    result.stages.resize(e.stages.size());

    if (e.mode != Mode::Sample) {
        Matrix rho = outer(e.initial.amplitudes(), e.initial.amplitudes());
        for (std::size_t i = 0; i < e.stages.size(); ++i) rho = detail::exact_stage(e.stages[i], std::move(rho), result.stages[i]);
        result.final_density = hermitian_part(rho);
    }

    if (e.mode != Mode::Exact) {
        std::unordered_map<std::string, detail::Node> memo;
        std::deque<detail::Node> scratch;
        for (std::size_t s = 0; s < e.shots; ++s) {
            Rng rng(e.seed, s);
            scratch.clear();
            std::string history;
            const PureState* psi = &e.initial;
            for (std::size_t i = 0; i < e.stages.size(); ++i) {
                const Stage& st = e.stages[i];
                const detail::Node* node = nullptr;
                if (auto it = memo.find(history); it != memo.end()) {
                    node = &it->second;
                } else if (memo.size() < detail::kMemoLimit) {
                    node = &memo.emplace(history, detail::expand(st, *psi)).first->second;
                } else {
                    node = &scratch.emplace_back(detail::expand(st, *psi));
                }
                const std::size_t y = sample_index(node->probs, rng, kZeroProbability);
                if (st.kind != Stage::Kind::Channel) {
                    auto& res = result.stages[i];
                    res.row(node->labels[y]).count += 1;
                    if (st.kind == Stage::Kind::Measurement && !st.measurement->values.empty()) {
                        const double v = st.measurement->values[y];
                        res.row(node->labels[y]).value = v;
                        res.sample_sum += v;
                        res.sample_sum_sq += v * v;
                    }
                }
                psi = &*node->children[y];
                history += std::to_string(y);
                history.push_back(',');
            }
        }
    }
    return result;
}

/// |frequency - p| beyond four binomial standard deviations.
inline bool diverges(double exact, std::size_t count, std::size_t shots) {
    const double freq = static_cast<double>(count) / static_cast<double>(shots);
    const double sigma = std::sqrt(std::max(0.0, exact * (1.0 - exact)) / static_cast<double>(shots));
    return std::abs(freq - exact) > 4.0 * sigma + 1e-12;
}

inline json report_json(const ExperimentResult& r) {
    const Experiment& e = *r.experiment;
    const bool exact = e.mode != Mode::Sample;
    const bool sampled = e.mode != Mode::Exact;
    json out;
    out["qubits"] = e.qubits;
    out["mode"] = mode_name(e.mode);
    if (sampled) {
        out["shots"] = e.shots;
        out["seed"] = e.seed;
    }
    std::size_t divergences = 0;
    json stages = json::array();
    for (std::size_t i = 0; i < e.stages.size(); ++i) {
        const Stage& st = e.stages[i];
        const StageResult& res = r.stages[i];
        json js;
        js["index"] = i;
        js["kind"] = stage_kind_name(st.kind);
        if (!st.label.empty()) js["label"] = st.label;
        if (st.kind == Stage::Kind::Channel) {
            if (!st.channel->notes().empty()) js["notes"] = st.channel->notes();
            stages.push_back(std::move(js));
            continue;
        }
        if (st.kind == Stage::Kind::Circuit) js["bits"] = st.circuit->bit_names();
        if (st.kind == Stage::Kind::Measurement) js["type"] = st.measurement->type;
        json rows = json::array();
        for (const auto& row : res.outcomes) {
            json jr;
            jr["label"] = row.label;
            if (row.value) jr["value"] = *row.value;
            if (exact) jr["exact"] = row.exact.value_or(0.0);
            if (sampled) {
                jr["count"] = row.count;
                jr["frequency"] = static_cast<double>(row.count) / static_cast<double>(e.shots);
            }
            if (exact && sampled) {
                const double p = row.exact.value_or(0.0);
                jr["sigma"] = std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(e.shots));
                const bool d = diverges(p, row.count, e.shots);
                jr["diverged"] = d;
                divergences += d ? 1 : 0;
            }
            rows.push_back(std::move(jr));
        }
        js["outcomes"] = std::move(rows);
        if (st.kind == Stage::Kind::Measurement && st.measurement->observable) {
            json ex;
            if (exact) ex["exact"] = *res.exact_expectation;
            if (sampled) {
                const double n = static_cast<double>(e.shots);
                const double mean = res.sample_sum / n;
                const double var = std::max(0.0, res.sample_sum_sq / n - mean * mean);
                ex["estimate"] = mean;
                ex["stderr"] = std::sqrt(var / n);
            }
            js["expectation"] = std::move(ex);
        }
        stages.push_back(std::move(js));
    }
    out["stages"] = std::move(stages);
    if (r.final_density) {
        json diag = json::array();
        for (std::size_t k = 0; k < r.final_density->rows(); ++k) diag.push_back((*r.final_density)(k, k).real());
        out["final_state"] = {{"density_diagonal", std::move(diag)},
                              {"purity", trace_of_product(*r.final_density, *r.final_density).real()}};
    }
    if (exact && sampled) out["divergences"] = divergences;
    return out;
}

// ---------------------------------------------------------------------------
// Structural validation

struct ValidationEntry {
    std::string path;
    std::string subject;
    ValidationReport report;
    std::string error;  // construction failure, if any
};

struct ValidationSummary {
    std::vector<ValidationEntry> entries;

    bool ok() const {
        return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.error.empty() && e.report.ok(); });
    }

    json to_json() const {
        json checks = json::array();
        json errors = json::array();
        for (const auto& e : entries) {
            for (const auto& c : e.report.checks) {
                checks.push_back({{"path", e.path},
                                  {"subject", e.subject},
                                  {"predicate", c.predicate},
                                  {"deviation", c.deviation},
                                  {"passed", c.passed}});
                if (!c.passed) errors.push_back(e.path + ": " + c.predicate + " deviation " + std::to_string(c.deviation));
            }
            if (!e.error.empty()) errors.push_back(e.path + ": " + e.error);
        }
        return {{"valid", ok()}, {"checks", std::move(checks)}, {"errors", std::move(errors)}};
    }
};

/// Runs every structural validator in the document and reports maximum
/// deviations instead of stopping at the first failure. Schema errors still
/// raise ParseError.
inline ValidationSummary validate_experiment(const json& doc) {
    using namespace detail;
    ValidationSummary summary;
    auto guarded = [&](const std::string& path, const std::string& subject, auto&& body) {
        ValidationEntry entry{path, subject, {}, {}};
        try {
            entry.report = body();
        } catch (const Error& err) {
            entry.error = err.what();
        }
        summary.entries.push_back(std::move(entry));
    };

    const int qubits = static_cast<int>(get_int(require(doc, "qubits", ""), "/qubits"));
    guarded("/qubits", "register", [&] {
        check_register(qubits, "/qubits");
        return ValidationReport{};
    });
    if (doc.contains("state")) {
        guarded("/state", "state", [&] {
            const PureState psi = parse_state(doc["state"], "/state", qubits);
            ValidationReport rep;
            rep.add("register size", psi.num_qubits() == qubits ? 0.0 : 1.0, 0.5);
            return rep;
        });
    }
    const json& stages = require(doc, "stages", "");
    if (!stages.is_array()) schema_error("/stages", "expected an array");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string path = child("/stages", i);
        const auto [kind, body] = stage_body(stages[i], path);
        const std::string bpath = child(path, stage_kind_name(kind));
        if (kind == Stage::Kind::Measurement) {
            const auto raw = raw_measurement(*body, bpath);
            guarded(bpath, "measurement", [&] {
                ValidationReport rep;
                if (raw && raw->type == "projective") rep = validate_projectors(raw->matrices);
                if (raw && raw->type == "povm") rep = validate_effects(raw->matrices);
                if (raw && raw->type == "observable") rep = validate(raw->matrices.front(), MatrixKind::Hermitian);
                if (rep.ok()) parse_measurement(*body, bpath, qubits);
                return rep;
            });
        } else if (kind == Stage::Kind::Channel) {
            guarded(bpath, "channel", [&] { return kraus_validate(parse_channel(*body, bpath, qubits)); });
        } else {
            const Circuit c = parse_circuit(*body, bpath);
            guarded(bpath, "circuit", [&] {
                ValidationReport rep;
                for (std::size_t k = 0; k < c.ops().size(); ++k) {
                    if (const auto* g = std::get_if<GateOp>(&c.ops()[k])) {
                        const std::string what = "unitary (op " + std::to_string(k) + ")";
                        rep.add(what, g->matrix.is_square() ? unitarity_deviation(g->matrix) : 1.0, kStructuralTol);
                    }
                }
                if (rep.ok()) c.validate();
                return rep;
            });
        }
    }
    return summary;
}

}  // namespace qmeas::io
