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

// qmeas command-line front end. Results go to stdout as one JSON document;
// --pretty adds human-readable tables on stderr.
//
// Exit codes: 0 ok, 2 parse error, 3 validation error, 4 runtime error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qmeas/experiment.hpp"
#include "qmeas/qmeas.hpp"

namespace {

using qmeas::io::json;

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

struct CommonFlags {
    std::optional<std::size_t> shots;
    std::optional<std::uint64_t> seed;
    std::string mode;
    bool pretty = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--shots", f.shots, "Number of sampled shots");
    cmd->add_option("--seed", f.seed, "64-bit seed for the per-shot streams");
    cmd->add_option("--mode", f.mode, "exact, sample or both")->check(CLI::IsMember({"exact", "sample", "both"}));
    cmd->add_flag("--pretty", f.pretty, "Print tables to stderr");
}

qmeas::io::Overrides overrides_of(const CommonFlags& f) {
    qmeas::io::Overrides o;
    o.shots = f.shots;
    o.seed = f.seed;
    if (!f.mode.empty()) o.mode = qmeas::io::parse_mode(f.mode);
    return o;
}

json load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qmeas::io::ParseError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return qmeas::io::parse_document(ss.str());
}

void emit(const json& doc) { std::cout << doc.dump(2) << "\n"; }

// The build step raises qmeas::Error for invalid inputs; during execution the
// same type means a runtime failure. The phase decides the exit code.
template <class Build, class Execute>
int guarded(Build&& build, Execute&& execute) {
    try {
        auto built = build();
        try {
            return execute(built);
        } catch (const qmeas::Error& e) {
            std::cerr << "runtime error: " << e.what() << "\n";
            return kExitRuntime;
        }
    } catch (const qmeas::io::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const qmeas::Error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

void print_report_table(const json& report) {
    for (const auto& st : report["stages"]) {
        std::fprintf(stderr, "stage %d (%s)", st["index"].get<int>(), st["kind"].get<std::string>().c_str());
        if (st.contains("label")) std::fprintf(stderr, " %s", st["label"].get<std::string>().c_str());
        std::fprintf(stderr, "\n");
        if (!st.contains("outcomes")) continue;
        std::fprintf(stderr, "  %-10s %12s %10s %12s\n", "outcome", "exact", "count", "frequency");
        for (const auto& row : st["outcomes"]) {
            std::fprintf(stderr, "  %-10s", row["label"].get<std::string>().c_str());
            if (row.contains("exact")) {
                std::fprintf(stderr, " %12.6f", row["exact"].get<double>());
            } else {
                std::fprintf(stderr, " %12s", "-");
            }
            if (row.contains("count")) {
                std::fprintf(stderr, " %10zu %12.6f", row["count"].get<std::size_t>(), row["frequency"].get<double>());
            }
            if (row.value("diverged", false)) std::fprintf(stderr, "  DIVERGED");
            std::fprintf(stderr, "\n");
        }
        if (st.contains("expectation")) {
            const auto& ex = st["expectation"];
            if (ex.contains("exact")) std::fprintf(stderr, "  <O> exact    %.6f\n", ex["exact"].get<double>());
            if (ex.contains("estimate")) {
                std::fprintf(stderr, "  <O> estimate %.6f +- %.6f\n", ex["estimate"].get<double>(), ex["stderr"].get<double>());
            }
        }
    }
}

int cmd_run(const std::string& path, const CommonFlags& flags) {
    return guarded([&] { return qmeas::io::build_experiment(load(path), overrides_of(flags)); },
                   [&](const qmeas::io::Experiment& e) {
                       const json report = qmeas::io::report_json(qmeas::io::run_experiment(e));
                       emit(report);
                       if (flags.pretty) print_report_table(report);
                       return 0;
                   });
}

int cmd_validate(const std::string& path, bool pretty) {
    try {
        const auto summary = qmeas::io::validate_experiment(load(path));
        const json doc = summary.to_json();
        emit(doc);
        for (const auto& err : doc["errors"]) std::cerr << err.get<std::string>() << "\n";
        if (pretty) {
            for (const auto& c : doc["checks"]) {
                std::fprintf(stderr, "%-28s %-22s %12.3e %s\n", c["path"].get<std::string>().c_str(),
                             c["predicate"].get<std::string>().c_str(), c["deviation"].get<double>(),
                             c["passed"].get<bool>() ? "ok" : "FAIL");
            }
        }
        return summary.ok() ? 0 : kExitValidation;
    } catch (const qmeas::io::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    }
}

struct QecFlags {
    std::string kind = "bit-flip";
    std::optional<double> p;
    std::string noise = "independent";
    std::string state = "plus";
};

int cmd_qec(const QecFlags& q, const CommonFlags& flags) {
    struct Setup {
        qmeas::RepetitionCode code;
        qmeas::PureState logical;
        qmeas::NoiseModel noise;
    };
    return guarded(
        [&] {
            if (q.p && !(*q.p >= 0.0 && *q.p <= 1.0)) qmeas::fail(qmeas::ErrorCode::BadProbabilities, "p must lie in [0, 1]");
            json state_doc = json(q.state);
            if (!q.state.empty() && (q.state.front() == '{' || q.state.front() == '[')) state_doc = qmeas::io::parse_document(q.state);
            return Setup{qmeas::RepetitionCode(qmeas::parse_code_kind(q.kind)),
                         qmeas::io::parse_state(state_doc, "--state", 1), qmeas::parse_noise_model(q.noise)};
        },
        [&](const Setup& s) {
            json out;
            out["kind"] = std::string(qmeas::code_kind_name(s.code.kind()));
            const std::uint64_t seed = flags.seed.value_or(0);
            if (!q.p) {
                // Deterministic table: every correctable error on the encoded state.
                if (s.logical.num_qubits() != 1) qmeas::fail(qmeas::ErrorCode::DimensionMismatch, "logical state must be one qubit");
                const auto encoded = qmeas::encode(s.logical, s.code);
                json rows = json::array();
                qmeas::Rng rng(seed, 0);
                for (const auto e : {qmeas::ErrorCase::none(), qmeas::ErrorCase::flip(0), qmeas::ErrorCase::flip(1),
                                     qmeas::ErrorCase::flip(2)}) {
                    const auto corrupted = qmeas::apply_error(encoded, e, s.code);
                    const auto proj = qmeas::decode_distribution(corrupted, s.code);
                    const auto circ = qmeas::decode_circuit(corrupted, s.code, rng);
                    rows.push_back({{"error", e.str()},
                                    {"syndrome", proj.front().syndrome.str()},
                                    {"syndrome_probability", proj.front().probability},
                                    {"circuit_syndrome", circ.syndrome.str()},
                                    {"fidelity", qmeas::fidelity(proj.front().corrected, encoded)},
                                    {"circuit_fidelity", qmeas::fidelity(circ.corrected, encoded)}});
                }
                out["rows"] = std::move(rows);
                emit(out);
                if (flags.pretty) {
                    std::fprintf(stderr, "%-8s %-9s %-9s %10s\n", "error", "syndrome", "circuit", "fidelity");
                    for (const auto& r : out["rows"]) {
                        std::fprintf(stderr, "%-8s %-9s %-9s %10.6f\n", r["error"].get<std::string>().c_str(),
                                     r["syndrome"].get<std::string>().c_str(), r["circuit_syndrome"].get<std::string>().c_str(),
                                     r["fidelity"].get<double>());
                    }
                }
                return 0;
            }
            const std::size_t shots = flags.shots.value_or(10000);
            const auto est = qmeas::logical_error_rate(s.code, *q.p, shots, seed, s.noise);
            const double p = *q.p;
            out["noise"] = std::string(qmeas::noise_model_name(s.noise));
            out["p"] = p;
            out["shots"] = shots;
            out["seed"] = seed;
            out["failures"] = est.failures;
            out["logical_error_rate"] = est.rate();
            out["stderr"] = est.standard_error();
            if (s.noise == qmeas::NoiseModel::Independent) out["majority_vote_rate"] = 3 * p * p - 2 * p * p * p;
            emit(out);
            if (flags.pretty) {
                std::fprintf(stderr, "p=%.4f  logical error rate %.5f +- %.5f (%zu/%zu)\n", p, est.rate(), est.standard_error(),
                             est.failures, shots);
            }
            return 0;
        });
}

struct UsdFlags {
    std::string psi0 = "0";
    std::string psi1 = "plus";
    int truth = 0;
};

json state_literal(const std::string& s) {
    if (s == "0" || s == "1") return json{{"basis", s}};
    if (s == "+") return json("plus");
    if (s == "-") return json("minus");
    if (!s.empty() && (s.front() == '{' || s.front() == '[')) return qmeas::io::parse_document(s);
    return json(s);
}

/// Wraps a single-stage USD experiment around the two candidate states.
int cmd_usd(const UsdFlags& u, CommonFlags flags) {
    if (flags.mode.empty()) flags.mode = "both";
    return guarded(
        [&] {
            const json psi0 = state_literal(u.psi0);
            const json psi1 = state_literal(u.psi1);
            if (u.truth != 0 && u.truth != 1) qmeas::fail(qmeas::ErrorCode::BadSelector, "--true must be 0 or 1");
            const int qubits = qmeas::io::parse_state(psi0, "--psi0").num_qubits();
            json doc{{"qubits", qubits},
                     {"state", u.truth == 0 ? psi0 : psi1},
                     {"shots", 100000},
                     {"stages", json::array({json{{"label", "usd"},
                                                  {"measurement", {{"type", "usd"}, {"psi0", psi0}, {"psi1", psi1}}}}})}};
            return qmeas::io::build_experiment(doc, overrides_of(flags));
        },
        [&](const qmeas::io::Experiment& e) {
            const json report = qmeas::io::report_json(qmeas::io::run_experiment(e));
            emit(report);
            if (flags.pretty) print_report_table(report);
            return 0;
        });
}

/// {"qubits": n, "state": ..., "channel": ...} -> output density matrix.
int cmd_channel(const std::string& path, bool pretty) {
    struct Setup {
        qmeas::PureState psi;
        qmeas::KrausChannel channel;
    };
    return guarded(
        [&] {
            const json doc = load(path);
            const int qubits = static_cast<int>(qmeas::io::detail::get_int(qmeas::io::detail::require(doc, "qubits", ""), "/qubits"));
            qmeas::io::detail::check_register(qubits, "/qubits");
            auto psi = doc.contains("state") ? qmeas::io::parse_state(doc["state"], "/state", qubits) : qmeas::PureState::basis(qubits, 0);
            auto channel = qmeas::io::parse_channel(qmeas::io::detail::require(doc, "channel", ""), "/channel", qubits);
            const auto report = qmeas::kraus_validate(channel);
            if (!report.ok()) {
                qmeas::fail(qmeas::ErrorCode::InvalidChannel, "completeness deviation " + std::to_string(report.deviation("completeness")));
            }
            if (psi.num_qubits() != channel.input_qubits()) qmeas::fail(qmeas::ErrorCode::DimensionMismatch, "state size differs from channel input");
            return Setup{std::move(psi), std::move(channel)};
        },
        [&](const Setup& s) {
            const auto out = qmeas::apply(s.channel, qmeas::to_density(s.psi));
            json doc;
            doc["input_qubits"] = s.channel.input_qubits();
            doc["output_qubits"] = s.channel.output_qubits();
            doc["kraus_count"] = s.channel.kraus().size();
            if (!s.channel.notes().empty()) doc["notes"] = s.channel.notes();
            doc["density"] = qmeas::io::to_json(out.matrix());
            doc["purity"] = qmeas::purity(out);
            emit(doc);
            if (pretty) {
                for (std::size_t r = 0; r < out.dim(); ++r) {
                    for (std::size_t c = 0; c < out.dim(); ++c) {
                        std::fprintf(stderr, " %8.4f%+8.4fi", out(r, c).real(), out(r, c).imag());
                    }
                    std::fprintf(stderr, "\n");
                }
            }
            return 0;
        });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qmeas: quantum measurement, channel and repetition-code simulator"};
    app.require_subcommand(1);

    std::string path;
    CommonFlags run_flags, qec_flags, usd_flags;
    bool validate_pretty = false, channel_pretty = false;
    QecFlags qec;
    UsdFlags usd;

    auto* run = app.add_subcommand("run", "Run an experiment file");
    run->add_option("file", path, "Experiment JSON")->required();
    add_common(run, run_flags);

    auto* validate = app.add_subcommand("validate", "Check every measurement, channel and gate in an experiment file");
    validate->add_option("file", path, "Experiment JSON")->required();
    validate->add_flag("--pretty", validate_pretty, "Print the checks to stderr");

    auto* qec_cmd = app.add_subcommand("qec", "Three-qubit repetition code: syndrome table, or Monte-Carlo with --p");
    qec_cmd->add_option("--kind", qec.kind, "bit-flip or phase-flip");
    qec_cmd->add_option("--p", qec.p, "Per-qubit flip probability (Monte-Carlo mode)");
    qec_cmd->add_option("--noise", qec.noise, "independent or single");
    qec_cmd->add_option("--state", qec.state, "Logical state for the table (preset name or JSON)");
    add_common(qec_cmd, qec_flags);

    auto* usd_cmd = app.add_subcommand("usd", "Unambiguous discrimination of two pure states");
    usd_cmd->add_option("--psi0", usd.psi0, "First state (0, 1, +, -, preset or JSON)");
    usd_cmd->add_option("--psi1", usd.psi1, "Second state");
    usd_cmd->add_option("--true", usd.truth, "Index of the state actually prepared");
    add_common(usd_cmd, usd_flags);

    auto* channel_cmd = app.add_subcommand("channel", "Apply a channel to a state and print the output density");
    channel_cmd->add_option("file", path, "JSON with qubits, state and channel")->required();
    channel_cmd->add_flag("--pretty", channel_pretty, "Print the density matrix to stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitParse;
    }

    if (*run) return cmd_run(path, run_flags);
    if (*validate) return cmd_validate(path, validate_pretty);
    if (*qec_cmd) return cmd_qec(qec, qec_flags);
    if (*usd_cmd) return cmd_usd(usd, usd_flags);
    if (*channel_cmd) return cmd_channel(path, channel_pretty);
    return kExitParse;
}
