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

#include <stdexcept>
#include <string>
#include <string_view>

namespace qmeas {

enum class ErrorCode {
    NonSquare,
    DimensionMismatch,
    NotHermitian,
    NotPsd,
    BadDimension,
    NotNormalized,
    ProbabilityMismatch,
    NotOrthonormal,
    BadPartition,
    ZeroProbabilityOutcome,
    NotUnitary,
    IdenticalStates,
    BadSplit,
    InvalidChannel,
    BadProbabilities,
    BadTarget,
    InvalidCircuit,
    TooManyBranches,
    BadSelector,
    NotBalanced,
    InvalidMeasurement,
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonSquare: return "NonSquare";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotHermitian: return "NotHermitian";
        case ErrorCode::NotPsd: return "NotPsd";
        case ErrorCode::BadDimension: return "BadDimension";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::ProbabilityMismatch: return "ProbabilityMismatch";
        case ErrorCode::NotOrthonormal: return "NotOrthonormal";
        case ErrorCode::BadPartition: return "BadPartition";
        case ErrorCode::ZeroProbabilityOutcome: return "ZeroProbabilityOutcome";
        case ErrorCode::NotUnitary: return "NotUnitary";
        case ErrorCode::IdenticalStates: return "IdenticalStates";
        case ErrorCode::BadSplit: return "BadSplit";
        case ErrorCode::InvalidChannel: return "InvalidChannel";
        case ErrorCode::BadProbabilities: return "BadProbabilities";
        case ErrorCode::BadTarget: return "BadTarget";
        case ErrorCode::InvalidCircuit: return "InvalidCircuit";
        case ErrorCode::TooManyBranches: return "TooManyBranches";
        case ErrorCode::BadSelector: return "BadSelector";
        case ErrorCode::NotBalanced: return "NotBalanced";
        case ErrorCode::InvalidMeasurement: return "InvalidMeasurement";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace qmeas
