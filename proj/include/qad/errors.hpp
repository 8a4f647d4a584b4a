// Copyright 2026 The qad Authors
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

namespace qad {

/// Machine-readable failure category. The CLI maps each to a distinct exit code.
enum class ErrorCategory {
    dimension = 10,
    truncation,
    validation,
    contract,
    solver,
    calibration,
    optimization,
    stability,
    resolution,
    config,
    format,
    io,
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::dimension: return "dimension";
        case ErrorCategory::truncation: return "truncation";
        case ErrorCategory::validation: return "validation";
        case ErrorCategory::contract: return "contract";
        case ErrorCategory::solver: return "solver";
        case ErrorCategory::calibration: return "calibration";
        case ErrorCategory::optimization: return "optimization";
        case ErrorCategory::stability: return "stability";
        case ErrorCategory::resolution: return "resolution";
        case ErrorCategory::config: return "config";
        case ErrorCategory::format: return "format";
        case ErrorCategory::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

template <ErrorCategory C>
class CategorizedError : public Error {
public:
    explicit CategorizedError(const std::string& what) : Error(C, what) {}
};

using DimensionError = CategorizedError<ErrorCategory::dimension>;
using TruncationError = CategorizedError<ErrorCategory::truncation>;
using ValidationError = CategorizedError<ErrorCategory::validation>;
using ContractError = CategorizedError<ErrorCategory::contract>;
using SolverError = CategorizedError<ErrorCategory::solver>;
using CalibrationError = CategorizedError<ErrorCategory::calibration>;
using OptimizationError = CategorizedError<ErrorCategory::optimization>;
using StabilityError = CategorizedError<ErrorCategory::stability>;
using ResolutionError = CategorizedError<ErrorCategory::resolution>;
using ConfigError = CategorizedError<ErrorCategory::config>;
using FormatError = CategorizedError<ErrorCategory::format>;
using IoError = CategorizedError<ErrorCategory::io>;

}  // namespace qad
