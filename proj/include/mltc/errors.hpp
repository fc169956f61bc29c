#pragma once

#include <stdexcept>
#include <string>

namespace mltc {

// Base for all library errors. Subclasses pick the failure class so the CLI
// can map them onto stable exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / index violations (dimension mismatches, out-of-range ids).
struct ShapeError : Error {
    using Error::Error;
};

// API contract violations (empty input, non-scalar loss, fully masked row).
struct ContractError : Error {
    using Error::Error;
};

// Invalid model/experiment configuration (detected before any training).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or inconsistent data (JSONL records, unknown labels, TSV rows).
struct DataError : Error {
    using Error::Error;
};

// Infeasible synthetic dataset specification.
struct SpecError : Error {
    using Error::Error;
};

// Non-finite loss during training; carries diagnostics.
struct TrainingDivergence : Error {
    TrainingDivergence(const std::string& msg, long step_, double lr_, double grad_norm_)
        : Error(msg), step(step_), lr(lr_), grad_norm(grad_norm_) {}
    long step;
    double lr;
    double grad_norm;
};

}  // namespace mltc
