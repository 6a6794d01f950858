#pragma once

#include <stdexcept>
#include <string>

namespace hopular {

// Shape disagreement between operands (reports both shapes in the message).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric-domain violation: NaN/Inf where finite values are required,
// arguments outside a function's domain, etc.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API contract violation (non-scalar backward root, empty memory, bad index).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration (empty split, inconsistent hyperparameters).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Table/schema parse failure, addressed by row and column where possible.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unknown category id or token during encoding.
struct EncodingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Masking plan cannot be applied (e.g. replace with no donor samples).
struct MaskingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite gradient or invalid optimizer input, naming the parameter.
struct OptimizerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training aborted; message carries a diagnostic snapshot of the epoch state.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Storage-capacity precondition c >= (2/sqrt(p))^(4/(d-1)) violated.
// Carries the computed c and the threshold it failed against.
struct CapacityConditionError : std::runtime_error {
    CapacityConditionError(const std::string& msg, double c_value, double threshold_value)
        : std::runtime_error(msg), c(c_value), threshold(threshold_value) {}
    double c;
    double threshold;
};

}  // namespace hopular
