#pragma once

#include <stdexcept>
#include <string>

namespace rulforge {

// Error taxonomy. The CLI maps these onto process exit codes:
//   UsageError / ConfigError / DimensionError -> 2
//   DataError / ContractError / IoError       -> 3
//   NumericError                              -> 4
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid model/pipeline configuration, including shape mismatches at
// module boundaries (feature width vs. checkpoint, etc.).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape mismatch inside the numerics layer.
struct DimensionError : ConfigError {
    explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

// Bad input data: parse failures, validation failures, degenerate fits.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated a documented precondition (empty split, non-scalar
// loss, ...). Distinct from DataError so tests can tell them apart.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf where finite values are required: diverged loss, bad gradients,
// failed gradient checks.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rulforge
