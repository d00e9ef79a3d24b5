#pragma once

#include <stdexcept>
#include <string>

namespace dyadgen {

// Bad flag combinations, invalid argument values. CLI exit code 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing/malformed/deficient input data. CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN losses, divergence, degenerate linear algebra. CLI exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dyadgen
