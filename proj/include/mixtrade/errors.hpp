#pragma once

#include <stdexcept>
#include <string>

namespace mixtrade {

// User-facing configuration problems (bad key, bad value, missing file).
// The CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data (CSV parse failures, ordering violations).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / contract violations. These indicate programming errors.
struct ShapeError : std::logic_error {
  explicit ShapeError(const std::string& msg) : std::logic_error(msg) {}
};

// Illegal state transitions (e.g. stepping a finished episode).
struct StateError : std::logic_error {
  explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// Numerical aborts (NaN loss, divergence). The CLI maps these to exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mixtrade
