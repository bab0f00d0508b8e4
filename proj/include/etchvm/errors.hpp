#pragma once

#include <stdexcept>
#include <string>

namespace etchvm {

// File or content problems: missing files, malformed CSV/PPM/model files,
// header mismatches, out-of-range values. CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: divergence, singular systems, non-finite values,
// calibration bounds exceeded. CLI maps these to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training divergence, carrying the epoch at which the loss blew up.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& msg, std::size_t epoch_index)
      : NumericError(msg), epoch(epoch_index) {}
  std::size_t epoch;
};

}  // namespace etchvm
