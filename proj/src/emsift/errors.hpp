#pragma once

#include <stdexcept>
#include <string>

namespace emsift {

// File system problems: missing files, unwritable directories.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input content: bad CSV cells, invalid manifest JSON.
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument combinations.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failures inside the analysis (degenerate data, non-finite values).
struct analysis_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace emsift
