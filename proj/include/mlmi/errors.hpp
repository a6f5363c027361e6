#pragma once

#include <stdexcept>
#include <string>

namespace mlmi {

// Malformed input text (CSV cells, config lines).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally invalid data: unknown/duplicate columns, role mismatches.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration value or unknown key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An operation was called on data that violates its requirements.
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

// A numerical fit could not be carried out (singular design, no data).
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A stochastic procedure failed to produce a usable draw within its retry
// budget (e.g. an amputation that wiped out every anchor value).
struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mlmi
