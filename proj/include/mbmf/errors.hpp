#pragma once

#include <stdexcept>
#include <string>

namespace mbmf {

// Out-of-range tuning constant (temperature, filter coefficient, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed call argument: bad ids, empty vectors, length mismatch.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// World/config file could not be parsed; message names the offending field.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally valid data that violates a model invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mbmf
