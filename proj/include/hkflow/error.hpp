#pragma once

#include <stdexcept>
#include <string>

namespace hkflow {

// Bad user input: shapes, domains, parameter ranges.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Measures built on different grids.
class DomainMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Exact oracle refuses problems above its support cap.
class SupportTooLarge : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A numerical solver did not reach its tolerance.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed config or data file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hkflow
