#pragma once

#include <stdexcept>
#include <string>

namespace rewirenet {

/// Malformed input text (JSON syntax, wrong key types, unknown enum names).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a data-model invariant.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejected configuration or argument (maps to CLI exit code 2).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure at run time: non-finite loss or state.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rewirenet
