#pragma once

#include <stdexcept>
#include <string>

namespace caseenc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a structural invariant. The message names the offending path.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content; message carries line/field diagnostics.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Anchor has no case with weight above the positive floor.
class NoPositiveError : public Error {
 public:
  using Error::Error;
};

/// Loss or gradient became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace caseenc
