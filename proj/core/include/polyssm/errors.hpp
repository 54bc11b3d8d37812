#pragma once

#include <stdexcept>
#include <string>

namespace polyssm {

/// Base class for every error raised by the library. The CLI maps these to
/// exit code 1 ("contract violation").
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operand shapes do not match the operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value (NaN/Inf) appeared, e.g. a recurrence overflowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside its documented domain.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The requested configuration is valid in general but not handled here
/// (e.g. symbolic extraction for more than one channel).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// The contraction assumption |A_bar| < K < 1 does not hold on the data.
class ContractionError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized input; carries the 1-based line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace polyssm
