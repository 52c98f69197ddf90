#pragma once

#include <stdexcept>
#include <string>

namespace pcc {

/// Base type for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A probability left [0, 1] by more than the floating-point clamp tolerance.
class OutOfRange : public Error {
 public:
  using Error::Error;
};

/// The afterpulse quadratic has no real root: the measured rate is too high
/// for the stated afterpulse probability.
class NegativeDiscriminant : public Error {
 public:
  using Error::Error;
};

/// Count rates that no physical detector state can produce together.
class InconsistentRates : public Error {
 public:
  using Error::Error;
};

/// A model or detector parameter outside its admissible range.
class ParameterOutOfRange : public Error {
 public:
  using Error::Error;
};

/// Not more experimental points than fitted parameters.
class DegenerateDof : public Error {
 public:
  using Error::Error;
};

/// No optimizer start reached the convergence criterion.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// An input file with no data rows.
class EmptyInput : public Error {
 public:
  using Error::Error;
};

/// Malformed input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& message)
      : Error(file + ":" + std::to_string(line) + ": " + message), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace pcc
