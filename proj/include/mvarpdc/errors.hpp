#pragma once

#include <stdexcept>
#include <string>

namespace mvarpdc {

// Base class for every error the library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration (bad SIR, bad alpha, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Two inputs that must agree in shape do not.
struct DimensionMismatch : Error {
  using Error::Error;
};

// Model containers with incompatible order / channel count.
struct ShapeMismatch : Error {
  using Error::Error;
};

// Regression problem has fewer rows than unknowns.
struct InsufficientSamples : Error {
  using Error::Error;
};

// Permutation split needs an even number of trials.
struct OddTrialCount : Error {
  using Error::Error;
};

// Generator coefficients describe an unstable process.
struct NonStationaryModel : Error {
  using Error::Error;
};

// Normal equations too close to singular to trust a least-squares solve.
struct IllConditioned : Error {
  IllConditioned(const std::string& msg, double cond)
      : Error(msg), condition(cond) {}
  double condition;
};

// Loss of positive definiteness / non-finite values inside an iteration.
struct NumericalBreakdown : Error {
  using Error::Error;
};

// Input file exists but its contents are not what the reader expects.
struct FileFormatError : Error {
  using Error::Error;
};

// Filesystem-level failure (cannot open, cannot create directory, ...).
struct IoError : Error {
  using Error::Error;
};

// Re-throws `e` with `context` prepended, preserving the concrete type so
// callers that dispatch on the exception class still work.
[[noreturn]] inline void rethrow_annotated(const Error& e,
                                           const std::string& context) {
  const std::string msg = context + ": " + e.what();
  if (auto* p = dynamic_cast<const IllConditioned*>(&e))
    throw IllConditioned(msg, p->condition);
  if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
  if (dynamic_cast<const DimensionMismatch*>(&e)) throw DimensionMismatch(msg);
  if (dynamic_cast<const ShapeMismatch*>(&e)) throw ShapeMismatch(msg);
  if (dynamic_cast<const InsufficientSamples*>(&e))
    throw InsufficientSamples(msg);
  if (dynamic_cast<const OddTrialCount*>(&e)) throw OddTrialCount(msg);
  if (dynamic_cast<const NonStationaryModel*>(&e))
    throw NonStationaryModel(msg);
  if (dynamic_cast<const NumericalBreakdown*>(&e))
    throw NumericalBreakdown(msg);
  if (dynamic_cast<const FileFormatError*>(&e)) throw FileFormatError(msg);
  if (dynamic_cast<const IoError*>(&e)) throw IoError(msg);
  throw Error(msg);
}

}  // namespace mvarpdc
