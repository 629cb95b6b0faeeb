#pragma once

#include <stdexcept>
#include <string>

namespace kprune {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input (dimension mismatch, NaN entries, bad flags).
struct InvalidInputError : Error {
  using Error::Error;
};

/// A precondition on the input state was violated (e.g. far from orthonormal).
struct PreconditionError : Error {
  using Error::Error;
};

/// An iterative root search failed to converge; carries the bracketing interval.
struct ConvergenceError : Error {
  double lower;
  double upper;
  ConvergenceError(const std::string& msg, double lo, double hi)
      : Error(msg), lower(lo), upper(hi) {}
};

/// A matrix expected to have full column rank does not; `column` is the first
/// offending column when known (-1 otherwise).
struct RankDeficiencyError : Error {
  std::string which;
  long column;
  RankDeficiencyError(const std::string& msg, std::string which_basis, long col = -1)
      : Error(msg), which(std::move(which_basis)), column(col) {}
};

/// All trial inputs degenerated (e.g. every sampled vector had zero norm).
struct DegenerateInputError : Error {
  using Error::Error;
};

/// A matrix that is analytically similar to a symmetric one produced complex
/// eigenvalues beyond tolerance, signalling conditioning failure.
struct NumericalAsymmetryError : Error {
  using Error::Error;
};

/// Accumulated floating-point drift pushed a quantity outside its analytic
/// range; callers typically recover via a full recomputation.
struct NumericalDriftError : Error {
  using Error::Error;
};

/// A basis function evaluated to a non-finite value at some sample.
struct EvaluationError : Error {
  std::string entry;
  long sample;
  EvaluationError(const std::string& msg, std::string entry_name, long sample_idx)
      : Error(msg), entry(std::move(entry_name)), sample(sample_idx) {}
};

/// File or directory I/O failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace kprune
