#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sace {

// Errors are grouped by the CLI exit code they map to: DataError -> 3,
// NumericalError (and subclasses) -> 4, UsageError -> 2.

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
  public:
    using Error::Error;
};

class DataError : public Error {
  public:
    using Error::Error;
};

class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Design matrix is rank deficient; `columns` holds the dependent columns.
class CollinearityError : public NumericalError {
  public:
    CollinearityError(const std::string& what, std::vector<std::string> columns)
        : NumericalError(what), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const noexcept { return columns_; }

  private:
    std::vector<std::string> columns_;
};

/// Mixing weights do not vary with the substitution variable.
class RelevanceError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

/// pr(S=1|Z=0,w) > pr(S=1|Z=1,w) where monotone survival is required.
class MonotonicityError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

}  // namespace sace
