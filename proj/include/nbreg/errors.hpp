#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nbreg {

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Linear predictor too large to exponentiate safely.
class OverflowError : public std::overflow_error {
 public:
  OverflowError(const std::string& what, std::size_t row)
      : std::overflow_error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// An infinite series did not reach its tail tolerance within the hard cap.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive quadrature stopped before reaching its tolerance.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved_error() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Rank-deficient design matrix.
class CollinearityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input (CSV cells, flags). Row/column are 1-based, 0 if n/a.
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
      : std::runtime_error(what), row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

}  // namespace nbreg
