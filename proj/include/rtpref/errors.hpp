#pragma once

#include <stdexcept>
#include <string>

namespace rtpref {

// Bad user-supplied configuration (grids, schedules, file formats).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// The empirical Laplace transform evaluated to zero, so its logarithm is
// undefined.  Usually means the scale lambda is far too large for the data.
class LaplaceUnderflowError : public std::runtime_error {
 public:
  explicit LaplaceUnderflowError(const std::string& what)
      : std::runtime_error(what) {}
};

// A normal-equations matrix failed its Cholesky factorization.  `dimension`
// is the pivot index at which positive definiteness was lost.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, int dimension)
      : std::runtime_error(what), dimension(dimension) {}
  int dimension;
};

// Unpenalized logistic fit on linearly separable data: the minimizer does
// not exist (the loss decreases forever along some direction).
class SeparationError : public std::runtime_error {
 public:
  explicit SeparationError(const std::string& what)
      : std::runtime_error(what) {}
};

// An iterative solver stopped before reaching its gradient tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double grad_norm)
      : std::runtime_error(what), grad_norm(grad_norm) {}
  double grad_norm;
};

// Malformed input data (CSV rows, cache files).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rtpref
