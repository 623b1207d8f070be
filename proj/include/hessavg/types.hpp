#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace hessavg {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = Matrix<double>;
using Vec = Vector<double>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration, malformed input, or a violated precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a numerical breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization hit a non-positive pivot.
class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Filesystem or network failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hessavg
