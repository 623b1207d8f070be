#pragma once

// Dense symmetric kernels used by the second-order methods. Everything here is
// templated on the scalar type and works on any Eigen dense expression.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

#include "hessavg/types.hpp"

namespace hessavg {

template <typename Scalar>
struct EigDecomposition {
  Vector<Scalar> eigenvalues;   // ascending
  Matrix<Scalar> eigenvectors;  // columns, orthonormal
};

template <typename Scalar>
struct PdModified {
  Matrix<Scalar> matrix;
  bool was_shifted = false;
  Scalar shift = Scalar(0);
};

/// Tag for the Euclidean inner product.
struct Identity {};

/// Weight by the inverse of a dense SPD matrix.
template <typename Scalar>
struct InverseOf {
  Matrix<Scalar> matrix;
};

/// Weight by the inverse of a positive diagonal.
template <typename Scalar>
struct InverseOfDiagonal {
  Vector<Scalar> diagonal;
};

template <typename Scalar>
using WeightMode = std::variant<Identity, InverseOf<Scalar>, InverseOfDiagonal<Scalar>>;

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a) {
  using std::abs;
  using std::max;
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) return false;
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = j + 1; i < a.rows(); ++i) {
      const Scalar scale = max(Scalar(1), max(abs(a(i, j)), abs(a(j, i))));
      if (abs(a(i, j) - a(j, i)) > Scalar(1e-12) * scale) return false;
    }
  }
  return true;
}

template <typename Derived>
void check_symmetric_finite(const Eigen::MatrixBase<Derived>& a, const char* who) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ValidationError(std::string(who) + ": expected a nonempty square matrix, got " +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (!a.allFinite()) throw NumericalError(std::string(who) + ": matrix has non-finite entries");
  if (!is_symmetric(a)) throw ValidationError(std::string(who) + ": matrix is not symmetric");
}

/// Symmetric eigendecomposition (Householder tridiagonalization + implicit QL).
template <typename Derived>
EigDecomposition<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  check_symmetric_finite(a, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(a.derived().eval());
  if (solver.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

template <typename Scalar, typename DerivedL>
Matrix<Scalar> reconstruct(const Matrix<Scalar>& u, const Eigen::MatrixBase<DerivedL>& lambda) {
  Matrix<Scalar> out = u * lambda.asDiagonal() * u.transpose();
  return Scalar(0.5) * (out + out.transpose());
}

/// |A| = U|Λ|Uᵀ.
template <typename Derived>
Matrix<typename Derived::Scalar> matrix_abs(const Eigen::MatrixBase<Derived>& a) {
  const auto eig = sym_eig(a);
  return reconstruct(eig.eigenvectors, eig.eigenvalues.cwiseAbs());
}

/// Spectral floor: returns |Ĥ| when λ_min(|Ĥ|) ≥ µ̃, otherwise |Ĥ| + (µ̃ − λ_min(|Ĥ|))I.
template <typename Derived>
PdModified<typename Derived::Scalar> pd_modify(const Eigen::MatrixBase<Derived>& h_hat,
                                               typename Derived::Scalar mu_tilde) {
  using Scalar = typename Derived::Scalar;
  if (!(mu_tilde > Scalar(0))) throw ValidationError("pd_modify: mu_tilde must be positive");
  const auto eig = sym_eig(h_hat);
  Vector<Scalar> lambda = eig.eigenvalues.cwiseAbs();
  const Scalar lambda_min = lambda.minCoeff();
  PdModified<Scalar> out;
  if (lambda_min < mu_tilde) {
    out.was_shifted = true;
    out.shift = mu_tilde - lambda_min;
    lambda.array() += out.shift;
  }
  out.matrix = reconstruct(eig.eigenvectors, lambda);
  return out;
}

/// Cholesky solve of H p = g. Throws NotPositiveDefinite on a non-positive pivot.
template <typename DerivedH, typename DerivedG>
Vector<typename DerivedH::Scalar> spd_solve(const Eigen::MatrixBase<DerivedH>& h,
                                             const Eigen::MatrixBase<DerivedG>& g) {
  using Scalar = typename DerivedH::Scalar;
  if (h.rows() != h.cols() || h.rows() != g.rows()) {
    throw ValidationError("spd_solve: dimension mismatch");
  }
  if (!h.allFinite() || !g.allFinite()) throw NumericalError("spd_solve: non-finite input");
  Eigen::LLT<Matrix<Scalar>> llt(h.derived().eval());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("spd_solve: matrix is not positive definite; apply pd_modify first");
  }
  return llt.solve(g.derived().eval());
}

template <typename Scalar, typename Derived>
Scalar weighted_norm_sq(const Eigen::MatrixBase<Derived>& v, const WeightMode<Scalar>& mode) {
  return std::visit(
      [&](const auto& m) -> Scalar {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Identity>) {
          return v.squaredNorm();
        } else if constexpr (std::is_same_v<M, InverseOf<Scalar>>) {
          return v.dot(spd_solve(m.matrix, v));
        } else {
          if (m.diagonal.size() != v.size()) throw ValidationError("weighted_norm_sq: dimension mismatch");
          if ((m.diagonal.array() <= Scalar(0)).any()) {
            throw NotPositiveDefinite("weighted_norm_sq: diagonal weight must be positive");
          }
          return (v.array().square() / m.diagonal.array()).sum();
        }
      },
      mode);
}

template <typename Derived>
typename Derived::Scalar weighted_norm_sq(const Eigen::MatrixBase<Derived>& v) {
  return v.squaredNorm();
}

/// Largest eigenvalue of the weight matrix A (1 for Identity, 1/λ_min(H) for H⁻¹).
template <typename Scalar>
Scalar weight_lambda_max(const WeightMode<Scalar>& mode) {
  return std::visit(
      [](const auto& m) -> Scalar {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Identity>) {
          return Scalar(1);
        } else if constexpr (std::is_same_v<M, InverseOf<Scalar>>) {
          return Scalar(1) / sym_eig(m.matrix).eigenvalues(0);
        } else {
          return Scalar(1) / m.diagonal.minCoeff();
        }
      },
      mode);
}

}  // namespace hessavg
