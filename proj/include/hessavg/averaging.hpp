#pragma once

// Path-averaged curvature: full-matrix and diagonal running averages,
// Hutchinson diagonal probing and the infrequent-update policy.

#include <cmath>
#include <optional>
#include <vector>

#include "hessavg/linalg.hpp"
#include "hessavg/rng.hpp"

namespace hessavg {

/// γ weights over the submitted estimates.
/// Uniform: γ_i = 1/k. Decaying: bias-corrected exponential average.
/// Latest: only the newest estimate (γ_k = 1), i.e. plain subsampled Newton.
struct WeightScheme {
  enum class Kind { Uniform, Decaying, Latest };
  Kind kind = Kind::Uniform;
  double beta2 = 0.999;

  static WeightScheme uniform() { return {}; }
  static WeightScheme decaying(double beta2) { return {Kind::Decaying, beta2}; }
  static WeightScheme latest() { return {Kind::Latest, 0.0}; }

  void validate() const {
    if (kind == Kind::Decaying && !(beta2 > 0.0 && beta2 < 1.0)) {
      throw ValidationError("decaying weights need beta2 in (0, 1)");
    }
  }
};

/// γ_1..γ_k implied by the scheme after k updates; they sum to one.
inline std::vector<double> implied_weights(const WeightScheme& scheme, Index k) {
  std::vector<double> w(static_cast<std::size_t>(std::max<Index>(k, 0)), 0.0);
  if (k <= 0) return w;
  switch (scheme.kind) {
    case WeightScheme::Kind::Uniform:
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
      break;
    case WeightScheme::Kind::Latest:
      w.back() = 1.0;
      break;
    case WeightScheme::Kind::Decaying: {
      const double b = scheme.beta2;
      const double norm = -std::expm1(static_cast<double>(k) * std::log(b));
      for (Index i = 1; i <= k; ++i) {
        w[static_cast<std::size_t>(i - 1)] = (1.0 - b) * std::pow(b, static_cast<double>(k - i)) / norm;
      }
      break;
    }
  }
  return w;
}

/// One bias-corrected EMA step from the corrected value after k−1 updates:
/// S_{k−1} = prev·(1 − β₂^{k−1}), S_k = β₂S_{k−1} + (1 − β₂)D_k, returns S_k/(1 − β₂^k).
template <typename Derived>
auto decaying_step(const Eigen::MatrixBase<Derived>& prev_corrected, const Eigen::MatrixBase<Derived>& d_new,
                   double beta2, Index k) {
  using Plain = typename Derived::PlainObject;
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ValidationError("decaying_step: beta2 must be in (0, 1)");
  if (k < 1) throw ValidationError("decaying_step: k must be at least 1");
  if (prev_corrected.rows() != d_new.rows() || prev_corrected.cols() != d_new.cols()) {
    throw ValidationError("decaying_step: shape mismatch");
  }
  const double kept_prev = -std::expm1(static_cast<double>(k - 1) * std::log(beta2));
  const double kept_now = -std::expm1(static_cast<double>(k) * std::log(beta2));
  Plain s = beta2 * kept_prev * prev_corrected + (1.0 - beta2) * d_new;
  return Plain(s / kept_now);
}

inline double decaying_step(double prev_corrected, double d_new, double beta2, Index k) {
  Vec p(1), d(1);
  p(0) = prev_corrected;
  d(0) = d_new;
  return decaying_step(p, d, beta2, k)(0);
}

enum class AverageVariant { PlainAverage, AbsThenAverage };

/// Running Ĥ_k = Σγ_i H_i (PlainAverage) or Σγ_i|H_i| (AbsThenAverage).
template <typename Scalar = double>
class FullAverageState {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  FullAverageState(Index dim, WeightScheme scheme = {}, AverageVariant variant = AverageVariant::PlainAverage)
      : h_hat_(MatrixType::Zero(dim, dim)), scheme_(scheme), variant_(variant) {
    scheme_.validate();
  }

  template <typename Derived>
  void update(const Eigen::MatrixBase<Derived>& h_new) {
    if (h_new.rows() != h_hat_.rows() || h_new.cols() != h_hat_.cols()) {
      throw ValidationError("full_update: dimension mismatch");
    }
    MatrixType h = variant_ == AverageVariant::AbsThenAverage ? matrix_abs(h_new) : MatrixType(h_new);
    ++k_;
    switch (scheme_.kind) {
      case WeightScheme::Kind::Uniform:
        h_hat_ += (h - h_hat_) / static_cast<Scalar>(k_);
        break;
      case WeightScheme::Kind::Latest:
        h_hat_ = std::move(h);
        break;
      case WeightScheme::Kind::Decaying:
        h_hat_ = decaying_step(h_hat_, h, scheme_.beta2, k_);
        break;
    }
    tilde_.reset();
  }

  Index updates() const { return k_; }
  Index dim() const { return h_hat_.rows(); }
  const MatrixType& h_hat() const { return h_hat_; }
  const WeightScheme& scheme() const { return scheme_; }
  AverageVariant variant() const { return variant_; }
  std::vector<double> weights() const { return implied_weights(scheme_, k_); }

  /// H̃: pd_modify(Ĥ, µ̃) for PlainAverage, Ĥ + µ̃I for AbsThenAverage. Cached until the next update.
  const MatrixType& modified(Scalar mu_tilde) const {
    require_updated();
    if (!tilde_ || tilde_mu_ != mu_tilde) {
      if (variant_ == AverageVariant::PlainAverage) {
        tilde_ = pd_modify(h_hat_, mu_tilde).matrix;
      } else {
        if (!(mu_tilde > Scalar(0))) throw ValidationError("mu_tilde must be positive");
        tilde_ = h_hat_ + mu_tilde * MatrixType::Identity(dim(), dim());
      }
      tilde_mu_ = mu_tilde;
    }
    return *tilde_;
  }

  template <typename Derived>
  VectorType precondition(const Eigen::MatrixBase<Derived>& g, Scalar mu_tilde) const {
    return spd_solve(modified(mu_tilde), g);
  }

 private:
  void require_updated() const {
    if (k_ == 0) throw ValidationError("Hessian average used before its first update");
  }

  MatrixType h_hat_;
  WeightScheme scheme_;
  AverageVariant variant_;
  Index k_ = 0;
  mutable std::optional<MatrixType> tilde_;
  mutable Scalar tilde_mu_ = 0;
};

/// ℓᵖ_γ average of diagonal estimates: exposes (Σγ_i D_iᵖ)^{1/p}, with |D_i| when p = 1.
template <typename Scalar = double>
class DiagAverageState {
 public:
  using VectorType = Vector<Scalar>;

  DiagAverageState(Index dim, int p, WeightScheme scheme = {}) : acc_(VectorType::Zero(dim)), p_(p), scheme_(scheme) {
    if (p != 1 && p != 2) throw ValidationError("diagonal averaging supports p = 1 or p = 2");
    scheme_.validate();
  }

  template <typename Derived>
  void update(const Eigen::MatrixBase<Derived>& d_new) {
    if (d_new.size() != acc_.size()) throw ValidationError("diag_update: length mismatch");
    VectorType v = p_ == 1 ? VectorType(d_new.cwiseAbs()) : VectorType(d_new.cwiseAbs2());
    ++k_;
    switch (scheme_.kind) {
      case WeightScheme::Kind::Uniform:
        acc_ += (v - acc_) / static_cast<Scalar>(k_);
        break;
      case WeightScheme::Kind::Latest:
        acc_ = std::move(v);
        break;
      case WeightScheme::Kind::Decaying:
        acc_ = decaying_step(acc_, v, scheme_.beta2, k_);
        break;
    }
  }

  Index updates() const { return k_; }
  Index dim() const { return acc_.size(); }
  int p() const { return p_; }
  const WeightScheme& scheme() const { return scheme_; }
  std::vector<double> weights() const { return implied_weights(scheme_, k_); }
  /// Raw accumulator Σγ|D| (p = 1) or Σγ D² (p = 2).
  const VectorType& accumulator() const { return acc_; }

  VectorType diag() const {
    if (k_ == 0) throw ValidationError("diagonal average used before its first update");
    return p_ == 1 ? acc_ : VectorType(acc_.cwiseSqrt());
  }

  /// p_i = g_i / (D̃_i + ε).
  template <typename Derived>
  VectorType precondition(const Eigen::MatrixBase<Derived>& g, Scalar floor) const {
    if (g.size() != acc_.size()) throw ValidationError("precondition: dimension mismatch");
    const VectorType den = diag().array() + floor;
    if ((den.array() <= Scalar(0)).any()) throw NumericalError("precondition: zero diagonal; use a positive floor");
    return g.cwiseQuotient(den);
  }

 private:
  VectorType acc_;
  int p_;
  WeightScheme scheme_;
  Index k_ = 0;
};

struct HutchinsonConfig {
  Index rank = 1;
  RandomStream stream;
};

/// (1/r) Σ_j z_j ∘ (H z_j) with Rademacher probes; exact on diagonal H.
/// Probes are drawn in index order before any product is formed.
template <typename HvpFn>
Vec hutchinson_diag(HvpFn&& hvp, Index d, HutchinsonConfig& config) {
  if (config.rank < 1) throw ValidationError("hutchinson_diag: rank must be at least 1");
  if (d < 1) throw ValidationError("hutchinson_diag: dimension must be positive");
  std::vector<Vec> probes;
  probes.reserve(static_cast<std::size_t>(config.rank));
  for (Index j = 0; j < config.rank; ++j) probes.push_back(config.stream.rademacher_vector(d));
  Vec out = Vec::Zero(d);
  for (const auto& z : probes) {
    const Vec hz = hvp(z);
    if (hz.size() != d) throw ValidationError("hutchinson_diag: hvp returned the wrong length");
    if (!hz.allFinite()) throw NumericalError("hutchinson_diag: non-finite Hessian-vector product");
    out += z.cwiseProduct(hz);
  }
  return out / static_cast<double>(config.rank);
}

/// Hessian every iteration during warm-up, then every hf-th iteration.
struct UpdateFrequencyPolicy {
  Index warmup = 0;
  Index hf = 1;

  void validate() const {
    if (hf < 1) throw ValidationError("Hessian update frequency must be at least 1");
    if (warmup < 0) throw ValidationError("Hessian warm-up length must be nonnegative");
  }
};

inline bool should_update_hessian(const UpdateFrequencyPolicy& policy, Index iteration) {
  if (iteration < policy.warmup) return true;
  return (iteration - policy.warmup) % policy.hf == 0;
}

}  // namespace hessavg
