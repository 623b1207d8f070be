#pragma once

#include "hessavg/oracle.hpp"

namespace hessavg {

struct SyntheticSumOptions {
  Index components = 16;
  Index dim = 20;
  /// Weight of the smooth non-quadratic term; 0 gives constant Hessians.
  double curvature = 0.0;
  /// Component Hessian spectra are drawn log-uniformly from [min, max].
  double eig_min = 0.2;
  double eig_max = 5.0;
  double center_scale = 1.0;
  std::uint64_t seed = 0;
};

/// Strongly convex finite sum with heterogeneous components
///   F_i(w) = ½ (w − c_i)ᵀ H_i (w − c_i) + η Σ_j log cosh(w_j − c_ij),
/// with distinct SPD H_i. For η = 0 every component Hessian is constant.
/// The minimizer is computed once at construction by Newton's method on the
/// full objective.
class SyntheticFiniteSum final : public FiniteSumOracle {
 public:
  explicit SyntheticFiniteSum(const SyntheticSumOptions& options);

  std::string name() const override { return "synthetic-sum"; }
  Index dim() const override { return options_.dim; }
  std::optional<Index> num_components() const override { return options_.components; }

  double loss_full(const Vec& w) const override { return loss_sub(w, full_sample()); }
  Vec grad_full(const Vec& w) const override { return grad_sub(w, full_sample()); }

  double loss_sub(const Vec& w, const Sample& s) const override;
  Vec grad_sub(const Vec& w, const Sample& s) const override;
  Vec hvp_sub(const Vec& w, const Sample& s, const Vec& v) const override;
  Mat hessian_sub(const Vec& w, const Sample& s) const override;
  GradientStats gradient_stats(const Vec& w, const Sample& s) const override;
  std::optional<Optimum> optimum() const override { return optimum_; }

  Vec component_grad(const Vec& w, Index i) const;
  Mat component_hessian(const Vec& w, Index i) const;

 private:
  SyntheticSumOptions options_;
  std::vector<Mat> hessians_;
  std::vector<Vec> centers_;
  Optimum optimum_;
};

}  // namespace hessavg
