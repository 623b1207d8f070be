#pragma once

#include <functional>

#include "hessavg/oracle.hpp"

namespace hessavg {

/// λ_i = 1e-4 + (0.1 i)^{3/2}, i = 1..d.
double default_quadratic_spectrum(Index i);

/// Subsampled quadratic f(w) = E‖P_A A w − P_b b‖², with P_A keeping each row
/// of A and P_b each entry of b independently with probability keep_prob.
///
/// One component is one mask realization; the problem is an expectation
/// (num_components() is empty). With independent masks the expected loss is
///   Σ_i p (Aw)_i² − 2p² (Aw)_i b_i + p b_i²,
/// so the minimizer is w* = p A⁻¹ b with f(w*) = p(1 − p²)‖b‖².
class QuadraticProblem final : public FiniteSumOracle {
 public:
  QuadraticProblem(Mat a, Vec b, double keep_prob);

  std::string name() const override { return "quadratic"; }
  Index dim() const override { return a_.rows(); }
  std::optional<Index> num_components() const override { return std::nullopt; }

  double loss_full(const Vec& w) const override;
  Vec grad_full(const Vec& w) const override;
  Mat hessian_full(const Vec& w) const override;

  double loss_sub(const Vec& w, const Sample& s) const override;
  Vec grad_sub(const Vec& w, const Sample& s) const override;
  Vec hvp_sub(const Vec& w, const Sample& s, const Vec& v) const override;
  Mat hessian_sub(const Vec& w, const Sample& s) const override;
  GradientStats gradient_stats(const Vec& w, const Sample& s) const override;

  /// `size` independent mask draws. Without keep_components the batch is
  /// sampled directly through per-row binomial counts, which has the same
  /// distribution as averaging explicit draws at O(d) cost.
  Sample draw(Index size, RandomStream& rng, bool keep_components = false) const override;
  Sample full_sample() const override { return all_keep(); }
  std::optional<Optimum> optimum() const override { return optimum_; }

  /// Masks that keep everything; turns every sub-quantity into the unmasked ‖Aw − b‖².
  MaskBatch all_keep() const;
  /// Batch form of a single explicit draw; validates the index sets.
  MaskBatch batch_of(const MaskDraw& draw) const;

  const Mat& a() const { return a_; }
  const Vec& b() const { return b_; }
  double keep_prob() const { return keep_prob_; }

 private:
  Vec residual(const Vec& w, const MaskBatch& m) const;

  Mat a_;
  Vec b_;
  double keep_prob_;
  Optimum optimum_;
};

/// A = QΛQᵀ with Q the orthogonal factor of a seeded Gaussian matrix, b ~ N(0, I).
QuadraticProblem quadratic_generate(Index d, const std::function<double(Index)>& spectrum, double keep_prob,
                                    std::uint64_t seed);

/// 2 (P_A A)ᵀ (P_A A w − P_b b) for one explicit mask draw.
Vec quadratic_sub_grad(const QuadraticProblem& problem, const Vec& w, const MaskDraw& draw);

}  // namespace hessavg
