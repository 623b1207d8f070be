#pragma once

#include <Eigen/SparseCore>

#include "hessavg/data.hpp"
#include "hessavg/oracle.hpp"

namespace hessavg {

/// ℓ²-regularized logistic regression
///   f(w) = (1/n) Σ log(1 + exp(−y_i wᵀx_i)) + ‖w‖²/(2n).
/// Each component carries the full regularizer so the batch mean is unbiased.
class LogisticProblem final : public FiniteSumOracle {
 public:
  explicit LogisticProblem(const SparseDataset& data, std::string name = "logistic");

  std::string name() const override { return name_; }
  Index dim() const override { return x_.cols(); }
  std::optional<Index> num_components() const override { return x_.rows(); }

  double loss_full(const Vec& w) const override;
  Vec grad_full(const Vec& w) const override;

  double loss_sub(const Vec& w, const Sample& s) const override;
  Vec grad_sub(const Vec& w, const Sample& s) const override;
  Vec hvp_sub(const Vec& w, const Sample& s, const Vec& v) const override;
  Mat hessian_sub(const Vec& w, const Sample& s) const override;
  GradientStats gradient_stats(const Vec& w, const Sample& s) const override;

  struct Evaluation {
    double loss = 0.0;
    Vec grad;
  };
  Evaluation evaluate(const Vec& w, const IndexSet& s) const;

  /// max_i ‖x_i‖²/4 + 1/n, an upper bound on every subsampled Hessian norm.
  double smoothness_bound() const;
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& features() const { return x_; }
  const Vec& labels() const { return y_; }

 private:
  double row_dot(Index i, const Vec& v) const;
  void add_row(Index i, double scale, Vec& out) const;

  std::string name_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> x_;
  Vec y_;
  double inv_n_;
};

/// σ(t) = 1/(1+e^{−t}) without overflow.
double sigmoid(double t);
/// log(1 + e^{t}) without overflow.
double softplus(double t);

/// Both oracle outputs in one pass; throws on an empty sample.
LogisticProblem::Evaluation logistic_eval(const LogisticProblem& problem, const Vec& w, const IndexSet& sample);
Vec logistic_hvp(const LogisticProblem& problem, const Vec& w, const IndexSet& sample, const Vec& v);

}  // namespace hessavg
