#include "hessavg/synthetic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>

namespace hessavg {

namespace {

double log_cosh(double t) {
  const double a = std::abs(t);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

double sech_sq(double t) {
  const double c = std::cosh(std::min(std::abs(t), 350.0));
  return 1.0 / (c * c);
}

}  // namespace

SyntheticFiniteSum::SyntheticFiniteSum(const SyntheticSumOptions& options) : options_(options) {
  if (options_.components < 1 || options_.dim < 1) throw ValidationError("SyntheticFiniteSum: empty problem");
  if (!(options_.eig_min > 0.0 && options_.eig_max >= options_.eig_min)) {
    throw ValidationError("SyntheticFiniteSum: need 0 < eig_min <= eig_max");
  }
  if (options_.curvature < 0.0) throw ValidationError("SyntheticFiniteSum: curvature must be nonnegative");
  const Index d = options_.dim;
  RandomStream rng(options_.seed, "synthetic-sum");
  const double log_lo = std::log(options_.eig_min);
  const double log_hi = std::log(options_.eig_max);
  for (Index i = 0; i < options_.components; ++i) {
    Eigen::HouseholderQR<Mat> qr(rng.normal_matrix(d, d));
    const Mat q = qr.householderQ();
    Vec lambda(d);
    for (Index j = 0; j < d; ++j) lambda(j) = std::exp(log_lo + (log_hi - log_lo) * rng.uniform());
    Mat h = q * lambda.asDiagonal() * q.transpose();
    hessians_.push_back(0.5 * (h + h.transpose()));
    centers_.push_back(options_.center_scale * rng.normal_vector(d));
  }

  const Sample all = full_sample();
  Vec w = Vec::Zero(d);
  for (int it = 0; it < 100; ++it) {
    const Vec g = grad_sub(w, all);
    if (g.norm() < 1e-15) break;
    w -= hessian_sub(w, all).llt().solve(g);
  }
  optimum_.w = w;
  optimum_.f = loss_sub(w, all);
}

Vec SyntheticFiniteSum::component_grad(const Vec& w, Index i) const {
  const auto k = static_cast<std::size_t>(i);
  const Vec diff = w - centers_[k];
  Vec g = hessians_[k] * diff;
  if (options_.curvature > 0.0) g += options_.curvature * diff.array().tanh().matrix();
  return g;
}

Mat SyntheticFiniteSum::component_hessian(const Vec& w, Index i) const {
  const auto k = static_cast<std::size_t>(i);
  Mat h = hessians_[k];
  if (options_.curvature > 0.0) {
    const Vec diff = w - centers_[k];
    for (Index j = 0; j < dim(); ++j) h(j, j) += options_.curvature * sech_sq(diff(j));
  }
  return h;
}

double SyntheticFiniteSum::loss_sub(const Vec& w, const Sample& s) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "loss_sub");
  check_indices(idx, "loss_sub");
  double total = 0.0;
  for (Index i : idx.indices) {
    const auto k = static_cast<std::size_t>(i);
    const Vec diff = w - centers_[k];
    total += 0.5 * diff.dot(hessians_[k] * diff);
    if (options_.curvature > 0.0) {
      for (Index j = 0; j < dim(); ++j) total += options_.curvature * log_cosh(diff(j));
    }
  }
  return total / static_cast<double>(idx.indices.size());
}

Vec SyntheticFiniteSum::grad_sub(const Vec& w, const Sample& s) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "grad_sub");
  check_indices(idx, "grad_sub");
  Vec g = Vec::Zero(dim());
  for (Index i : idx.indices) g += component_grad(w, i);
  return g / static_cast<double>(idx.indices.size());
}

Vec SyntheticFiniteSum::hvp_sub(const Vec& w, const Sample& s, const Vec& v) const {
  check_dim(v, "hvp_sub");
  return hessian_sub(w, s) * v;
}

Mat SyntheticFiniteSum::hessian_sub(const Vec& w, const Sample& s) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "hessian_sub");
  check_indices(idx, "hessian_sub");
  Mat h = Mat::Zero(dim(), dim());
  for (Index i : idx.indices) h += component_hessian(w, i);
  return h / static_cast<double>(idx.indices.size());
}

GradientStats SyntheticFiniteSum::gradient_stats(const Vec& w, const Sample& s) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "gradient_stats");
  check_indices(idx, "gradient_stats");
  std::vector<Vec> comps;
  GradientStats out;
  out.mean = Vec::Zero(dim());
  for (Index i : idx.indices) {
    comps.push_back(component_grad(w, i));
    out.mean += comps.back();
  }
  const double count = static_cast<double>(comps.size());
  out.mean /= count;
  for (const auto& g : comps) out.variance += (g - out.mean).squaredNorm();
  out.variance /= count;
  out.size = static_cast<Index>(comps.size());
  return out;
}

}  // namespace hessavg
