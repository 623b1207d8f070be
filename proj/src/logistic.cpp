#include "hessavg/logistic.hpp"

#include <cmath>

namespace hessavg {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

LogisticProblem::LogisticProblem(const SparseDataset& data, std::string name) : name_(std::move(name)) {
  if (data.n() == 0) throw ValidationError("LogisticProblem: dataset is empty");
  if (data.dim <= 0) throw ValidationError("LogisticProblem: dataset has no features");
  std::vector<Eigen::Triplet<double>> triplets;
  y_.resize(data.n());
  for (Index r = 0; r < data.n(); ++r) {
    const int label = data.labels[static_cast<std::size_t>(r)];
    if (label != 1 && label != -1) throw ValidationError("LogisticProblem: labels must be +1/-1");
    y_(r) = label;
    for (const auto& e : data.rows[static_cast<std::size_t>(r)]) {
      if (e.index < 1 || e.index > data.dim) throw ValidationError("LogisticProblem: feature index out of range");
      triplets.emplace_back(r, e.index - 1, e.value);
    }
  }
  x_.resize(data.n(), data.dim);
  x_.setFromTriplets(triplets.begin(), triplets.end());
  x_.makeCompressed();
  inv_n_ = 1.0 / static_cast<double>(data.n());
}

double LogisticProblem::row_dot(Index i, const Vec& v) const {
  double s = 0.0;
  for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(x_, i); it; ++it) s += it.value() * v(it.col());
  return s;
}

void LogisticProblem::add_row(Index i, double scale, Vec& out) const {
  for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(x_, i); it; ++it) {
    out(it.col()) += scale * it.value();
  }
}

LogisticProblem::Evaluation LogisticProblem::evaluate(const Vec& w, const IndexSet& s) const {
  check_dim(w, "logistic_eval");
  check_indices(s, "logistic_eval");
  Evaluation out;
  out.grad = Vec::Zero(dim());
  for (Index i : s.indices) {
    const double margin = y_(i) * row_dot(i, w);
    out.loss += softplus(-margin);
    add_row(i, -y_(i) * sigmoid(-margin), out.grad);
  }
  const double inv = 1.0 / static_cast<double>(s.indices.size());
  out.loss = out.loss * inv + 0.5 * inv_n_ * w.squaredNorm();
  out.grad = out.grad * inv + inv_n_ * w;
  return out;
}

double LogisticProblem::loss_full(const Vec& w) const { return loss_sub(w, full_sample()); }
Vec LogisticProblem::grad_full(const Vec& w) const { return grad_sub(w, full_sample()); }

double LogisticProblem::loss_sub(const Vec& w, const Sample& s) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "loss_sub");
  check_indices(idx, "loss_sub");
  double loss = 0.0;
  for (Index i : idx.indices) loss += softplus(-y_(i) * row_dot(i, w));
  return loss / static_cast<double>(idx.indices.size()) + 0.5 * inv_n_ * w.squaredNorm();
}

Vec LogisticProblem::grad_sub(const Vec& w, const Sample& s) const { return evaluate(w, as_index_set(s)).grad; }

Vec LogisticProblem::hvp_sub(const Vec& w, const Sample& s, const Vec& v) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "logistic_hvp");
  check_dim(v, "logistic_hvp");
  check_indices(idx, "logistic_hvp");
  Vec out = Vec::Zero(dim());
  for (Index i : idx.indices) {
    const double sg = sigmoid(y_(i) * row_dot(i, w));
    add_row(i, sg * (1.0 - sg) * row_dot(i, v), out);
  }
  return out / static_cast<double>(idx.indices.size()) + inv_n_ * v;
}

Mat LogisticProblem::hessian_sub(const Vec& w, const Sample& s) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "hessian_sub");
  check_indices(idx, "hessian_sub");
  Mat h = Mat::Zero(dim(), dim());
  using It = Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator;
  for (Index i : idx.indices) {
    const double sg = sigmoid(y_(i) * row_dot(i, w));
    const double c = sg * (1.0 - sg);
    for (It a(x_, i); a; ++a)
      for (It b(x_, i); b; ++b) h(a.col(), b.col()) += c * a.value() * b.value();
  }
  h /= static_cast<double>(idx.indices.size());
  h.diagonal().array() += inv_n_;
  return h;
}

GradientStats LogisticProblem::gradient_stats(const Vec& w, const Sample& s) const {
  const auto& idx = as_index_set(s);
  check_dim(w, "gradient_stats");
  check_indices(idx, "gradient_stats");
  std::vector<Vec> comps;
  comps.reserve(idx.indices.size());
  GradientStats out;
  out.mean = Vec::Zero(dim());
  for (Index i : idx.indices) {
    Vec g = inv_n_ * w;
    add_row(i, -y_(i) * sigmoid(-y_(i) * row_dot(i, w)), g);
    out.mean += g;
    comps.push_back(std::move(g));
  }
  const double count = static_cast<double>(comps.size());
  out.mean /= count;
  for (const auto& g : comps) out.variance += (g - out.mean).squaredNorm();
  out.variance /= count;
  out.size = static_cast<Index>(comps.size());
  return out;
}

double LogisticProblem::smoothness_bound() const {
  double max_sq = 0.0;
  for (Index i = 0; i < x_.rows(); ++i) max_sq = std::max(max_sq, x_.row(i).squaredNorm());
  return 0.25 * max_sq + inv_n_;
}

LogisticProblem::Evaluation logistic_eval(const LogisticProblem& problem, const Vec& w, const IndexSet& sample) {
  return problem.evaluate(w, sample);
}

Vec logistic_hvp(const LogisticProblem& problem, const Vec& w, const IndexSet& sample, const Vec& v) {
  return problem.hvp_sub(w, sample, v);
}

}  // namespace hessavg
