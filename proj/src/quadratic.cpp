#include "hessavg/quadratic.hpp"

#include <Eigen/QR>

#include <cmath>

#include "hessavg/linalg.hpp"

namespace hessavg {

double default_quadratic_spectrum(Index i) { return 1e-4 + std::pow(0.1 * static_cast<double>(i), 1.5); }

QuadraticProblem::QuadraticProblem(Mat a, Vec b, double keep_prob)
    : a_(std::move(a)), b_(std::move(b)), keep_prob_(keep_prob) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size() || a_.rows() == 0) {
    throw ValidationError("QuadraticProblem: A must be square and match b");
  }
  if (!(keep_prob_ > 0.0 && keep_prob_ <= 1.0)) throw ValidationError("QuadraticProblem: keep_prob must be in (0, 1]");
  check_symmetric_finite(a_, "QuadraticProblem");
  Eigen::LLT<Mat> llt(a_);
  if (llt.info() != Eigen::Success) throw ValidationError("QuadraticProblem: A must be positive definite");
  optimum_.w = keep_prob_ * llt.solve(b_);
  optimum_.f = loss_full(optimum_.w);
}

double QuadraticProblem::loss_full(const Vec& w) const {
  check_dim(w, "loss_full");
  const double p = keep_prob_;
  const Vec aw = a_ * w;
  return p * aw.squaredNorm() - 2.0 * p * p * aw.dot(b_) + p * b_.squaredNorm();
}

Vec QuadraticProblem::grad_full(const Vec& w) const {
  check_dim(w, "grad_full");
  const double p = keep_prob_;
  return 2.0 * a_.transpose() * (p * (a_ * w) - p * p * b_);
}

Mat QuadraticProblem::hessian_full(const Vec& /*w*/) const {
  return 2.0 * keep_prob_ * a_.transpose() * a_;
}

Vec QuadraticProblem::residual(const Vec& w, const MaskBatch& m) const {
  if (m.a_keep.size() != dim() || m.ab_keep.size() != dim() || m.b_keep.size() != dim()) {
    throw ValidationError("quadratic: mask batch dimension mismatch");
  }
  return m.a_keep.cwiseProduct(a_ * w) - m.ab_keep.cwiseProduct(b_);
}

double QuadraticProblem::loss_sub(const Vec& w, const Sample& s) const {
  check_dim(w, "loss_sub");
  const auto& m = as_mask_batch(s);
  const Vec aw = a_ * w;
  return (m.a_keep.array() * aw.array().square() - 2.0 * m.ab_keep.array() * aw.array() * b_.array() +
          m.b_keep.array() * b_.array().square())
      .sum();
}

Vec QuadraticProblem::grad_sub(const Vec& w, const Sample& s) const {
  check_dim(w, "grad_sub");
  return 2.0 * a_.transpose() * residual(w, as_mask_batch(s));
}

Vec QuadraticProblem::hvp_sub(const Vec& /*w*/, const Sample& s, const Vec& v) const {
  check_dim(v, "hvp_sub");
  const auto& m = as_mask_batch(s);
  return 2.0 * a_.transpose() * m.a_keep.cwiseProduct(a_ * v);
}

Mat QuadraticProblem::hessian_sub(const Vec& /*w*/, const Sample& s) const {
  const auto& m = as_mask_batch(s);
  if (m.a_keep.size() != dim()) throw ValidationError("quadratic: mask batch dimension mismatch");
  Mat h = 2.0 * a_.transpose() * m.a_keep.asDiagonal() * a_;
  return 0.5 * (h + h.transpose());
}

GradientStats QuadraticProblem::gradient_stats(const Vec& w, const Sample& s) const {
  check_dim(w, "gradient_stats");
  const auto& m = as_mask_batch(s);
  if (m.components.empty()) {
    throw ValidationError("quadratic: gradient_stats needs a batch drawn with keep_components");
  }
  const Vec aw = a_ * w;
  const Index n = static_cast<Index>(m.components.size());
  Mat r = Mat::Zero(dim(), n);
  Vec kept = Vec::Zero(dim());
  for (Index j = 0; j < n; ++j) {
    const MaskDraw& draw = m.components[static_cast<std::size_t>(j)];
    for (Index i : draw.a_rows) {
      kept(i) = 1.0;
      r(i, j) = aw(i);
    }
    for (Index i : draw.b_entries) r(i, j) -= kept(i) * b_(i);
    for (Index i : draw.a_rows) kept(i) = 0.0;
  }
  const double count = static_cast<double>(n);
  const Vec mean_r = r.rowwise().sum() / count;
  r.colwise() -= mean_r;
  GradientStats out;
  out.mean = 2.0 * a_.transpose() * mean_r;
  out.size = n;
  // one GEMM instead of n matrix-vector products
  out.variance = 4.0 * (a_.transpose() * r).squaredNorm();
  out.variance /= count;
  return out;
}

MaskBatch QuadraticProblem::all_keep() const {
  MaskBatch m;
  m.draws = 1;
  m.a_keep = m.b_keep = m.ab_keep = Vec::Ones(dim());
  return m;
}

MaskBatch QuadraticProblem::batch_of(const MaskDraw& draw) const {
  const Index d = dim();
  MaskBatch m;
  m.draws = 1;
  m.a_keep = Vec::Zero(d);
  m.b_keep = Vec::Zero(d);
  for (Index i : draw.a_rows) {
    if (i < 0 || i >= d) throw ValidationError("quadratic: A-row mask index out of range");
    m.a_keep(i) = 1.0;
  }
  for (Index i : draw.b_entries) {
    if (i < 0 || i >= d) throw ValidationError("quadratic: b-entry mask index out of range");
    m.b_keep(i) = 1.0;
  }
  m.ab_keep = m.a_keep.cwiseProduct(m.b_keep);
  return m;
}

Sample QuadraticProblem::draw(Index size, RandomStream& rng, bool keep_components) const {
  if (size <= 0) throw ValidationError("quadratic draw: size must be positive");
  const Index d = dim();
  const double p = keep_prob_;
  MaskBatch m;
  m.draws = size;
  m.a_keep = Vec::Zero(d);
  m.b_keep = Vec::Zero(d);
  m.ab_keep = Vec::Zero(d);
  if (keep_components) {
    m.components.reserve(static_cast<std::size_t>(size));
    for (Index j = 0; j < size; ++j) {
      MaskDraw draw;
      for (Index i = 0; i < d; ++i) {
        const bool ka = rng.bernoulli(p);
        const bool kb = rng.bernoulli(p);
        if (ka) draw.a_rows.push_back(i);
        if (kb) draw.b_entries.push_back(i);
        m.a_keep(i) += ka;
        m.b_keep(i) += kb;
        m.ab_keep(i) += ka && kb;
      }
      m.components.push_back(std::move(draw));
    }
  } else {
    for (Index i = 0; i < d; ++i) {
      const Index a_kept = rng.binomial(size, p);
      const Index both = rng.binomial(a_kept, p);
      const Index b_only = rng.binomial(size - a_kept, p);
      m.a_keep(i) = static_cast<double>(a_kept);
      m.ab_keep(i) = static_cast<double>(both);
      m.b_keep(i) = static_cast<double>(both + b_only);
    }
  }
  const double inv = 1.0 / static_cast<double>(size);
  m.a_keep *= inv;
  m.b_keep *= inv;
  m.ab_keep *= inv;
  return m;
}

QuadraticProblem quadratic_generate(Index d, const std::function<double(Index)>& spectrum, double keep_prob,
                                    std::uint64_t seed) {
  if (d < 1) throw ValidationError("quadratic_generate: d must be at least 1");
  Vec lambda(d);
  for (Index i = 0; i < d; ++i) {
    lambda(i) = spectrum(i + 1);
    if (!(lambda(i) > 0.0) || !std::isfinite(lambda(i))) {
      throw ValidationError("quadratic_generate: spectrum value " + std::to_string(i + 1) + " is not positive");
    }
  }
  RandomStream rng(seed, "quadratic");
  const Mat g = rng.normal_matrix(d, d);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  // Sign fix so Q is Haar distributed.
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  Mat a = q * lambda.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose());
  Vec b = rng.normal_vector(d);
  return QuadraticProblem(std::move(a), std::move(b), keep_prob);
}

Vec quadratic_sub_grad(const QuadraticProblem& problem, const Vec& w, const MaskDraw& draw) {
  return problem.grad_sub(w, problem.batch_of(draw));
}

}  // namespace hessavg
