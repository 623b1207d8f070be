#include "hessavg/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hessavg {

namespace {

// Ceil that ignores representation noise such as 1/0.01 = 100.00000000000001.
Index tolerant_ceil(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<Index>(r);
  return static_cast<Index>(std::ceil(x));
}

}  // namespace

CyclicSampler::CyclicSampler(Index n, Index block_size) : n_(n), block_size_(block_size) {
  std::vector<Index> order(static_cast<std::size_t>(std::max<Index>(n, 0)));
  std::iota(order.begin(), order.end(), Index{0});
  build(order);
}

CyclicSampler::CyclicSampler(Index n, Index block_size, RandomStream& rng) : n_(n), block_size_(block_size) {
  if (n < 1) throw ValidationError("CyclicSampler: N must be positive");
  build(rng.permutation(n));
}

void CyclicSampler::build(const std::vector<Index>& order) {
  if (n_ < 1 || block_size_ < 1) throw ValidationError("CyclicSampler: N and block size must be positive");
  if (n_ % block_size_ != 0) {
    throw ValidationError("CyclicSampler: N = " + std::to_string(n_) + " is not a multiple of block size " +
                          std::to_string(block_size_));
  }
  for (Index start = 0; start < n_; start += block_size_) {
    IndexSet block;
    block.indices.assign(order.begin() + start, order.begin() + start + block_size_);
    std::sort(block.indices.begin(), block.indices.end());
    blocks_.push_back(std::move(block));
  }
}

IndexSet CyclicSampler::next() {
  IndexSet out = blocks_[static_cast<std::size_t>(cursor_)];
  cursor_ = (cursor_ + 1) % num_blocks();
  return out;
}

IndexSet cyclic_next(CyclicSampler& sampler) { return sampler.next(); }

IidSampler::IidSampler(Index block_size, RandomStream rng) : block_size_(block_size), rng_(rng) {
  if (block_size < 1) throw ValidationError("IidSampler: block size must be positive");
}

Sample IidSampler::next(const FiniteSumOracle& oracle) { return oracle.draw(block_size_, rng_); }

Sample next_sample(HessianSampler& sampler, const FiniteSumOracle& oracle) {
  return std::visit(
      [&](auto& s) -> Sample {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, CyclicSampler>) {
          if (oracle.num_components() != s.num_components()) {
            throw ValidationError("cyclic sampler does not match the oracle's component count");
          }
          return s.next();
        } else {
          return s.next(oracle);
        }
      },
      sampler);
}

Index block_size(const HessianSampler& sampler) {
  return std::visit([](const auto& s) { return s.block_size(); }, sampler);
}

bool exact_norm_test(const Vec& g, const Vec& grad_full, const WeightMode<double>& mode, double theta,
                     double iota) {
  if (g.size() != grad_full.size()) throw ValidationError("exact_norm_test: dimension mismatch");
  const double lhs = weighted_norm_sq<double>(g - grad_full, mode);
  const double rhs = theta * theta * weighted_norm_sq<double>(grad_full, mode) + iota;
  return lhs <= rhs;
}

bool approx_norm_test(const std::vector<Vec>& component_grads, const Vec& g_batch, double theta, double iota) {
  if (component_grads.empty()) throw ValidationError("approx_norm_test: empty batch");
  double var = 0.0;
  for (const auto& gi : component_grads) {
    if (gi.size() != g_batch.size()) throw ValidationError("approx_norm_test: dimension mismatch");
    var += (gi - g_batch).squaredNorm();
  }
  var /= static_cast<double>(component_grads.size());
  return var <= theta * theta * g_batch.squaredNorm() + iota;
}

bool approx_norm_test(const GradientStats& stats, double theta, double iota) {
  if (stats.size < 1) throw ValidationError("approx_norm_test: empty batch");
  return stats.variance <= theta * theta * stats.mean.squaredNorm() + iota;
}

Index required_size_stochastic(const ProblemConstants& c, double lambda_max_a, double grad_norm_sq,
                               double grad_a_norm_sq, double theta, double iota) {
  const double num =
      lambda_max_a * (c.sigma1_g * c.sigma1_g * grad_norm_sq + c.sigma2_g * c.sigma2_g);
  const double den = theta * theta * grad_a_norm_sq + iota;
  if (num <= 0.0) return 1;
  if (!(den > 0.0)) throw ValidationError("required_size_stochastic: theta and iota are both zero");
  const double bound = num / den;
  if (!std::isfinite(bound) || bound > 1e15) throw NumericalError("required_size_stochastic: bound overflows");
  return std::max<Index>(1, tolerant_ceil(bound));
}

Index required_size_deterministic(Index n, const ProblemConstants& c, double lambda_max_a, double grad_norm_sq,
                                  double grad_a_norm_sq, double theta, double iota) {
  if (n < 1) throw ValidationError("required_size_deterministic: N must be positive");
  const double den = 4.0 * lambda_max_a * (c.beta1_g * grad_norm_sq + c.beta2_g);
  if (!(den > 0.0)) throw ValidationError("required_size_deterministic: zero denominator");
  const double ratio = (theta * theta * grad_a_norm_sq + iota) / den;
  if (ratio >= 1.0) return 1;
  const double bound = static_cast<double>(n) * (1.0 - std::sqrt(ratio));
  return std::clamp<Index>(tolerant_ceil(bound), 1, n);
}

GradSampleController::GradSampleController(GradSizeMode mode, Index cap) : mode_(std::move(mode)), cap_(cap) {
  if (cap_ < 1) throw ValidationError("GradSampleController: cap must be positive");
  current_ = std::visit(
      [&](const auto& m) -> Index {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, grad_size::Fixed>) {
          if (m.size < 1) throw ValidationError("fixed gradient sample size must be positive");
          return m.size;
        } else if constexpr (std::is_same_v<M, grad_size::GeometricEpochs>) {
          if (m.sizes.empty() || m.block_epochs < 1) {
            throw ValidationError("geometric schedule needs sizes and a positive block length");
          }
          for (std::size_t i = 0; i < m.sizes.size(); ++i) {
            if (m.sizes[i] < 1) throw ValidationError("geometric schedule sizes must be positive");
            if (i > 0 && m.sizes[i] < m.sizes[i - 1]) throw ValidationError("geometric schedule must be nondecreasing");
          }
          return m.sizes.front();
        } else if constexpr (std::is_same_v<M, grad_size::TheoreticalBound>) {
          m.constants.validate();
          return 1;
        } else {
          if (m.initial < 1) throw ValidationError("initial gradient sample size must be positive");
          return m.initial;
        }
      },
      mode_);
  current_ = std::min(current_, cap_);
}

bool GradSampleController::test_driven() const {
  return std::holds_alternative<grad_size::ExactNormTest>(mode_) ||
         std::holds_alternative<grad_size::ApproxNormTest>(mode_);
}

bool GradSampleController::adaptive() const { return !std::holds_alternative<grad_size::Fixed>(mode_); }

Index GradSampleController::size_for_epoch(Index epoch) const {
  const auto* geo = std::get_if<grad_size::GeometricEpochs>(&mode_);
  if (geo == nullptr) return current_;
  const auto block = static_cast<std::size_t>(std::max<Index>(epoch, 0) / geo->block_epochs);
  return std::min(cap_, geo->sizes[std::min(block, geo->sizes.size() - 1)]);
}

void GradSampleController::set_epoch(Index epoch) {
  if (std::holds_alternative<grad_size::GeometricEpochs>(mode_)) current_ = size_for_epoch(epoch);
}

void GradSampleController::require(Index size) { current_ = std::clamp(std::max(current_, size), Index{1}, cap_); }

Index controller_decide(GradSampleController& c, bool passed, double observed_variance, double g_norm_sq) {
  if (std::holds_alternative<grad_size::Fixed>(c.mode_) || std::holds_alternative<grad_size::GeometricEpochs>(c.mode_)) {
    return c.current_;
  }
  if (passed) return c.current_;
  const double threshold = c.theta_ * c.theta_ * g_norm_sq + c.iota_;
  Index target = c.cap_;
  if (threshold > 0.0) {
    const double want = observed_variance * static_cast<double>(c.current_) / threshold;
    if (std::isfinite(want) && want < static_cast<double>(c.cap_)) target = tolerant_ceil(want);
  }
  c.current_ = std::min(c.cap_, std::max(c.current_, target));
  return c.current_;
}

}  // namespace hessavg
