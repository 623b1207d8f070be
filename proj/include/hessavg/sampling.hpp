#pragma once

#include <variant>
#include <vector>

#include "hessavg/constants.hpp"
#include "hessavg/linalg.hpp"
#include "hessavg/oracle.hpp"

namespace hessavg {

/// Deterministic without-replacement traversal of [N] in fixed blocks.
/// The partition is cut from one permutation chosen at construction (the
/// identity when no stream is given) and never reshuffled, so the mean over
/// any whole number of cycles is the full average.
class CyclicSampler {
 public:
  CyclicSampler(Index n, Index block_size);
  CyclicSampler(Index n, Index block_size, RandomStream& rng);

  IndexSet next();

  Index num_components() const { return n_; }
  Index block_size() const { return block_size_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  Index cursor() const { return cursor_; }
  const std::vector<IndexSet>& blocks() const { return blocks_; }

 private:
  void build(const std::vector<Index>& order);

  Index n_;
  Index block_size_;
  std::vector<IndexSet> blocks_;
  Index cursor_ = 0;
};

IndexSet cyclic_next(CyclicSampler& sampler);

/// Fresh independent batches of a fixed size from the oracle's own sampling law.
class IidSampler {
 public:
  IidSampler(Index block_size, RandomStream rng);

  Sample next(const FiniteSumOracle& oracle);
  Index block_size() const { return block_size_; }

 private:
  Index block_size_;
  RandomStream rng_;
};

using HessianSampler = std::variant<CyclicSampler, IidSampler>;

Sample next_sample(HessianSampler& sampler, const FiniteSumOracle& oracle);
Index block_size(const HessianSampler& sampler);

/// ‖g − ∇f‖²_A ≤ θ²‖∇f‖²_A + ι.
bool exact_norm_test(const Vec& g, const Vec& grad_full, const WeightMode<double>& mode, double theta, double iota);

/// (1/|S|) Σ‖∇F_i − ḡ‖² ≤ θ²‖ḡ‖² + ι in the Euclidean norm.
bool approx_norm_test(const std::vector<Vec>& component_grads, const Vec& g_batch, double theta, double iota);
bool approx_norm_test(const GradientStats& stats, double theta, double iota);

/// ⌈λ_max(A)(σ₁²‖∇f‖² + σ₂²) / (θ²‖∇f‖²_A + ι)⌉, at least 1.
Index required_size_stochastic(const ProblemConstants& c, double lambda_max_a, double grad_norm_sq,
                               double grad_a_norm_sq, double theta, double iota);

/// ⌈N(1 − √((θ²‖∇f‖²_A + ι) / (4λ_max(A)(β₁‖∇f‖² + β₂))))⌉ clamped to [1, N].
Index required_size_deterministic(Index n, const ProblemConstants& c, double lambda_max_a, double grad_norm_sq,
                                  double grad_a_norm_sq, double theta, double iota);

namespace grad_size {

struct Fixed {
  Index size = 1;
};
/// sizes[b] is used for epochs [b·block_epochs, (b+1)·block_epochs); the last size persists.
struct GeometricEpochs {
  std::vector<Index> sizes;
  Index block_epochs = 1;
};
struct ExactNormTest {
  Index initial = 1;
};
struct ApproxNormTest {
  Index initial = 2;
};
struct TheoreticalBound {
  ProblemConstants constants;
  bool deterministic = false;
};

}  // namespace grad_size

using GradSizeMode = std::variant<grad_size::Fixed, grad_size::GeometricEpochs, grad_size::ExactNormTest,
                                  grad_size::ApproxNormTest, grad_size::TheoreticalBound>;

/// Decides |X_k|. Tolerances (θ_k, ι_k) are pushed in by the optimizer from its
/// schedules before each decision.
class GradSampleController {
 public:
  GradSampleController(GradSizeMode mode, Index cap);

  const GradSizeMode& mode() const { return mode_; }
  Index current_size() const { return current_; }
  Index cap() const { return cap_; }
  bool test_driven() const;
  bool adaptive() const;

  void set_tolerances(double theta, double iota) {
    theta_ = theta;
    iota_ = iota;
  }
  double theta() const { return theta_; }
  double iota() const { return iota_; }

  /// GeometricEpochs: switch to the size of the block containing `epoch`.
  void set_epoch(Index epoch);
  /// TheoreticalBound: raise the size to a freshly computed requirement.
  void require(Index size);

  Index size_for_epoch(Index epoch) const;

 private:
  friend Index controller_decide(GradSampleController&, bool, double, double);

  GradSizeMode mode_;
  Index cap_;
  Index current_;
  double theta_ = 0.0;
  double iota_ = 0.0;
};

/// After a test: unchanged on pass; on failure grows to
/// min(cap, ⌈observed·|X| / (θ²‖g‖² + ι)⌉), never shrinking.
Index controller_decide(GradSampleController& controller, bool passed, double observed_variance, double g_norm_sq);

}  // namespace hessavg
