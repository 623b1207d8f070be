#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hessavg/rng.hpp"
#include "hessavg/types.hpp"

namespace hessavg {

/// Component indices of a finite sum (0-based).
struct IndexSet {
  std::vector<Index> indices;
};

/// One realization of the row/entry masks of the subsampled quadratic: the
/// rows of A and the entries of b that are kept.
struct MaskDraw {
  std::vector<Index> a_rows;
  std::vector<Index> b_entries;
};

/// Mean of `draws` independent mask realizations, stored as per-row keep
/// frequencies. This is all the quadratic needs to evaluate batch quantities;
/// the explicit draws are only kept when component gradients are requested.
struct MaskBatch {
  Index draws = 0;
  Vec a_keep;   // fraction of draws keeping row i of A
  Vec b_keep;   // fraction keeping entry i of b
  Vec ab_keep;  // fraction keeping both
  std::vector<MaskDraw> components;
};

using Sample = std::variant<IndexSet, MaskBatch>;

Index sample_size(const Sample& s);
const IndexSet& as_index_set(const Sample& s);
const MaskBatch& as_mask_batch(const Sample& s);

struct Optimum {
  Vec w;
  double f = 0.0;
};

/// Batch-mean gradient together with (1/|S|) Σ‖∇F_i − mean‖².
struct GradientStats {
  Vec mean;
  double variance = 0.0;
  Index size = 0;
};

/// Stochastic objective f(w) = E[F(w, ζ)] (finite sum when num_components()
/// is set). Oracles are immutable; every evaluation is a pure function of its
/// arguments.
class FiniteSumOracle {
 public:
  virtual ~FiniteSumOracle() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  /// N for a finite sum; empty for an expectation problem.
  virtual std::optional<Index> num_components() const = 0;

  virtual double loss_full(const Vec& w) const = 0;
  virtual Vec grad_full(const Vec& w) const = 0;
  /// Exact Hessian; intended for oracle checks at small d.
  virtual Mat hessian_full(const Vec& w) const;

  virtual double loss_sub(const Vec& w, const Sample& s) const = 0;
  virtual Vec grad_sub(const Vec& w, const Sample& s) const = 0;
  virtual Vec hvp_sub(const Vec& w, const Sample& s, const Vec& v) const = 0;
  /// Batch Hessian; the default assembles it from d Hessian-vector products.
  virtual Mat hessian_sub(const Vec& w, const Sample& s) const;
  virtual GradientStats gradient_stats(const Vec& w, const Sample& s) const = 0;

  /// A fresh sample of the given size. Finite sums draw indices uniformly
  /// without replacement within the batch (the whole set when size >= N).
  virtual Sample draw(Index size, RandomStream& rng, bool keep_components = false) const;
  /// All components; only defined for finite sums.
  virtual Sample full_sample() const;

  virtual std::optional<Optimum> optimum() const { return std::nullopt; }

 protected:
  void check_dim(const Vec& v, const char* who) const;
  void check_indices(const IndexSet& s, const char* who) const;
};

}  // namespace hessavg
