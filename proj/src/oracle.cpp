#include "hessavg/oracle.hpp"

#include <numeric>

namespace hessavg {

Index sample_size(const Sample& s) {
  if (const auto* idx = std::get_if<IndexSet>(&s)) return static_cast<Index>(idx->indices.size());
  return std::get<MaskBatch>(s).draws;
}

const IndexSet& as_index_set(const Sample& s) {
  if (const auto* idx = std::get_if<IndexSet>(&s)) return *idx;
  throw ValidationError("expected a component index sample, got a mask batch");
}

const MaskBatch& as_mask_batch(const Sample& s) {
  if (const auto* m = std::get_if<MaskBatch>(&s)) return *m;
  throw ValidationError("expected a mask batch, got a component index sample");
}

Mat FiniteSumOracle::hessian_full(const Vec& w) const { return hessian_sub(w, full_sample()); }

Mat FiniteSumOracle::hessian_sub(const Vec& w, const Sample& s) const {
  const Index d = dim();
  Mat h(d, d);
  Vec e = Vec::Zero(d);
  for (Index j = 0; j < d; ++j) {
    e(j) = 1.0;
    h.col(j) = hvp_sub(w, s, e);
    e(j) = 0.0;
  }
  return 0.5 * (h + h.transpose());
}

Sample FiniteSumOracle::draw(Index size, RandomStream& rng, bool /*keep_components*/) const {
  const auto n = num_components();
  if (!n) throw ValidationError(name() + ": draw() must be overridden for expectation problems");
  if (size <= 0) throw ValidationError("draw: sample size must be positive");
  if (size >= *n) return full_sample();
  return IndexSet{rng.sample_without_replacement(*n, size)};
}

Sample FiniteSumOracle::full_sample() const {
  const auto n = num_components();
  if (!n) throw ValidationError(name() + ": no full sample for an expectation problem");
  IndexSet s;
  s.indices.resize(static_cast<std::size_t>(*n));
  std::iota(s.indices.begin(), s.indices.end(), Index{0});
  return s;
}

void FiniteSumOracle::check_dim(const Vec& v, const char* who) const {
  if (v.size() != dim()) {
    throw ValidationError(std::string(who) + ": expected dimension " + std::to_string(dim()) + ", got " +
                          std::to_string(v.size()));
  }
}

void FiniteSumOracle::check_indices(const IndexSet& s, const char* who) const {
  if (s.indices.empty()) throw ValidationError(std::string(who) + ": empty sample");
  const Index n = num_components().value_or(0);
  for (Index i : s.indices) {
    if (i < 0 || i >= n) throw ValidationError(std::string(who) + ": component index out of range");
  }
}

}  // namespace hessavg
