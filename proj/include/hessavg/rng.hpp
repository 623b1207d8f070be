#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "hessavg/types.hpp"

namespace hessavg {

/// Counter-based generator: the i-th output is a fixed bijective mix of (key, i).
///
/// Streams are keyed by a run seed and a label, so "gradient", "hessian",
/// "probes" and "init" draws never interfere with each other and adding a new
/// consumer does not shift an existing one. Satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() : RandomStream(0, "default") {}
  RandomStream(std::uint64_t seed, std::string_view label);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Independent child stream; does not advance this stream.
  RandomStream substream(std::string_view label) const;

  double uniform();  // [0, 1)
  double normal();   // standard normal
  double rademacher() { return ((*this)() >> 63) ? 1.0 : -1.0; }
  bool bernoulli(double p) { return uniform() < p; }
  Index uniform_index(Index n);  // [0, n)
  Index binomial(Index trials, double p);

  Vec normal_vector(Index n);
  Vec rademacher_vector(Index n);
  Mat normal_matrix(Index rows, Index cols);

  /// Uniform random permutation of 0..n-1 (Fisher–Yates).
  std::vector<Index> permutation(Index n);
  /// k distinct indices from 0..n-1, in draw order.
  std::vector<Index> sample_without_replacement(Index n, Index k);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  RandomStream(std::uint64_t key, std::uint64_t counter, int) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_label(std::string_view label);

}  // namespace hessavg
