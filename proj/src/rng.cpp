#include "hessavg/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <unordered_set>

namespace hessavg {

std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer.
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RandomStream::RandomStream(std::uint64_t seed, std::string_view label)
    : key_(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ hash_label(label))) {}

RandomStream::result_type RandomStream::operator()() {
  const std::uint64_t c = counter_++;
  return mix64(key_ + 0x9e3779b97f4a7c15ULL * (c + 1));
}

RandomStream RandomStream::substream(std::string_view label) const {
  return RandomStream(mix64(key_ ^ hash_label(label)) ^ 0x5851f42d4c957f2dULL, 0, 0);
}

double RandomStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

Index RandomStream::uniform_index(Index n) {
  if (n <= 0) throw ValidationError("uniform_index: n must be positive");
  const auto un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = max() - max() % un;
  std::uint64_t x = (*this)();
  while (x >= limit) x = (*this)();
  return static_cast<Index>(x % un);
}

Index RandomStream::binomial(Index trials, double p) {
  if (trials <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  std::binomial_distribution<long long> dist(static_cast<long long>(trials), p);
  return static_cast<Index>(dist(*this));
}

Vec RandomStream::normal_vector(Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Vec RandomStream::rademacher_vector(Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = rademacher();
  return v;
}

Mat RandomStream::normal_matrix(Index rows, Index cols) {
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

std::vector<Index> RandomStream::permutation(Index n) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const Index j = uniform_index(i + 1);
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

std::vector<Index> RandomStream::sample_without_replacement(Index n, Index k) {
  if (k > n || k < 0) throw ValidationError("sample_without_replacement: k out of range");
  if (2 * k >= n) {
    auto p = permutation(n);
    p.resize(static_cast<std::size_t>(k));
    return p;
  }
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(k));
  std::unordered_set<Index> seen;
  while (static_cast<Index>(out.size()) < k) {
    const Index i = uniform_index(n);
    if (seen.insert(i).second) out.push_back(i);
  }
  return out;
}

}  // namespace hessavg
