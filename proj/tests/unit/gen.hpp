#pragma once

// Small generators for property tests. Each draws from a labelled stream so
// a failing case can be replayed from its seed alone.

#include <Eigen/QR>

#include <cmath>

#include "hessavg/rng.hpp"
#include "hessavg/types.hpp"

namespace gen {

using hessavg::Index;
using hessavg::Mat;
using hessavg::RandomStream;
using hessavg::Vec;

inline Mat symmetric(RandomStream& rng, Index d, double scale = 1.0) {
  Mat g = rng.normal_matrix(d, d) * scale;
  return 0.5 * (g + g.transpose());
}

/// Random orthogonal conjugation of the given spectrum.
inline Mat with_spectrum(RandomStream& rng, const Vec& lambda) {
  const Index d = lambda.size();
  Eigen::HouseholderQR<Mat> qr(rng.normal_matrix(d, d));
  Mat q = qr.householderQ();
  Mat out = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

/// SPD with eigenvalues drawn log-uniformly from [lo, hi].
inline Mat spd(RandomStream& rng, Index d, double lo = 0.1, double hi = 10.0) {
  Vec lambda(d);
  for (Index i = 0; i < d; ++i) lambda(i) = lo * std::pow(hi / lo, rng.uniform());
  return with_spectrum(rng, lambda);
}

/// Symmetric with at least one negative and one positive eigenvalue.
inline Mat indefinite(RandomStream& rng, Index d) {
  Vec lambda = rng.normal_vector(d) * 3.0;
  lambda(0) = -std::abs(lambda(0)) - 1e-3;
  lambda(d - 1) = std::abs(lambda(d - 1)) + 1e-3;
  return with_spectrum(rng, lambda);
}

inline Index size_in(RandomStream& rng, Index lo, Index hi) { return lo + rng.uniform_index(hi - lo + 1); }

}  // namespace gen
