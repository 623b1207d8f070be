#include "hessavg/constants.hpp"

#include <cmath>

namespace hessavg {

void ProblemConstants::validate() const {
  const double vals[] = {L, mu_tilde, sigma1_g, sigma2_g, beta1_g, beta2_g, beta1_H, beta2_H};
  for (double v : vals)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("ProblemConstants: constants must be finite and nonnegative");
  if (mu && !(*mu >= 0.0)) throw ValidationError("ProblemConstants: mu must be nonnegative");
  if (M && !(*M >= 0.0)) throw ValidationError("ProblemConstants: M must be nonnegative");
}

double power_iteration_norm(const FiniteSumOracle& oracle, const Vec& w, const Sample& s, RandomStream& rng,
                            int max_iters, double tol) {
  Vec v = rng.normal_vector(oracle.dim());
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vec hv = oracle.hvp_sub(w, s, v);
    const double n = hv.norm();
    if (!std::isfinite(n)) throw NumericalError("power_iteration_norm: non-finite Hessian-vector product");
    if (n == 0.0) return 0.0;
    const double prev = est;
    est = n;
    v = hv / n;
    if (it > 0 && std::abs(est - prev) <= tol * est) break;
  }
  return est;
}

ProblemConstants estimate_constants(const FiniteSumOracle& oracle, const std::vector<Vec>& probe_points,
                                    const std::vector<Sample>& samples, std::uint64_t seed, Index max_components) {
  if (probe_points.size() < 2) throw ValidationError("estimate_constants: need at least 2 probe points");
  if (samples.empty()) throw ValidationError("estimate_constants: need at least one sample");
  RandomStream rng(seed, "constants");
  ProblemConstants c;
  for (const Vec& w : probe_points) {
    for (const Sample& s : samples) {
      c.L = std::max(c.L, power_iteration_norm(oracle, w, s, rng));
      const auto* mask = std::get_if<MaskBatch>(&s);
      if (mask == nullptr || !mask->components.empty()) {
        c.sigma2_g = std::max(c.sigma2_g, std::sqrt(oracle.gradient_stats(w, s).variance));
      }
    }
    const auto n = oracle.num_components();
    if (n && *n <= max_components) {
      for (Index i = 0; i < *n; ++i) {
        c.beta2_g = std::max(c.beta2_g, oracle.grad_sub(w, IndexSet{{i}}).squaredNorm());
      }
    }
  }
  return c;
}

}  // namespace hessavg
