#pragma once

#include <optional>
#include <vector>

#include "hessavg/oracle.hpp"

namespace hessavg {

/// Problem constants used by the sample-size bounds and the local theory.
/// Values produced by estimate_constants are empirical stand-ins, not
/// certified bounds; users may override any field.
struct ProblemConstants {
  std::optional<double> mu;
  double L = 0.0;
  std::optional<double> M;
  double mu_tilde = 1e-4;
  double sigma1_g = 0.0;
  double sigma2_g = 0.0;
  double beta1_g = 0.0;
  double beta2_g = 0.0;
  double beta1_H = 0.0;
  double beta2_H = 0.0;

  void validate() const;
};

/// Largest eigenvalue magnitude of v ↦ hvp_sub(w, s, v) by power iteration.
double power_iteration_norm(const FiniteSumOracle& oracle, const Vec& w, const Sample& s, RandomStream& rng,
                            int max_iters = 500, double tol = 1e-10);

/// L̂ = max over probes and samples of ‖∇²F_S‖ (power iteration);
/// σ̂₂,g² = max over probes and samples of the component-gradient sample variance,
/// with σ̂₁,g = 0; β̂₂,g = max_i ‖∇F_i‖² with β̂₁,g = 0 for finite sums up to
/// `max_components` components. Samples without per-component information
/// (mask batches without explicit draws) contribute only to L̂.
ProblemConstants estimate_constants(const FiniteSumOracle& oracle, const std::vector<Vec>& probe_points,
                                    const std::vector<Sample>& samples, std::uint64_t seed = 0,
                                    Index max_components = 200000);

}  // namespace hessavg
