#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hessavg/averaging.hpp"
#include "hessavg/oracle.hpp"
#include "hessavg/sampling.hpp"
#include "hessavg/schedules.hpp"

namespace hessavg {

enum class Method { SGD, Adam, SubNewton, FAN, Dan, Dan2, Adahessian };

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);

inline bool uses_full_hessian(Method m) { return m == Method::FAN || m == Method::SubNewton; }
inline bool uses_diagonal(Method m) { return m == Method::Dan || m == Method::Dan2 || m == Method::Adahessian; }
inline bool is_second_order(Method m) { return uses_full_hessian(m) || uses_diagonal(m); }

struct OptimizerSpec {
  Method method = Method::SGD;
  /// FAN only.
  AverageVariant variant = AverageVariant::PlainAverage;
  /// FAN, Dan, Dan2. SubNewton always keeps the latest estimate and
  /// Adahessian always uses bias-corrected decay with beta2.
  WeightScheme weights = WeightScheme::uniform();
  double mu_tilde = 1e-4;
  /// ε added to the Dan/Dan2 diagonal.
  double floor = 1e-6;
  /// Hutchinson probes per Hessian update.
  Index rank = 1;
  /// Adam and Adahessian moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Full-matrix methods refuse larger problems.
  Index max_dense_dim = 2048;

  void validate() const;
  /// Curvature probes charged per Hessian update in the E.E.C. metric:
  /// d for the dense methods, r for the diagonal ones, 0 for first order.
  Index eec_rank(Index dim) const;
};

/// How A_k weights the norm tests and sample-size bounds.
enum class NormWeighting { Identity, InverseHessian };

struct StepInfo {
  Vec g;
  Vec p;
  double alpha = 0.0;
  double theta = 0.0;
  double iota = 0.0;
  double f_batch = 0.0;
  Index x_size = 0;
  Index s_size = 0;
  bool hessian_updated = false;
  std::optional<bool> test_passed;
};

struct OptState {
  Vec w;
  Index k = 0;
  Vec m;  // first moment (Adam, Adahessian)
  Vec v;  // second moment (Adam)
  std::optional<FullAverageState<double>> full;
  std::optional<DiagAverageState<double>> diag;
  Index hessian_probes = 0;
  Index grad_samples = 0;
  RandomStream grad_rng;
  RandomStream probe_rng;
  StepInfo last;
};

OptState make_state(const OptimizerSpec& spec, const FiniteSumOracle& oracle, Vec w0, std::uint64_t seed);

/// The weight A_k currently implied by the state: I, H̃⁻¹ or diag(D̃ + ε)⁻¹.
WeightMode<double> current_weight(const OptimizerSpec& spec, const OptState& state, NormWeighting weighting);

/// One iteration w_{k+1} = w_k − α_k p_k. The curvature estimate is refreshed
/// first (when the policy asks for it) so that A_k = H̃_k⁻¹ is available to the
/// gradient sample-size decision; gradient and Hessian batches come from
/// independent streams. Throws NumericalError on breakdown.
const StepInfo& step(const OptimizerSpec& spec, OptState& state, const FiniteSumOracle& oracle,
                     GradSampleController& grad, HessianSampler* hess, const ScheduleSet& schedules,
                     const UpdateFrequencyPolicy& policy, NormWeighting weighting = NormWeighting::Identity);

/// (1 + 2·rank/hf)·epochs + 2·rank; epochs for first-order methods (rank 0).
double eec(double epochs, Index rank, Index hessian_freq);

struct TraceRecord {
  Index k = 0;
  double epoch = 0.0;
  double f = 0.0;  // NaN between trace points
  double f_batch = 0.0;
  double f_rolling = 0.0;
  double grad_norm = 0.0;  // NaN between trace points
  Index x_size = 0;
  Index s_size = 0;
  Index hessian_probes = 0;
  double eec = 0.0;
  double wall_ms = 0.0;  // NaN unless wall-clock timing is on
  std::optional<double> dist_to_opt;
};

struct RunSummary {
  double final_f = 0.0;
  double best_f = 0.0;
  double final_grad_norm = 0.0;
  bool diverged = false;
  Index diverged_at = -1;
  std::string failure;
  Index iterations = 0;
  double epochs = 0.0;
  double eec = 0.0;
  Index hessian_probes = 0;
  std::optional<double> final_dist_to_opt;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  RunSummary summary;
  Vec w_final;
};

struct TraceOptions {
  /// Full objective, gradient norm and distance to w* every `interval` iterations.
  Index interval = 10;
  Index rolling_window = 50;
  bool wall_clock = false;
  double divergence_factor = 1e6;
};

enum class HessianSamplerKind { Iid, Cyclic };

struct RunConfig {
  OptimizerSpec optimizer;
  GradSizeMode grad_mode = grad_size::Fixed{1};
  Index grad_cap = 65536;
  NormWeighting weighting = NormWeighting::Identity;
  HessianSamplerKind hessian_kind = HessianSamplerKind::Iid;
  Index hessian_size = 1;
  ScheduleSet schedules;
  UpdateFrequencyPolicy policy;
  Index epochs = 1;
  Index iterations_per_epoch = 100;  // expectation problems only
  TraceOptions trace;
  std::uint64_t seed = 0;
  std::optional<Vec> w0;  // zeros by default

  void validate(const FiniteSumOracle& oracle) const;
};

/// Epoch loop. Finite sums take steps while the epoch's gradient-sample budget
/// (N) allows another batch, with at least one step per epoch; expectation
/// problems take a fixed number of iterations per epoch.
RunTrace run_epochs(const FiniteSumOracle& oracle, const RunConfig& config);

}  // namespace hessavg
