#include "hessavg/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

namespace hessavg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethods[] = {
    {Method::SGD, "sgd"}, {Method::Adam, "adam"}, {Method::SubNewton, "subnewton"}, {Method::FAN, "fan"},
    {Method::Dan, "dan"}, {Method::Dan2, "dan2"}, {Method::Adahessian, "adahessian"},
};

double bias_correction(double beta, Index t) { return -std::expm1(static_cast<double>(t) * std::log(beta)); }

}  // namespace

std::string_view method_name(Method m) {
  for (const auto& e : kMethods)
    if (e.method == m) return e.name;
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& e : kMethods)
    if (e.name == lower) return e.method;
  return std::nullopt;
}

void OptimizerSpec::validate() const {
  if (!(mu_tilde > 0.0)) throw ValidationError("optimizer: mu_tilde must be positive");
  if (!(floor >= 0.0)) throw ValidationError("optimizer: floor must be nonnegative");
  if (uses_diagonal(method) && rank < 1) throw ValidationError("optimizer: Hutchinson rank must be at least 1");
  if (method == Method::Adam || method == Method::Adahessian) {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("optimizer: beta1 must be in [0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ValidationError("optimizer: beta2 must be in (0, 1)");
    if (!(eps >= 0.0)) throw ValidationError("optimizer: eps must be nonnegative");
  }
  weights.validate();
}

Index OptimizerSpec::eec_rank(Index dim) const {
  if (uses_full_hessian(method)) return dim;
  if (uses_diagonal(method)) return rank;
  return 0;
}

OptState make_state(const OptimizerSpec& spec, const FiniteSumOracle& oracle, Vec w0, std::uint64_t seed) {
  spec.validate();
  const Index d = oracle.dim();
  if (w0.size() != d) throw ValidationError("initial point has the wrong dimension");
  OptState st;
  st.w = std::move(w0);
  st.grad_rng = RandomStream(seed, "gradient");
  st.probe_rng = RandomStream(seed, "probes");
  if (spec.method == Method::Adam || spec.method == Method::Adahessian) st.m = Vec::Zero(d);
  if (spec.method == Method::Adam) st.v = Vec::Zero(d);
  if (uses_full_hessian(spec.method)) {
    if (d > spec.max_dense_dim) {
      throw ValidationError("dense Hessian methods are limited to d <= " + std::to_string(spec.max_dense_dim));
    }
    const WeightScheme scheme = spec.method == Method::SubNewton ? WeightScheme::latest() : spec.weights;
    st.full.emplace(d, scheme, spec.method == Method::FAN ? spec.variant : AverageVariant::PlainAverage);
  } else if (spec.method == Method::Dan || spec.method == Method::Dan2) {
    st.diag.emplace(d, spec.method == Method::Dan ? 1 : 2, spec.weights);
  } else if (spec.method == Method::Adahessian) {
    st.diag.emplace(d, 2, WeightScheme::decaying(spec.beta2));
  }
  return st;
}

WeightMode<double> current_weight(const OptimizerSpec& spec, const OptState& st, NormWeighting weighting) {
  if (weighting == NormWeighting::Identity) return Identity{};
  if (st.full) return InverseOf<double>{st.full->modified(spec.mu_tilde)};
  if (st.diag) {
    const double eps = spec.method == Method::Adahessian ? spec.eps : spec.floor;
    return InverseOfDiagonal<double>{(st.diag->diag().array() + eps).matrix()};
  }
  throw ValidationError("inverse-Hessian weighting needs a second-order method");
}

const StepInfo& step(const OptimizerSpec& spec, OptState& st, const FiniteSumOracle& oracle,
                     GradSampleController& grad, HessianSampler* hess, const ScheduleSet& schedules,
                     const UpdateFrequencyPolicy& policy, NormWeighting weighting) {
  const Index d = oracle.dim();
  const ScheduleValues sv = schedule_eval(schedules, st.k);
  grad.set_tolerances(sv.theta, sv.iota);
  StepInfo info;
  info.alpha = sv.alpha;
  info.theta = sv.theta;
  info.iota = sv.iota;

  if (is_second_order(spec.method) && should_update_hessian(policy, st.k)) {
    if (hess == nullptr) throw ValidationError("second-order method needs a Hessian sampler");
    const Sample s = next_sample(*hess, oracle);
    info.s_size = sample_size(s);
    info.hessian_updated = true;
    if (st.full) {
      st.full->update(oracle.hessian_sub(st.w, s));
      st.hessian_probes += d;
    } else {
      HutchinsonConfig cfg{spec.rank, st.probe_rng};
      const Vec diag = hutchinson_diag([&](const Vec& z) { return oracle.hvp_sub(st.w, s, z); }, d, cfg);
      st.probe_rng = cfg.stream;
      st.diag->update(diag);
      st.hessian_probes += spec.rank;
    }
  }

  const bool need_full_grad = std::holds_alternative<grad_size::ExactNormTest>(grad.mode()) ||
                              std::holds_alternative<grad_size::TheoreticalBound>(grad.mode());
  std::optional<WeightMode<double>> weight;
  Vec grad_f;
  if (need_full_grad) {
    grad_f = oracle.grad_full(st.w);
    weight = current_weight(spec, st, weighting);
  }

  if (const auto* tb = std::get_if<grad_size::TheoreticalBound>(&grad.mode())) {
    const double lam = weight_lambda_max<double>(*weight);
    const double gn = grad_f.squaredNorm();
    const double ga = weighted_norm_sq<double>(grad_f, *weight);
    const auto n = oracle.num_components();
    Index want;
    if (tb->deterministic) {
      if (!n) throw ValidationError("deterministic sample-size bound needs a finite sum");
      want = required_size_deterministic(*n, tb->constants, lam, gn, ga, sv.theta, sv.iota);
    } else {
      want = required_size_stochastic(tb->constants, lam, gn, ga, sv.theta, sv.iota);
    }
    grad.require(want);
  }

  const bool approx = std::holds_alternative<grad_size::ApproxNormTest>(grad.mode());
  const Sample x = oracle.draw(grad.current_size(), st.grad_rng, approx);
  info.x_size = sample_size(x);
  st.grad_samples += info.x_size;
  if (approx) {
    const GradientStats stats = oracle.gradient_stats(st.w, x);
    info.g = stats.mean;
    // Variance of the batch mean, so the test tightens as the batch grows.
    const double observed = stats.variance / static_cast<double>(stats.size);
    const double gn = stats.mean.squaredNorm();
    const bool passed = observed <= sv.theta * sv.theta * gn + sv.iota;
    info.test_passed = passed;
    controller_decide(grad, passed, observed, gn);
  } else {
    info.g = oracle.grad_sub(st.w, x);
  }
  info.f_batch = oracle.loss_sub(st.w, x);

  if (std::holds_alternative<grad_size::ExactNormTest>(grad.mode())) {
    const double observed = weighted_norm_sq<double>(info.g - grad_f, *weight);
    const double ga = weighted_norm_sq<double>(grad_f, *weight);
    const bool passed = observed <= sv.theta * sv.theta * ga + sv.iota;
    info.test_passed = passed;
    controller_decide(grad, passed, observed, ga);
  }

  const Index t = st.k + 1;
  switch (spec.method) {
    case Method::SGD:
      info.p = info.g;
      break;
    case Method::Adam: {
      st.m = spec.beta1 * st.m + (1.0 - spec.beta1) * info.g;
      st.v = spec.beta2 * st.v + (1.0 - spec.beta2) * info.g.cwiseAbs2();
      const Vec m_hat = st.m / bias_correction(spec.beta1, t);
      const Vec v_hat = st.v / bias_correction(spec.beta2, t);
      info.p = m_hat.array() / (v_hat.array().sqrt() + spec.eps);
      break;
    }
    case Method::SubNewton:
    case Method::FAN:
      info.p = st.full->precondition(info.g, spec.mu_tilde);
      break;
    case Method::Dan:
    case Method::Dan2:
      info.p = st.diag->precondition(info.g, spec.floor);
      break;
    case Method::Adahessian: {
      st.m = spec.beta1 * st.m + (1.0 - spec.beta1) * info.g;
      const Vec m_hat = st.m / bias_correction(spec.beta1, t);
      info.p = st.diag->precondition(m_hat, spec.eps);
      break;
    }
  }
  if (!info.p.allFinite()) throw NumericalError("non-finite search direction");
  st.w -= sv.alpha * info.p;
  ++st.k;
  st.last = std::move(info);
  return st.last;
}

double eec(double epochs, Index rank, Index hessian_freq) {
  if (rank < 0) throw ValidationError("eec: rank must be nonnegative");
  if (rank == 0) return epochs;
  if (hessian_freq < 1) throw ValidationError("eec: Hessian frequency must be at least 1");
  const double r = static_cast<double>(rank);
  return (1.0 + 2.0 * r / static_cast<double>(hessian_freq)) * epochs + 2.0 * r;
}

void RunConfig::validate(const FiniteSumOracle& oracle) const {
  optimizer.validate();
  schedules.validate();
  policy.validate();
  if (epochs < 0) throw ValidationError("epochs must be nonnegative");
  if (iterations_per_epoch < 1) throw ValidationError("iterations_per_epoch must be positive");
  if (trace.interval < 1) throw ValidationError("trace interval must be positive");
  if (trace.rolling_window < 1) throw ValidationError("rolling window must be positive");
  if (grad_cap < 1) throw ValidationError("gradient cap must be positive");
  if (is_second_order(optimizer.method) && hessian_size < 1) throw ValidationError("Hessian sample size must be positive");
  if (hessian_kind == HessianSamplerKind::Cyclic && !oracle.num_components()) {
    throw ValidationError("cyclic Hessian sampling needs a finite sum");
  }
  if (weighting == NormWeighting::InverseHessian && !is_second_order(optimizer.method)) {
    throw ValidationError("inverse-Hessian weighting needs a second-order method");
  }
  if (w0 && w0->size() != oracle.dim()) throw ValidationError("initial point has the wrong dimension");
  if (std::holds_alternative<grad_size::ApproxNormTest>(grad_mode)) {
    const auto& m = std::get<grad_size::ApproxNormTest>(grad_mode);
    if (m.initial < 2) throw ValidationError("approximate norm test needs an initial batch of at least 2");
  }
}

RunTrace run_epochs(const FiniteSumOracle& oracle, const RunConfig& cfg) {
  cfg.validate(oracle);
  const auto n = oracle.num_components();
  const Index cap = n ? std::min(*n, cfg.grad_cap) : cfg.grad_cap;
  GradSampleController grad(cfg.grad_mode, cap);
  std::optional<HessianSampler> hess;
  if (is_second_order(cfg.optimizer.method)) {
    RandomStream hrng(cfg.seed, "hessian");
    if (cfg.hessian_kind == HessianSamplerKind::Cyclic) {
      hess.emplace(CyclicSampler(*n, cfg.hessian_size, hrng));
    } else {
      hess.emplace(IidSampler(cfg.hessian_size, hrng));
    }
  }
  OptState st = make_state(cfg.optimizer, oracle, cfg.w0 ? *cfg.w0 : Vec::Zero(oracle.dim()), cfg.seed);

  const auto opt = oracle.optimum();
  const Index rank = cfg.optimizer.eec_rank(oracle.dim());
  const auto start = std::chrono::steady_clock::now();
  RunTrace out;
  std::deque<double> window;
  double window_sum = 0.0;

  const double f0 = oracle.loss_full(st.w);
  const double limit = cfg.trace.divergence_factor * (f0 != 0.0 ? std::abs(f0) : 1.0);
  RunSummary& sum = out.summary;
  sum.best_f = f0;

  auto fill_full = [&](TraceRecord& r) {
    r.f = oracle.loss_full(st.w);
    r.grad_norm = oracle.grad_full(st.w).norm();
    if (opt) r.dist_to_opt = (st.w - opt->w).norm();
    if (std::isfinite(r.f)) sum.best_f = std::min(sum.best_f, r.f);
  };
  auto elapsed_ms = [&] {
    if (!cfg.trace.wall_clock) return kNaN;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  {
    TraceRecord r0;
    r0.f = f0;
    r0.grad_norm = oracle.grad_full(st.w).norm();
    if (opt) r0.dist_to_opt = (st.w - opt->w).norm();
    r0.f_batch = kNaN;
    r0.f_rolling = kNaN;
    r0.eec = eec(0.0, rank, cfg.policy.hf);
    r0.wall_ms = elapsed_ms();
    out.records.push_back(r0);
  }

  double epoch_real = 0.0;
  bool halted = false;
  for (Index e = 0; e < cfg.epochs && !halted; ++e) {
    grad.set_epoch(e);
    Index used = 0;
    Index it_in_epoch = 0;
    while (true) {
      try {
        step(cfg.optimizer, st, oracle, grad, hess ? &*hess : nullptr, cfg.schedules, cfg.policy, cfg.weighting);
      } catch (const NumericalError& err) {
        sum.diverged = true;
        sum.diverged_at = st.k;
        sum.failure = err.what();
        halted = true;
        break;
      }
      const StepInfo& info = st.last;
      used += info.x_size;
      ++it_in_epoch;
      bool more;
      if (n) {
        epoch_real = static_cast<double>(e) + static_cast<double>(used) / static_cast<double>(*n);
        more = used + grad.current_size() <= *n;
      } else {
        epoch_real = static_cast<double>(e) + static_cast<double>(it_in_epoch) / static_cast<double>(cfg.iterations_per_epoch);
        more = it_in_epoch < cfg.iterations_per_epoch;
      }
      const bool last = !more && e + 1 == cfg.epochs;

      TraceRecord r;
      r.k = st.k;
      r.epoch = epoch_real;
      r.f_batch = info.f_batch;
      window.push_back(info.f_batch);
      window_sum += info.f_batch;
      if (static_cast<Index>(window.size()) > cfg.trace.rolling_window) {
        window_sum -= window.front();
        window.pop_front();
      }
      r.f_rolling = window_sum / static_cast<double>(window.size());
      r.x_size = info.x_size;
      r.s_size = info.s_size;
      r.hessian_probes = st.hessian_probes;
      r.eec = eec(epoch_real, rank, cfg.policy.hf);
      r.f = kNaN;
      r.grad_norm = kNaN;

      bool bad = !st.w.allFinite() || !std::isfinite(info.f_batch) || info.f_batch > limit;
      if (!bad && (st.k % cfg.trace.interval == 0 || last)) {
        fill_full(r);
        bad = !std::isfinite(r.f) || r.f > limit;
      }
      r.wall_ms = elapsed_ms();
      out.records.push_back(r);
      if (bad) {
        sum.diverged = true;
        sum.diverged_at = st.k;
        sum.failure = "objective exceeded the divergence threshold";
        halted = true;
        break;
      }
      if (!more) break;
    }
  }

  sum.iterations = st.k;
  sum.epochs = epoch_real;
  sum.eec = eec(epoch_real, rank, cfg.policy.hf);
  sum.hessian_probes = st.hessian_probes;
  out.w_final = st.w;
  if (st.w.allFinite()) {
    sum.final_f = oracle.loss_full(st.w);
    sum.final_grad_norm = oracle.grad_full(st.w).norm();
    if (opt) sum.final_dist_to_opt = (st.w - opt->w).norm();
  } else {
    sum.final_f = kNaN;
    sum.final_grad_norm = kNaN;
  }
  if (!std::isfinite(sum.final_f) || sum.final_f > limit) sum.diverged = true;
  return out;
}

}  // namespace hessavg
