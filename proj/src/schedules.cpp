#include "hessavg/schedules.hpp"

#include <algorithm>
#include <cmath>

namespace hessavg {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double geometric(double iota0, double a, Index k) {
  if (k == 0) return iota0;
  if (a == 0.0) return 0.0;
  return iota0 * std::pow(a, static_cast<double>(k));
}

// ι_j = ι_s · a_l^j / (j!)^power, evaluated in log space.
double super(double iota_s, double a_local, Index j, double power) {
  if (j == 0 || iota_s == 0.0) return iota_s;
  if (a_local == 0.0) return 0.0;
  const double jd = static_cast<double>(j);
  return iota_s * std::exp(jd * std::log(a_local) - power * std::lgamma(jd + 1.0));
}

void check_rate(double a, const char* what) {
  if (!(a >= 0.0 && a < 1.0)) throw ValidationError(std::string(what) + " must be in [0, 1)");
}

void check_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite and nonnegative");
}

}  // namespace

double eval_alpha(const AlphaSchedule& s, Index k) {
  return std::visit(overloaded{
                        [](const alpha::Constant& c) { return c.alpha; },
                        [k](const alpha::TwoPhase& t) { return k >= t.k_switch ? t.local : t.global; },
                        [k](const alpha::StepDecay& d) {
                          const auto passed = std::count_if(d.milestones.begin(), d.milestones.end(),
                                                            [k](Index m) { return m <= k; });
                          return d.alpha0 * std::pow(d.factor, static_cast<double>(passed));
                        },
                    },
                    s);
}

double eval_theta(const ThetaSchedule& s, Index k) {
  return std::visit(overloaded{
                        [](const theta::Constant& c) { return c.theta; },
                        [k](const theta::LocalDet& t) {
                          if (k < t.k_switch) return t.global;
                          return t.local / static_cast<double>(k - t.k_switch + 1);
                        },
                        [k](const theta::LocalStoch& t) {
                          if (k < t.k_switch) return t.global;
                          return t.local / std::sqrt(static_cast<double>(k - t.k_switch + 1));
                        },
                    },
                    s);
}

double eval_iota(const IotaSchedule& s, Index k) {
  return std::visit(overloaded{
                        [k](const iota::Geometric& g) { return geometric(g.iota0, g.a, k); },
                        [k](const iota::SuperDet& g) {
                          if (k < g.k_switch) return geometric(g.iota0, g.a_global, k);
                          return super(geometric(g.iota0, g.a_global, g.k_switch), g.a_local, k - g.k_switch, 4.0);
                        },
                        [k](const iota::SuperStoch& g) {
                          if (k < g.k_switch) return geometric(g.iota0, g.a_global, k);
                          return super(geometric(g.iota0, g.a_global, g.k_switch), g.a_local, k - g.k_switch, 2.0);
                        },
                    },
                    s);
}

ScheduleValues schedule_eval(const ScheduleSet& schedules, Index k) {
  if (k < 0) throw ValidationError("schedule_eval: k must be nonnegative");
  return {eval_alpha(schedules.alpha, k), eval_theta(schedules.theta, k), eval_iota(schedules.iota, k)};
}

void ScheduleSet::validate() const {
  std::visit(overloaded{
                 [](const alpha::Constant& c) {
                   if (!(c.alpha > 0.0)) throw ValidationError("alpha must be positive");
                 },
                 [](const alpha::TwoPhase& t) {
                   if (!(t.global > 0.0 && t.local > 0.0)) throw ValidationError("alpha must be positive");
                   if (t.k_switch < 0) throw ValidationError("k_switch must be nonnegative");
                 },
                 [](const alpha::StepDecay& d) {
                   if (!(d.alpha0 > 0.0 && d.factor > 0.0)) throw ValidationError("step decay needs positive alpha0 and factor");
                 },
             },
             alpha);
  std::visit(overloaded{
                 [](const theta::Constant& c) { check_nonneg(c.theta, "theta"); },
                 [](const auto& t) {
                   check_nonneg(t.global, "theta global");
                   check_nonneg(t.local, "theta local");
                   if (t.k_switch < 0) throw ValidationError("k_switch must be nonnegative");
                 },
             },
             theta);
  std::visit(overloaded{
                 [](const iota::Geometric& g) {
                   check_nonneg(g.iota0, "iota0");
                   // a = 1 gives a constant ι.
                   if (!(g.a >= 0.0 && g.a <= 1.0)) throw ValidationError("iota rate a must be in [0, 1]");
                 },
                 [](const auto& g) {
                   check_nonneg(g.iota0, "iota0");
                   check_rate(g.a_local, "iota rate a_l");
                   check_rate(g.a_global, "iota rate a_g");
                   if (g.k_switch < 0) throw ValidationError("k_switch must be nonnegative");
                 },
             },
             iota);
}

}  // namespace hessavg
