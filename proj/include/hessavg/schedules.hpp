#pragma once

#include <variant>
#include <vector>

#include "hessavg/types.hpp"

namespace hessavg {

namespace alpha {
struct Constant {
  double alpha = 1.0;
};
/// α_global before k_switch, α_local (unit step by default) from k_switch on.
struct TwoPhase {
  double global = 0.1;
  Index k_switch = 0;
  double local = 1.0;
};
/// α₀·factor^(number of milestones ≤ k).
struct StepDecay {
  double alpha0 = 0.1;
  double factor = 0.1;
  std::vector<Index> milestones;
};
}  // namespace alpha

namespace theta {
struct Constant {
  double theta = 0.0;
};
/// θ̃_g before k_switch, θ̃_l/(j+1) after, with j = k − k_switch.
struct LocalDet {
  double global = 0.0;
  double local = 0.0;
  Index k_switch = 0;
};
/// θ̃_g before k_switch, θ̃_l/√(j+1) after.
struct LocalStoch {
  double global = 0.0;
  double local = 0.0;
  Index k_switch = 0;
};
}  // namespace theta

namespace iota {
/// ι₀·a^k.
struct Geometric {
  double iota0 = 0.0;
  double a = 0.0;
};
/// Geometric with rate a_g up to k_switch, then ι_{j+1} = ι_j·a_l/(j+1)⁴.
struct SuperDet {
  double iota0 = 0.0;
  double a_local = 0.0;
  Index k_switch = 0;
  double a_global = 0.0;
};
/// As SuperDet with (j+1)² in place of (j+1)⁴.
struct SuperStoch {
  double iota0 = 0.0;
  double a_local = 0.0;
  Index k_switch = 0;
  double a_global = 0.0;
};
}  // namespace iota

using AlphaSchedule = std::variant<alpha::Constant, alpha::TwoPhase, alpha::StepDecay>;
using ThetaSchedule = std::variant<theta::Constant, theta::LocalDet, theta::LocalStoch>;
using IotaSchedule = std::variant<iota::Geometric, iota::SuperDet, iota::SuperStoch>;

struct ScheduleSet {
  AlphaSchedule alpha = alpha::Constant{};
  ThetaSchedule theta = theta::Constant{};
  IotaSchedule iota = iota::Geometric{};

  void validate() const;
};

struct ScheduleValues {
  double alpha = 0.0;
  double theta = 0.0;
  double iota = 0.0;
};

double eval_alpha(const AlphaSchedule& s, Index k);
double eval_theta(const ThetaSchedule& s, Index k);
double eval_iota(const IotaSchedule& s, Index k);

ScheduleValues schedule_eval(const ScheduleSet& schedules, Index k);

}  // namespace hessavg
