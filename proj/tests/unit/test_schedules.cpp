#include "doctest.h"

#include "hessavg/schedules.hpp"

using namespace hessavg;

TEST_CASE("alpha schedules") {
  CHECK(eval_alpha(alpha::Constant{0.3}, 17) == 0.3);
  const alpha::TwoPhase two{0.01, 100, 1.0};
  CHECK(eval_alpha(two, 99) == 0.01);
  CHECK(eval_alpha(two, 100) == 1.0);
  const alpha::StepDecay sd{1.0, 0.5, {10, 20}};
  CHECK(eval_alpha(sd, 9) == 1.0);
  CHECK(eval_alpha(sd, 10) == 0.5);
  CHECK(eval_alpha(sd, 25) == 0.25);
}

TEST_CASE("theta schedules") {
  CHECK(eval_theta(theta::Constant{0.5}, 3) == 0.5);
  const theta::LocalDet det{0.9, 0.6, 10};
  CHECK(eval_theta(det, 5) == 0.9);
  CHECK(eval_theta(det, 10) == doctest::Approx(0.6));
  CHECK(eval_theta(det, 12) == doctest::Approx(0.2));
  const theta::LocalStoch st{0.9, 0.6, 0};
  CHECK(eval_theta(st, 3) == doctest::Approx(0.3));
}

TEST_CASE("iota schedules") {
  CHECK(eval_iota(iota::Geometric{1.0, 0.5}, 3) == doctest::Approx(0.125));
  const iota::SuperDet sd{1.0, 0.5, 0, 0.0};
  CHECK(eval_iota(sd, 0) == doctest::Approx(1.0));
  CHECK(eval_iota(sd, 1) == doctest::Approx(0.5));
  CHECK(eval_iota(sd, 2) == doctest::Approx(0.015625));
  const iota::SuperStoch ss{1.0, 0.5, 0, 0.0};
  CHECK(eval_iota(ss, 2) == doctest::Approx(0.5 * 0.5 / 4));
  // Deep into the superlinear phase the values stay finite and nonnegative.
  CHECK(eval_iota(sd, 5000) >= 0.0);
  CHECK(std::isfinite(eval_iota(sd, 5000)));
}

TEST_CASE("schedules are nonincreasing after the switch") {
  const Index ks = 7;
  const ScheduleSet presets[] = {
      {alpha::TwoPhase{0.1, ks, 1.0}, theta::LocalDet{0.5, 0.5, ks}, iota::SuperDet{1.0, 0.9, ks, 0.8}},
      {alpha::Constant{1.0}, theta::LocalStoch{0.5, 0.5, ks}, iota::SuperStoch{1.0, 0.9, ks, 0.8}},
      {alpha::Constant{1.0}, theta::Constant{0.5}, iota::Geometric{1.0, 0.7}},
  };
  for (const auto& s : presets) {
    s.validate();
    auto prev = schedule_eval(s, ks);
    for (Index k = ks + 1; k < 400; ++k) {
      const auto v = schedule_eval(s, k);
      CHECK(v.theta <= prev.theta + 1e-15);
      CHECK(v.iota <= prev.iota + 1e-300);
      prev = v;
    }
  }
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS((ScheduleSet{alpha::Constant{0.0}, theta::Constant{}, iota::Geometric{}}.validate()), ValidationError);
  CHECK_THROWS_AS((ScheduleSet{alpha::Constant{1.0}, theta::Constant{-1}, iota::Geometric{}}.validate()),
                  ValidationError);
  CHECK_THROWS_AS((ScheduleSet{alpha::Constant{1.0}, theta::Constant{}, iota::Geometric{1.0, 1.5}}.validate()),
                  ValidationError);
  CHECK_THROWS_AS(
      (ScheduleSet{alpha::Constant{1.0}, theta::Constant{}, iota::SuperDet{1.0, 1.0, 0, 0.5}}.validate()),
      ValidationError);
  CHECK_THROWS_AS((ScheduleSet{alpha::Constant{1.0}, theta::Constant{}, iota::Geometric{-1.0, 0.5}}.validate()),
                  ValidationError);
}
