#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "vw/controllers.hpp"
#include "vw/error.hpp"
#include "vw/rng.hpp"

using namespace vw;

namespace {

struct Expected {
  RbMode mode;
  double v, omega;
};

// Reference schedule under a permanently zero ground-speed signal, in whole
// ticks so the boundaries are exact: 40 Forward, 60 Ramp, 40 Backup, 40 Left,
// 40 Right, repeat.
Expected reference(long tick) {
  const long k = tick % 220;
  if (k < 40) return {RbMode::Forward, 0.5, 0.0};
  if (k < 100) return {RbMode::Ramp, 0.5 + 0.25 * ((k - 40) * 0.05) / 3.0, 0.0};
  if (k < 140) return {RbMode::Backup, -0.5, 0.0};
  if (k < 180) return {RbMode::SteerLeft, 0.75, 0.314};
  return {RbMode::SteerRight, 0.75, -0.314};
}

}  // namespace

TEST_CASE("open loop is constant") {
  const Action a = ol_act(0.0);
  CHECK(a == Action{0.5, 0.0, true, true, true});
  CHECK(ol_act(37.2) == a);
  OpenLoopController ol;
  Observation obs;
  obs.depth = vwtest::flat_depth(8, 1.0);
  obs.t = 3.0;
  CHECK(ol.act(obs) == a);
  CHECK(ol.act(Observation{}) == a);
  CHECK_FALSE(ol.needs_depth());
}

TEST_CASE("default parameters") {
  const RbParams p;
  CHECK(p.v_nominal == 0.5);
  CHECK(p.v_boost == 0.75);
  CHECK(p.t_stuck == 2.0);
  CHECK(p.t_ramp_fail == 3.0);
  CHECK(p.t_backup == 2.0);
  CHECK(p.v_backup == 0.5);
  CHECK(p.steer_recover == 0.314);
  CHECK(p.t_steer == 2.0);
  CHECK(p.stuck_speed_eps == 0.02);
  CHECK_FALSE(p.conditional_locking);
}

TEST_CASE("moving normally stays in Forward at nominal speed") {
  FsmState fsm = FsmState::start(0.0);
  Observation obs;
  obs.g.dx = 0.4;
  for (int k = 0; k < 300; ++k) {
    obs.t = k * kTick;
    auto [a, next] = rb_act(obs, fsm, RbParams{});
    fsm = next;
    REQUIRE(a == Action{0.5, 0.0, true, true, true});
    REQUIRE(fsm.mode == RbMode::Forward);
  }
}

TEST_CASE("zero ground speed drives the reference recovery cycle tick by tick") {
  FsmState fsm = FsmState::start(0.0);
  Observation obs;
  for (long k = 0; k < 3 * 220; ++k) {
    obs.t = k * kTick;
    auto [a, next] = rb_act(obs, fsm, RbParams{});
    fsm = next;
    const Expected e = reference(k);
    CAPTURE(k);
    REQUIRE(fsm.mode == e.mode);
    REQUIRE(std::abs(a.v - e.v) <= 1e-12);
    REQUIRE(a.omega == e.omega);
    REQUIRE(a.lock_front);
    REQUIRE(a.lock_rear);
    REQUIRE(a.low_gear);
  }
}

TEST_CASE("ramp is exactly linear and recovery returns to Forward") {
  RbParams p;
  p.v_nominal = 0.3;
  p.v_boost = 0.9;
  p.t_ramp_fail = 4.0;
  FsmState fsm = FsmState::start(0.0);
  Observation obs;
  double entered = -1;
  for (int k = 0; k < 70; ++k) {
    obs.t = k * kTick;
    auto [a, next] = rb_act(obs, fsm, p);
    if (next.mode == RbMode::Ramp) {
      if (entered < 0) entered = obs.t;
      CHECK(a.v == doctest::Approx(0.3 + 0.6 * (obs.t - entered) / 4.0).epsilon(1e-12));
    }
    fsm = next;
  }
  REQUIRE(fsm.mode == RbMode::Ramp);
  obs.t = 70 * kTick;
  obs.g.dx = 0.1;
  auto [a, next] = rb_act(obs, fsm, p);
  CHECK(next.mode == RbMode::Forward);
  CHECK(a.v == 0.3);
}

TEST_CASE("Backup and steering run to completion even if motion resumes") {
  FsmState fsm{RbMode::Backup, 0.0, std::nullopt};
  Observation obs;
  obs.g.dx = 0.5;
  obs.t = 1.0;
  CHECK(rb_act(obs, fsm, RbParams{}).second.mode == RbMode::Backup);
  fsm = {RbMode::SteerLeft, 0.0, std::nullopt};
  CHECK(rb_act(obs, fsm, RbParams{}).second.mode == RbMode::SteerLeft);
}

TEST_CASE("emitted actions respect the bounds for any valid parameters") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    RbParams p;
    p.v_nominal = rng.uniform(0.05, 1.5);
    p.v_boost = p.v_nominal + rng.uniform(0.0, 1.0);
    p.t_stuck = rng.uniform(0.05, 3);
    p.t_ramp_fail = rng.uniform(0.05, 3);
    p.t_backup = rng.uniform(0.05, 3);
    p.v_backup = rng.uniform(0.05, 2);
    p.steer_recover = rng.uniform(0.05, 1.0);
    p.t_steer = rng.uniform(0.05, 3);
    p.stuck_speed_eps = rng.uniform(0.001, 0.2);
    RuleBasedController rb(p);
    rb.reset(0.0);
    Observation obs;
    for (int k = 0; k < 400; ++k) {
      obs.t = k * kTick;
      obs.g.dx = rng.uniform() < 0.7 ? 0.0 : rng.uniform(0.0, 0.5);
      const Action a = rb.act(obs);
      REQUIRE(std::abs(a.v) <= kMaxSpeed);
      REQUIRE(std::abs(a.omega) <= kMaxSteer);
    }
  }
}

TEST_CASE("parameter vector and JSON round-trip") {
  RbParams p;
  p.v_nominal = 0.41;
  p.t_steer = 1.7;
  p.conditional_locking = true;
  CHECK(RbParams::from_vector(p.to_vector(), true) == p);
  CHECK(rb_params_from_json(rb_params_to_json(p)) == p);
  const auto dir = vwtest::scratch_dir("rbparams");
  save_rb_params(p, dir / "rb.json");
  CHECK(load_rb_params(dir / "rb.json") == p);
  RbParams bad;
  bad.v_boost = 0.4;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = RbParams{};
  bad.t_stuck = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("conditional locking releases a differential on a non-slipping axle") {
  RbParams p;
  p.conditional_locking = true;
  Observation obs;
  obs.t = 0.0;
  obs.g.dx = 0.5;
  obs.w = {0.5, 0.5, 0.5, 0.5};
  auto [a, fsm] = rb_act(obs, FsmState::start(0.0), p);
  CHECK_FALSE(a.lock_front);
  CHECK_FALSE(a.lock_rear);
  obs.g.dx = 0.1;
  obs.t = 0.05;
  a = rb_act(obs, fsm, p).first;
  CHECK(a.lock_front);
  CHECK(a.lock_rear);
}

TEST_CASE("observe copies the sensor streams") {
  VehicleState s;
  s.wheel_rim_speed = {0.1, 0.2, 0.3, 0.4};
  s.ground_speed.dx = 0.25;
  s.t = 1.5;
  const Observation o = observe(s);
  CHECK(o.w == s.wheel_rim_speed);
  CHECK(o.g == s.ground_speed);
  CHECK(o.t == 1.5);
  CHECK_FALSE(o.depth.has_value());
}
