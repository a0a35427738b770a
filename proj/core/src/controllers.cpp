#include "vw/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "vw/error.hpp"
#include "vw/pgm.hpp"

namespace vw {

namespace {

// Absorbs float noise in accumulated tick times so boundaries land on the tick.
constexpr double kTimeEps = 1e-9;

constexpr double kSlipThreshold = 0.05;

}  // namespace

Observation observe(const VehicleState& state) {
  Observation obs;
  obs.w = state.wheel_rim_speed;
  obs.g = state.ground_speed;
  obs.t = state.t;
  return obs;
}

std::array<double, RbParams::kDim> RbParams::to_vector() const noexcept {
  return {v_nominal, v_boost, t_stuck, t_ramp_fail, t_backup, v_backup, steer_recover, t_steer, stuck_speed_eps};
}

RbParams RbParams::from_vector(const std::array<double, kDim>& v, bool conditional_locking) noexcept {
  RbParams p;
  p.v_nominal = v[0];
  p.v_boost = v[1];
  p.t_stuck = v[2];
  p.t_ramp_fail = v[3];
  p.t_backup = v[4];
  p.v_backup = v[5];
  p.steer_recover = v[6];
  p.t_steer = v[7];
  p.stuck_speed_eps = v[8];
  p.conditional_locking = conditional_locking;
  return p;
}

void RbParams::validate() const {
  const auto v = to_vector();
  for (std::size_t k = 0; k < kDim; ++k) {
    if (!(v[k] > 0.0) || !std::isfinite(v[k])) {
      throw ParameterError("RbParams." + std::string(kNames[k]) + " must be positive");
    }
  }
  if (v_boost < v_nominal) throw ParameterError("RbParams.v_boost must be >= v_nominal");
}

std::string rb_params_to_json(const RbParams& p) {
  nlohmann::ordered_json j;
  const auto v = p.to_vector();
  for (std::size_t k = 0; k < RbParams::kDim; ++k) j[std::string(RbParams::kNames[k])] = v[k];
  j["conditional_locking"] = p.conditional_locking;
  return j.dump(2) + "\n";
}

RbParams rb_params_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    auto v = RbParams{}.to_vector();
    for (std::size_t k = 0; k < RbParams::kDim; ++k) {
      const std::string key(RbParams::kNames[k]);
      if (j.contains(key)) v[k] = j[key].get<double>();
    }
    RbParams p = RbParams::from_vector(v, j.value("conditional_locking", false));
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("RbParams config: ") + e.what());
  }
}

void save_rb_params(const RbParams& p, const std::filesystem::path& path) {
  write_file(path, rb_params_to_json(p));
}

RbParams load_rb_params(const std::filesystem::path& path) { return rb_params_from_json(read_file(path)); }

std::string_view to_string(RbMode m) {
  switch (m) {
    case RbMode::Forward: return "Forward";
    case RbMode::Ramp: return "Ramp";
    case RbMode::Backup: return "Backup";
    case RbMode::SteerLeft: return "SteerLeft";
    case RbMode::SteerRight: return "SteerRight";
  }
  return "?";
}

Action ol_act(double) noexcept { return Action{0.5, 0.0, true, true, true}; }

std::pair<Action, FsmState> rb_act(const Observation& obs, const FsmState& fsm, const RbParams& params) {
  const double t = obs.t;
  const bool stuck = obs.g.planar() < params.stuck_speed_eps;
  FsmState next = fsm;
  const auto elapsed_at_least = [&](double duration) { return t - next.mode_entry_time >= duration - kTimeEps; };
  const auto enter = [&](RbMode mode) {
    next.mode = mode;
    next.mode_entry_time = t;
  };

  switch (fsm.mode) {
    case RbMode::Forward:
      if (!stuck) {
        next.stuck_since.reset();
      } else if (!next.stuck_since) {
        next.stuck_since = t;
      }
      if (next.stuck_since && t - *next.stuck_since >= params.t_stuck - kTimeEps) enter(RbMode::Ramp);
      break;
    case RbMode::Ramp:
      if (!stuck) {
        enter(RbMode::Forward);
        next.stuck_since.reset();
      } else if (elapsed_at_least(params.t_ramp_fail)) {
        enter(RbMode::Backup);
      }
      break;
    case RbMode::Backup:
      if (elapsed_at_least(params.t_backup)) enter(RbMode::SteerLeft);
      break;
    case RbMode::SteerLeft:
      if (elapsed_at_least(params.t_steer)) enter(RbMode::SteerRight);
      break;
    case RbMode::SteerRight:
      if (elapsed_at_least(params.t_steer)) {
        enter(RbMode::Forward);
        next.stuck_since = stuck ? std::optional<double>(t) : std::nullopt;
      }
      break;
  }

  Action a{0.0, 0.0, true, true, true};
  switch (next.mode) {
    case RbMode::Forward:
      a.v = params.v_nominal;
      break;
    case RbMode::Ramp:
      a.v = params.v_nominal +
            (params.v_boost - params.v_nominal) * (t - next.mode_entry_time) / params.t_ramp_fail;
      break;
    case RbMode::Backup:
      a.v = -params.v_backup;
      break;
    case RbMode::SteerLeft:
      a.v = params.v_boost;
      a.omega = params.steer_recover;
      break;
    case RbMode::SteerRight:
      a.v = params.v_boost;
      a.omega = -params.steer_recover;
      break;
  }
  if (params.conditional_locking) {
    const double ground = obs.g.planar();
    a.lock_front = 0.5 * (std::abs(obs.w[0]) + std::abs(obs.w[1])) - ground > kSlipThreshold;
    a.lock_rear = 0.5 * (std::abs(obs.w[2]) + std::abs(obs.w[3])) - ground > kSlipThreshold;
  }
  return {a.clamped(), next};
}

Action RuleBasedController::act(const Observation& obs) {
  auto [action, next] = rb_act(obs, fsm_, params_);
  fsm_ = next;
  return action;
}

}  // namespace vw
