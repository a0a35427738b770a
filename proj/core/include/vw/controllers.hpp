#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vw/vehicle.hpp"

namespace vw {

/// What a controller sees each tick; mirrors a dataset frame without the action.
struct Observation {
  std::optional<DepthImage> depth;
  std::array<double, 4> w{};
  GroundSpeed g;
  double t = 0.0;
};

/// Builds an observation from a vehicle state (depth left empty).
Observation observe(const VehicleState& state);

/// Rule-based controller parameters. The nine numeric fields, in declaration
/// order, form the vector tuned by black-box parameter learning.
struct RbParams {
  double v_nominal = 0.5;
  double v_boost = 0.75;
  double t_stuck = 2.0;
  double t_ramp_fail = 3.0;
  double t_backup = 2.0;
  double v_backup = 0.5;
  double steer_recover = 0.314;
  double t_steer = 2.0;
  double stuck_speed_eps = 0.02;
  /// Lock a differential only while its axle slips; off means always locked.
  bool conditional_locking = false;

  static constexpr std::size_t kDim = 9;
  static constexpr std::array<std::string_view, kDim> kNames{
      "v_nominal", "v_boost", "t_stuck", "t_ramp_fail", "t_backup",
      "v_backup",  "steer_recover", "t_steer", "stuck_speed_eps"};

  std::array<double, kDim> to_vector() const noexcept;
  static RbParams from_vector(const std::array<double, kDim>& v, bool conditional_locking = false) noexcept;

  void validate() const;

  friend bool operator==(const RbParams&, const RbParams&) = default;
};

std::string rb_params_to_json(const RbParams& p);
RbParams rb_params_from_json(const std::string& text);
void save_rb_params(const RbParams& p, const std::filesystem::path& path);
RbParams load_rb_params(const std::filesystem::path& path);

enum class RbMode { Forward, Ramp, Backup, SteerLeft, SteerRight };

std::string_view to_string(RbMode m);

struct FsmState {
  RbMode mode = RbMode::Forward;
  double mode_entry_time = 0.0;
  std::optional<double> stuck_since;

  /// Fresh machine entering Forward at time t.
  static FsmState start(double t) noexcept { return {RbMode::Forward, t, std::nullopt}; }

  friend bool operator==(const FsmState&, const FsmState&) = default;
};

/// Open-loop command: constant 0.5 m/s straight ahead, both locks, low gear.
Action ol_act(double t) noexcept;

/// One tick of the rule-based recovery machine.
std::pair<Action, FsmState> rb_act(const Observation& obs, const FsmState& fsm, const RbParams& params);

/// Uniform interface over every driving policy the harness can run.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string id() const = 0;
  virtual void reset(double t0) = 0;
  virtual Action act(const Observation& obs) = 0;
  virtual bool needs_depth() const { return false; }
  /// Current FSM mode for controllers that have one.
  virtual std::optional<RbMode> mode() const { return std::nullopt; }
};

class OpenLoopController final : public Controller {
 public:
  std::string id() const override { return "OL"; }
  void reset(double) override {}
  Action act(const Observation& obs) override { return ol_act(obs.t); }
};

class RuleBasedController final : public Controller {
 public:
  explicit RuleBasedController(RbParams params = {}) : params_(params) {}
  std::string id() const override { return "RB"; }
  void reset(double t0) override { fsm_ = FsmState::start(t0); }
  Action act(const Observation& obs) override;
  std::optional<RbMode> mode() const override { return fsm_.mode; }
  const FsmState& fsm() const noexcept { return fsm_; }

 private:
  RbParams params_;
  FsmState fsm_;
};

}  // namespace vw
