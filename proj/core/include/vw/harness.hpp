#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vw/bclearn.hpp"
#include "vw/controllers.hpp"
#include "vw/dataset.hpp"
#include "vw/terrain.hpp"
#include "vw/vehicle.hpp"

namespace vw {

enum class Outcome { Succeeded, Stuck, Tipped, Timeout, Boundary };

std::string_view to_string(Outcome o);

/// A generated course and the padded map the vehicle drives on. The course
/// spans x in [0, length]; a flat apron extends the map past both ends so the
/// vehicle can start behind the course line.
struct Course {
  CourseSpec spec;
  HeightMap map;
};

inline constexpr double kApron = 0.75;
/// Body origin distance behind the course line at the start of a trial.
inline constexpr double kStartSetback = 0.2;

Course make_course(const CourseSpec& spec, double apron = kApron);

struct StartPose {
  double x = 0, y = 0, yaw = 0;
  int direction = 1;  ///< +1 drives towards +x, -1 towards -x
};

/// Laterally centred start behind the course line, facing along the course.
StartPose start_pose(const CourseSpec& spec, int direction, double lateral_offset = 0.0);

struct TrialConfig {
  double timeout = 60.0;
  int depth_side = 64;
  double camera_pitch = -0.5;  ///< world-frame pitch the tilt controller holds
  StatusConfig status;
};

struct TrialResult {
  Outcome outcome = Outcome::Timeout;
  std::optional<double> traversal_time;  ///< present iff Succeeded
  std::uint64_t seed = 0;
  std::string controller;
  Difficulty difficulty = Difficulty::Flat;
  VehicleKind vehicle = VehicleKind::V6W;
  int direction = 1;
  int ticks = 0;
  Pose final_pose;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

/// Called after every tick with the observation, the action and the new state.
using TickObserver = std::function<void(const Observation&, const Action&, const VehicleState&)>;

/// 20 Hz observe -> act -> step loop until an absorbing status or the timeout.
/// Depth is rendered only when the controller or the recorder needs it.
TrialResult run_trial(Controller& controller, const VehicleGeometry& geom, const Course& course,
                      const StartPose& start, const TrialConfig& cfg = {}, Recorder* recorder = nullptr,
                      const TickObserver& observer = {});

/// Privileged demonstrator used in place of a human operator: it scores a fan
/// of steering arcs on the true heightmap and backs out when stuck.
class ScriptedDriver final : public Controller {
 public:
  ScriptedDriver(const HeightMap& map, VehicleGeometry geom, double course_width, int direction);
  std::string id() const override { return "EXPERT"; }
  void reset(double t0) override;
  Action act(const Observation& obs) override;
  /// The driver needs the true pose; the harness feeds it before each act().
  void set_state(const VehicleState& state) { state_ = state; }

 private:
  const HeightMap* map_;
  VehicleGeometry geom_;
  double centre_y_;
  int direction_;
  VehicleState state_;
  double stuck_time_ = 0.0;
  double slow_time_ = 0.0;
  double backup_until_ = -1.0;
  double last_t_ = 0.0;
  double backup_omega_ = 0.0;
};

struct DemoConfig {
  VehicleKind vehicle = VehicleKind::V6W;
  std::vector<Difficulty> difficulties{Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult};
  int per_difficulty = 2;  ///< alternating directions
  std::uint64_t seed = 0;
  double timeout = 30.0;
  int depth_side = 64;
};

/// Records scripted demonstrations. Trial directories are also written under
/// `root` unless it is empty.
std::vector<Demonstration> record_demos(const DemoConfig& cfg, const std::filesystem::path& root = {});

struct CellStats {
  int trials = 0;
  int successes = 0;
  double mean_time = 0.0;
  double var_time = 0.0;  ///< unbiased; 0 with fewer than two successes
};

struct BenchRow {
  VehicleKind vehicle = VehicleKind::V6W;
  Difficulty difficulty = Difficulty::Easy;
  std::string controller;
  CellStats stats;
};

struct BenchTable {
  std::vector<BenchRow> rows;
  std::vector<TrialResult> trials;
};

CellStats summarize(const std::vector<TrialResult>& trials);

struct BenchConfig {
  std::vector<VehicleKind> vehicles{VehicleKind::V6W, VehicleKind::V4W};
  std::vector<Difficulty> difficulties{Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult};
  /// Any of OL, RB, BC6, BC4, BC (bias-only smoke policy).
  std::vector<std::string> controllers{"OL", "RB", "BC6", "BC4"};
  int trials = 10;
  std::uint64_t seed = 1;
  TrialConfig trial;
  double lateral_jitter = 0.15;
  RbParams rb;
  DemoConfig demos;
  TrainConfig train;
  /// Pre-trained policies; when absent they are trained from scripted demos.
  std::map<std::string, BcParams> policies;

  BenchConfig();
};

/// Seed of the course used for one difficulty.
std::uint64_t course_seed(std::uint64_t base_seed, Difficulty d);
/// Seed of one trial (drives its lateral start offset).
std::uint64_t trial_seed(std::uint64_t base_seed, VehicleKind v, Difficulty d, int trial);

/// Trains BC6 / BC4 (whichever the config needs) from scripted demonstrations.
std::map<std::string, BcParams> train_policies(const BenchConfig& cfg);

BenchTable run_benchmark(const BenchConfig& cfg);

/// Fixed-precision plain-text grid mirroring the hardware results table.
std::string format_report(const BenchTable& table, const BenchConfig& cfg);
std::string format_csv(const BenchTable& table);
std::string format_trials_csv(const BenchTable& table);

/// Trains on `demos` and evaluates on the deploy vehicle. Rows are labelled
/// BC<axles of train vehicle>; the own-data row trains on deploy-vehicle demos.
struct CrossDeployResult {
  BenchRow own;
  BenchRow cross;
};

CrossDeployResult cross_deploy(VehicleKind train_vehicle, VehicleKind deploy_vehicle,
                               std::span<const Demonstration> train_demos,
                               std::span<const Demonstration> deploy_demos, const BenchConfig& cfg,
                               Difficulty difficulty);

/// Results measured on the physical testbed, kept for side-by-side reading.
/// They come from real hardware and are not expected to be reproduced here.
struct ReferenceCell {
  VehicleKind vehicle;
  Difficulty difficulty;
  const char* controller;
  int successes;
  double mean_time;
  double var_time;
};

const std::vector<ReferenceCell>& hardware_reference();

/// Controller label for a bench entry (BC6 / BC4 map to the policy map).
std::unique_ptr<Controller> make_controller(const std::string& name, const BenchConfig& cfg,
                                            const std::map<std::string, BcParams>& policies);

}  // namespace vw
