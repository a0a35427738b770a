#include "vw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "vw/error.hpp"
#include "vw/rng.hpp"

namespace vw {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Succeeded: return "Succeeded";
    case Outcome::Stuck: return "Stuck";
    case Outcome::Tipped: return "Tipped";
    case Outcome::Timeout: return "Timeout";
    case Outcome::Boundary: return "Boundary";
  }
  return "?";
}

Course make_course(const CourseSpec& spec, double apron) {
  return Course{spec, pad_flat_x(generate_course(spec), apron)};
}

StartPose start_pose(const CourseSpec& spec, int direction, double lateral_offset) {
  StartPose p;
  p.direction = direction >= 0 ? 1 : -1;
  p.y = 0.5 * spec.width_m + lateral_offset;
  if (p.direction > 0) {
    p.x = -kStartSetback;
    p.yaw = 0.0;
  } else {
    p.x = spec.length_m + kStartSetback;
    p.yaw = std::numbers::pi;
  }
  return p;
}

TrialResult run_trial(Controller& controller, const VehicleGeometry& geom, const Course& course,
                      const StartPose& start, const TrialConfig& cfg, Recorder* recorder,
                      const TickObserver& observer) {
  TrialResult result;
  result.controller = controller.id();
  result.difficulty = course.spec.difficulty;
  result.vehicle = geom.name;
  result.direction = start.direction;

  VehicleState state;
  try {
    state = spawn(course.map, geom, start.x, start.y, start.yaw);
  } catch (const BoundaryError&) {
    result.outcome = Outcome::Boundary;
    return result;
  }
  state.camera_tilt = std::clamp(cfg.camera_pitch - state.pose.pitch, -geom.camera_max_tilt, geom.camera_max_tilt);
  TrialMonitor monitor(course.spec.length_m, start.direction, cfg.status);
  auto* expert = dynamic_cast<ScriptedDriver*>(&controller);
  const bool want_depth = controller.needs_depth() || recorder != nullptr;

  controller.reset(state.t);
  const long max_ticks = std::lround(std::ceil(cfg.timeout / kTick - 1e-9));
  for (long tick = 1;; ++tick) {
    Observation obs = observe(state);
    if (want_depth) obs.depth = render_depth(course.map, state, geom, cfg.depth_side, cfg.depth_side);
    if (expert) expert->set_state(state);
    const Action action = controller.act(obs).clamped();
    if (recorder) recorder->record(obs, action);

    try {
      state = step(state, action, course.map, geom);
    } catch (const BoundaryError&) {
      result.outcome = Outcome::Boundary;
      result.ticks = static_cast<int>(tick);
      break;
    }
    state.t = tick * kTick;  // avoid drift from repeated addition
    camera_tilt_control(state, cfg.camera_pitch, kTick, geom);
    if (observer) observer(obs, action, state);
    result.ticks = static_cast<int>(tick);

    const TrialStatus status = monitor.update(state);
    if (status == TrialStatus::Succeeded) {
      result.outcome = Outcome::Succeeded;
      result.traversal_time = state.t;
      break;
    }
    if (status == TrialStatus::Tipped) {
      result.outcome = Outcome::Tipped;
      break;
    }
    if (status == TrialStatus::Stuck) {
      result.outcome = Outcome::Stuck;
      break;
    }
    if (tick >= max_ticks) {
      result.outcome = Outcome::Timeout;
      break;
    }
  }
  result.final_pose = state.pose;
  return result;
}

// ---------------------------------------------------------------- scripted driver

namespace {

constexpr double kExpertSpeed = 0.5;
constexpr double kExpertBoost = 0.8;
constexpr double kCrawlSpeed = 0.1;
constexpr double kStuckSpeed = 0.01;
constexpr double kHorizon = 1.0;
constexpr int kHorizonSteps = 8;
constexpr std::array<double, 9> kSteerFan{0.0, 0.08, -0.08, 0.16, -0.16, 0.25, -0.25, 0.35, -0.35};

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

ScriptedDriver::ScriptedDriver(const HeightMap& map, VehicleGeometry geom, double course_width, int direction)
    : map_(&map), geom_(std::move(geom)), centre_y_(0.5 * course_width), direction_(direction >= 0 ? 1 : -1) {}

void ScriptedDriver::reset(double t0) {
  stuck_time_ = 0.0;
  slow_time_ = 0.0;
  backup_until_ = -1.0;
  last_t_ = t0;
}

Action ScriptedDriver::act(const Observation& obs) {
  const double dt = std::max(obs.t - last_t_, 0.0);
  last_t_ = obs.t;
  if (obs.t < backup_until_) return Action{-0.5, backup_omega_, true, true, true};

  const double speed = obs.g.planar();
  slow_time_ = speed < kCrawlSpeed && obs.t > 0.0 ? slow_time_ + dt : 0.0;
  stuck_time_ = speed < kStuckSpeed && obs.t > 0.0 ? stuck_time_ + dt : 0.0;
  const Pose& p = state_.pose;
  const double goal_yaw = direction_ > 0 ? 0.0 : std::numbers::pi;
  if (stuck_time_ >= 2.0) {
    stuck_time_ = slow_time_ = 0.0;
    backup_until_ = obs.t + 1.5;
    // Reversing with this steering swings the nose back towards the centre line.
    const double lateral = (p.y - centre_y_) * direction_;
    backup_omega_ = lateral > 0 ? 0.3 : -0.3;
    return Action{-0.5, backup_omega_, true, true, true};
  }

  double best_cost = std::numeric_limits<double>::infinity();
  double best_omega = 0.0;
  const double ds = kHorizon / kHorizonSteps;
  for (const double omega : kSteerFan) {
    double x = p.x, y = p.y, yaw = p.yaw, risk = 0.0;
    bool valid = true;
    for (int k = 0; k < kHorizonSteps && valid; ++k) {
      yaw += ds / geom_.wheelbase() * std::tan(omega);
      x += ds * std::cos(yaw);
      y += ds * std::sin(yaw);
      try {
        const ChassisFit fit = fit_chassis(*map_, x, y, yaw, geom_);
        const double climb = std::max(0.0, fit.pitch);
        double r = std::pow(fit.roll / kTipLimit, 2) + std::pow(climb / kClimbLimitLow, 2);
        if (std::abs(fit.roll) > 0.55 || std::abs(fit.pitch) > 0.55) r += 5.0;
        // Nearer trouble weighs more.
        risk = std::max(risk, r * (1.0 - 0.5 * k / kHorizonSteps));
      } catch (const BoundaryError&) {
        valid = false;
      }
    }
    if (!valid) continue;
    const double heading = std::abs(wrap_angle(yaw - goal_yaw));
    const double lateral = std::abs(y - centre_y_);
    const double cost = 2.0 * risk + 0.6 * heading + 1.5 * lateral + 0.05 * std::abs(omega);
    if (cost < best_cost) {
      best_cost = cost;
      best_omega = omega;
    }
  }
  const double v = slow_time_ >= 0.5 ? kExpertBoost : kExpertSpeed;
  return Action{v, best_omega, true, true, true};
}

std::vector<Demonstration> record_demos(const DemoConfig& cfg, const std::filesystem::path& root) {
  const VehicleGeometry geom = VehicleGeometry::preset(cfg.vehicle);
  std::vector<Demonstration> out;
  TrialConfig tc;
  tc.timeout = cfg.timeout;
  tc.depth_side = cfg.depth_side;
  int index = 0;
  for (const Difficulty d : cfg.difficulties) {
    CourseSpec spec;
    spec.difficulty = d;
    spec.seed = derive_seed(cfg.seed, 0xde30 + static_cast<std::uint64_t>(d));
    const Course course = make_course(spec);
    for (int k = 0; k < cfg.per_difficulty; ++k, ++index) {
      const int direction = k % 2 == 0 ? 1 : -1;
      Manifest m;
      m.vehicle = cfg.vehicle;
      m.course_seed = spec.seed;
      m.course_difficulty = d;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%s-%02d", std::string(to_string(cfg.vehicle)).c_str(),
                    std::string(to_string(d)).c_str(), k);
      m.trial_id = id;
      std::unique_ptr<Recorder> rec = root.empty() ? std::make_unique<Recorder>(m)
                                                   : std::make_unique<Recorder>(root / id, m);
      ScriptedDriver driver(course.map, geom, spec.width_m, direction);
      Rng rng(derive_seed(cfg.seed, 0xd0 + static_cast<std::uint64_t>(index)));
      run_trial(driver, geom, course, start_pose(spec, direction, rng.uniform(-0.1, 0.1)), tc, rec.get());
      rec->close();
      if (rec->recorded().size() > 0) out.push_back(rec->recorded());
    }
  }
  return out;
}

// ---------------------------------------------------------------- benchmark

CellStats summarize(const std::vector<TrialResult>& trials) {
  CellStats s;
  s.trials = static_cast<int>(trials.size());
  std::vector<double> times;
  for (const auto& t : trials) {
    if (t.outcome == Outcome::Succeeded) times.push_back(*t.traversal_time);
  }
  s.successes = static_cast<int>(times.size());
  if (times.empty()) return s;
  double sum = 0.0;
  for (const double t : times) sum += t;
  s.mean_time = sum / times.size();
  if (times.size() >= 2) {
    double sq = 0.0;
    for (const double t : times) sq += (t - s.mean_time) * (t - s.mean_time);
    s.var_time = sq / (times.size() - 1);
  }
  return s;
}

BenchConfig::BenchConfig() {
  demos.per_difficulty = 2;
  demos.timeout = 25.0;
  train.epochs = 8;
  train.batch_size = 32;
  train.learning_rate = 1e-3;
}

std::uint64_t course_seed(std::uint64_t base_seed, Difficulty d) {
  return derive_seed(base_seed, 0xc0 + static_cast<std::uint64_t>(d));
}

std::uint64_t trial_seed(std::uint64_t base_seed, VehicleKind v, Difficulty d, int trial) {
  return derive_seed(base_seed, 0x10000 + 0x1000 * static_cast<std::uint64_t>(v) +
                                    0x100 * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(trial));
}

namespace {

std::string policy_name(VehicleKind v) { return v == VehicleKind::V6W ? "BC6" : "BC4"; }

BcParams bias_policy(const BcArch& arch) {
  BcParams p = BcParams::zeros(arch);
  p.layers.back().b = {0.5, 0.0};
  return p;
}

}  // namespace

std::map<std::string, BcParams> train_policies(const BenchConfig& cfg) {
  std::map<std::string, BcParams> out = cfg.policies;
  for (const VehicleKind v : {VehicleKind::V6W, VehicleKind::V4W}) {
    const std::string name = policy_name(v);
    if (out.count(name) || std::find(cfg.controllers.begin(), cfg.controllers.end(), name) == cfg.controllers.end()) {
      continue;
    }
    DemoConfig dc = cfg.demos;
    dc.vehicle = v;
    dc.seed = derive_seed(cfg.seed, 0xde00 + static_cast<std::uint64_t>(v));
    dc.depth_side = cfg.trial.depth_side;
    const auto demos = record_demos(dc);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 0xbc00 + static_cast<std::uint64_t>(v));
    out[name] = train(std::span<const Demonstration>(demos), tc).params;
  }
  return out;
}

std::unique_ptr<Controller> make_controller(const std::string& name, const BenchConfig& cfg,
                                            const std::map<std::string, BcParams>& policies) {
  if (name == "OL") return std::make_unique<OpenLoopController>();
  if (name == "RB") return std::make_unique<RuleBasedController>(cfg.rb);
  if (name == "BC") return std::make_unique<BcController>(bias_policy(cfg.train.arch), "BC");
  const auto it = policies.find(name);
  if (it == policies.end()) throw ParameterError("unknown controller '" + name + "'");
  return std::make_unique<BcController>(it->second, name);
}

BenchTable run_benchmark(const BenchConfig& cfg) {
  if (cfg.trials < 1) throw ParameterError("trials per cell must be positive");
  const auto policies = train_policies(cfg);
  BenchTable table;
  const int forward_trials = (cfg.trials + 1) / 2;
  for (const VehicleKind v : cfg.vehicles) {
    const VehicleGeometry geom = VehicleGeometry::preset(v);
    for (const Difficulty d : cfg.difficulties) {
      CourseSpec spec;
      spec.difficulty = d;
      spec.seed = course_seed(cfg.seed, d);
      const Course course = make_course(spec);
      for (const auto& name : cfg.controllers) {
        std::vector<TrialResult> cell;
        for (int trial = 0; trial < cfg.trials; ++trial) {
          const std::uint64_t seed = trial_seed(cfg.seed, v, d, trial);
          Rng rng(seed);
          const double offset = cfg.lateral_jitter > 0 ? rng.uniform(-cfg.lateral_jitter, cfg.lateral_jitter) : 0.0;
          const int direction = trial < forward_trials ? 1 : -1;
          auto controller = make_controller(name, cfg, policies);
          TrialResult r = run_trial(*controller, geom, course, start_pose(spec, direction, offset), cfg.trial);
          r.seed = seed;
          cell.push_back(r);
          table.trials.push_back(r);
        }
        table.rows.push_back({v, d, name, summarize(cell)});
      }
    }
  }
  return table;
}

namespace {

std::string cell_text(const CellStats& s) {
  char buf[64];
  if (s.successes == 0) {
    std::snprintf(buf, sizeof buf, "%d (-)", s.successes);
  } else {
    std::snprintf(buf, sizeof buf, "%d (%.1f+-%.1f)", s.successes, s.mean_time, s.var_time);
  }
  return buf;
}

}  // namespace

std::string format_report(const BenchTable& table, const BenchConfig& cfg) {
  std::ostringstream out;
  out << "Successful trials (out of " << cfg.trials << ") and traversal time in s (mean+-variance)\n";
  out << "base seed " << cfg.seed << ", timeout " << cfg.trial.timeout << " s, depth " << cfg.trial.depth_side
      << "x" << cfg.trial.depth_side << "\n\n";

  std::vector<std::pair<VehicleKind, std::string>> columns;
  for (const auto v : cfg.vehicles)
    for (const auto& c : cfg.controllers) columns.emplace_back(v, c);
  const auto find = [&](VehicleKind v, Difficulty d, const std::string& c) -> const BenchRow* {
    for (const auto& r : table.rows)
      if (r.vehicle == v && r.difficulty == d && r.controller == c) return &r;
    return nullptr;
  };
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-10s", "");
  out << buf;
  for (const auto& [v, c] : columns) {
    std::snprintf(buf, sizeof buf, " | %-18s", (std::string(to_string(v)) + " " + c).c_str());
    out << buf;
  }
  out << "\n";
  for (const auto d : cfg.difficulties) {
    std::snprintf(buf, sizeof buf, "%-10s", std::string(to_string(d)).c_str());
    out << buf;
    for (const auto& [v, c] : columns) {
      const BenchRow* r = find(v, d, c);
      std::snprintf(buf, sizeof buf, " | %-18s", r ? cell_text(r->stats).c_str() : "n/a");
      out << buf;
    }
    out << "\n";
  }

  std::map<Outcome, int> outcomes;
  for (const auto& t : table.trials) ++outcomes[t.outcome];
  out << "\noutcomes:";
  for (const auto& [o, n] : outcomes) out << " " << to_string(o) << "=" << n;
  out << "\n";
  return out.str();
}

std::string format_csv(const BenchTable& table) {
  std::string out = "vehicle,difficulty,controller,trials,successes,mean_time,var_time\n";
  char buf[160];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%d,%.6f,%.6f\n", std::string(to_string(r.vehicle)).c_str(),
                  std::string(to_string(r.difficulty)).c_str(), r.controller.c_str(), r.stats.trials,
                  r.stats.successes, r.stats.mean_time, r.stats.var_time);
    out += buf;
  }
  return out;
}

std::string format_trials_csv(const BenchTable& table) {
  std::string out = "vehicle,difficulty,controller,direction,seed,outcome,traversal_time,ticks,final_x,final_y\n";
  char buf[256];
  for (const auto& t : table.trials) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%llu,%s,%.2f,%d,%.6f,%.6f\n",
                  std::string(to_string(t.vehicle)).c_str(), std::string(to_string(t.difficulty)).c_str(),
                  t.controller.c_str(), t.direction, static_cast<unsigned long long>(t.seed),
                  std::string(to_string(t.outcome)).c_str(), t.traversal_time.value_or(0.0), t.ticks,
                  t.final_pose.x, t.final_pose.y);
    out += buf;
  }
  return out;
}

CrossDeployResult cross_deploy(VehicleKind train_vehicle, VehicleKind deploy_vehicle,
                               std::span<const Demonstration> train_demos,
                               std::span<const Demonstration> deploy_demos, const BenchConfig& cfg,
                               Difficulty difficulty) {
  TrainConfig tc = cfg.train;
  std::map<std::string, BcParams> policies;
  tc.seed = derive_seed(cfg.seed, 0xbc00 + static_cast<std::uint64_t>(train_vehicle));
  policies[policy_name(train_vehicle)] = train(train_demos, tc).params;
  if (deploy_vehicle != train_vehicle) {
    tc.seed = derive_seed(cfg.seed, 0xbc00 + static_cast<std::uint64_t>(deploy_vehicle));
    policies[policy_name(deploy_vehicle)] = train(deploy_demos, tc).params;
  }

  BenchConfig bc = cfg;
  bc.vehicles = {deploy_vehicle};
  bc.difficulties = {difficulty};
  bc.controllers = {policy_name(deploy_vehicle)};
  if (deploy_vehicle != train_vehicle) bc.controllers.push_back(policy_name(train_vehicle));
  bc.policies = policies;
  const BenchTable t = run_benchmark(bc);
  CrossDeployResult r;
  r.own = t.rows.front();
  r.cross = t.rows.back();
  return r;
}

const std::vector<ReferenceCell>& hardware_reference() {
  using enum Difficulty;
  constexpr auto V6 = VehicleKind::V6W;
  constexpr auto V4 = VehicleKind::V4W;
  static const std::vector<ReferenceCell> cells{
      {V6, Easy, "OL", 5, 20.7, 1.7},       {V6, Easy, "RB", 8, 19.2, 3.9},
      {V6, Easy, "BC6", 9, 13.8, 8.2},      {V6, Easy, "BC4", 10, 11.6, 1.9},
      {V6, Medium, "OL", 6, 15.4, 0.9},     {V6, Medium, "RB", 9, 14.8, 2.2},
      {V6, Medium, "BC6", 9, 14.6, 11.2},   {V6, Medium, "BC4", 10, 13.6, 2.3},
      {V6, Difficult, "OL", 3, 24.1, 2.6},  {V6, Difficult, "RB", 6, 14.3, 1.9},
      {V6, Difficult, "BC6", 6, 15.7, 18.5}, {V6, Difficult, "BC4", 9, 14.9, 2.9},
      {V4, Easy, "OL", 6, 17.7, 3.8},       {V4, Easy, "RB", 6, 13.4, 2.5},
      {V4, Easy, "BC6", 7, 17.2, 6.7},      {V4, Easy, "BC4", 9, 14.1, 7.7},
      {V4, Medium, "OL", 4, 15.6, 14.2},    {V4, Medium, "RB", 6, 12.9, 1.8},
      {V4, Medium, "BC6", 3, 19.2, 10.6},   {V4, Medium, "BC4", 8, 13.7, 1.6},
      {V4, Difficult, "OL", 3, 19.7, 29.4}, {V4, Difficult, "RB", 5, 16.8, 20.5},
      {V4, Difficult, "BC6", 3, 23.3, 43.4}, {V4, Difficult, "BC4", 7, 14.9, 8.2},
  };
  return cells;
}

}  // namespace vw
