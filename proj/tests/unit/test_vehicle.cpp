#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "vw/error.hpp"
#include "vw/rng.hpp"
#include "vw/vehicle.hpp"

using namespace vw;

namespace {

const VehicleGeometry kV6 = VehicleGeometry::v6w();
const VehicleGeometry kV4 = VehicleGeometry::v4w();

// Support height of one wheel recomputed from the footprint definition.
double support_oracle(const HeightMap& m, double x, double y, double r) {
  const double d = 0.5 * r;
  double h = vwtest::bilinear_oracle(m, x, y);
  for (const auto& [dx, dy] : {std::pair{d, 0.0}, {-d, 0.0}, {0.0, d}, {0.0, -d}})
    h = std::max(h, vwtest::bilinear_oracle(m, x + dx, y + dy));
  return h;
}

std::vector<bool> pattern(unsigned bits, int wheels) {
  std::vector<bool> c(wheels);
  for (int i = 0; i < wheels; ++i) c[i] = (bits >> i) & 1u;
  return c;
}

}  // namespace

TEST_CASE("geometry presets carry the measured dimensions") {
  CHECK(kV6.axle_x_offsets == std::vector<double>{0.0, -0.471, -0.603});
  CHECK(kV4.axle_x_offsets == std::vector<double>{0.0, -0.312});
  CHECK(kV6.body_length == 0.863);
  CHECK(kV4.body_length == 0.523);
  CHECK(kV6.body_width == 0.249);
  CHECK(kV6.body_height == 0.200);
  CHECK(kV6.wheel_count() == 6);
  CHECK(kV4.wheel_count() == 4);
  CHECK(kV6.wheelbase() == 0.603);
}

TEST_CASE("geometry JSON round-trips and validates") {
  const auto dir = vwtest::scratch_dir("geometry");
  save_geometry(kV6, dir / "v6w.json");
  CHECK(load_geometry(dir / "v6w.json") == kV6);
  const std::string text = geometry_to_json(kV4);
  CHECK(text.find("\"axle_x_offsets\"") != std::string::npos);
  CHECK(geometry_from_json(text) == kV4);
  VehicleGeometry bad = kV4;
  bad.axle_x_offsets = {0.0, 0.1};
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("action clamping") {
  const Action a = Action{2.0, -1.0, false, true, false}.clamped();
  CHECK(a.v == 1.0);
  CHECK(a.omega == -0.35);
  CHECK_FALSE(a.lock_front);
  CHECK_FALSE(a.low_gear);
}

TEST_CASE("chassis on flat ground rests level with every wheel down") {
  const HeightMap m = HeightMap::flat(80, 60, 0.02);
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const ChassisFit f = fit_chassis(m, rng.uniform(0.5, 1.0), rng.uniform(0.5, 0.7), rng.uniform(-3, 3), kV6);
    CHECK(f.z == doctest::Approx(kV6.wheel_radius).epsilon(1e-12));
    CHECK(std::abs(f.roll) < 1e-12);
    CHECK(std::abs(f.pitch) < 1e-12);
    for (bool c : f.wheel_contact) CHECK(c);
  }
}

TEST_CASE("ramp fixture gives pitch atan(slope)") {
  const HeightMap m = vwtest::function_map(120, 60, 0.02, 0.0, 0.0, [](double x, double) { return 0.2 * x; });
  for (const auto* g : {&kV6, &kV4}) {
    const ChassisFit f = fit_chassis(m, 1.2, 0.6, 0.0, *g);
    CHECK(std::abs(f.pitch - std::atan(0.2)) <= 1e-6);
    CHECK(std::abs(f.roll) <= 1e-6);
    const ChassisFit back = fit_chassis(m, 1.2, 0.6, std::numbers::pi, *g);
    CHECK(std::abs(back.pitch + std::atan(0.2)) <= 1e-6);
  }
}

TEST_CASE("single step under the left wheels gives roll atan(step / track)") {
  // Left of a heading +x vehicle is +y. Cells from y = 0.62 up are raised.
  const HeightMap m = vwtest::function_map(120, 60, 0.02, 0.0, 0.0, [](double, double y) { return y > 0.61 ? 0.1 : 0.0; });
  for (const auto* g : {&kV6, &kV4}) {
    const ChassisFit f = fit_chassis(m, 1.0, 0.6, 0.0, *g);
    CHECK(std::abs(std::abs(f.roll) - std::atan(0.1 / g->track_width)) <= 1e-6);
    CHECK(f.roll > 0.0);
    CHECK(std::abs(f.pitch) <= 1e-6);
    for (std::size_t i = 0; i < f.support.size(); ++i) {
      CHECK(f.support[i] == doctest::Approx(i % 2 == 0 ? 0.1 : 0.0));
      CHECK(f.wheel_contact[i] == (f.plane_height[i] - f.support[i] <= kContactTolerance));
    }
  }
}

TEST_CASE("wheel positions follow the body frame") {
  const auto w = wheel_positions(kV4, 1.0, 2.0, std::numbers::pi / 2);
  REQUIRE(w.size() == 4);
  // Heading +y: the front axle sits half a wheelbase ahead, left is -x.
  CHECK(w[0][0] == doctest::Approx(1.0 - 0.1));
  CHECK(w[0][1] == doctest::Approx(2.0 + 0.156));
  CHECK(w[3][0] == doctest::Approx(1.0 + 0.1));
  CHECK(w[3][1] == doctest::Approx(2.0 - 0.156));
}

TEST_CASE("non-penetration and contact rule hold on random poses") {
  for (const Difficulty d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult}) {
    CourseSpec s;
    s.difficulty = d;
    s.seed = 17;
    const HeightMap m = generate_course(s);
    Rng rng(static_cast<std::uint64_t>(d) + 100);
    for (int k = 0; k < 300; ++k) {
      const VehicleGeometry& g = k % 2 ? kV6 : kV4;
      const double x = rng.uniform(0.5, 2.6), y = rng.uniform(0.4, 0.9), yaw = rng.uniform(-3.1, 3.1);
      const ChassisFit f = fit_chassis(m, x, y, yaw, g);
      const auto wheels = wheel_positions(g, x, y, yaw);
      bool any_contact = false;
      for (std::size_t i = 0; i < wheels.size(); ++i) {
        REQUIRE(f.plane_height[i] >= f.support[i] - 1e-12);
        REQUIRE(std::abs(f.support[i] - support_oracle(m, wheels[i][0], wheels[i][1], g.wheel_radius)) < 1e-12);
        REQUIRE(f.wheel_contact[i] == (f.plane_height[i] - f.support[i] <= kContactTolerance));
        any_contact |= f.wheel_contact[i];
      }
      REQUIRE(any_contact);
    }
  }
}

TEST_CASE("fit_chassis raises BoundaryError when a wheel leaves the map") {
  const HeightMap m = HeightMap::flat(40, 40, 0.02);
  CHECK_THROWS_AS(fit_chassis(m, 0.05, 0.4, 0.0, kV6), BoundaryError);
}

TEST_CASE("traction examples") {
  CHECK(traction(std::vector<bool>(6, true), false, false, true, 0.0) == 1.0);
  std::vector<bool> c(4, true);
  c[0] = false;  // front-left airborne
  CHECK(traction(c, false, true, true, 0.0) == 0.5);
  CHECK(traction(c, true, true, true, 0.0) == 1.0);
  CHECK(traction(std::vector<bool>(4, true), true, true, true, 0.7) == 0.0);
  CHECK(traction(std::vector<bool>(4, true), true, true, false, 0.4) == 0.0);
  CHECK(traction(std::vector<bool>(4, true), true, true, true, 0.305) == doctest::Approx(0.5));
  CHECK(traction(std::vector<bool>(4, true), true, true, true, -0.3) == 1.0);
}

TEST_CASE("traction truth table with lock and gear monotonicity") {
  for (const int wheels : {4, 6}) {
    for (unsigned bits = 0; bits < (1u << wheels); ++bits) {
      const auto c = pattern(bits, wheels);
      for (const double pitch : {-0.2, 0.0, 0.2, 0.4, 0.7}) {
        for (int locks = 0; locks < 4; ++locks) {
          const bool lf = locks & 1, lr = locks & 2;
          for (const bool low : {false, true}) {
            const double t = traction(c, lf, lr, low, pitch);
            REQUIRE(t == vwtest::traction_oracle(c, lf, lr, low, pitch));
            REQUIRE(traction(c, true, lr, low, pitch) >= t);
            REQUIRE(traction(c, lf, true, low, pitch) >= t);
            if (pitch >= 0.0) REQUIRE(traction(c, lf, lr, true, pitch) >= traction(c, lf, lr, false, pitch));
          }
        }
      }
    }
  }
}

TEST_CASE("straight driving on flat ground") {
  const HeightMap m = HeightMap::flat(200, 60, 0.02);
  VehicleState s = spawn(m, kV6, 0.8, 0.6, 0.0);
  const double x0 = s.pose.x;
  for (int k = 0; k < 20; ++k) s = step(s, Action{0.5, 0.0}, m, kV6);
  CHECK(std::abs(s.pose.x - x0 - 0.5) <= 1e-9);
  CHECK(s.pose.yaw == 0.0);
  CHECK(s.t == doctest::Approx(1.0));
  CHECK(s.ground_speed.dx == doctest::Approx(0.5));
  CHECK(s.wheel_rim_speed == std::array<double, 4>{0.5, 0.5, 0.5, 0.5});
  CHECK(s.ground_speed.speed_valid);
  CHECK(s.ground_speed.z_clearance == doctest::Approx(kV6.wheel_radius));
}

TEST_CASE("one steering step matches the bicycle model") {
  const HeightMap m = HeightMap::flat(200, 60, 0.02);
  for (const auto* g : {&kV6, &kV4}) {
    const VehicleState s0 = spawn(m, *g, 1.0, 0.6, 0.3);
    const VehicleState s1 = step(s0, Action{0.5, 0.35}, m, *g);
    CHECK(s1.pose.yaw - 0.3 == doctest::Approx(0.5 / g->wheelbase() * std::tan(0.35) * 0.05).epsilon(1e-12));
  }
}

TEST_CASE("climb beyond the gear limit slips fully") {
  const HeightMap m = vwtest::function_map(160, 60, 0.02, 0.0, 0.0, [](double x, double) { return 0.8 * x; });
  const VehicleState s0 = spawn(m, kV4, 1.5, 0.6, 0.0);
  REQUIRE(s0.pose.pitch > kClimbLimitLow);
  const VehicleState s1 = step(s0, Action{0.5, 0.0}, m, kV4);
  CHECK(s1.pose.x == s0.pose.x);
  CHECK(s1.pose.y == s0.pose.y);
  CHECK(s1.pose.z == s0.pose.z);
  CHECK(s1.t > s0.t);
  CHECK(s1.wheel_rim_speed[0] == 0.5);
  CHECK(s1.ground_speed.planar() == 0.0);
}

TEST_CASE("steps are deterministic and slip is observable") {
  CourseSpec spec;
  spec.difficulty = Difficulty::Difficult;
  spec.seed = 4;
  const HeightMap m = pad_flat_x(generate_course(spec), 0.75);
  VehicleState a = spawn(m, kV6, -0.2, 0.65, 0.0);
  VehicleState b = a;
  Rng rng(8);
  for (int k = 0; k < 400 && a.status == TrialStatus::Running; ++k) {
    const Action act{rng.uniform(0.1, 1.0), rng.uniform(-0.35, 0.35), rng.uniform() < 0.5, rng.uniform() < 0.5,
                     rng.uniform() < 0.5};
    const double factor = traction(a.wheel_contact, act.lock_front, act.lock_rear, act.low_gear, a.pose.pitch);
    try {
      a = step(a, act, m, kV6);
      b = step(b, act, m, kV6);
    } catch (const BoundaryError&) {
      break;
    }
    REQUIRE(a == b);
    if (factor < 1.0) REQUIRE(a.wheel_rim_speed[0] > a.ground_speed.planar());
    REQUIRE(std::abs(a.pose.roll) <= std::numbers::pi / 2);
  }
}

TEST_CASE("tip-over is flagged past 45 degrees") {
  const HeightMap m = vwtest::function_map(100, 100, 0.02, 0.0, 0.0, [](double, double y) { return 1.2 * y; });
  const VehicleState s0 = spawn(m, kV4, 1.0, 1.0, 0.0);
  const VehicleState s1 = step(s0, Action{0.0, 0.0}, m, kV4);
  CHECK(s1.status == TrialStatus::Tipped);
  CHECK_THROWS_AS(step(s1, Action{}, m, kV4), ParameterError);
}

TEST_CASE("depth: straight down over flat ground reads the camera height") {
  const HeightMap m = HeightMap::flat(200, 200, 0.02);
  VehicleState s = spawn(m, kV4, 2.0, 2.0, 0.0);
  s.camera_tilt = -kV4.camera_max_tilt;
  s.pose.pitch = -(std::numbers::pi / 2 - kV4.camera_max_tilt);
  const CameraFrame cam = camera_frame(s, kV4);
  const DepthImage d = render_depth(m, s, kV4, 9, 9);
  CHECK(d.at(4, 4) == doctest::Approx(cam.origin[2]).epsilon(1e-9));
}

TEST_CASE("depth: level camera sees no ground above the horizon") {
  const HeightMap m = HeightMap::flat(200, 200, 0.02);
  VehicleState s = spawn(m, kV6, 2.0, 2.0, 0.0);
  s.camera_tilt = 0.0;
  const DepthImage d = render_depth(m, s, kV6, 16, 16);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 16; ++u) CHECK(d.at(u, v) == kMaxDepth);
  for (int u = 0; u < 16; ++u) CHECK(d.at(u, 15) < kMaxDepth);
  for (double x : d.data) {
    CHECK(x > 0.0);
    CHECK(x <= kMaxDepth);
  }
}

TEST_CASE("depth agrees with the fine-step oracle") {
  CourseSpec spec;
  spec.difficulty = Difficulty::Medium;
  spec.seed = 6;
  const HeightMap m = pad_flat_x(generate_course(spec), 0.75);
  Rng rng(21);
  for (int k = 0; k < 5; ++k) {
    VehicleState s = spawn(m, kV6, rng.uniform(0.0, 3.0), rng.uniform(0.4, 0.9), rng.uniform(-3.1, 3.1));
    s.camera_tilt = rng.uniform(-0.8, 0.2);
    const DepthImage d = render_depth(m, s, kV6, 24, 24);
    const DepthImage o = vwtest::render_oracle(m, s, kV6, 24, 24, 0.05 * m.resolution());
    for (std::size_t i = 0; i < d.data.size(); ++i) REQUIRE(std::abs(d.data[i] - o.data[i]) <= m.resolution());
  }
}

TEST_CASE("cast_ray hits a known plane exactly") {
  const HeightMap m = HeightMap::flat(100, 100, 0.02);
  const double s2 = std::sqrt(0.5);
  CHECK(cast_ray(m, {1.0, 1.0, 0.3}, {s2, 0.0, -s2}) == doctest::Approx(0.3 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(cast_ray(m, {1.0, 1.0, 0.3}, {1.0, 0.0, 0.0}) == kMaxDepth);
}

TEST_CASE("tilt control: zero error leaves the tilt unchanged") {
  const HeightMap m = HeightMap::flat(100, 100, 0.02);
  VehicleState s = spawn(m, kV6, 1.0, 1.0, 0.0);
  s.camera_tilt = -0.5;
  CHECK(camera_tilt_control(s, -0.5, kTick, kV6) == -0.5);
}

TEST_CASE("tilt control converges after a sudden chassis pitch") {
  VehicleState s;
  s.camera_tilt = -0.5;
  camera_tilt_control(s, -0.5, kTick, kV6);
  s.pose.pitch = 0.3;
  // Independent closed-loop simulation of the same PD law.
  double tilt = -0.5, prev = 0.0;
  bool have_prev = true;
  int ticks = 0;
  for (; ticks < 30; ++ticks) {
    const double e = -0.5 - (0.3 + tilt);
    const double rate = std::clamp(4.0 * e + (have_prev ? 0.2 * (e - prev) / kTick : 0.0), -1.0, 1.0);
    prev = e;
    tilt = std::clamp(tilt + rate * kTick, -1.05, 1.05);
    camera_tilt_control(s, -0.5, kTick, kV6);
    REQUIRE(s.camera_tilt == doctest::Approx(tilt).epsilon(1e-12));
  }
  CHECK(std::abs(s.pose.pitch + s.camera_tilt + 0.5) <= 0.01);
}

TEST_CASE("tilt saturates at the mount limit") {
  VehicleState s;
  for (int k = 0; k < 100; ++k) camera_tilt_control(s, 3.0, kTick, kV6);
  CHECK(s.camera_tilt == kV6.camera_max_tilt);
  for (int k = 0; k < 100; ++k) camera_tilt_control(s, -3.0, kTick, kV6);
  CHECK(s.camera_tilt == -kV6.camera_max_tilt);
}

TEST_CASE("trial status: goal, tip, stuck, running") {
  auto at = [](double x, double t, double speed) {
    VehicleState s;
    s.pose.x = x;
    s.t = t;
    s.ground_speed.dx = speed;
    return s;
  };
  CHECK(trial_status({at(1.0, 0.05, 0.5), at(2.95, 0.1, 0.5)}, 3.1) == TrialStatus::Succeeded);
  CHECK(trial_status({at(0.15, 0.05, 0.5)}, 3.1, -1) == TrialStatus::Succeeded);
  VehicleState tipped = at(1.0, 0.05, 0.0);
  tipped.pose.roll = 0.8;
  tipped.status = TrialStatus::Tipped;
  CHECK(trial_status({tipped}, 3.1) == TrialStatus::Tipped);

  std::vector<VehicleState> stuck;
  for (int k = 1; k <= 200; ++k) stuck.push_back(at(1.0, k * kTick, 0.0));
  CHECK(trial_status(std::vector<VehicleState>(stuck.begin(), stuck.begin() + 150), 3.1) == TrialStatus::Running);
  CHECK(trial_status(stuck, 3.1) == TrialStatus::Stuck);

  std::vector<VehicleState> moving;
  for (int k = 1; k <= 400; ++k) moving.push_back(at(1.0, k * kTick, 0.1));
  CHECK(trial_status(moving, 3.1) == TrialStatus::Running);

  // Absorbing: a later goal crossing does not undo Stuck.
  stuck.push_back(at(3.0, 10.05, 0.5));
  CHECK(trial_status(stuck, 3.1) == TrialStatus::Stuck);
}
