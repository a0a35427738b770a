#include "vw/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "vw/error.hpp"
#include "vw/pgm.hpp"

namespace vw {

std::string_view to_string(VehicleKind v) { return v == VehicleKind::V6W ? "V6W" : "V4W"; }

VehicleKind parse_vehicle(std::string_view name) {
  if (name == "V6W" || name == "v6w") return VehicleKind::V6W;
  if (name == "V4W" || name == "v4w") return VehicleKind::V4W;
  throw ParameterError("unknown vehicle '" + std::string(name) + "'");
}

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Running: return "Running";
    case TrialStatus::Stuck: return "Stuck";
    case TrialStatus::Tipped: return "Tipped";
    case TrialStatus::Succeeded: return "Succeeded";
  }
  return "?";
}

VehicleGeometry VehicleGeometry::v6w() {
  VehicleGeometry g;
  g.name = VehicleKind::V6W;
  g.axle_x_offsets = {0.0, -0.471, -0.603};
  g.body_length = 0.863;
  g.camera_mount = {0.5 * 0.603 + 0.08, 0.0, 0.14};
  return g;
}

VehicleGeometry VehicleGeometry::v4w() {
  VehicleGeometry g;
  g.name = VehicleKind::V4W;
  g.axle_x_offsets = {0.0, -0.312};
  g.body_length = 0.523;
  g.camera_mount = {0.5 * 0.312 + 0.08, 0.0, 0.14};
  return g;
}

VehicleGeometry VehicleGeometry::preset(VehicleKind kind) {
  return kind == VehicleKind::V6W ? v6w() : v4w();
}

void VehicleGeometry::validate() const {
  if (axle_x_offsets.size() < 2) throw ParameterError("geometry needs at least two axles");
  if (axle_x_offsets.front() != 0.0) throw ParameterError("first axle offset must be 0");
  for (std::size_t k = 1; k < axle_x_offsets.size(); ++k) {
    if (!(axle_x_offsets[k] < axle_x_offsets[k - 1])) {
      throw ParameterError("axle offsets must be strictly decreasing");
    }
  }
  for (double d : {track_width, body_length, body_width, body_height, wheel_radius, camera_max_tilt}) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ParameterError("geometry dimensions must be positive");
  }
}

VehicleGeometry geometry_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    VehicleGeometry g = VehicleGeometry::preset(parse_vehicle(j.at("name").get<std::string>()));
    if (j.contains("axle_x_offsets")) g.axle_x_offsets = j["axle_x_offsets"].get<std::vector<double>>();
    if (j.contains("track_width")) g.track_width = j["track_width"].get<double>();
    if (j.contains("body_length")) g.body_length = j["body_length"].get<double>();
    if (j.contains("body_width")) g.body_width = j["body_width"].get<double>();
    if (j.contains("body_height")) g.body_height = j["body_height"].get<double>();
    if (j.contains("wheel_radius")) g.wheel_radius = j["wheel_radius"].get<double>();
    if (j.contains("camera_mount")) g.camera_mount = j["camera_mount"].get<std::array<double, 3>>();
    if (j.contains("camera_max_tilt")) g.camera_max_tilt = j["camera_max_tilt"].get<double>();
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("geometry config: ") + e.what());
  }
}

std::string geometry_to_json(const VehicleGeometry& g) {
  nlohmann::json j;
  j["name"] = std::string(to_string(g.name));
  j["axle_x_offsets"] = g.axle_x_offsets;
  j["track_width"] = g.track_width;
  j["body_length"] = g.body_length;
  j["body_width"] = g.body_width;
  j["body_height"] = g.body_height;
  j["wheel_radius"] = g.wheel_radius;
  j["camera_mount"] = g.camera_mount;
  j["camera_max_tilt"] = g.camera_max_tilt;
  return j.dump(2) + "\n";
}

VehicleGeometry load_geometry(const std::filesystem::path& path) {
  return geometry_from_json(read_file(path));
}

void save_geometry(const VehicleGeometry& geom, const std::filesystem::path& path) {
  write_file(path, geometry_to_json(geom));
}

Action Action::clamped() const noexcept {
  Action a = *this;
  a.v = std::clamp(v, -kMaxSpeed, kMaxSpeed);
  a.omega = std::clamp(omega, -kMaxSteer, kMaxSteer);
  return a;
}

double GroundSpeed::planar() const noexcept { return std::hypot(dx, dy); }

std::vector<std::array<double, 2>> wheel_positions(const VehicleGeometry& geom, double x, double y,
                                                   double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  std::vector<std::array<double, 2>> out;
  out.reserve(geom.wheel_count());
  for (int k = 0; k < geom.axle_count(); ++k) {
    const double bx = geom.axle_body_x(k);
    for (const double by : {0.5 * geom.track_width, -0.5 * geom.track_width}) {
      out.push_back({x + c * bx - s * by, y + s * bx + c * by});
    }
  }
  return out;
}

ChassisFit fit_chassis(const HeightMap& map, double x, double y, double yaw, const VehicleGeometry& geom) {
  const double r = 0.5 * geom.wheel_radius;
  const int n = geom.wheel_count();
  const auto wheels = wheel_positions(geom, x, y, yaw);

  ChassisFit fit;
  fit.support.resize(n);
  // Footprint: centre plus the four world-axis compass points.
  const std::array<std::array<double, 2>, 5> offsets{{{0, 0}, {r, 0}, {-r, 0}, {0, r}, {0, -r}}};
  for (int w = 0; w < n; ++w) {
    double h = -std::numeric_limits<double>::infinity();
    for (const auto& [ox, oy] : offsets) {
      const double px = wheels[w][0] + ox;
      const double py = wheels[w][1] + oy;
      if (!map.contains(px, py)) throw BoundaryError("wheel footprint left the map");
      h = std::max(h, height_at(map, px, py));
    }
    fit.support[w] = h;
  }

  // Least squares z = a + b*bx + cy*by over body-frame wheel positions
  // (normal equations, Cramer's rule).
  double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, sz = 0, sxz = 0, syz = 0;
  std::vector<std::array<double, 2>> body(n);
  for (int k = 0; k < geom.axle_count(); ++k) {
    body[2 * k] = {geom.axle_body_x(k), 0.5 * geom.track_width};
    body[2 * k + 1] = {geom.axle_body_x(k), -0.5 * geom.track_width};
  }
  for (int w = 0; w < n; ++w) {
    const auto [bx, by] = body[w];
    const double h = fit.support[w];
    sx += bx, sy += by, sz += h;
    sxx += bx * bx, sxy += bx * by, syy += by * by;
    sxz += bx * h, syz += by * h;
  }
  const double nn = n;
  const auto det3 = [](double a11, double a12, double a13, double a21, double a22, double a23, double a31,
                       double a32, double a33) {
    return a11 * (a22 * a33 - a23 * a32) - a12 * (a21 * a33 - a23 * a31) + a13 * (a21 * a32 - a22 * a31);
  };
  const double det = det3(nn, sx, sy, sx, sxx, sxy, sy, sxy, syy);
  double a = det3(sz, sx, sy, sxz, sxx, sxy, syz, sxy, syy) / det;
  const double b = det3(nn, sz, sy, sx, sxz, sxy, sy, syz, syy) / det;
  const double cy = det3(nn, sx, sz, sx, sxx, sxz, sy, sxy, syz) / det;

  double lift = -std::numeric_limits<double>::infinity();
  for (int w = 0; w < n; ++w) {
    lift = std::max(lift, fit.support[w] - (a + b * body[w][0] + cy * body[w][1]));
  }
  a += lift;

  fit.plane_height.resize(n);
  fit.wheel_contact.resize(n);
  for (int w = 0; w < n; ++w) {
    fit.plane_height[w] = a + b * body[w][0] + cy * body[w][1];
    fit.wheel_contact[w] = fit.plane_height[w] - fit.support[w] <= kContactTolerance;
  }
  fit.z = a + geom.wheel_radius;
  fit.pitch = std::atan(b);
  fit.roll = std::atan(cy);
  return fit;
}

double traction(const std::vector<bool>& contacts, bool lock_front, bool lock_rear, bool low_gear,
                double climb_pitch) {
  if (contacts.size() < 4 || contacts.size() % 2 != 0) {
    throw ParameterError("contacts must hold two wheels per axle");
  }
  const int axles = static_cast<int>(contacts.size() / 2);
  int driving = 0;
  for (int k = 0; k < axles; ++k) {
    const bool left = contacts[2 * k], right = contacts[2 * k + 1];
    const bool lock = k == 0 ? lock_front : lock_rear;
    if ((left && right) || (lock && (left || right))) ++driving;
  }
  const double base = static_cast<double>(driving) / axles;
  const double limit = low_gear ? kClimbLimitLow : kClimbLimitHigh;
  if (climb_pitch > limit) return 0.0;
  return base * (1.0 - std::max(0.0, climb_pitch) / limit);
}

VehicleState spawn(const HeightMap& map, const VehicleGeometry& geom, double x, double y, double yaw,
                   double camera_tilt) {
  const ChassisFit fit = fit_chassis(map, x, y, yaw, geom);
  VehicleState s;
  s.pose = {x, y, fit.z, fit.roll, fit.pitch, yaw};
  s.wheel_contact = fit.wheel_contact;
  s.ground_speed.z_clearance = fit.z - height_at(map, x, y);
  s.camera_tilt = camera_tilt;
  return s;
}

VehicleState step(const VehicleState& state, const Action& action, const HeightMap& map,
                  const VehicleGeometry& geom, double dt) {
  if (state.status != TrialStatus::Running) throw ParameterError("step on a terminated vehicle state");
  const Action a = action.clamped();
  const Pose& p = state.pose;
  const double climb = a.v >= 0.0 ? p.pitch : -p.pitch;
  const double factor = traction(state.wheel_contact, a.lock_front, a.lock_rear, a.low_gear, climb);
  const double v_eff = a.v * factor;

  const double yaw = p.yaw + (v_eff / geom.wheelbase()) * std::tan(a.omega) * dt;
  const double x = p.x + v_eff * std::cos(yaw) * std::cos(p.pitch) * dt;
  const double y = p.y + v_eff * std::sin(yaw) * std::cos(p.pitch) * dt;
  const ChassisFit fit = fit_chassis(map, x, y, yaw, geom);

  VehicleState next = state;
  next.pose = {x, y, fit.z, fit.roll, fit.pitch, yaw};
  next.wheel_contact = fit.wheel_contact;
  next.wheel_rim_speed.fill(a.v);
  const double wx = (x - p.x) / dt, wy = (y - p.y) / dt;
  next.ground_speed.dx = std::cos(yaw) * wx + std::sin(yaw) * wy;
  next.ground_speed.dy = -std::sin(yaw) * wx + std::cos(yaw) * wy;
  next.ground_speed.z_clearance = fit.z - height_at(map, x, y);
  next.ground_speed.speed_valid = true;
  next.ground_speed.z_valid = true;
  next.t = state.t + dt;
  if (std::abs(fit.roll) > kTipLimit || std::abs(fit.pitch) > kTipLimit) next.status = TrialStatus::Tipped;
  return next;
}

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;  // row-major

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

Vec3 apply(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}

}  // namespace

CameraFrame camera_frame(const VehicleState& state, const VehicleGeometry& geom) {
  const Pose& p = state.pose;
  // Nose-up pitch is a negative rotation about +y.
  const Mat3 body = mul(mul(rot_z(p.yaw), rot_y(-p.pitch)), rot_x(p.roll));
  const Mat3 cam = mul(body, rot_y(-state.camera_tilt));
  const Vec3 mount = apply(body, geom.camera_mount);
  CameraFrame f;
  f.origin = {p.x + mount[0], p.y + mount[1], p.z + mount[2]};
  f.forward = apply(cam, {1, 0, 0});
  f.left = apply(cam, {0, 1, 0});
  f.up = apply(cam, {0, 0, 1});
  return f;
}

std::array<double, 3> pixel_ray(const CameraFrame& cam, int width, int height, double fov, int u, int v) {
  const double focal = 0.5 * width / std::tan(0.5 * fov);
  const double cu = (u + 0.5) - 0.5 * width;
  const double cv = (v + 0.5) - 0.5 * height;
  Vec3 d;
  for (int k = 0; k < 3; ++k) d[k] = focal * cam.forward[k] - cu * cam.left[k] - cv * cam.up[k];
  const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  return {d[0] / n, d[1] / n, d[2] / n};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// First t in [t0, t1] where the ray is at or below the ground plane z = 0.
double ground_hit(const Vec3& o, const Vec3& d, double t0, double t1) {
  if (t0 > t1) return kInf;
  const double z0 = o[2] + t0 * d[2];
  if (z0 <= 0.0) return t0;
  if (d[2] >= 0.0) return kInf;
  const double t = -o[2] / d[2];
  return t <= t1 ? std::max(t, t0) : kInf;
}

// Smallest s in [0, span] with c0 + c1 s + c2 s^2 <= 0, given c0 > 0.
double first_crossing(double c0, double c1, double c2, double span) {
  double best = kInf;
  auto consider = [&](double s) {
    if (s >= 0.0 && s <= span) best = std::min(best, s);
  };
  const double scale = std::abs(c1) + std::abs(c0) + 1e-300;
  if (std::abs(c2) * std::max(span, 1e-12) <= 1e-14 * scale) {
    if (c1 < 0.0) consider(-c0 / c1);
  } else {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      const double q = -0.5 * (c1 + (c1 >= 0.0 ? root : -root));
      if (q != 0.0) {
        consider(q / c2);
        consider(c0 / q);
      }
    }
  }
  if (best == kInf && c0 + c1 * span + c2 * span * span <= 0.0) best = span;
  return best;
}

}  // namespace

double cast_ray(const HeightMap& map, const std::array<double, 3>& o, const std::array<double, 3>& d) {
  return cast_ray(map, o, d, map.max_height());
}

double cast_ray(const HeightMap& map, const std::array<double, 3>& o, const std::array<double, 3>& d,
                double max_height) {
  const double t_max = kMaxDepth;
  const double res = map.resolution();

  // Parametric overlap with the map rectangle.
  double t_in = 0.0, t_out = t_max;
  const double lo[2] = {map.origin_x(), map.origin_y()};
  const double hi[2] = {map.max_x(), map.max_y()};
  bool overlaps = true;
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) overlaps = false;
    } else {
      double ta = (lo[a] - o[a]) / d[a], tb = (hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t_in = std::max(t_in, ta);
      t_out = std::min(t_out, tb);
    }
  }
  // Terrain can only be hit while the ray is at or below the highest sample.
  if (d[2] < 0.0) {
    t_in = std::max(t_in, (o[2] - max_height) / -d[2]);
  } else if (o[2] > max_height) {
    overlaps = false;
  } else if (d[2] > 0.0) {
    t_out = std::min(t_out, (max_height - o[2]) / d[2]);
  }
  if (t_in > t_out) overlaps = false;

  auto finish = [](double t) { return t == kInf ? kMaxDepth : std::clamp(t, kMinDepth, kMaxDepth); };

  if (!overlaps) return finish(ground_hit(o, d, 0.0, t_max));
  if (const double t = ground_hit(o, d, 0.0, t_in); t < t_in) return finish(t);

  // Cell walk over [t_in, t_out].
  const int nx = map.length_cells(), ny = map.width_cells();
  const double gx0 = (o[0] + t_in * d[0] - map.origin_x()) / res;
  const double gy0 = (o[1] + t_in * d[1] - map.origin_y()) / res;
  int i = std::clamp(static_cast<int>(std::floor(gx0)), 0, nx - 2);
  int j = std::clamp(static_cast<int>(std::floor(gy0)), 0, ny - 2);
  const int step_i = d[0] > 0 ? 1 : -1;
  const int step_j = d[1] > 0 ? 1 : -1;
  const double delta_x = d[0] != 0.0 ? res / std::abs(d[0]) : kInf;
  const double delta_y = d[1] != 0.0 ? res / std::abs(d[1]) : kInf;
  auto boundary_t = [&](int idx, int stepdir, double dir, double origin, double o_comp) {
    if (dir == 0.0) return kInf;
    const double edge = origin + (stepdir > 0 ? idx + 1 : idx) * res;
    return (edge - o_comp) / dir;
  };
  double next_x = boundary_t(i, step_i, d[0], map.origin_x(), o[0]);
  double next_y = boundary_t(j, step_j, d[1], map.origin_y(), o[1]);

  double t_cur = t_in;
  while (t_cur <= t_out) {
    const double t_next = std::min({next_x, next_y, t_out});
    const double h00 = map.cell(i, j), h10 = map.cell(i + 1, j);
    const double h01 = map.cell(i, j + 1), h11 = map.cell(i + 1, j + 1);
    const double z_a = o[2] + t_cur * d[2];
    const double z_b = o[2] + t_next * d[2];
    if (std::min(z_a, z_b) <= std::max({h00, h10, h01, h11})) {
      const double u0 = (o[0] + t_cur * d[0] - map.origin_x()) / res - i;
      const double v0 = (o[1] + t_cur * d[1] - map.origin_y()) / res - j;
      const double du = d[0] / res, dv = d[1] / res;
      const double bu = h10 - h00, bv = h01 - h00, buv = h00 - h10 - h01 + h11;
      const double h0 = h00 + bu * u0 + bv * v0 + buv * u0 * v0;
      const double h1 = bu * du + bv * dv + buv * (u0 * dv + v0 * du);
      const double h2 = buv * du * dv;
      const double c0 = z_a - h0;
      const double s = c0 <= 0.0 ? 0.0 : first_crossing(c0, d[2] - h1, -h2, t_next - t_cur);
      if (s != kInf) return finish(t_cur + s);
    }
    if (t_next >= t_out) break;
    if (next_x <= next_y) {
      i += step_i;
      next_x += delta_x;
    } else {
      j += step_j;
      next_y += delta_y;
    }
    if (i < 0 || i > nx - 2 || j < 0 || j > ny - 2) break;
    t_cur = t_next;
  }
  return finish(ground_hit(o, d, t_out, t_max));
}

DepthImage render_depth(const HeightMap& map, const VehicleState& state, const VehicleGeometry& geom,
                        int width, int height) {
  if (width < 8 || height < 8) throw ShapeError("depth image must be at least 8x8");
  DepthImage img;
  img.width = width;
  img.height = height;
  img.data.resize(static_cast<std::size_t>(width) * height);
  const CameraFrame cam = camera_frame(state, geom);
  const double top = map.max_height();
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      img.data[static_cast<std::size_t>(v) * width + u] =
          cast_ray(map, cam.origin, pixel_ray(cam, width, height, img.fov, u, v), top);
    }
  }
  return img;
}

double camera_tilt_control(VehicleState& state, double target_world_pitch, double dt,
                           const VehicleGeometry& geom, const TiltPid& pid) {
  const double error = target_world_pitch - (state.pose.pitch + state.camera_tilt);
  const double derivative = state.tilt_prev_error ? (error - *state.tilt_prev_error) / dt : 0.0;
  const double rate = std::clamp(pid.kp * error + pid.kd * derivative, -pid.max_rate, pid.max_rate);
  state.tilt_prev_error = error;
  state.camera_tilt =
      std::clamp(state.camera_tilt + rate * dt, -geom.camera_max_tilt, geom.camera_max_tilt);
  return state.camera_tilt;
}

TrialMonitor::TrialMonitor(double course_length, int direction, StatusConfig config)
    : course_length_(course_length), direction_(direction >= 0 ? 1 : -1), config_(config) {}

bool TrialMonitor::goal_reached(double x) const noexcept {
  constexpr double eps = 1e-9;  // tolerate rounding in accumulated positions
  return direction_ > 0 ? x >= course_length_ - config_.goal_margin - eps : x <= config_.goal_margin + eps;
}

TrialStatus TrialMonitor::update(const VehicleState& state) {
  if (status_ != TrialStatus::Running) return status_;
  if (start_t_ < 0.0) start_t_ = state.t - kTick;
  if (state.status == TrialStatus::Tipped) return status_ = TrialStatus::Tipped;
  if (goal_reached(state.pose.x)) return status_ = TrialStatus::Succeeded;

  const double speed = state.ground_speed.planar();
  speeds_.emplace_back(state.t, speed);
  while (!speeds_.empty() && speeds_.front().first <= state.t - config_.stuck_window + 1e-9) {
    speeds_.pop_front();
  }
  if (state.t - start_t_ >= config_.stuck_window - 1e-9) {
    double sum = 0.0;
    for (const auto& [t, s] : speeds_) sum += s;
    if (sum / static_cast<double>(speeds_.size()) < config_.stuck_speed) status_ = TrialStatus::Stuck;
  }
  return status_;
}

TrialStatus trial_status(const std::vector<VehicleState>& history, double course_length, int direction,
                         StatusConfig config) {
  TrialMonitor monitor(course_length, direction, config);
  TrialStatus s = TrialStatus::Running;
  for (const auto& state : history) s = monitor.update(state);
  return s;
}

}  // namespace vw
