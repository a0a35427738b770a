#pragma once

#include <array>
#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vw/terrain.hpp"

namespace vw {

enum class VehicleKind { V6W, V4W };

std::string_view to_string(VehicleKind v);
VehicleKind parse_vehicle(std::string_view name);

/// Body frame: origin at the midpoint between front and last axle on the
/// ground-contact plane raised by wheel_radius; x forward, y left, z up.
struct VehicleGeometry {
  VehicleKind name = VehicleKind::V6W;
  std::vector<double> axle_x_offsets;  ///< from the front axle, strictly decreasing, first = 0
  double track_width = 0.20;
  double body_length = 0.863;
  double body_width = 0.249;
  double body_height = 0.200;
  double wheel_radius = 0.06;
  std::array<double, 3> camera_mount{0.0, 0.0, 0.0};
  double camera_max_tilt = 1.05;

  static VehicleGeometry v6w();
  static VehicleGeometry v4w();
  static VehicleGeometry preset(VehicleKind kind);

  void validate() const;

  int axle_count() const noexcept { return static_cast<int>(axle_x_offsets.size()); }
  int wheel_count() const noexcept { return 2 * axle_count(); }
  double wheelbase() const noexcept { return -axle_x_offsets.back(); }

  /// Body-frame x of axle k.
  double axle_body_x(int k) const noexcept { return axle_x_offsets[k] + 0.5 * wheelbase(); }

  friend bool operator==(const VehicleGeometry&, const VehicleGeometry&) = default;
};

/// JSON preset I/O. Keys match the field names above.
VehicleGeometry load_geometry(const std::filesystem::path& path);
void save_geometry(const VehicleGeometry& geom, const std::filesystem::path& path);
VehicleGeometry geometry_from_json(const std::string& text);
std::string geometry_to_json(const VehicleGeometry& geom);

inline constexpr double kMaxSpeed = 1.0;
inline constexpr double kMaxSteer = 0.35;
inline constexpr double kTick = 0.05;

struct Action {
  double v = 0.0;      ///< commanded linear velocity, m/s
  double omega = 0.0;  ///< steering angle, rad
  bool lock_front = true;
  bool lock_rear = true;
  bool low_gear = true;

  /// Copy with v and omega clamped to their bounds.
  Action clamped() const noexcept;

  friend bool operator==(const Action&, const Action&) = default;
};

enum class TrialStatus { Running, Stuck, Tipped, Succeeded };

std::string_view to_string(TrialStatus s);

struct Pose {
  double x = 0, y = 0, z = 0;
  double roll = 0, pitch = 0, yaw = 0;  ///< roll > 0 lifts the left side, pitch > 0 raises the nose

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Optical flow / range sensor reading in the body frame.
struct GroundSpeed {
  double dx = 0;           ///< forward speed, m/s
  double dy = 0;           ///< lateral speed, m/s
  double z_clearance = 0;  ///< body origin height above the terrain below it, m
  bool speed_valid = true;
  bool z_valid = true;

  double planar() const noexcept;

  friend bool operator==(const GroundSpeed&, const GroundSpeed&) = default;
};

struct VehicleState {
  Pose pose;
  std::vector<bool> wheel_contact;         ///< axle-major: (left, right) per axle
  std::array<double, 4> wheel_rim_speed{};  ///< wheels of the two front axles
  GroundSpeed ground_speed;
  double camera_tilt = 0.0;
  std::optional<double> tilt_prev_error;  ///< PID memory for the derivative term
  double t = 0.0;
  TrialStatus status = TrialStatus::Running;

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

inline constexpr double kMaxDepth = 5.0;
inline constexpr double kMinDepth = 1e-3;

struct DepthImage {
  int width = 0;
  int height = 0;
  double fov = 1.5707963267948966;  ///< horizontal field of view, rad
  std::vector<double> data;          ///< row-major, row 0 at the top, meters in (0, 5]

  double at(int u, int v) const noexcept { return data[static_cast<std::size_t>(v) * width + u]; }

  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

struct ChassisFit {
  double z = 0;      ///< body origin height (contact plane + wheel radius)
  double roll = 0;
  double pitch = 0;
  std::vector<bool> wheel_contact;
  std::vector<double> support;       ///< per-wheel terrain support height
  std::vector<double> plane_height;  ///< lifted contact plane evaluated under each wheel
};

inline constexpr double kContactTolerance = 0.005;

/// World (x, y) of every wheel centre, axle-major (left, right).
std::vector<std::array<double, 2>> wheel_positions(const VehicleGeometry& geom, double x, double y,
                                                   double yaw);

/// Least-squares contact plane over per-wheel support heights, lifted to sit
/// at or above every support. Throws BoundaryError if a footprint leaves the map.
ChassisFit fit_chassis(const HeightMap& map, double x, double y, double yaw, const VehicleGeometry& geom);

inline constexpr double kClimbLimitLow = 0.61;
inline constexpr double kClimbLimitHigh = 0.35;

/// Fraction of commanded speed that becomes ground motion. `climb_pitch` is
/// the pitch along the direction of travel (> 0 is uphill).
double traction(const std::vector<bool>& contacts, bool lock_front, bool lock_rear, bool low_gear,
                double climb_pitch);

inline constexpr double kTipLimit = 0.785;

/// Initial state resting at (x, y, yaw).
VehicleState spawn(const HeightMap& map, const VehicleGeometry& geom, double x, double y, double yaw,
                   double camera_tilt = 0.0);

/// One quasi-static tick. Pure: identical inputs give a bit-identical result.
VehicleState step(const VehicleState& state, const Action& action, const HeightMap& map,
                  const VehicleGeometry& geom, double dt = kTick);

/// Camera optical centre and unit axes (forward, left, up) in the world frame.
struct CameraFrame {
  std::array<double, 3> origin;
  std::array<double, 3> forward, left, up;
};

CameraFrame camera_frame(const VehicleState& state, const VehicleGeometry& geom);

/// Unit ray through the centre of pixel (u, v) for a pinhole of the given fov.
std::array<double, 3> pixel_ray(const CameraFrame& cam, int width, int height, double fov, int u, int v);

/// Exact first intersection of a ray with the bilinear terrain surface
/// (ground plane outside the map), clamped to [kMinDepth, kMaxDepth].
double cast_ray(const HeightMap& map, const std::array<double, 3>& origin, const std::array<double, 3>& dir);
/// Same, with the map's maximum height precomputed.
double cast_ray(const HeightMap& map, const std::array<double, 3>& origin, const std::array<double, 3>& dir,
                double max_height);

DepthImage render_depth(const HeightMap& map, const VehicleState& state, const VehicleGeometry& geom,
                        int width, int height);

struct TiltPid {
  double kp = 4.0;
  double kd = 0.2;
  double max_rate = 1.0;
};

/// One PID step towards a world-frame camera pitch. Updates tilt_prev_error
/// and returns the new tilt, clamped to +/- camera_max_tilt.
double camera_tilt_control(VehicleState& state, double target_world_pitch, double dt,
                           const VehicleGeometry& geom, const TiltPid& pid = {});

struct StatusConfig {
  double goal_margin = 0.2;
  double stuck_window = 10.0;
  double stuck_speed = 0.02;
};

/// Rolling absorbing-status monitor for one trial.
class TrialMonitor {
 public:
  /// `direction` +1 drives towards +x (goal at course_length - margin), -1
  /// towards -x (goal at margin).
  TrialMonitor(double course_length, int direction = 1, StatusConfig config = {});

  TrialStatus update(const VehicleState& state);
  TrialStatus status() const noexcept { return status_; }
  bool goal_reached(double x) const noexcept;

 private:
  double course_length_;
  int direction_;
  StatusConfig config_;
  double start_t_ = -1.0;
  std::deque<std::pair<double, double>> speeds_;  // (t, planar speed)
  TrialStatus status_ = TrialStatus::Running;
};

/// Stateless form over an explicit history (oldest first).
TrialStatus trial_status(const std::vector<VehicleState>& history, double course_length,
                         int direction = 1, StatusConfig config = {});

}  // namespace vw
