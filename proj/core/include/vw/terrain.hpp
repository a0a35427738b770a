#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vw {

enum class Difficulty { Flat, Easy, Medium, Difficult };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view name);

/// Highest elevation a generated course of this difficulty may contain, meters.
double elevation_cap(Difficulty d);

/// Regular elevation grid. Sample (i, j) sits at world
/// (origin_x + i * resolution, origin_y + j * resolution); i runs along the
/// course length (x), j along its width (y). Heights are stored row-major with
/// one row per j: heights[j * length_cells + i].
class HeightMap {
 public:
  HeightMap(int length_cells, int width_cells, double resolution, double origin_x, double origin_y,
            std::vector<double> heights);

  /// Zero-filled map.
  static HeightMap flat(int length_cells, int width_cells, double resolution, double origin_x = 0.0,
                        double origin_y = 0.0);

  int length_cells() const noexcept { return length_cells_; }
  int width_cells() const noexcept { return width_cells_; }
  double resolution() const noexcept { return resolution_; }
  double origin_x() const noexcept { return origin_x_; }
  double origin_y() const noexcept { return origin_y_; }
  double max_x() const noexcept { return origin_x_ + (length_cells_ - 1) * resolution_; }
  double max_y() const noexcept { return origin_y_ + (width_cells_ - 1) * resolution_; }

  double cell(int i, int j) const noexcept {
    return heights_[static_cast<std::size_t>(j) * length_cells_ + i];
  }
  const std::vector<double>& heights() const noexcept { return heights_; }

  bool contains(double x, double y) const noexcept;

  double max_height() const noexcept;
  double min_height() const noexcept;

  friend bool operator==(const HeightMap&, const HeightMap&) = default;

 private:
  int length_cells_;
  int width_cells_;
  double resolution_;
  double origin_x_;
  double origin_y_;
  std::vector<double> heights_;
};

struct CourseSpec {
  Difficulty difficulty = Difficulty::Easy;
  std::uint64_t seed = 0;
  double length_m = 3.1;
  double width_m = 1.3;
  double resolution = 0.02;

  void validate() const;
};

/// Half-ellipsoid boulder resting at `base` elevation.
struct Rock {
  double cx = 0, cy = 0;
  double rx = 0, ry = 0, rz = 0;
  double yaw = 0;
  double base = 0;
};

/// Axis-aligned rectangular block standing on the ground plane.
struct Block {
  double cx = 0, cy = 0;
  double sx = 0, sy = 0;
  double height = 0;
};

struct CourseLayout {
  std::vector<Rock> rocks;
  std::vector<Block> blocks;
};

/// Length of the flat staging zone at each end of a course, meters.
inline constexpr double kStagingZone = 0.4;

/// Rock and block placement for a spec. Pure function of the spec.
CourseLayout layout_course(const CourseSpec& spec);

/// Rasterize a course. Same spec gives a bit-identical map. Heights are
/// quantized to whole millimeters so PGM export is lossless.
HeightMap generate_course(const CourseSpec& spec);

/// Bilinear interpolation. Throws QueryError outside the map.
double height_at(const HeightMap& map, double x, double y);

/// Like height_at but reads 0 (ground plane) outside the map.
double height_or_ground(const HeightMap& map, double x, double y) noexcept;

/// Central-difference gradient of height_at with step = resolution. Throws
/// QueryError unless the point is at least one cell inside the boundary.
std::pair<double, double> slope_at(const HeightMap& map, double x, double y);

/// Copy of `map` surrounded by a flat apron `margin_x` meters long at both
/// ends of the x axis (the course coordinates are preserved).
HeightMap pad_flat_x(const HeightMap& map, double margin_x);

/// 16-bit big-endian PGM in millimeters plus a `<path>.meta` key=value sidecar.
void save_heightmap(const HeightMap& map, const std::filesystem::path& pgm_path);
HeightMap load_heightmap(const std::filesystem::path& pgm_path);

}  // namespace vw
