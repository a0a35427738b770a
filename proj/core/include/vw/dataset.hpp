#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vw/controllers.hpp"
#include "vw/error.hpp"
#include "vw/terrain.hpp"
#include "vw/vehicle.hpp"

namespace vw {

/// One timestamped record: observation streams plus the demonstrated action.
struct DataFrame {
  double t = 0.0;
  std::string depth_ref;  ///< path relative to the trial directory
  std::array<double, 4> w{};
  GroundSpeed g;
  bool lock_front = true;
  bool lock_rear = true;
  bool low_gear = true;
  double v = 0.0;
  double omega = 0.0;

  friend bool operator==(const DataFrame&, const DataFrame&) = default;
};

struct Manifest {
  int format_version = 1;
  VehicleKind vehicle = VehicleKind::V6W;
  int tick_hz = 20;
  std::size_t frame_count = 0;
  std::optional<std::uint64_t> course_seed;
  std::optional<Difficulty> course_difficulty;
  std::string trial_id = "trial";
  bool rgb_present = false;
  int depth_width = 0;
  int depth_height = 0;
  double depth_fov = 1.5707963267948966;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct Demonstration {
  Manifest manifest;
  std::vector<DataFrame> frames;
  std::vector<DepthImage> depth;  ///< parallel to frames, millimeter-quantized

  std::size_t size() const noexcept { return frames.size(); }
  Observation observation(std::size_t i) const;
  Action action(std::size_t i) const;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

enum class DatasetErrorKind {
  MissingManifest,
  BadManifest,
  VersionMismatch,
  CountMismatch,
  MalformedRecord,
  NonFiniteValue,
  NonMonotonicTime,
  MissingDepth,
  BadDepth,
};

std::string_view to_string(DatasetErrorKind k);

/// Validation failure; `frame` names the offending record when there is one.
class DatasetError : public DataError {
 public:
  DatasetError(DatasetErrorKind kind, const std::string& message, std::optional<std::size_t> frame = {});
  DatasetErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> frame() const noexcept { return frame_; }

 private:
  DatasetErrorKind kind_;
  std::optional<std::size_t> frame_;
};

inline constexpr int kFormatVersion = 1;

/// Value exactly as it will read back from records.txt (9 significant digits).
double quantize_record(double x);
/// Depth exactly as it will read back from its PGM (whole millimeters).
double quantize_depth(double meters);

/// Writes one trial directory: manifest.txt, records.txt, depth/NNNNNN.pgm.
class Recorder {
 public:
  Recorder(std::filesystem::path dir, Manifest manifest);
  /// In-memory recorder: frames are quantized exactly as on disk but nothing is written.
  explicit Recorder(Manifest manifest);
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;
  ~Recorder();

  /// Appends one frame and returns it as stored on disk.
  const DataFrame& record(const Observation& obs, const Action& act);

  /// Flushes records and writes the final manifest. Idempotent.
  void close();

  bool is_open() const noexcept { return open_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }
  const Demonstration& recorded() const noexcept { return demo_; }

 private:
  std::filesystem::path dir_;
  std::ofstream records_;
  Demonstration demo_;
  bool open_ = false;
};

std::string manifest_to_text(const Manifest& m);
Manifest manifest_from_text(const std::string& text);

/// Loads and fully validates a trial directory.
Demonstration load_demonstration(const std::filesystem::path& dir);

/// All trial directories under `root` (any subdirectory holding manifest.txt), sorted.
std::vector<std::filesystem::path> find_trials(const std::filesystem::path& root);

struct Histogram {
  double lo = 0, hi = 0;
  std::vector<std::size_t> counts;

  std::size_t total() const noexcept;
  std::size_t nonzero_bins() const noexcept;
};

struct DatasetStats {
  std::size_t frame_count = 0;
  double duration = 0.0;
  Histogram speed;
  Histogram steering;
  std::map<std::string, std::pair<double, double>> ranges;
};

DatasetStats dataset_stats(const Demonstration& demo, int speed_bins = 20, int steering_bins = 14);
std::string format_stats(const DatasetStats& stats);

}  // namespace vw
