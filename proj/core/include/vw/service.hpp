#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vw/dataset.hpp"
#include "vw/harness.hpp"

namespace vw {

// ---------------------------------------------------------------- wire codec

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Largest payload either side accepts.
inline constexpr std::size_t kMaxMessageBytes = 16u << 20;

/// 4-byte big-endian payload length followed by the payload.
std::string frame_message(std::string_view payload);

/// Incremental splitter for a length-prefixed byte stream.
class FrameReader {
 public:
  void feed(std::string_view bytes);
  /// Next complete payload, if any. Throws ProtocolError on an oversized length.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

/// Teleop command; field names follow the wire protocol.
struct Command {
  double v = 0.0;
  double omega = 0.0;
  bool d_front = true;
  bool d_rear = true;
  bool low_gear = true;

  Action action() const noexcept { return Action{v, omega, d_front, d_rear, low_gear}; }
  friend bool operator==(const Command&, const Command&) = default;
};

enum class ClientKind { Reset, Cmd, Record };

struct ClientMessage {
  ClientKind kind = ClientKind::Reset;
  Command cmd;          ///< Cmd only
  bool record = false;  ///< Record only: true for "on"
};

/// Parses one client payload. Throws ProtocolError with a readable reason.
ClientMessage parse_client_message(std::string_view payload);
std::string encode_client_message(const ClientMessage& msg);

std::string state_message(const VehicleState& state, TrialStatus status, bool recording,
                          std::optional<RbMode> fsm = std::nullopt);
/// Depth as base64 of big-endian 16-bit millimeter samples, row-major.
std::string depth_message(const DepthImage& depth);
std::string ack_message(std::string_view of, std::string_view detail = {});
std::string err_message(std::string_view message);

/// Decoded depth payload (millimeters).
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> mm;
};
DepthFrame parse_depth_message(std::string_view payload);

// ---------------------------------------------------------------- session

struct ServiceConfig {
  CourseSpec course;
  VehicleKind vehicle = VehicleKind::V6W;
  std::uint16_t port = 7460;  ///< 0 picks a free port
  std::filesystem::path record_root = "recordings";
  int depth_side = 64;
  double stale_after = 1.0;  ///< seconds without a command before the safety stop
  TrialConfig trial;
};

/// Simulation side of the service, free of sockets and clocks: every call
/// takes the current wall time in seconds so tests can drive it directly.
class Session {
 public:
  explicit Session(const ServiceConfig& cfg);
  ~Session();

  /// Replies to one raw client payload (malformed input yields an err frame).
  std::vector<std::string> handle(std::string_view payload, double now);
  /// One 20 Hz tick; returns the state and depth messages to stream.
  std::vector<std::string> tick(double now);
  /// Operator went away: command zero and stop any recording.
  void disconnect();

  const VehicleState& state() const noexcept { return state_; }
  bool recording() const noexcept { return recorder_ != nullptr; }
  /// Directory of the last finished recording.
  const std::filesystem::path& last_recording() const noexcept { return last_recording_; }

 private:
  void reset();
  std::filesystem::path next_recording_dir() const;
  std::optional<std::string> stop_recording();

  ServiceConfig cfg_;
  VehicleGeometry geom_;
  Course course_;
  StartPose start_;
  VehicleState state_;
  std::unique_ptr<TrialMonitor> monitor_;
  TrialStatus status_ = TrialStatus::Running;
  Command cmd_;
  std::optional<double> cmd_time_;
  long tick_ = 0;
  std::unique_ptr<Recorder> recorder_;
  std::filesystem::path last_recording_;
};

/// TCP front end. One operator at a time; a reader thread per connection
/// hands payloads to the tick loop through a queue, and only the tick loop
/// writes to the socket.
class Service {
 public:
  explicit Service(const ServiceConfig& cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  /// Runs the 20 Hz loop until `stop` becomes true.
  void run(const std::atomic<bool>& stop);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

}  // namespace vw
