#include "vw/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "vw/error.hpp"

namespace vw {

using json = nlohmann::json;

// ---------------------------------------------------------------- base64

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t n = bytes[i] << 16;
    if (rest == 2) n |= bytes[i + 1] << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t n = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int v;
      if (c == '=' && last && k >= 2) {
        ++pad;
        v = 0;
      } else {
        if (pad > 0) throw ProtocolError("base64 data after padding");
        v = b64_value(c);
        if (v < 0) throw ProtocolError("invalid base64 character");
      }
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

// ---------------------------------------------------------------- framing

std::string frame_message(std::string_view payload) {
  if (payload.size() > kMaxMessageBytes) throw ProtocolError("message too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out += static_cast<char>(n >> 24);
  out += static_cast<char>(n >> 16);
  out += static_cast<char>(n >> 8);
  out += static_cast<char>(n);
  out += payload;
  return out;
}

void FrameReader::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameReader::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto* b = reinterpret_cast<const unsigned char*>(buffer_.data());
  const std::size_t n = (std::size_t{b[0]} << 24) | (std::size_t{b[1]} << 16) | (std::size_t{b[2]} << 8) | b[3];
  if (n > kMaxMessageBytes) throw ProtocolError("declared message length exceeds limit");
  if (buffer_.size() < 4 + n) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + n);
  return payload;
}

// ---------------------------------------------------------------- messages

namespace {

double require_number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  if (!it->is_number()) throw ProtocolError(std::string("field '") + key + "' must be a number");
  const double x = it->get<double>();
  if (!std::isfinite(x)) throw ProtocolError(std::string("field '") + key + "' must be finite");
  return x;
}

bool require_bool(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  if (!it->is_boolean()) throw ProtocolError(std::string("field '") + key + "' must be a boolean");
  return it->get<bool>();
}

}  // namespace

ClientMessage parse_client_message(std::string_view payload) {
  json j = json::parse(payload, nullptr, false);
  if (j.is_discarded()) throw ProtocolError("payload is not valid JSON");
  if (!j.is_object()) throw ProtocolError("payload must be a JSON object");
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) throw ProtocolError("missing string field 'type'");
  const std::string t = type->get<std::string>();
  ClientMessage msg;
  if (t == "reset") {
    msg.kind = ClientKind::Reset;
  } else if (t == "cmd") {
    msg.kind = ClientKind::Cmd;
    msg.cmd.v = require_number(j, "v");
    msg.cmd.omega = require_number(j, "omega");
    msg.cmd.d_front = require_bool(j, "d_front");
    msg.cmd.d_rear = require_bool(j, "d_rear");
    msg.cmd.low_gear = require_bool(j, "low_gear");
  } else if (t == "record") {
    msg.kind = ClientKind::Record;
    const auto v = j.find("value");
    if (v == j.end() || !v->is_string()) throw ProtocolError("record needs 'value': \"on\" or \"off\"");
    const std::string s = v->get<std::string>();
    if (s != "on" && s != "off") throw ProtocolError("record value must be \"on\" or \"off\"");
    msg.record = s == "on";
  } else {
    throw ProtocolError("unknown message type '" + t + "'");
  }
  return msg;
}

std::string encode_client_message(const ClientMessage& msg) {
  json j;
  switch (msg.kind) {
    case ClientKind::Reset:
      j["type"] = "reset";
      break;
    case ClientKind::Cmd:
      j = {{"type", "cmd"},
           {"v", msg.cmd.v},
           {"omega", msg.cmd.omega},
           {"d_front", msg.cmd.d_front},
           {"d_rear", msg.cmd.d_rear},
           {"low_gear", msg.cmd.low_gear}};
      break;
    case ClientKind::Record:
      j = {{"type", "record"}, {"value", msg.record ? "on" : "off"}};
      break;
  }
  return j.dump();
}

std::string state_message(const VehicleState& s, TrialStatus status, bool recording, std::optional<RbMode> fsm) {
  const Pose& p = s.pose;
  const GroundSpeed& g = s.ground_speed;
  json j = {
      {"type", "state"},
      {"t", s.t},
      {"pose", {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"roll", p.roll}, {"pitch", p.pitch}, {"yaw", p.yaw}}},
      {"wheel_speeds", s.wheel_rim_speed},
      {"ground_speed",
       {{"dx", g.dx}, {"dy", g.dy}, {"z_clearance", g.z_clearance}, {"speed_valid", g.speed_valid}, {"z_valid", g.z_valid}}},
      {"contacts", s.wheel_contact},
      {"camera_tilt", s.camera_tilt},
      {"status", std::string(to_string(status))},
      {"recording", recording},
  };
  j["fsm"] = fsm ? json(std::string(to_string(*fsm))) : json(nullptr);
  return j.dump();
}

std::string depth_message(const DepthImage& depth) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(depth.data.size() * 2);
  for (const double m : depth.data) {
    const auto mm = static_cast<std::uint16_t>(std::lround(quantize_depth(m) * 1000.0));
    bytes.push_back(static_cast<std::uint8_t>(mm >> 8));
    bytes.push_back(static_cast<std::uint8_t>(mm & 0xff));
  }
  json j = {{"type", "depth"}, {"width", depth.width}, {"height", depth.height}, {"data", base64_encode(bytes)}};
  return j.dump();
}

std::string ack_message(std::string_view of, std::string_view detail) {
  json j = {{"type", "ack"}, {"of", std::string(of)}};
  if (!detail.empty()) j["detail"] = std::string(detail);
  return j.dump();
}

std::string err_message(std::string_view message) {
  return json{{"type", "err"}, {"message", std::string(message)}}.dump();
}

DepthFrame parse_depth_message(std::string_view payload) {
  json j = json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("type", "") != "depth") throw ProtocolError("not a depth message");
  DepthFrame f;
  f.width = j.at("width").get<int>();
  f.height = j.at("height").get<int>();
  const auto bytes = base64_decode(j.at("data").get<std::string>());
  if (f.width <= 0 || f.height <= 0 || bytes.size() != static_cast<std::size_t>(f.width) * f.height * 2)
    throw ProtocolError("depth data size does not match width x height");
  f.mm.resize(bytes.size() / 2);
  for (std::size_t i = 0; i < f.mm.size(); ++i)
    f.mm[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  return f;
}

// ---------------------------------------------------------------- session

Session::Session(const ServiceConfig& cfg)
    : cfg_(cfg),
      geom_(VehicleGeometry::preset(cfg.vehicle)),
      course_(make_course(cfg.course)),
      start_(start_pose(cfg.course, 1)) {
  if (cfg_.depth_side < 8) throw ParameterError("depth_side must be at least 8");
  if (!(cfg_.stale_after > 0.0)) throw ParameterError("stale_after must be positive");
  reset();
}

Session::~Session() {
  try {
    stop_recording();
  } catch (...) {
  }
}

void Session::reset() {
  state_ = spawn(course_.map, geom_, start_.x, start_.y, start_.yaw);
  state_.camera_tilt = std::clamp(cfg_.trial.camera_pitch - state_.pose.pitch, -geom_.camera_max_tilt,
                                  geom_.camera_max_tilt);
  monitor_ = std::make_unique<TrialMonitor>(cfg_.course.length_m, start_.direction, cfg_.trial.status);
  status_ = TrialStatus::Running;
  cmd_ = Command{};
  cmd_time_.reset();
  tick_ = 0;
}

std::filesystem::path Session::next_recording_dir() const {
  for (int k = 0;; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "session-%03d", k);
    const auto dir = cfg_.record_root / name;
    if (!std::filesystem::exists(dir)) return dir;
  }
}

std::optional<std::string> Session::stop_recording() {
  if (!recorder_) return std::nullopt;
  recorder_->close();
  last_recording_ = recorder_->dir();
  recorder_.reset();
  return last_recording_.string();
}

std::vector<std::string> Session::handle(std::string_view payload, double now) {
  ClientMessage msg;
  try {
    msg = parse_client_message(payload);
  } catch (const ProtocolError& e) {
    return {err_message(e.what())};
  }
  switch (msg.kind) {
    case ClientKind::Reset: {
      stop_recording();
      reset();
      return {ack_message("reset"), state_message(state_, status_, false)};
    }
    case ClientKind::Cmd:
      cmd_ = msg.cmd;
      cmd_time_ = now;
      return {ack_message("cmd")};
    case ClientKind::Record: {
      if (!msg.record) {
        const auto dir = stop_recording();
        if (!dir) return {err_message("not recording")};
        return {ack_message("record", *dir)};
      }
      if (recorder_) return {err_message("already recording")};
      Manifest m;
      m.vehicle = cfg_.vehicle;
      m.course_seed = cfg_.course.seed;
      m.course_difficulty = cfg_.course.difficulty;
      const auto dir = next_recording_dir();
      m.trial_id = dir.filename().string();
      try {
        recorder_ = std::make_unique<Recorder>(dir, m);
      } catch (const Error& e) {
        return {err_message(e.what())};
      }
      return {ack_message("record", dir.string())};
    }
  }
  return {};
}

std::vector<std::string> Session::tick(double now) {
  std::vector<std::string> out;
  Action action = cmd_.action();
  if (!cmd_time_ || now - *cmd_time_ > cfg_.stale_after) {
    action.v = 0.0;  // safety stop
    action.omega = 0.0;
  }
  action = action.clamped();

  Observation obs = observe(state_);
  obs.depth = render_depth(course_.map, state_, geom_, cfg_.depth_side, cfg_.depth_side);
  if (recorder_) recorder_->record(obs, action);

  ++tick_;
  try {
    state_ = step(state_, action, course_.map, geom_);
  } catch (const BoundaryError&) {
    out.push_back(err_message("vehicle left the map; send reset"));
  }
  state_.t = tick_ * kTick;
  camera_tilt_control(state_, cfg_.trial.camera_pitch, kTick, geom_);
  status_ = monitor_->update(state_);

  out.push_back(state_message(state_, status_, recorder_ != nullptr));
  out.push_back(depth_message(render_depth(course_.map, state_, geom_, cfg_.depth_side, cfg_.depth_side)));
  return out;
}

void Session::disconnect() {
  cmd_ = Command{};
  cmd_time_.reset();
  stop_recording();
}

// ---------------------------------------------------------------- TCP service

struct Service::Impl {
  ServiceConfig cfg;
  Session session;
  int listen_fd = -1;
  int client_fd = -1;
  std::thread reader;
  std::mutex mu;
  std::deque<std::string> inbox;
  bool client_gone = false;

  explicit Impl(const ServiceConfig& c) : cfg(c), session(c) {}

  void start_reader(int fd) {
    client_gone = false;
    reader = std::thread([this, fd] {
      FrameReader frames;
      char buf[8192];
      for (;;) {
        const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        frames.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        try {
          while (auto payload = frames.next()) {
            std::lock_guard lock(mu);
            inbox.push_back(std::move(*payload));
          }
        } catch (const ProtocolError&) {
          break;  // the stream cannot be resynchronized
        }
      }
      std::lock_guard lock(mu);
      client_gone = true;
    });
  }

  void drop_client() {
    if (client_fd < 0) return;
    ::shutdown(client_fd, SHUT_RDWR);
    if (reader.joinable()) reader.join();
    ::close(client_fd);
    client_fd = -1;
    {
      std::lock_guard lock(mu);
      inbox.clear();
      client_gone = false;
    }
    session.disconnect();
  }

  bool send_all(const std::string& payload) {
    const std::string bytes = frame_message(payload);
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t n = ::send(client_fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return false;
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  void try_accept() {
    pollfd p{listen_fd, POLLIN, 0};
    if (::poll(&p, 1, 0) <= 0 || !(p.revents & POLLIN)) return;
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) return;
    if (client_fd >= 0) {  // single operator: refuse extras
      const std::string busy = frame_message(err_message("another operator is connected"));
      (void)::send(fd, busy.data(), busy.size(), MSG_NOSIGNAL);
      ::close(fd);
      return;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    timeval tv{1, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    client_fd = fd;
    start_reader(fd);
  }
};

Service::Service(const ServiceConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw StorageError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(cfg.port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw StorageError("cannot listen on port " + std::to_string(cfg.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  impl_->listen_fd = fd;
}

Service::~Service() {
  impl_->drop_client();
  if (impl_->listen_fd >= 0) ::close(impl_->listen_fd);
}

void Service::run(const std::atomic<bool>& stop) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto seconds = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(kTick));
  Impl& s = *impl_;
  auto next = clock::now();

  while (!stop.load()) {
    s.try_accept();

    std::deque<std::string> batch;
    bool gone = false;
    {
      std::lock_guard lock(s.mu);
      batch.swap(s.inbox);
      gone = s.client_gone;
    }
    bool ok = true;
    for (const auto& payload : batch)
      for (const auto& reply : s.session.handle(payload, seconds()))
        if (ok && s.client_fd >= 0) ok = s.send_all(reply);

    const auto out = s.session.tick(seconds());
    for (const auto& msg : out)
      if (ok && s.client_fd >= 0) ok = s.send_all(msg);
    if (s.client_fd >= 0 && (gone || !ok)) s.drop_client();

    // Never run ahead of wall time; after an overrun, restart the schedule.
    next = std::max(next + period, clock::now());
    std::this_thread::sleep_until(next);
  }
}

}  // namespace vw
