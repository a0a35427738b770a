#include "vw/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vw/pgm.hpp"

namespace fs = std::filesystem;

namespace vw {

std::string_view to_string(DatasetErrorKind k) {
  switch (k) {
    case DatasetErrorKind::MissingManifest: return "missing-manifest";
    case DatasetErrorKind::BadManifest: return "bad-manifest";
    case DatasetErrorKind::VersionMismatch: return "version-mismatch";
    case DatasetErrorKind::CountMismatch: return "count-mismatch";
    case DatasetErrorKind::MalformedRecord: return "malformed-record";
    case DatasetErrorKind::NonFiniteValue: return "non-finite-value";
    case DatasetErrorKind::NonMonotonicTime: return "non-monotonic-time";
    case DatasetErrorKind::MissingDepth: return "missing-depth";
    case DatasetErrorKind::BadDepth: return "bad-depth";
  }
  return "?";
}

DatasetError::DatasetError(DatasetErrorKind kind, const std::string& message, std::optional<std::size_t> frame)
    : DataError(std::string(to_string(kind)) + (frame ? " (frame " + std::to_string(*frame) + ")" : "") +
                ": " + message),
      kind_(kind),
      frame_(frame) {}

namespace {

std::string format9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string format17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool parse_double(std::string_view text, double& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

template <class Int>
bool parse_int(std::string_view text, Int& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

bool parse_bool01(std::string_view text, bool& out) {
  if (text == "0") return out = false, true;
  if (text == "1") return out = true, true;
  return false;
}

std::string depth_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "depth/%06zu.pgm", index);
  return buf;
}

constexpr std::size_t kRecordFields = 16;
constexpr const char* kRecordHeader =
    "# t depth_ref w0 w1 w2 w3 g_dx g_dy g_z g_speed_valid g_z_valid d_front d_rear low_gear v omega";

std::string record_line(const DataFrame& f) {
  std::string line = format9(f.t) + " " + f.depth_ref;
  for (const double w : f.w) line += " " + format9(w);
  line += " " + format9(f.g.dx) + " " + format9(f.g.dy) + " " + format9(f.g.z_clearance);
  line += f.g.speed_valid ? " 1" : " 0";
  line += f.g.z_valid ? " 1" : " 0";
  line += f.lock_front ? " 1" : " 0";
  line += f.lock_rear ? " 1" : " 0";
  line += f.low_gear ? " 1" : " 0";
  line += " " + format9(f.v) + " " + format9(f.omega);
  return line;
}

Gray16Image depth_to_pgm(const DepthImage& depth) {
  Gray16Image img{depth.width, depth.height, {}};
  img.pixels.reserve(depth.data.size());
  for (const double d : depth.data) {
    img.pixels.push_back(static_cast<std::uint16_t>(std::lround(quantize_depth(d) * 1000.0)));
  }
  return img;
}

}  // namespace

double quantize_record(double x) {
  double out = 0;
  parse_double(format9(x), out);
  return out;
}

double quantize_depth(double meters) {
  const double mm = std::clamp(std::round(meters * 1000.0), 1.0, 65535.0);
  return mm / 1000.0;
}

Observation Demonstration::observation(std::size_t i) const {
  const DataFrame& f = frames.at(i);
  Observation obs;
  if (i < depth.size()) obs.depth = depth[i];
  obs.w = f.w;
  obs.g = f.g;
  obs.t = f.t;
  return obs;
}

Action Demonstration::action(std::size_t i) const {
  const DataFrame& f = frames.at(i);
  return Action{f.v, f.omega, f.lock_front, f.lock_rear, f.low_gear};
}

std::string manifest_to_text(const Manifest& m) {
  std::string out;
  out += "format_version=" + std::to_string(m.format_version) + "\n";
  out += "vehicle=" + std::string(to_string(m.vehicle)) + "\n";
  out += "tick_hz=" + std::to_string(m.tick_hz) + "\n";
  out += "frame_count=" + std::to_string(m.frame_count) + "\n";
  if (m.course_seed) out += "course_seed=" + std::to_string(*m.course_seed) + "\n";
  if (m.course_difficulty) out += "course_difficulty=" + std::string(to_string(*m.course_difficulty)) + "\n";
  out += "trial_id=" + m.trial_id + "\n";
  out += std::string("rgb_present=") + (m.rgb_present ? "true" : "false") + "\n";
  out += "depth_width=" + std::to_string(m.depth_width) + "\n";
  out += "depth_height=" + std::to_string(m.depth_height) + "\n";
  out += "depth_fov=" + format17(m.depth_fov) + "\n";
  return out;
}

Manifest manifest_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DatasetError(DatasetErrorKind::BadManifest, "line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DatasetError(DatasetErrorKind::BadManifest, std::string("missing key ") + key);
    return it->second;
  };
  const auto bad = [](const char* key) { return DatasetError(DatasetErrorKind::BadManifest, std::string("bad ") + key); };

  Manifest m;
  if (!parse_int(need("format_version"), m.format_version)) throw bad("format_version");
  if (m.format_version != kFormatVersion) {
    throw DatasetError(DatasetErrorKind::VersionMismatch,
                       "format_version " + std::to_string(m.format_version) + ", expected " +
                           std::to_string(kFormatVersion));
  }
  try {
    m.vehicle = parse_vehicle(need("vehicle"));
  } catch (const ParameterError&) {
    throw bad("vehicle");
  }
  if (!parse_int(need("tick_hz"), m.tick_hz) || m.tick_hz <= 0) throw bad("tick_hz");
  if (!parse_int(need("frame_count"), m.frame_count)) throw bad("frame_count");
  if (kv.count("course_seed")) {
    std::uint64_t seed = 0;
    if (!parse_int(kv["course_seed"], seed)) throw bad("course_seed");
    m.course_seed = seed;
  }
  if (kv.count("course_difficulty")) {
    try {
      m.course_difficulty = parse_difficulty(kv["course_difficulty"]);
    } catch (const ParameterError&) {
      throw bad("course_difficulty");
    }
  }
  m.trial_id = need("trial_id");
  const std::string& rgb = need("rgb_present");
  if (rgb != "true" && rgb != "false") throw bad("rgb_present");
  m.rgb_present = rgb == "true";
  if (!parse_int(need("depth_width"), m.depth_width) || m.depth_width < 0) throw bad("depth_width");
  if (!parse_int(need("depth_height"), m.depth_height) || m.depth_height < 0) throw bad("depth_height");
  if (kv.count("depth_fov") && !parse_double(kv["depth_fov"], m.depth_fov)) throw bad("depth_fov");
  return m;
}

Recorder::Recorder(fs::path dir, Manifest manifest) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_ / "depth", ec);
  if (ec) throw StorageError("cannot create " + (dir_ / "depth").string() + ": " + ec.message());
  manifest.frame_count = 0;
  manifest.rgb_present = false;
  demo_.manifest = manifest;
  write_file(dir_ / "manifest.txt", manifest_to_text(demo_.manifest));
  records_.open(dir_ / "records.txt", std::ios::trunc);
  if (!records_) throw StorageError("cannot create " + (dir_ / "records.txt").string());
  records_ << kRecordHeader << '\n';
  open_ = true;
}

Recorder::Recorder(Manifest manifest) {
  manifest.frame_count = 0;
  manifest.rgb_present = false;
  demo_.manifest = manifest;
  open_ = true;
}

Recorder::~Recorder() {
  try {
    close();
  } catch (...) {
    // Destructors must not throw; an explicit close() reports the failure.
  }
}

const DataFrame& Recorder::record(const Observation& obs, const Action& act) {
  if (!open_) throw StorageError("recorder is closed");
  if (!obs.depth) throw DataError("recorded observations need a depth image");
  const std::size_t index = demo_.frames.size();

  DataFrame f;
  f.t = quantize_record(obs.t);
  if (!demo_.frames.empty() && !(f.t > demo_.frames.back().t)) {
    throw DataError("frame time must be strictly increasing");
  }
  f.depth_ref = depth_name(index);
  for (std::size_t k = 0; k < 4; ++k) f.w[k] = quantize_record(obs.w[k]);
  f.g = {quantize_record(obs.g.dx), quantize_record(obs.g.dy), quantize_record(obs.g.z_clearance),
         obs.g.speed_valid, obs.g.z_valid};
  f.lock_front = act.lock_front;
  f.lock_rear = act.lock_rear;
  f.low_gear = act.low_gear;
  f.v = quantize_record(act.v);
  f.omega = quantize_record(act.omega);

  const DepthImage& src = *obs.depth;
  if (index == 0) {
    demo_.manifest.depth_width = src.width;
    demo_.manifest.depth_height = src.height;
    demo_.manifest.depth_fov = src.fov;
  } else if (src.width != demo_.manifest.depth_width || src.height != demo_.manifest.depth_height) {
    throw ShapeError("depth size changed within a trial");
  }
  if (!dir_.empty()) write_pgm16(dir_ / f.depth_ref, depth_to_pgm(src));
  DepthImage stored = src;
  stored.fov = demo_.manifest.depth_fov;
  for (double& d : stored.data) d = quantize_depth(d);

  if (!dir_.empty()) {
    records_ << record_line(f) << '\n';
    if (!records_) throw StorageError("write failed: records.txt");
  }
  demo_.frames.push_back(std::move(f));
  demo_.depth.push_back(std::move(stored));
  demo_.manifest.frame_count = demo_.frames.size();
  return demo_.frames.back();
}

void Recorder::close() {
  if (!open_) return;
  open_ = false;
  if (dir_.empty()) return;
  records_.flush();
  if (!records_) throw StorageError("flush failed: records.txt");
  records_.close();
  write_file(dir_ / "manifest.txt", manifest_to_text(demo_.manifest));
}

Demonstration load_demonstration(const fs::path& dir) {
  if (!fs::is_regular_file(dir / "manifest.txt")) {
    throw DatasetError(DatasetErrorKind::MissingManifest, "no manifest.txt in " + dir.string());
  }
  Demonstration demo;
  demo.manifest = manifest_from_text(read_file(dir / "manifest.txt"));

  if (!fs::is_regular_file(dir / "records.txt")) {
    throw DatasetError(DatasetErrorKind::MalformedRecord, "no records.txt in " + dir.string());
  }
  std::istringstream in(read_file(dir / "records.txt"));
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t index = demo.frames.size();
    std::vector<std::string_view> tok;
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto sp = rest.find(' ');
      tok.push_back(rest.substr(0, sp));
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    const auto malformed = [&](const std::string& why) {
      return DatasetError(DatasetErrorKind::MalformedRecord, why, index);
    };
    if (tok.size() != kRecordFields) {
      throw malformed("expected " + std::to_string(kRecordFields) + " fields, got " + std::to_string(tok.size()));
    }
    DataFrame f;
    f.depth_ref = std::string(tok[1]);
    double* numeric[] = {&f.t, &f.w[0], &f.w[1], &f.w[2], &f.w[3], &f.g.dx, &f.g.dy, &f.g.z_clearance, &f.v, &f.omega};
    const std::size_t numeric_tok[] = {0, 2, 3, 4, 5, 6, 7, 8, 14, 15};
    for (std::size_t k = 0; k < std::size(numeric_tok); ++k) {
      if (!parse_double(tok[numeric_tok[k]], *numeric[k])) {
        throw malformed("bad number '" + std::string(tok[numeric_tok[k]]) + "'");
      }
      if (!std::isfinite(*numeric[k])) {
        throw DatasetError(DatasetErrorKind::NonFiniteValue, "field " + std::to_string(numeric_tok[k]), index);
      }
    }
    bool* flags[] = {&f.g.speed_valid, &f.g.z_valid, &f.lock_front, &f.lock_rear, &f.low_gear};
    for (std::size_t k = 0; k < 5; ++k) {
      if (!parse_bool01(tok[9 + k], *flags[k])) throw malformed("bad flag '" + std::string(tok[9 + k]) + "'");
    }
    if (!demo.frames.empty() && !(f.t > demo.frames.back().t)) {
      throw DatasetError(DatasetErrorKind::NonMonotonicTime, "t=" + format9(f.t) + " after t=" +
                                                                 format9(demo.frames.back().t), index);
    }
    demo.frames.push_back(std::move(f));
  }

  if (demo.frames.size() != demo.manifest.frame_count) {
    throw DatasetError(DatasetErrorKind::CountMismatch,
                       "manifest says " + std::to_string(demo.manifest.frame_count) + " frames, records hold " +
                           std::to_string(demo.frames.size()));
  }

  demo.depth.reserve(demo.frames.size());
  for (std::size_t i = 0; i < demo.frames.size(); ++i) {
    const fs::path file = dir / demo.frames[i].depth_ref;
    if (!fs::is_regular_file(file)) {
      throw DatasetError(DatasetErrorKind::MissingDepth, "missing " + demo.frames[i].depth_ref, i);
    }
    Gray16Image img;
    try {
      img = read_pgm16(file);
    } catch (const Error& e) {
      throw DatasetError(DatasetErrorKind::BadDepth, e.what(), i);
    }
    if (img.width != demo.manifest.depth_width || img.height != demo.manifest.depth_height) {
      throw DatasetError(DatasetErrorKind::BadDepth, "depth size differs from manifest", i);
    }
    DepthImage d;
    d.width = img.width;
    d.height = img.height;
    d.fov = demo.manifest.depth_fov;
    d.data.reserve(img.pixels.size());
    for (const auto mm : img.pixels) {
      if (mm == 0) throw DatasetError(DatasetErrorKind::BadDepth, "zero depth sample", i);
      d.data.push_back(mm / 1000.0);
    }
    demo.depth.push_back(std::move(d));
  }
  return demo;
}

std::vector<fs::path> find_trials(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(root / "manifest.txt")) out.push_back(root);
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_directory() && fs::is_regular_file(entry.path() / "manifest.txt")) out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t Histogram::total() const noexcept {
  std::size_t n = 0;
  for (const auto c : counts) n += c;
  return n;
}

std::size_t Histogram::nonzero_bins() const noexcept {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
}

namespace {

Histogram histogram(double lo, double hi, int bins, const std::vector<double>& values) {
  Histogram h{lo, hi, std::vector<std::size_t>(static_cast<std::size_t>(bins), 0)};
  for (const double v : values) {
    const double rel = (v - lo) / (hi - lo) * bins;
    const int b = std::clamp(static_cast<int>(std::floor(rel)), 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace

DatasetStats dataset_stats(const Demonstration& demo, int speed_bins, int steering_bins) {
  if (demo.frames.empty()) throw DataError("statistics of an empty demonstration");
  DatasetStats s;
  s.frame_count = demo.frames.size();
  s.duration = static_cast<double>(s.frame_count - 1) / demo.manifest.tick_hz;

  std::map<std::string, std::vector<double>> fields;
  for (const DataFrame& f : demo.frames) {
    fields["v"].push_back(f.v);
    fields["omega"].push_back(f.omega);
    for (int k = 0; k < 4; ++k) fields["w" + std::to_string(k)].push_back(f.w[k]);
    fields["g_dx"].push_back(f.g.dx);
    fields["g_dy"].push_back(f.g.dy);
    fields["g_z"].push_back(f.g.z_clearance);
    fields["t"].push_back(f.t);
  }
  for (const auto& [name, values] : fields) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.ranges[name] = {*lo, *hi};
  }
  s.speed = histogram(-kMaxSpeed, kMaxSpeed, speed_bins, fields["v"]);
  s.steering = histogram(-kMaxSteer, kMaxSteer, steering_bins, fields["omega"]);
  return s;
}

std::string format_stats(const DatasetStats& s) {
  std::ostringstream out;
  char buf[128];
  out << "frames: " << s.frame_count << "\n";
  std::snprintf(buf, sizeof buf, "duration_s: %.3f\n", s.duration);
  out << buf;
  const auto dump = [&](const char* name, const Histogram& h) {
    out << name << " histogram [" << h.lo << ", " << h.hi << "):";
    for (const auto c : h.counts) out << ' ' << c;
    out << "\n";
  };
  dump("speed", s.speed);
  dump("steering", s.steering);
  out << "ranges:\n";
  for (const auto& [name, range] : s.ranges) {
    std::snprintf(buf, sizeof buf, "  %-6s [%.6g, %.6g]\n", name.c_str(), range.first, range.second);
    out << buf;
  }
  return out.str();
}

}  // namespace vw
