#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "vw/dataset.hpp"
#include "vw/error.hpp"
#include "vw/pgm.hpp"
#include "vw/rng.hpp"

using namespace vw;
namespace fs = std::filesystem;

namespace {

Observation random_obs(Rng& rng, double t) {
  Observation o;
  DepthImage d;
  d.width = d.height = 12;
  d.data.resize(144);
  for (double& v : d.data) v = rng.uniform(kMinDepth, 5.0);
  o.depth = std::move(d);
  for (double& w : o.w) w = rng.uniform(-1, 1);
  o.g.dx = rng.uniform(-0.5, 1.0);
  o.g.dy = rng.uniform(-0.2, 0.2);
  o.g.z_clearance = rng.uniform(0.0, 0.2);
  o.g.speed_valid = rng.uniform() < 0.9;
  o.t = t;
  return o;
}

Action random_action(Rng& rng) {
  return {rng.uniform(-kMaxSpeed, kMaxSpeed), rng.uniform(-kMaxSteer, kMaxSteer), rng.uniform() < 0.5,
          rng.uniform() < 0.5, rng.uniform() < 0.5};
}

Manifest base_manifest() {
  Manifest m;
  m.vehicle = VehicleKind::V4W;
  m.course_seed = 77;
  m.course_difficulty = Difficulty::Medium;
  m.trial_id = "unit";
  return m;
}

/// Records n random frames and returns what the recorder says it stored.
Demonstration write_trial(const fs::path& dir, int n, std::uint64_t seed = 1) {
  Rng rng(seed);
  Recorder rec(dir, base_manifest());
  for (int i = 0; i < n; ++i) rec.record(random_obs(rng, 3.0 + i * kTick), random_action(rng));
  rec.close();
  return rec.recorded();
}

void edit(const fs::path& file, const std::function<std::string(std::string)>& f) {
  write_file(file, f(read_file(file)));
}

std::string replace_first(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

/// Line index `k` of records.txt, counting data lines only.
std::string data_line(const std::string& text, int k) {
  std::istringstream in(text);
  int seen = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (seen++ == k) return line;
  }
  FAIL("no such line");
  return {};
}

DatasetErrorKind failure_kind(const fs::path& dir) {
  try {
    load_demonstration(dir);
  } catch (const DatasetError& e) {
    return e.kind();
  }
  FAIL("trial loaded without error");
  return DatasetErrorKind::BadManifest;
}

}  // namespace

TEST_CASE("recorded trial loads back exactly as stored") {
  const fs::path dir = vwtest::scratch_dir("ds-roundtrip");
  const Demonstration stored = write_trial(dir, 100);
  const Demonstration loaded = load_demonstration(dir);
  CHECK(loaded == stored);
  CHECK(loaded.manifest.frame_count == 100);
  CHECK(loaded.manifest.depth_width == 12);
  CHECK(loaded.manifest.course_seed == 77u);
  CHECK(loaded.frames.front().t == doctest::Approx(3.0));
  CHECK(loaded.frames.back().t == doctest::Approx(3.0 + 99 * kTick));
  CHECK(fs::exists(dir / "depth" / "000099.pgm"));
  for (std::size_t i = 1; i < loaded.size(); ++i) REQUIRE(loaded.frames[i].t > loaded.frames[i - 1].t);
}

TEST_CASE("stored values are the quantized inputs") {
  CHECK(quantize_depth(1.234) == 1.234);
  CHECK(quantize_depth(1.2344) == 1.234);
  CHECK(quantize_record(0.1234567891234) == doctest::Approx(0.123456789).epsilon(1e-15));

  const fs::path dir = vwtest::scratch_dir("ds-quant");
  Observation o;
  o.depth = vwtest::flat_depth(4, 1.234);
  o.t = 0.0;
  o.g.dx = 1.0 / 3.0;
  {
    Recorder rec(dir, base_manifest());
    rec.record(o, Action{0.5, 0.1, true, false, true});
  }
  const Demonstration d = load_demonstration(dir);
  const Gray16Image raw = read_pgm16(dir / "depth" / "000000.pgm");
  CHECK(raw.pixels[0] == 1234);
  CHECK(d.depth[0].data[0] == 1.234);
  CHECK(d.frames[0].g.dx == quantize_record(1.0 / 3.0));
  CHECK(d.action(0) == Action{0.5, 0.1, true, false, true});
  CHECK(d.observation(0).depth->width == 4);
}

TEST_CASE("in-memory recorder matches the on-disk one") {
  const fs::path dir = vwtest::scratch_dir("ds-mem");
  const Demonstration on_disk = write_trial(dir, 20, 4);
  Rng rng(4);
  Recorder mem(base_manifest());
  for (int i = 0; i < 20; ++i) mem.record(random_obs(rng, 3.0 + i * kTick), random_action(rng));
  CHECK(mem.recorded() == on_disk);
  CHECK(mem.dir().empty());
}

TEST_CASE("recorder refuses bad input") {
  Recorder rec(base_manifest());
  CHECK_THROWS_AS(rec.record(Observation{}, Action{}), DataError);
  Observation o;
  o.depth = vwtest::flat_depth(8, 1.0);
  o.t = 1.0;
  rec.record(o, Action{});
  CHECK_THROWS_AS(rec.record(o, Action{}), DataError);
  o.t = 1.05;
  o.depth = vwtest::flat_depth(9, 1.0);
  CHECK_THROWS_AS(rec.record(o, Action{}), ShapeError);
  rec.close();
  CHECK_FALSE(rec.is_open());
  o.depth = vwtest::flat_depth(8, 1.0);
  CHECK_THROWS_AS(rec.record(o, Action{}), StorageError);
}

TEST_CASE("each corruption has its own error kind") {
  struct Case {
    const char* name;
    DatasetErrorKind kind;
    std::function<void(const fs::path&)> corrupt;
  };
  const std::vector<Case> cases{
      {"missing manifest", DatasetErrorKind::MissingManifest, [](const fs::path& d) { fs::remove(d / "manifest.txt"); }},
      {"bad manifest", DatasetErrorKind::BadManifest,
       [](const fs::path& d) { edit(d / "manifest.txt", [](std::string s) { return replace_first(s, "vehicle=V4W", "vehicle=V5W"); }); }},
      {"version", DatasetErrorKind::VersionMismatch,
       [](const fs::path& d) { edit(d / "manifest.txt", [](std::string s) { return replace_first(s, "format_version=1", "format_version=2"); }); }},
      {"count", DatasetErrorKind::CountMismatch,
       [](const fs::path& d) { edit(d / "manifest.txt", [](std::string s) { return replace_first(s, "frame_count=30", "frame_count=31"); }); }},
      {"truncated record", DatasetErrorKind::MalformedRecord,
       [](const fs::path& d) {
         edit(d / "records.txt", [](std::string s) {
           const std::string line = data_line(s, 7);
           return replace_first(s, line, line.substr(0, line.rfind(' ')));
         });
       }},
      {"non-finite", DatasetErrorKind::NonFiniteValue,
       [](const fs::path& d) {
         edit(d / "records.txt", [](std::string s) {
           const std::string line = data_line(s, 3);
           return replace_first(s, line, line.substr(0, line.rfind(' ')) + " nan");
         });
       }},
      {"time order", DatasetErrorKind::NonMonotonicTime,
       [](const fs::path& d) {
         edit(d / "records.txt", [](std::string s) {
           const std::string a = data_line(s, 10), b = data_line(s, 11);
           s = replace_first(s, a + "\n", "@@\n");
           s = replace_first(s, b + "\n", a + "\n");
           return replace_first(s, "@@\n", b + "\n");
         });
       }},
      {"missing depth", DatasetErrorKind::MissingDepth, [](const fs::path& d) { fs::remove(d / "depth" / "000012.pgm"); }},
      {"bad depth", DatasetErrorKind::BadDepth,
       [](const fs::path& d) { edit(d / "depth" / "000005.pgm", [](std::string s) { return s.substr(0, s.size() - 2); }); }},
  };
  for (const Case& c : cases) {
    CAPTURE(c.name);
    const fs::path dir = vwtest::scratch_dir(std::string("ds-corrupt-") + std::to_string(&c - cases.data()));
    write_trial(dir, 30);
    c.corrupt(dir);
    CHECK(failure_kind(dir) == c.kind);
  }
}

TEST_CASE("corruption errors name the frame") {
  const fs::path dir = vwtest::scratch_dir("ds-frame");
  write_trial(dir, 30);
  fs::remove(dir / "depth" / "000012.pgm");
  try {
    load_demonstration(dir);
    FAIL("loaded");
  } catch (const DatasetError& e) {
    CHECK(e.frame() == 12u);
    CHECK(std::string(e.what()).find("frame 12") != std::string::npos);
  }
}

TEST_CASE("manifest text round-trips and tolerates absent optional keys") {
  Manifest m = base_manifest();
  m.frame_count = 12;
  m.depth_width = m.depth_height = 64;
  CHECK(manifest_from_text(manifest_to_text(m)) == m);
  m.course_seed.reset();
  m.course_difficulty.reset();
  CHECK(manifest_from_text(manifest_to_text(m)) == m);
  CHECK_THROWS_AS(manifest_from_text("format_version=1\n"), DatasetError);
}

TEST_CASE("find_trials lists every trial directory in order") {
  const fs::path root = vwtest::scratch_dir("ds-find");
  write_trial(root / "b", 3);
  write_trial(root / "a" / "nested", 3);
  fs::create_directories(root / "empty");
  const auto found = find_trials(root);
  REQUIRE(found.size() == 2);
  CHECK(found[0] == root / "a" / "nested");
  CHECK(found[1] == root / "b");
}

TEST_CASE("statistics of a constant demonstration") {
  std::vector<DataFrame> frames(41);
  for (int i = 0; i < 41; ++i) {
    frames[i].t = i * kTick;
    frames[i].v = 0.5;
    frames[i].omega = 0.0;
  }
  const DatasetStats s = dataset_stats(vwtest::demo_from_frames(frames));
  CHECK(s.frame_count == 41);
  CHECK(s.duration == doctest::Approx(2.0));
  CHECK(s.speed.total() == 41);
  CHECK(s.speed.nonzero_bins() == 1);
  CHECK(s.steering.nonzero_bins() == 1);
  CHECK(s.ranges.at("v") == std::pair{0.5, 0.5});
  CHECK(s.ranges.at("t").second == doctest::Approx(2.0));
  CHECK(format_stats(s).find("frames") != std::string::npos);
  CHECK_THROWS_AS(dataset_stats(Demonstration{}), DataError);
}

TEST_CASE("histograms cover the full action range") {
  std::vector<DataFrame> frames(3);
  frames[0].v = -kMaxSpeed;
  frames[1].v = kMaxSpeed;
  frames[2].v = 0.0;
  for (int i = 0; i < 3; ++i) frames[i].t = i * kTick;
  const DatasetStats s = dataset_stats(vwtest::demo_from_frames(frames));
  CHECK(s.speed.counts.front() == 1);
  CHECK(s.speed.counts.back() == 1);
  CHECK(s.speed.total() == 3);
}
