#include "vw/terrain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "vw/error.hpp"
#include "vw/pgm.hpp"
#include "vw/rng.hpp"

namespace vw {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Flat: return "Flat";
    case Difficulty::Easy: return "Easy";
    case Difficulty::Medium: return "Medium";
    case Difficulty::Difficult: return "Difficult";
  }
  return "?";
}

Difficulty parse_difficulty(std::string_view name) {
  for (auto d : {Difficulty::Flat, Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult}) {
    std::string lower(to_string(d));
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    if (name == to_string(d) || name == lower) return d;
  }
  throw ParameterError("unknown difficulty '" + std::string(name) + "'");
}

double elevation_cap(Difficulty d) {
  switch (d) {
    case Difficulty::Flat: return 0.0;
    case Difficulty::Easy: return 0.20;
    case Difficulty::Medium: return 0.35;
    case Difficulty::Difficult: return 0.50;
  }
  return 0.0;
}

HeightMap::HeightMap(int length_cells, int width_cells, double resolution, double origin_x,
                     double origin_y, std::vector<double> heights)
    : length_cells_(length_cells),
      width_cells_(width_cells),
      resolution_(resolution),
      origin_x_(origin_x),
      origin_y_(origin_y),
      heights_(std::move(heights)) {
  if (length_cells_ < 2 || width_cells_ < 2) throw ParameterError("heightmap needs >= 2x2 cells");
  if (!(resolution_ > 0.0) || !std::isfinite(resolution_)) {
    throw ParameterError("heightmap resolution must be > 0");
  }
  if (heights_.size() != static_cast<std::size_t>(length_cells_) * width_cells_) {
    throw ParameterError("heightmap size does not match dimensions");
  }
  for (const double h : heights_) {
    if (!std::isfinite(h) || h < 0.0) throw ParameterError("heights must be finite and >= 0");
  }
}

HeightMap HeightMap::flat(int length_cells, int width_cells, double resolution, double origin_x,
                          double origin_y) {
  return HeightMap(length_cells, width_cells, resolution, origin_x, origin_y,
                   std::vector<double>(static_cast<std::size_t>(length_cells) * width_cells, 0.0));
}

bool HeightMap::contains(double x, double y) const noexcept {
  return x >= origin_x_ && x <= max_x() && y >= origin_y_ && y <= max_y();
}

double HeightMap::max_height() const noexcept {
  return *std::max_element(heights_.begin(), heights_.end());
}

double HeightMap::min_height() const noexcept {
  return *std::min_element(heights_.begin(), heights_.end());
}

void CourseSpec::validate() const {
  if (!(length_m > 0.0) || !(width_m > 0.0)) throw ParameterError("course dims must be > 0");
  if (!(resolution > 0.0) || resolution > 0.1) {
    throw ParameterError("course resolution must lie in (0, 0.1]");
  }
  if (length_m <= 2 * kStagingZone) throw ParameterError("course shorter than its staging zones");
}

namespace {

constexpr double kDefaultArea = 3.1 * 1.3;

int rock_count(Difficulty d) {
  switch (d) {
    case Difficulty::Flat: return 0;
    case Difficulty::Easy: return 25;
    case Difficulty::Medium: return 45;
    case Difficulty::Difficult: return 70;
  }
  return 0;
}

int cells_for(double extent, double resolution) {
  return static_cast<int>(std::lround(extent / resolution)) + 1;
}

}  // namespace

CourseLayout layout_course(const CourseSpec& spec) {
  spec.validate();
  CourseLayout layout;
  if (spec.difficulty == Difficulty::Flat) return layout;

  Rng rng(spec.seed);
  const double cap = elevation_cap(spec.difficulty);
  const double scale = spec.length_m * spec.width_m / kDefaultArea;
  const int rocks = std::max(1, static_cast<int>(std::lround(rock_count(spec.difficulty) * scale)));

  // Placement is resolved against the rocks laid so far so that later rocks
  // can rest on earlier ones ("stacked"): the base is half the local height.
  auto surface = [&layout](double x, double y) {
    double h = 0.0;
    for (const Rock& r : layout.rocks) {
      const double c = std::cos(r.yaw), s = std::sin(r.yaw);
      const double dx = x - r.cx, dy = y - r.cy;
      const double u = (c * dx + s * dy) / r.rx;
      const double v = (-s * dx + c * dy) / r.ry;
      const double q = u * u + v * v;
      if (q < 1.0) h = std::max(h, r.base + r.rz * std::sqrt(1.0 - q));
    }
    return h;
  };

  for (int k = 0; k < rocks; ++k) {
    Rock r;
    r.rx = rng.uniform(0.10, 0.22);
    r.ry = rng.uniform(0.10, 0.22);
    r.yaw = rng.uniform(0.0, std::numbers::pi);
    r.rz = rng.uniform(0.4, 0.8) * cap;
    const double reach = std::max(r.rx, r.ry);
    const double lo = kStagingZone + reach;
    const double hi = spec.length_m - kStagingZone - reach;
    r.cx = lo < hi ? rng.uniform(lo, hi) : 0.5 * spec.length_m;
    r.cy = rng.uniform(0.0, spec.width_m);
    r.base = std::min(0.5 * surface(r.cx, r.cy), cap - r.rz);
    layout.rocks.push_back(r);
  }

  if (spec.difficulty == Difficulty::Difficult) {
    for (int k = 0; k < 5; ++k) {
      Block b;
      b.sx = rng.uniform(0.15, 0.30);
      b.sy = rng.uniform(0.10, 0.25);
      b.height = rng.uniform(0.10, 0.25);
      const double lo = kStagingZone + 0.5 * b.sx;
      const double hi = spec.length_m - kStagingZone - 0.5 * b.sx;
      b.cx = rng.uniform(lo, hi);
      b.cy = rng.uniform(0.0, spec.width_m);
      layout.blocks.push_back(b);
    }
  }
  return layout;
}

HeightMap generate_course(const CourseSpec& spec) {
  spec.validate();
  const int nx = cells_for(spec.length_m, spec.resolution);
  const int ny = cells_for(spec.width_m, spec.resolution);
  std::vector<double> heights(static_cast<std::size_t>(nx) * ny, 0.0);
  const CourseLayout layout = layout_course(spec);
  const double res = spec.resolution;

  auto cell_range = [res](double lo, double hi, int n) {
    const int a = std::max(0, static_cast<int>(std::floor(lo / res)));
    const int b = std::min(n - 1, static_cast<int>(std::ceil(hi / res)));
    return std::pair{a, b};
  };

  for (const Rock& r : layout.rocks) {
    const double reach = std::max(r.rx, r.ry);
    const auto [i0, i1] = cell_range(r.cx - reach, r.cx + reach, nx);
    const auto [j0, j1] = cell_range(r.cy - reach, r.cy + reach, ny);
    const double c = std::cos(r.yaw), s = std::sin(r.yaw);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const double dx = i * res - r.cx, dy = j * res - r.cy;
        const double u = (c * dx + s * dy) / r.rx;
        const double v = (-s * dx + c * dy) / r.ry;
        const double q = u * u + v * v;
        if (q >= 1.0) continue;
        double& h = heights[static_cast<std::size_t>(j) * nx + i];
        h = std::max(h, r.base + r.rz * std::sqrt(1.0 - q));
      }
    }
  }

  for (const Block& b : layout.blocks) {
    const auto [i0, i1] = cell_range(b.cx - 0.5 * b.sx, b.cx + 0.5 * b.sx, nx);
    const auto [j0, j1] = cell_range(b.cy - 0.5 * b.sy, b.cy + 0.5 * b.sy, ny);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        if (std::abs(i * res - b.cx) > 0.5 * b.sx || std::abs(j * res - b.cy) > 0.5 * b.sy) continue;
        double& h = heights[static_cast<std::size_t>(j) * nx + i];
        h = std::max(h, b.height);
      }
    }
  }

  const double cap = elevation_cap(spec.difficulty);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double& h = heights[static_cast<std::size_t>(j) * nx + i];
      const double x = i * res;
      if (x < kStagingZone || x > spec.length_m - kStagingZone) {
        h = 0.0;
        continue;
      }
      h = std::min(std::round(h * 1000.0) / 1000.0, cap);
    }
  }
  return HeightMap(nx, ny, res, 0.0, 0.0, std::move(heights));
}

namespace {

// Bilinear sample at fractional grid coordinates, assumed in range.
double bilinear(const HeightMap& map, double gx, double gy) noexcept {
  int i = static_cast<int>(std::floor(gx));
  int j = static_cast<int>(std::floor(gy));
  i = std::clamp(i, 0, map.length_cells() - 2);
  j = std::clamp(j, 0, map.width_cells() - 2);
  const double fx = gx - i;
  const double fy = gy - j;
  const double h00 = map.cell(i, j), h10 = map.cell(i + 1, j);
  const double h01 = map.cell(i, j + 1), h11 = map.cell(i + 1, j + 1);
  return (h00 * (1.0 - fx) + h10 * fx) * (1.0 - fy) + (h01 * (1.0 - fx) + h11 * fx) * fy;
}

}  // namespace

double height_at(const HeightMap& map, double x, double y) {
  if (!map.contains(x, y)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "height query (%.4f, %.4f) outside map", x, y);
    throw QueryError(buf);
  }
  return bilinear(map, (x - map.origin_x()) / map.resolution(), (y - map.origin_y()) / map.resolution());
}

double height_or_ground(const HeightMap& map, double x, double y) noexcept {
  if (!map.contains(x, y)) return 0.0;
  return bilinear(map, (x - map.origin_x()) / map.resolution(), (y - map.origin_y()) / map.resolution());
}

std::pair<double, double> slope_at(const HeightMap& map, double x, double y) {
  const double r = map.resolution();
  if (x - r < map.origin_x() || x + r > map.max_x() || y - r < map.origin_y() || y + r > map.max_y()) {
    throw QueryError("slope query closer than one cell to the boundary");
  }
  const double gx = (height_at(map, x + r, y) - height_at(map, x - r, y)) / (2.0 * r);
  const double gy = (height_at(map, x, y + r) - height_at(map, x, y - r)) / (2.0 * r);
  return {gx, gy};
}

HeightMap pad_flat_x(const HeightMap& map, double margin_x) {
  if (margin_x < 0.0) throw ParameterError("apron margin must be >= 0");
  const int pad = static_cast<int>(std::ceil(margin_x / map.resolution() - 1e-9));
  const int nx = map.length_cells() + 2 * pad;
  const int ny = map.width_cells();
  std::vector<double> heights(static_cast<std::size_t>(nx) * ny, 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < map.length_cells(); ++i) {
      heights[static_cast<std::size_t>(j) * nx + i + pad] = map.cell(i, j);
    }
  }
  return HeightMap(nx, ny, map.resolution(), map.origin_x() - pad * map.resolution(), map.origin_y(),
                   std::move(heights));
}

namespace {

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_exact(const std::string& text, const std::string& key) {
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw DataError("heightmap meta: bad value for " + key);
  }
  return v;
}

}  // namespace

void save_heightmap(const HeightMap& map, const std::filesystem::path& pgm_path) {
  Gray16Image image{map.length_cells(), map.width_cells(), {}};
  image.pixels.reserve(map.heights().size());
  for (const double h : map.heights()) {
    const double mm = std::round(h * 1000.0);
    if (mm > 65535.0) throw ParameterError("height exceeds 65.535 m PGM range");
    image.pixels.push_back(static_cast<std::uint16_t>(mm));
  }
  write_pgm16(pgm_path, image);
  std::string meta = "resolution=" + format_exact(map.resolution()) + "\n";
  meta += "origin_x=" + format_exact(map.origin_x()) + "\n";
  meta += "origin_y=" + format_exact(map.origin_y()) + "\n";
  write_file(pgm_path.string() + ".meta", meta);
}

HeightMap load_heightmap(const std::filesystem::path& pgm_path) {
  const Gray16Image image = read_pgm16(pgm_path);
  std::map<std::string, std::string> kv;
  std::istringstream meta(read_file(pgm_path.string() + ".meta"));
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"resolution", "origin_x", "origin_y"}) {
    if (!kv.count(key)) throw DataError(std::string("heightmap meta: missing ") + key);
  }
  std::vector<double> heights;
  heights.reserve(image.pixels.size());
  for (const auto mm : image.pixels) heights.push_back(mm / 1000.0);
  return HeightMap(image.width, image.height, parse_exact(kv["resolution"], "resolution"),
                   parse_exact(kv["origin_x"], "origin_x"), parse_exact(kv["origin_y"], "origin_y"),
                   std::move(heights));
}

}  // namespace vw
