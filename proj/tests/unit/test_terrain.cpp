#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "vw/error.hpp"
#include "vw/pgm.hpp"
#include "vw/rng.hpp"
#include "vw/terrain.hpp"

using namespace vw;

namespace {

CourseSpec spec_of(Difficulty d, std::uint64_t seed) {
  CourseSpec s;
  s.difficulty = d;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("flat course is all zeros") {
  const HeightMap m = generate_course(spec_of(Difficulty::Flat, 7));
  CHECK(std::all_of(m.heights().begin(), m.heights().end(), [](double h) { return h == 0.0; }));
}

TEST_CASE("generation is a pure function of the spec") {
  CHECK(generate_course(spec_of(Difficulty::Easy, 42)) == generate_course(spec_of(Difficulty::Easy, 42)));
  CHECK_FALSE(generate_course(spec_of(Difficulty::Easy, 42)) == generate_course(spec_of(Difficulty::Easy, 43)));
}

TEST_CASE("grid covers the course at the requested resolution") {
  const HeightMap m = generate_course(spec_of(Difficulty::Medium, 1));
  CHECK(m.length_cells() == 156);
  CHECK(m.width_cells() == 66);
  CHECK(m.resolution() == 0.02);
}

TEST_CASE("elevation caps, ground contact and flat staging zones hold for every difficulty") {
  for (const Difficulty d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const CourseSpec s = spec_of(d, seed);
      const HeightMap m = generate_course(s);
      CAPTURE(seed);
      CHECK(m.max_height() <= elevation_cap(d) + 1e-12);
      CHECK(m.max_height() > 0.0);
      CHECK(m.min_height() == 0.0);
      for (int j = 0; j < m.width_cells(); ++j)
        for (int i = 0; i < m.length_cells(); ++i) {
          const double x = m.origin_x() + i * m.resolution();
          if (x < kStagingZone - 1e-9 || x > s.length_m - kStagingZone + 1e-9) REQUIRE(m.cell(i, j) == 0.0);
        }
    }
  }
}

TEST_CASE("Difficult stays under half a meter") {
  CHECK(generate_course(spec_of(Difficulty::Difficult, 1)).max_height() <= 0.50);
}

TEST_CASE("layout counts and rock radii follow the difficulty table") {
  const auto easy = layout_course(spec_of(Difficulty::Easy, 3));
  const auto med = layout_course(spec_of(Difficulty::Medium, 3));
  const auto hard = layout_course(spec_of(Difficulty::Difficult, 3));
  CHECK(easy.rocks.size() == 25);
  CHECK(med.rocks.size() == 45);
  CHECK(hard.rocks.size() == 70);
  CHECK(easy.blocks.empty());
  CHECK(hard.blocks.size() == 5);
  for (const auto& r : hard.rocks) {
    CHECK(r.rx >= 0.10);
    CHECK(r.rx <= 0.22);
    CHECK(r.ry >= 0.10);
    CHECK(r.ry <= 0.22);
    CHECK(r.rz > 0.0);
  }
  for (const auto& b : hard.blocks) {
    CHECK(b.height >= 0.10);
    CHECK(b.height <= 0.25);
  }
}

TEST_CASE("invalid specs are rejected") {
  CourseSpec s;
  s.resolution = 0.2;
  CHECK_THROWS_AS(generate_course(s), ParameterError);
  s = CourseSpec{};
  s.width_m = 0.0;
  CHECK_THROWS_AS(generate_course(s), ParameterError);
  CHECK_THROWS_AS(parse_difficulty("Hard"), ParameterError);
  CHECK_THROWS_AS(HeightMap(1, 5, 0.02, 0, 0, std::vector<double>(5, 0.0)), ParameterError);
  CHECK_THROWS_AS(HeightMap(2, 2, 0.02, 0, 0, {0, 0, -1, 0}), ParameterError);
}

TEST_CASE("height_at reproduces stored cells and linear midpoints") {
  const HeightMap m(3, 2, 0.1, 1.0, 2.0, {0.0, 0.2, 0.4, 0.0, 0.2, 0.4});
  CHECK(height_at(m, 1.1, 2.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(height_at(m, 1.2, 2.1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(height_at(m, 1.05, 2.05) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(height_at(m, 0.99, 2.0), QueryError);
  CHECK_THROWS_AS(height_at(m, 1.0, 2.2), QueryError);
}

TEST_CASE("height_at agrees with the bilinear oracle on random points") {
  const HeightMap m = generate_course(spec_of(Difficulty::Difficult, 5));
  Rng rng(99);
  for (int k = 0; k < 5000; ++k) {
    const double x = rng.uniform(m.origin_x(), m.max_x());
    const double y = rng.uniform(m.origin_y(), m.max_y());
    REQUIRE(std::abs(height_at(m, x, y) - vwtest::bilinear_oracle(m, x, y)) <= 1e-12);
  }
  for (int j = 0; j < m.width_cells(); j += 7)
    for (int i = 0; i < m.length_cells(); i += 5)
      REQUIRE(std::abs(height_at(m, m.origin_x() + i * m.resolution(), m.origin_y() + j * m.resolution()) - m.cell(i, j)) <= 1e-12);
}

TEST_CASE("slope_at recovers plane gradients") {
  const HeightMap flat = HeightMap::flat(20, 20, 0.02);
  const auto [fx, fy] = slope_at(flat, 0.2, 0.2);
  CHECK(fx == 0.0);
  CHECK(fy == 0.0);

  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const double a = rng.uniform(0.0, 0.5), b = rng.uniform(0.0, 0.5);
    const HeightMap m = vwtest::function_map(40, 30, 0.02, 0.0, 0.0, [&](double x, double y) { return 0.05 + a * x + b * y; });
    const auto [gx, gy] = slope_at(m, rng.uniform(0.03, 0.7), rng.uniform(0.03, 0.5));
    CHECK(gx == doctest::Approx(a).epsilon(1e-9));
    CHECK(gy == doctest::Approx(b).epsilon(1e-9));
  }
  const HeightMap ramp = vwtest::function_map(40, 30, 0.02, 0.0, 0.0, [](double x, double) { return 0.3 * x; });
  const auto [rx, ry] = slope_at(ramp, 0.4, 0.3);
  CHECK(std::abs(rx - 0.3) < 1e-9);
  CHECK(std::abs(ry) < 1e-9);
  CHECK_THROWS_AS(slope_at(ramp, 0.01, 0.3), QueryError);
}

TEST_CASE("height_or_ground reads zero off the map") {
  const HeightMap m(2, 2, 1.0, 0, 0, {1, 1, 1, 1});
  CHECK(height_or_ground(m, -0.5, 0.5) == 0.0);
  CHECK(height_or_ground(m, 0.5, 0.5) == 1.0);
}

TEST_CASE("apron padding keeps course coordinates") {
  const CourseSpec s = spec_of(Difficulty::Medium, 2);
  const HeightMap m = generate_course(s);
  const HeightMap p = pad_flat_x(m, 0.75);
  CHECK(p.origin_x() == doctest::Approx(-0.76).epsilon(1e-12));
  CHECK(p.width_cells() == m.width_cells());
  Rng rng(1);
  for (int k = 0; k < 500; ++k) {
    const double x = rng.uniform(0.0, m.max_x()), y = rng.uniform(0.0, m.max_y());
    REQUIRE(std::abs(height_at(p, x, y) - height_at(m, x, y)) < 1e-12);
  }
  CHECK(height_at(p, -0.7, 0.5) == 0.0);
}

TEST_CASE("heightmap PGM export round-trips bit-exactly") {
  const auto dir = vwtest::scratch_dir("terrain-pgm");
  const HeightMap m = generate_course(spec_of(Difficulty::Difficult, 11));
  save_heightmap(m, dir / "c.pgm");
  CHECK(std::filesystem::exists(dir / "c.pgm.meta"));
  CHECK(load_heightmap(dir / "c.pgm") == m);

  const std::string bytes = read_file(dir / "c.pgm");
  CHECK(bytes.rfind("P5", 0) == 0);
  CHECK(bytes.find("65535") != std::string::npos);
}

TEST_CASE("16-bit PGM codec is big-endian and validates its header") {
  Gray16Image img{2, 1, {0x0102, 0xfffe}};
  const std::string bytes = encode_pgm16(img);
  CHECK(bytes.substr(bytes.size() - 4) == std::string("\x01\x02\xff\xfe", 4));
  const Gray16Image back = decode_pgm16(bytes);
  CHECK(back.pixels == img.pixels);
  CHECK_THROWS(decode_pgm16("P2\n2 1\n65535\n"));
  CHECK_THROWS(decode_pgm16(bytes.substr(0, bytes.size() - 1)));
}
