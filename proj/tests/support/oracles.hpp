#pragma once

// Independent reference implementations used by the tests. They are written
// for clarity, not speed, and share no code paths with the library beyond
// its public data types.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vw/appld.hpp"
#include "vw/bclearn.hpp"
#include "vw/controllers.hpp"
#include "vw/dataset.hpp"
#include "vw/terrain.hpp"
#include "vw/vehicle.hpp"

namespace vwtest {

/// Weighted average of the four surrounding samples, clamped at the last
/// row and column.
double bilinear_oracle(const vw::HeightMap& map, double x, double y);

/// March a ray in fixed steps until it is at or below the surface (ground
/// plane outside the map). Returns the travelled distance, or 5 m.
double march_oracle(const vw::HeightMap& map, const std::array<double, 3>& origin,
                    const std::array<double, 3>& dir, double step);

/// Whole-image version through the library's camera model.
vw::DepthImage render_oracle(const vw::HeightMap& map, const vw::VehicleState& state,
                             const vw::VehicleGeometry& geom, int width, int height, double step);

/// The axle rule written out literally.
double traction_oracle(const std::vector<bool>& contacts, bool lock_front, bool lock_rear, bool low_gear,
                       double pitch);

/// Counts every id; the highest count wins, ties go to the id seen last.
int brute_mode(std::span<const int> window);

/// Straightforward evaluation of the network from the layer buffers.
std::array<double, 2> forward_oracle(const vw::BcParams& params, std::span<const double> x);

/// Central finite differences of bc_loss for every coordinate.
std::vector<double> fd_gradient(const vw::BcParams& params, std::span<const vw::BcSample> batch,
                                const vw::Weights2& H, double h);

/// Map with heights z(x, y) = f(x, y) sampled on the grid.
template <class F>
vw::HeightMap function_map(int nx, int ny, double res, double ox, double oy, F f) {
  std::vector<double> h(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) h[static_cast<std::size_t>(j) * nx + i] = f(ox + i * res, oy + j * res);
  return vw::HeightMap(nx, ny, res, ox, oy, std::move(h));
}

/// Constant depth image.
vw::DepthImage flat_depth(int side, double meters);

/// Frames with a scripted ground-speed signal and actions produced by the
/// rule-based controller under `theta`. `speed(k)` gives the planar ground
/// speed at tick k.
template <class G>
std::vector<vw::DataFrame> rb_frames(const vw::RbParams& theta, int n, double t0, G speed) {
  std::vector<vw::DataFrame> frames;
  vw::FsmState fsm = vw::FsmState::start(t0);
  for (int k = 0; k < n; ++k) {
    vw::DataFrame f;
    f.t = t0 + k * vw::kTick;
    f.g.dx = speed(k);
    vw::Observation obs;
    obs.g = f.g;
    obs.t = f.t;
    auto [a, next] = vw::rb_act(obs, fsm, theta);
    fsm = next;
    f.v = a.v;
    f.omega = a.omega;
    frames.push_back(f);
  }
  return frames;
}

/// Demonstration from frames, with a constant depth image per frame.
vw::Demonstration demo_from_frames(std::vector<vw::DataFrame> frames, int depth_side = 16, double depth = 2.0);

/// Two regimes of (v, omega) with optional Gaussian noise (seeded).
std::vector<std::array<double, 2>> two_regime_series(int n1, int n2, std::array<double, 2> a,
                                                     std::array<double, 2> b, double sigma, std::uint64_t seed);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace vwtest
