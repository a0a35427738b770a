#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vw/controllers.hpp"
#include "vw/vehicle.hpp"

namespace vw {

struct Demonstration;

/// Network shape: stride-2 3x3 convolutions (padding 1) over a square
/// single-channel image, flattened into rectified dense layers, then a
/// linear 2-unit head producing (v, omega).
struct BcArch {
  int input_side = 32;
  std::vector<int> conv_channels{8, 16};
  std::vector<int> hidden{256, 128, 64};

  /// Small variant for tests.
  static BcArch tiny() { return BcArch{8, {2}, {6, 4}}; }

  friend bool operator==(const BcArch&, const BcArch&) = default;
};

enum class LayerKind : std::uint64_t { Conv = 0, Dense = 1 };

/// One layer. Conv weights are laid out [out][in][kh][kw]; dense weights
/// [out][in] (kh = kw = stride = 1, pad = 0).
struct BcLayer {
  LayerKind kind = LayerKind::Dense;
  int out = 0, in = 0, kh = 1, kw = 1, stride = 1, pad = 0;
  int in_side = 1;   ///< spatial side of the input (1 for dense)
  int out_side = 1;  ///< spatial side of the output (1 for dense)
  std::vector<double> w;
  std::vector<double> b;

  std::size_t input_size() const noexcept { return static_cast<std::size_t>(in) * in_side * in_side; }
  std::size_t output_size() const noexcept { return static_cast<std::size_t>(out) * out_side * out_side; }

  friend bool operator==(const BcLayer&, const BcLayer&) = default;
};

struct BcParams {
  int input_side = 32;
  std::vector<BcLayer> layers;

  /// Zero-valued parameters with the given shape.
  static BcParams zeros(const BcArch& arch = {});

  std::size_t parameter_count() const noexcept;
  /// Checks shape consistency; throws ShapeError.
  void validate() const;

  /// All weights then biases, layer by layer (for tests and optimizers).
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

  friend bool operator==(const BcParams&, const BcParams&) = default;
};

/// Uniform in +/- sqrt(6 / (fan_in + fan_out)), zero biases.
BcParams init_params(const BcArch& arch, std::uint64_t seed);

/// Area-average pooling to `side` x `side`, divided by the maximum range.
/// Integer ratios reduce to block means; other sizes use exact fractional overlap.
std::vector<double> preprocess(const DepthImage& depth, int side = 32);

std::array<double, 2> forward(const BcParams& params, std::span<const double> x);

struct BcSample {
  std::vector<double> x;  ///< preprocessed image
  std::array<double, 2> a{};
};

using Weights2 = std::array<double, 2>;

/// Sum over the batch of r^T H r with r = a - forward(x).
double bc_loss(const BcParams& params, std::span<const BcSample> batch, const Weights2& H = {1.0, 1.0});

/// Exact gradient of bc_loss, shaped like `params`.
BcParams bc_gradient(const BcParams& params, std::span<const BcSample> batch, const Weights2& H = {1.0, 1.0},
                     double* loss_out = nullptr);

struct TrainConfig {
  Weights2 H{1.0, 1.0};
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 50;
  std::uint64_t seed = 0;
  BcArch arch;

  void validate() const;
};

struct TrainResult {
  BcParams params;
  /// Mean per-sample loss over the training set: before training, then after each epoch.
  std::vector<double> loss_curve;
};

/// Adam on minibatch sums with a seeded shuffle per epoch. `init` overrides
/// the seeded initialization.
TrainResult train(std::span<const BcSample> samples, const TrainConfig& cfg, const BcParams* init = nullptr);

/// Preprocessed training samples from every frame of the demonstrations.
std::vector<BcSample> samples_from_demos(std::span<const Demonstration> demos, int side = 32);

TrainResult train(std::span<const Demonstration> demos, const TrainConfig& cfg);

/// Network command clamped to the action bounds, locks engaged, low gear.
Action bc_act(const BcParams& params, const Observation& obs);

class BcController final : public Controller {
 public:
  BcController(BcParams params, std::string id = "BC") : params_(std::move(params)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  void reset(double) override {}
  Action act(const Observation& obs) override { return bc_act(params_, obs); }
  bool needs_depth() const override { return true; }
  const BcParams& params() const noexcept { return params_; }

 private:
  BcParams params_;
  std::string id_;
};

/// "VWBC1" binary: magic, u64 layer count, u64 input side, per layer seven
/// u64 (kind, out, in, kh, kw, stride, pad), then every layer's weights and
/// biases as little-endian doubles.
std::string encode_bc_params(const BcParams& params);
BcParams decode_bc_params(const std::string& bytes);
void save_bc_params(const BcParams& params, const std::filesystem::path& path);
BcParams load_bc_params(const std::filesystem::path& path);

}  // namespace vw
