#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vw/bclearn.hpp"
#include "vw/controllers.hpp"
#include "vw/dataset.hpp"

namespace vw {

// ---------------------------------------------------------------- segmentation

/// Changepoints of an N-frame series. `taus` are the 0-based first indices of
/// segments 2..K, so segment k covers [tau_{k-1}, tau_k) with tau_0 = 0 and
/// tau_K = n.
struct Changepoints {
  std::size_t n = 0;
  std::vector<std::size_t> taus;

  std::size_t K() const noexcept { return taus.size() + 1; }
  /// Half-open [begin, end) frame ranges, in order.
  std::vector<std::pair<std::size_t, std::size_t>> segments() const;

  friend bool operator==(const Changepoints&, const Changepoints&) = default;
};

struct SegmentConfig {
  std::size_t min_seg_len = 20;
  double penalty = 4.0;
  /// Stop after this many segments (0 = no limit).
  std::size_t max_segments = 0;
};

/// Binary segmentation of a 2-D series on squared deviation from segment
/// means. Each dimension is first divided by a robust noise scale (median
/// absolute first difference / (0.6745 sqrt 2), at least 1e-3), and a split is
/// accepted when it lowers the cost by more than penalty * ln N.
Changepoints segment_series(std::span<const std::array<double, 2>> series, const SegmentConfig& cfg = {});

/// Segments the demonstrated (v, omega) stream.
Changepoints segment(const Demonstration& demo, const SegmentConfig& cfg = {});

// ---------------------------------------------------------------- black-box fit

struct CmaConfig {
  int budget = 2000;
  std::uint64_t seed = 0;
  double sigma0 = 0.3;  ///< initial step, in units of the box width
  int lambda = 0;       ///< 0 = 4 + floor(3 ln n)
};

struct CmaResult {
  std::vector<double> x;  ///< best point found, in the unit box
  double f = 0.0;
  int evaluations = 0;
  std::vector<double> best_history;  ///< best-so-far value after each evaluation
};

/// CMA-ES minimization over [0, 1]^n with clipping. The mean starts at x0.
/// The last generation is truncated when the budget runs out mid-population.
CmaResult cmaes_minimize(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                         const CmaConfig& cfg);

/// Search box over the nine numeric RbParams fields (same order as RbParams::kNames).
struct RbBounds {
  std::array<double, RbParams::kDim> lo{0.1, 0.6, 0.5, 1.0, 0.5, 0.1, 0.05, 0.5, 0.005};
  std::array<double, RbParams::kDim> hi{0.6, 1.0, 4.0, 5.0, 4.0, 1.0, 0.35, 4.0, 0.1};

  void validate() const;
  bool contains(const RbParams& p) const noexcept;
  RbParams from_unit(std::span<const double> u, bool conditional_locking = false) const;
};

/// H-weighted loss of the rule-based controller replayed over frames: the
/// machine starts in Forward at the first frame's time and is fed every
/// recorded observation in order.
double replay_loss(std::span<const DataFrame> frames, const RbParams& params, const Weights2& H = {1.0, 1.0});

struct FitConfig {
  RbBounds bounds;
  int budget = 2000;
  std::uint64_t seed = 0;
  Weights2 H{1.0, 1.0};
  bool conditional_locking = false;
};

struct FitResult {
  RbParams params;
  double loss = 0.0;
  int evaluations = 0;
  std::vector<double> best_history;
};

FitResult fit_segment_params(std::span<const DataFrame> frames, const FitConfig& cfg = {});

// ---------------------------------------------------------------- context prediction

inline constexpr int kContextFeatureDim = 71;
inline constexpr int kContextPoolSide = 8;

/// 8x8 pooled depth / 5 m, wheel speeds, ground dx, dy, clearance.
std::vector<double> context_features(const Observation& obs);
std::vector<double> context_features(const Demonstration& demo, std::size_t frame);

struct ContextModel {
  int K = 1;
  int D = kContextFeatureDim;
  std::vector<double> W;  ///< K x D, row-major
  std::vector<double> b;  ///< K
  std::vector<double> mean, scale;  ///< per-feature standardization
  int window = 10;

  void validate() const;
  friend bool operator==(const ContextModel&, const ContextModel&) = default;
};

struct ClassifierConfig {
  int iterations = 500;
  double rate = 0.1;
  std::uint64_t seed = 0;
  std::size_t min_per_class = 20;
  int window = 10;
};

/// Softmax regression by full-batch gradient ascent. Labels are 1..K.
ContextModel train_context_classifier(std::span<const std::vector<double>> features, std::span<const int> labels,
                                      const ClassifierConfig& cfg = {});

/// Class probabilities for one feature vector.
std::vector<double> context_probabilities(const ContextModel& model, std::span<const double> feature);
/// Per-frame argmax (1-based; ties go to the lower id).
int classify(const ContextModel& model, std::span<const double> feature);

/// Most frequent id; among tied ids, the one seen most recently wins.
int mode_filter(std::span<const int> window);

/// Mode filter over per-frame predictions of the features, oldest first.
int predict_context(const ContextModel& model, std::span<const std::vector<double>> window);

struct ParamLibrary {
  std::map<int, RbParams> entries;

  const RbParams& at(int k) const;
  void validate() const;
  friend bool operator==(const ParamLibrary&, const ParamLibrary&) = default;
};

/// Online state: machine state plus the recent per-frame predictions.
struct AppldState {
  FsmState fsm;
  std::deque<int> recent;
  int context = 1;
};

/// Predicts the context and delegates to rb_act with that context's
/// parameters. The machine state carries over across context switches.
Action appld_act(const Observation& obs, const ContextModel& model, const ParamLibrary& library, AppldState& state);

class AppldController final : public Controller {
 public:
  AppldController(ContextModel model, ParamLibrary library);
  std::string id() const override { return "APPLD"; }
  void reset(double t0) override;
  Action act(const Observation& obs) override { return appld_act(obs, model_, library_, state_); }
  bool needs_depth() const override { return true; }
  std::optional<RbMode> mode() const override { return state_.fsm.mode; }
  int context() const noexcept { return state_.context; }

 private:
  ContextModel model_;
  ParamLibrary library_;
  AppldState state_;
};

// ---------------------------------------------------------------- pipeline

struct AppldConfig {
  SegmentConfig segmentation;
  FitConfig fit;
  ClassifierConfig classifier;
};

struct AppldSegment {
  std::size_t demo = 0;
  std::size_t begin = 0, end = 0;
  int context = 1;
  double loss = 0.0;
};

struct AppldResult {
  ParamLibrary library;
  ContextModel model;
  std::vector<AppldSegment> segments;
};

/// Segment every demonstration, fit one parameter set per segment, train the
/// classifier on the segment labels.
AppldResult appld_fit(std::span<const Demonstration> demos, const AppldConfig& cfg = {});

std::string library_to_json(const ParamLibrary& lib);
ParamLibrary library_from_json(const std::string& text);

/// "VWCM1" binary: magic, u64 K, u64 D, then W, b, mean, scale as little-endian doubles.
std::string encode_context_model(const ContextModel& model);
ContextModel decode_context_model(const std::string& bytes);

/// Writes library.json, context.json (window and shape) and context.vwcm.
void save_appld(const std::filesystem::path& dir, const ParamLibrary& lib, const ContextModel& model);
std::pair<ParamLibrary, ContextModel> load_appld(const std::filesystem::path& dir);

}  // namespace vw
