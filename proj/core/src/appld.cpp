#include "vw/appld.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "vw/error.hpp"
#include "vw/pgm.hpp"
#include "vw/rng.hpp"

namespace vw {

std::vector<std::pair<std::size_t, std::size_t>> Changepoints::segments() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (const auto tau : taus) {
    out.emplace_back(begin, tau);
    begin = tau;
  }
  out.emplace_back(begin, n);
  return out;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

double noise_scale(std::span<const std::array<double, 2>> series, int dim) {
  std::vector<double> diffs;
  diffs.reserve(series.size());
  for (std::size_t i = 1; i < series.size(); ++i) diffs.push_back(std::abs(series[i][dim] - series[i - 1][dim]));
  const double mad = median(std::move(diffs));
  return std::max(mad / (0.6745 * std::sqrt(2.0)), 1e-3);
}

class PrefixCost {
 public:
  explicit PrefixCost(const std::vector<std::array<double, 2>>& x) : s_(x.size() + 1), q_(x.size() + 1) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int d = 0; d < 2; ++d) {
        s_[i + 1][d] = s_[i][d] + x[i][d];
        q_[i + 1][d] = q_[i][d] + x[i][d] * x[i][d];
      }
    }
  }

  // Squared deviation from the mean over [a, b).
  double cost(std::size_t a, std::size_t b) const {
    const double n = static_cast<double>(b - a);
    double c = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double s = s_[b][d] - s_[a][d];
      c += (q_[b][d] - q_[a][d]) - s * s / n;
    }
    return std::max(c, 0.0);
  }

 private:
  std::vector<std::array<double, 2>> s_, q_;
};

struct Candidate {
  std::size_t a = 0, b = 0, split = 0;
  double gain = -1.0;
};

Candidate best_split(const PrefixCost& pc, std::size_t a, std::size_t b, std::size_t min_len) {
  Candidate c{a, b, 0, -1.0};
  if (b - a < 2 * min_len) return c;
  const double whole = pc.cost(a, b);
  for (std::size_t s = a + min_len; s + min_len <= b; ++s) {
    const double gain = whole - pc.cost(a, s) - pc.cost(s, b);
    if (gain > c.gain) {
      c.gain = gain;
      c.split = s;
    }
  }
  return c;
}

}  // namespace

Changepoints segment_series(std::span<const std::array<double, 2>> series, const SegmentConfig& cfg) {
  if (cfg.min_seg_len < 1) throw ParameterError("min_seg_len must be positive");
  if (!(cfg.penalty >= 0.0)) throw ParameterError("penalty must be non-negative");
  const std::size_t n = series.size();
  if (n < 2 * cfg.min_seg_len) throw DataError("demonstration too short to segment");

  const double scale[2] = {noise_scale(series, 0), noise_scale(series, 1)};
  std::vector<std::array<double, 2>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = {series[i][0] / scale[0], series[i][1] / scale[1]};
  const PrefixCost pc(z);
  const double threshold = cfg.penalty * std::log(static_cast<double>(n));

  Changepoints cp;
  cp.n = n;
  std::vector<Candidate> open{best_split(pc, 0, n, cfg.min_seg_len)};
  // Best-first; without a segment cap this accepts the same splits as the
  // plain recursion because each interval is judged on its own.
  while (cfg.max_segments == 0 || cp.K() < cfg.max_segments) {
    auto it = std::max_element(open.begin(), open.end(),
                               [](const Candidate& x, const Candidate& y) { return x.gain < y.gain; });
    if (it == open.end() || !(it->gain > threshold)) break;
    const Candidate c = *it;
    open.erase(it);
    cp.taus.push_back(c.split);
    open.push_back(best_split(pc, c.a, c.split, cfg.min_seg_len));
    open.push_back(best_split(pc, c.split, c.b, cfg.min_seg_len));
  }
  std::sort(cp.taus.begin(), cp.taus.end());
  return cp;
}

Changepoints segment(const Demonstration& demo, const SegmentConfig& cfg) {
  std::vector<std::array<double, 2>> series;
  series.reserve(demo.frames.size());
  for (const auto& f : demo.frames) series.push_back({f.v, f.omega});
  return segment_series(series, cfg);
}

CmaResult cmaes_minimize(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                         const CmaConfig& cfg) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw ParameterError("CMA-ES needs at least one dimension");
  if (cfg.budget < 1) throw ParameterError("evaluation budget must be positive");
  if (!(cfg.sigma0 > 0.0)) throw ParameterError("initial step must be positive");

  const int lambda = cfg.lambda > 0 ? cfg.lambda : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  const int mu = lambda / 2;
  VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();
  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(static_cast<double>(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  VectorXd mean(n);
  for (int k = 0; k < n; ++k) mean[k] = std::clamp(x0[k], 0.0, 1.0);
  double sigma = cfg.sigma0;
  VectorXd pc = VectorXd::Zero(n), ps = VectorXd::Zero(n);
  MatrixXd C = MatrixXd::Identity(n, n), B = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);
  Rng rng(derive_seed(cfg.seed, 0xc3a));

  CmaResult result;
  result.f = std::numeric_limits<double>::infinity();
  std::vector<double> point(n);
  int generation = 0;

  while (result.evaluations < cfg.budget) {
    const int count = std::min(lambda, cfg.budget - result.evaluations);
    std::vector<VectorXd> xs(count);
    std::vector<double> fs(count);
    for (int i = 0; i < count; ++i) {
      VectorXd z(n);
      for (int k = 0; k < n; ++k) z[k] = rng.normal();
      VectorXd x = mean + sigma * (B * D.asDiagonal() * z);
      for (int k = 0; k < n; ++k) {
        x[k] = std::clamp(x[k], 0.0, 1.0);
        point[k] = x[k];
      }
      fs[i] = f(point);
      xs[i] = x;
      ++result.evaluations;
      if (fs[i] < result.f) {
        result.f = fs[i];
        result.x = point;
      }
      result.best_history.push_back(result.f);
    }
    if (count < lambda) break;
    ++generation;

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });

    const VectorXd old_mean = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += weights[i] * xs[order[i]];
    const VectorXd step = (mean - old_mean) / sigma;

    const MatrixXd inv_sqrt_c = B * D.cwiseInverse().asDiagonal() * B.transpose();
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt_c * step);
    const double ps_norm = ps.norm() / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * generation)) / chi_n;
    const bool hsig = ps_norm < 1.4 + 2.0 / (n + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * step;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const VectorXd y = (xs[order[i]] - old_mean) / sigma;
      rank_mu += weights[i] * y * y.transpose();
    }
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2.0 - cc)) * C) + cmu * rank_mu;
    sigma *= std::exp((cs / damps) * (ps.norm() / chi_n - 1.0));
    sigma = std::min(sigma, 1.0);

    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    B = eig.eigenvectors();
    D = eig.eigenvalues().cwiseMax(1e-30).cwiseSqrt();

    if (sigma * D.maxCoeff() < 1e-16) break;  // collapsed; further samples repeat the mean
  }
  return result;
}

void RbBounds::validate() const {
  for (std::size_t k = 0; k < RbParams::kDim; ++k) {
    if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(lo[k] < hi[k]) || !(lo[k] > 0.0)) {
      throw ParameterError("bounds for " + std::string(RbParams::kNames[k]) + " must satisfy 0 < lo < hi");
    }
  }
}

bool RbBounds::contains(const RbParams& p) const noexcept {
  const auto v = p.to_vector();
  for (std::size_t k = 0; k < RbParams::kDim; ++k) {
    if (v[k] < lo[k] || v[k] > hi[k]) return false;
  }
  return true;
}

RbParams RbBounds::from_unit(std::span<const double> u, bool conditional_locking) const {
  std::array<double, RbParams::kDim> v{};
  for (std::size_t k = 0; k < RbParams::kDim; ++k) v[k] = lo[k] + (hi[k] - lo[k]) * std::clamp(u[k], 0.0, 1.0);
  return RbParams::from_vector(v, conditional_locking);
}

double replay_loss(std::span<const DataFrame> frames, const RbParams& params, const Weights2& H) {
  if (frames.empty()) return 0.0;
  FsmState fsm = FsmState::start(frames.front().t);
  double loss = 0.0;
  Observation obs;
  for (const auto& f : frames) {
    obs.w = f.w;
    obs.g = f.g;
    obs.t = f.t;
    auto [a, next] = rb_act(obs, fsm, params);
    fsm = next;
    const double r0 = f.v - a.v, r1 = f.omega - a.omega;
    loss += H[0] * r0 * r0 + H[1] * r1 * r1;
  }
  return loss;
}

FitResult fit_segment_params(std::span<const DataFrame> frames, const FitConfig& cfg) {
  cfg.bounds.validate();
  if (frames.empty()) throw DataError("cannot fit parameters to an empty segment");
  if (!(cfg.H[0] > 0.0) || !(cfg.H[1] > 0.0)) throw ParameterError("H entries must be positive");
  const auto objective = [&](std::span<const double> u) {
    return replay_loss(frames, cfg.bounds.from_unit(u, cfg.conditional_locking), cfg.H);
  };
  CmaConfig cma;
  cma.budget = cfg.budget;
  cma.seed = cfg.seed;
  const CmaResult r = cmaes_minimize(objective, std::vector<double>(RbParams::kDim, 0.5), cma);
  FitResult out;
  out.params = cfg.bounds.from_unit(r.x, cfg.conditional_locking);
  out.loss = r.f;
  out.evaluations = r.evaluations;
  out.best_history = r.best_history;
  return out;
}

std::vector<double> context_features(const Observation& obs) {
  if (!obs.depth) throw DataError("context features need a depth image");
  std::vector<double> f = preprocess(*obs.depth, kContextPoolSide);
  f.insert(f.end(), obs.w.begin(), obs.w.end());
  f.push_back(obs.g.dx);
  f.push_back(obs.g.dy);
  f.push_back(obs.g.z_clearance);
  return f;
}

std::vector<double> context_features(const Demonstration& demo, std::size_t frame) {
  return context_features(demo.observation(frame));
}

void ContextModel::validate() const {
  if (K < 1 || D < 1) throw ParameterError("context model needs K >= 1 and D >= 1");
  if (window < 1) throw ParameterError("mode-filter window must be positive");
  if (W.size() != static_cast<std::size_t>(K) * D || b.size() != std::size_t(K) || mean.size() != std::size_t(D) ||
      scale.size() != std::size_t(D)) {
    throw ShapeError("context model buffers do not match K x D");
  }
}

namespace {

void logits(const ContextModel& m, std::span<const double> x_std, std::vector<double>& out) {
  out.resize(m.K);
  for (int k = 0; k < m.K; ++k) {
    const double* w = &m.W[static_cast<std::size_t>(k) * m.D];
    double s = m.b[k];
    for (int d = 0; d < m.D; ++d) s += w[d] * x_std[d];
    out[k] = s;
  }
}

void softmax(std::vector<double>& z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - top));
  for (double& v : z) v /= sum;
}

std::vector<double> standardize(const ContextModel& m, std::span<const double> x) {
  if (x.size() != std::size_t(m.D)) throw ShapeError("feature length does not match the context model");
  std::vector<double> out(m.D);
  for (int d = 0; d < m.D; ++d) out[d] = (x[d] - m.mean[d]) / m.scale[d];
  return out;
}

}  // namespace

ContextModel train_context_classifier(std::span<const std::vector<double>> features, std::span<const int> labels,
                                      const ClassifierConfig& cfg) {
  if (features.size() != labels.size()) throw ShapeError("features and labels differ in length");
  if (features.empty()) throw DataError("no training frames for the context classifier");
  if (cfg.iterations < 0 || !(cfg.rate > 0.0) || cfg.window < 1) throw ParameterError("bad classifier config");
  const int K = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 1) throw DataError("context labels start at 1");
  std::vector<std::size_t> counts(K + 1, 0);
  for (const int c : labels) ++counts[c];
  for (int k = 1; k <= K; ++k) {
    if (counts[k] < cfg.min_per_class) {
      throw DataError("context " + std::to_string(k) + " has " + std::to_string(counts[k]) + " examples");
    }
  }
  const int D = static_cast<int>(features.front().size());
  for (const auto& f : features) {
    if (static_cast<int>(f.size()) != D) throw ShapeError("feature vectors differ in length");
  }

  ContextModel m;
  m.K = K;
  m.D = D;
  m.window = cfg.window;
  m.mean.assign(D, 0.0);
  m.scale.assign(D, 0.0);
  const double n = static_cast<double>(features.size());
  for (const auto& f : features)
    for (int d = 0; d < D; ++d) m.mean[d] += f[d];
  for (double& v : m.mean) v /= n;
  for (const auto& f : features)
    for (int d = 0; d < D; ++d) m.scale[d] += (f[d] - m.mean[d]) * (f[d] - m.mean[d]);
  for (double& v : m.scale) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }

  Rng rng(derive_seed(cfg.seed, 0xc1a5));
  m.W.resize(static_cast<std::size_t>(K) * D);
  for (double& w : m.W) w = rng.uniform(-0.01, 0.01);
  m.b.assign(K, 0.0);
  if (K == 1) return m;

  std::vector<std::vector<double>> xs;
  xs.reserve(features.size());
  for (const auto& f : features) xs.push_back(standardize(m, f));
  std::vector<double> gW(m.W.size()), gb(K), p;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::fill(gW.begin(), gW.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      logits(m, xs[i], p);
      softmax(p);
      for (int k = 0; k < K; ++k) {
        const double e = (labels[i] == k + 1 ? 1.0 : 0.0) - p[k];
        gb[k] += e;
        double* g = &gW[static_cast<std::size_t>(k) * D];
        for (int d = 0; d < D; ++d) g[d] += e * xs[i][d];
      }
    }
    for (std::size_t j = 0; j < m.W.size(); ++j) m.W[j] += cfg.rate * gW[j] / n;
    for (int k = 0; k < K; ++k) m.b[k] += cfg.rate * gb[k] / n;
  }
  return m;
}

std::vector<double> context_probabilities(const ContextModel& model, std::span<const double> feature) {
  std::vector<double> p;
  logits(model, standardize(model, feature), p);
  softmax(p);
  return p;
}

int classify(const ContextModel& model, std::span<const double> feature) {
  std::vector<double> z;
  logits(model, standardize(model, feature), z);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()) + 1;
}

int mode_filter(std::span<const int> window) {
  if (window.empty()) throw DataError("mode filter over an empty window");
  std::map<int, std::pair<int, std::size_t>> tally;  // id -> (count, last position)
  for (std::size_t i = 0; i < window.size(); ++i) {
    auto& [count, last] = tally[window[i]];
    ++count;
    last = i;
  }
  int best = window.back();
  std::pair<int, std::size_t> best_key{-1, 0};
  for (const auto& [id, key] : tally) {
    if (key > best_key) {
      best_key = key;
      best = id;
    }
  }
  return best;
}

int predict_context(const ContextModel& model, std::span<const std::vector<double>> window) {
  if (window.empty()) throw DataError("context prediction over an empty window");
  std::vector<int> ids;
  ids.reserve(window.size());
  for (const auto& f : window) ids.push_back(classify(model, f));
  return mode_filter(ids);
}

const RbParams& ParamLibrary::at(int k) const {
  const auto it = entries.find(k);
  if (it == entries.end()) throw LibraryError("no parameters for context " + std::to_string(k));
  return it->second;
}

void ParamLibrary::validate() const {
  if (entries.empty()) throw LibraryError("parameter library is empty");
  int expect = 1;
  for (const auto& [k, p] : entries) {
    if (k != expect++) throw LibraryError("library ids must be exactly 1..K");
    p.validate();
  }
}

Action appld_act(const Observation& obs, const ContextModel& model, const ParamLibrary& library, AppldState& state) {
  state.recent.push_back(classify(model, context_features(obs)));
  while (state.recent.size() > static_cast<std::size_t>(model.window)) state.recent.pop_front();
  const std::vector<int> window(state.recent.begin(), state.recent.end());
  state.context = mode_filter(window);
  auto [action, next] = rb_act(obs, state.fsm, library.at(state.context));
  state.fsm = next;
  return action;
}

AppldController::AppldController(ContextModel model, ParamLibrary library)
    : model_(std::move(model)), library_(std::move(library)) {
  model_.validate();
  for (int k = 1; k <= model_.K; ++k) library_.at(k);
}

void AppldController::reset(double t0) {
  state_ = AppldState{};
  state_.fsm = FsmState::start(t0);
}

AppldResult appld_fit(std::span<const Demonstration> demos, const AppldConfig& cfg) {
  if (demos.empty()) throw DataError("no demonstrations");
  AppldResult out;
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  int context = 0;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const Demonstration& demo = demos[d];
    for (const auto& [begin, end] : segment(demo, cfg.segmentation).segments()) {
      ++context;
      FitConfig fit = cfg.fit;
      fit.seed = derive_seed(cfg.fit.seed, static_cast<std::uint64_t>(context));
      const auto frames = std::span<const DataFrame>(demo.frames).subspan(begin, end - begin);
      const FitResult r = fit_segment_params(frames, fit);
      out.library.entries[context] = r.params;
      out.segments.push_back({d, begin, end, context, r.loss});
      for (std::size_t i = begin; i < end; ++i) {
        features.push_back(context_features(demo, i));
        labels.push_back(context);
      }
    }
  }
  ClassifierConfig cc = cfg.classifier;
  cc.min_per_class = std::min(cc.min_per_class, cfg.segmentation.min_seg_len);
  out.model = train_context_classifier(features, labels, cc);
  return out;
}

std::string library_to_json(const ParamLibrary& lib) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [k, p] : lib.entries) {
    nlohmann::ordered_json e;
    e["context"] = k;
    e["params"] = nlohmann::ordered_json::parse(rb_params_to_json(p));
    j.push_back(e);
  }
  return j.dump(2) + "\n";
}

ParamLibrary library_from_json(const std::string& text) {
  try {
    ParamLibrary lib;
    for (const auto& e : nlohmann::json::parse(text)) {
      lib.entries[e.at("context").get<int>()] = rb_params_from_json(e.at("params").dump());
    }
    lib.validate();
    return lib;
  } catch (const nlohmann::json::exception& e) {
    throw LibraryError(std::string("parameter library: ") + e.what());
  }
}

namespace {

constexpr char kCmMagic[] = "VWCM1";
constexpr std::size_t kCmMagicLen = 5;

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw DataError("VWCM1 data truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
  pos += 8;
  return v;
}

}  // namespace

std::string encode_context_model(const ContextModel& m) {
  m.validate();
  std::string out(kCmMagic, kCmMagicLen);
  put_u64(out, static_cast<std::uint64_t>(m.K));
  put_u64(out, static_cast<std::uint64_t>(m.D));
  for (const auto* v : {&m.W, &m.b, &m.mean, &m.scale}) {
    for (const double x : *v) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

ContextModel decode_context_model(const std::string& bytes) {
  if (bytes.compare(0, kCmMagicLen, kCmMagic) != 0) throw DataError("not a VWCM1 file");
  std::size_t pos = kCmMagicLen;
  const std::uint64_t K = get_u64(bytes, pos), D = get_u64(bytes, pos);
  if (K < 1 || D < 1 || K > 1u << 16 || D > 1u << 20 || (K * D + K + 2 * D) * 8 != bytes.size() - pos) {
    throw DataError("VWCM1 shape does not match the file size");
  }
  ContextModel m;
  m.K = static_cast<int>(K);
  m.D = static_cast<int>(D);
  m.W.resize(K * D);
  m.b.resize(K);
  m.mean.resize(D);
  m.scale.resize(D);
  for (auto* v : {&m.W, &m.b, &m.mean, &m.scale}) {
    for (double& x : *v) x = std::bit_cast<double>(get_u64(bytes, pos));
  }
  return m;
}

void save_appld(const std::filesystem::path& dir, const ParamLibrary& lib, const ContextModel& model) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StorageError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "library.json", library_to_json(lib));
  nlohmann::ordered_json j;
  j["contexts"] = model.K;
  j["features"] = model.D;
  j["window"] = model.window;
  j["phi"] = "context.vwcm";
  write_file(dir / "context.json", j.dump(2) + "\n");
  write_file(dir / "context.vwcm", encode_context_model(model));
}

std::pair<ParamLibrary, ContextModel> load_appld(const std::filesystem::path& dir) {
  ParamLibrary lib = library_from_json(read_file(dir / "library.json"));
  ContextModel model;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "context.json"));
    model = decode_context_model(read_file(dir / j.value("phi", std::string("context.vwcm"))));
    model.window = j.value("window", 10);
    if (j.value("contexts", model.K) != model.K || j.value("features", model.D) != model.D) {
      throw DataError("context.json disagrees with the classifier file");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("context.json: ") + e.what());
  }
  model.validate();
  for (int k = 1; k <= model.K; ++k) lib.at(k);
  return {std::move(lib), std::move(model)};
}

}  // namespace vw
