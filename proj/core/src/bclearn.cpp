#include "vw/bclearn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "vw/dataset.hpp"
#include "vw/error.hpp"
#include "vw/pgm.hpp"
#include "vw/rng.hpp"

namespace vw {

namespace {

constexpr int kKernel = 3;
constexpr int kStride = 2;
constexpr int kPad = 1;

int conv_out_side(int side) { return (side + 2 * kPad - kKernel) / kStride + 1; }

}  // namespace

BcParams BcParams::zeros(const BcArch& arch) {
  if (arch.input_side < 1) throw ShapeError("input side must be positive");
  BcParams p;
  p.input_side = arch.input_side;
  int side = arch.input_side;
  int channels = 1;
  for (const int ch : arch.conv_channels) {
    if (ch < 1) throw ShapeError("conv channel count must be positive");
    BcLayer l;
    l.kind = LayerKind::Conv;
    l.out = ch;
    l.in = channels;
    l.kh = l.kw = kKernel;
    l.stride = kStride;
    l.pad = kPad;
    l.in_side = side;
    l.out_side = conv_out_side(side);
    l.w.assign(static_cast<std::size_t>(l.out) * l.in * l.kh * l.kw, 0.0);
    l.b.assign(l.out, 0.0);
    p.layers.push_back(std::move(l));
    side = p.layers.back().out_side;
    channels = ch;
  }
  int width = channels * side * side;
  std::vector<int> units = arch.hidden;
  units.push_back(2);
  for (const int n : units) {
    if (n < 1) throw ShapeError("dense layer width must be positive");
    BcLayer l;
    l.kind = LayerKind::Dense;
    l.out = n;
    l.in = width;
    l.w.assign(static_cast<std::size_t>(n) * width, 0.0);
    l.b.assign(n, 0.0);
    p.layers.push_back(std::move(l));
    width = n;
  }
  return p;
}

std::size_t BcParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void BcParams::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  std::size_t width = static_cast<std::size_t>(input_side) * input_side;
  int side = input_side;
  int channels = 1;
  bool dense_seen = false;
  for (const auto& l : layers) {
    if (l.out < 1 || l.in < 1) throw ShapeError("layer with empty dimension");
    if (l.kind == LayerKind::Conv) {
      if (dense_seen) throw ShapeError("convolution after a dense layer");
      if (l.in != channels || l.in_side != side || l.stride < 1 || l.pad < 0 ||
          l.out_side != (side + 2 * l.pad - l.kh) / l.stride + 1) {
        throw ShapeError("inconsistent convolution shape");
      }
      side = l.out_side;
      channels = l.out;
    } else {
      dense_seen = true;
      if (l.input_size() != width || l.kh != 1 || l.kw != 1) throw ShapeError("inconsistent dense shape");
    }
    if (l.w.size() != static_cast<std::size_t>(l.out) * l.in * l.kh * l.kw || l.b.size() != std::size_t(l.out)) {
      throw ShapeError("parameter buffer size mismatch");
    }
    width = l.output_size();
  }
  if (layers.back().kind != LayerKind::Dense || layers.back().out != 2) {
    throw ShapeError("final layer must be dense with 2 outputs");
  }
}

std::vector<double> BcParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    out.insert(out.end(), l.w.begin(), l.w.end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
  return out;
}

void BcParams::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count()) throw ShapeError("flat parameter size mismatch");
  std::size_t k = 0;
  for (auto& l : layers) {
    for (double& w : l.w) w = values[k++];
    for (double& b : l.b) b = values[k++];
  }
}

BcParams init_params(const BcArch& arch, std::uint64_t seed) {
  BcParams p = BcParams::zeros(arch);
  Rng rng(derive_seed(seed, 0x1a17));
  for (auto& l : p.layers) {
    const double fan_in = static_cast<double>(l.in) * l.kh * l.kw;
    const double fan_out = static_cast<double>(l.out) * l.kh * l.kw;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : l.w) w = rng.uniform(-limit, limit);
  }
  return p;
}

std::vector<double> preprocess(const DepthImage& depth, int side) {
  if (depth.width != depth.height) throw ShapeError("depth image must be square");
  if (depth.width < side) throw ShapeError("depth image smaller than the network input");
  if (depth.data.size() != static_cast<std::size_t>(depth.width) * depth.height) {
    throw ShapeError("depth buffer size mismatch");
  }
  const int n = depth.width;
  // Per-axis overlap of output cell o with input cells, in input-pixel units.
  struct Span {
    int first = 0;
    std::vector<double> weight;
  };
  std::vector<Span> spans(side);
  for (int o = 0; o < side; ++o) {
    const double lo = static_cast<double>(o) * n / side;
    const double hi = static_cast<double>(o + 1) * n / side;
    Span& s = spans[o];
    s.first = static_cast<int>(std::floor(lo));
    for (int i = s.first; i < n && i < hi; ++i) {
      const double w = std::min<double>(i + 1, hi) - std::max<double>(i, lo);
      if (w > 0.0) s.weight.push_back(w);
    }
  }
  const double area = (static_cast<double>(n) / side) * (static_cast<double>(n) / side);
  std::vector<double> out(static_cast<std::size_t>(side) * side);
  for (int oy = 0; oy < side; ++oy) {
    const Span& sy = spans[oy];
    for (int ox = 0; ox < side; ++ox) {
      const Span& sx = spans[ox];
      double sum = 0.0;
      for (std::size_t a = 0; a < sy.weight.size(); ++a) {
        const double* row = &depth.data[static_cast<std::size_t>(sy.first + a) * n + sx.first];
        double line = 0.0;
        for (std::size_t b = 0; b < sx.weight.size(); ++b) line += sx.weight[b] * row[b];
        sum += sy.weight[a] * line;
      }
      out[static_cast<std::size_t>(oy) * side + ox] = sum / area / kMaxDepth;
    }
  }
  return out;
}

namespace {

void layer_forward(const BcLayer& l, const double* x, double* z) {
  if (l.kind == LayerKind::Dense) {
    for (int o = 0; o < l.out; ++o) {
      const double* w = &l.w[static_cast<std::size_t>(o) * l.in];
      double s = 0.0;
      for (int i = 0; i < l.in; ++i) s += w[i] * x[i];
      z[o] = s + l.b[o];
    }
    return;
  }
  const int is = l.in_side, os = l.out_side;
  for (int o = 0; o < l.out; ++o) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        double s = l.b[o];
        for (int c = 0; c < l.in; ++c) {
          for (int ky = 0; ky < l.kh; ++ky) {
            const int iy = oy * l.stride - l.pad + ky;
            if (iy < 0 || iy >= is) continue;
            for (int kx = 0; kx < l.kw; ++kx) {
              const int ix = ox * l.stride - l.pad + kx;
              if (ix < 0 || ix >= is) continue;
              s += l.w[((static_cast<std::size_t>(o) * l.in + c) * l.kh + ky) * l.kw + kx] *
                   x[(static_cast<std::size_t>(c) * is + iy) * is + ix];
            }
          }
        }
        z[(static_cast<std::size_t>(o) * os + oy) * os + ox] = s;
      }
    }
  }
}

// Accumulates parameter gradients into g and writes dL/dx into dx (if non-null).
void layer_backward(const BcLayer& l, const double* x, const double* dz, BcLayer& g, double* dx) {
  if (dx) std::fill(dx, dx + l.input_size(), 0.0);
  if (l.kind == LayerKind::Dense) {
    for (int o = 0; o < l.out; ++o) {
      const double d = dz[o];
      if (d == 0.0) continue;
      g.b[o] += d;
      double* gw = &g.w[static_cast<std::size_t>(o) * l.in];
      const double* w = &l.w[static_cast<std::size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) gw[i] += d * x[i];
      if (dx) {
        for (int i = 0; i < l.in; ++i) dx[i] += d * w[i];
      }
    }
    return;
  }
  const int is = l.in_side, os = l.out_side;
  for (int o = 0; o < l.out; ++o) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        const double d = dz[(static_cast<std::size_t>(o) * os + oy) * os + ox];
        if (d == 0.0) continue;
        g.b[o] += d;
        for (int c = 0; c < l.in; ++c) {
          for (int ky = 0; ky < l.kh; ++ky) {
            const int iy = oy * l.stride - l.pad + ky;
            if (iy < 0 || iy >= is) continue;
            for (int kx = 0; kx < l.kw; ++kx) {
              const int ix = ox * l.stride - l.pad + kx;
              if (ix < 0 || ix >= is) continue;
              const std::size_t wi = ((static_cast<std::size_t>(o) * l.in + c) * l.kh + ky) * l.kw + kx;
              const std::size_t xi = (static_cast<std::size_t>(c) * is + iy) * is + ix;
              g.w[wi] += d * x[xi];
              if (dx) dx[xi] += d * l.w[wi];
            }
          }
        }
      }
    }
  }
}

BcParams zeros_like(const BcParams& p) {
  BcParams z = p;
  for (auto& l : z.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  return z;
}

// Activations of every layer (index 0 is the input).
struct Trace {
  std::vector<std::vector<double>> act;
};

void run_forward(const BcParams& p, std::span<const double> x, Trace& tr) {
  const std::size_t expect = static_cast<std::size_t>(p.input_side) * p.input_side;
  if (x.size() != expect) throw ShapeError("input size does not match the network");
  tr.act.resize(p.layers.size() + 1);
  tr.act[0].assign(x.begin(), x.end());
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const BcLayer& l = p.layers[k];
    auto& z = tr.act[k + 1];
    z.resize(l.output_size());
    layer_forward(l, tr.act[k].data(), z.data());
    if (k + 1 < p.layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
  }
}

}  // namespace

std::array<double, 2> forward(const BcParams& params, std::span<const double> x) {
  Trace tr;
  run_forward(params, x, tr);
  return {tr.act.back()[0], tr.act.back()[1]};
}

double bc_loss(const BcParams& params, std::span<const BcSample> batch, const Weights2& H) {
  double total = 0.0;
  for (const auto& s : batch) {
    const auto y = forward(params, s.x);
    const double r0 = s.a[0] - y[0], r1 = s.a[1] - y[1];
    total += H[0] * r0 * r0 + H[1] * r1 * r1;
  }
  return total;
}

BcParams bc_gradient(const BcParams& params, std::span<const BcSample> batch, const Weights2& H,
                     double* loss_out) {
  BcParams grad = zeros_like(params);
  Trace tr;
  std::vector<double> dz, dx;
  double total = 0.0;
  const std::size_t n = params.layers.size();
  for (const auto& s : batch) {
    run_forward(params, s.x, tr);
    const auto& y = tr.act.back();
    const double r0 = s.a[0] - y[0], r1 = s.a[1] - y[1];
    total += H[0] * r0 * r0 + H[1] * r1 * r1;
    dz = {-2.0 * H[0] * r0, -2.0 * H[1] * r1};
    for (std::size_t k = n; k-- > 0;) {
      const BcLayer& l = params.layers[k];
      dx.resize(l.input_size());
      layer_backward(l, tr.act[k].data(), dz.data(), grad.layers[k], k > 0 ? dx.data() : nullptr);
      if (k == 0) break;
      const auto& a = tr.act[k];
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (!(a[i] > 0.0)) dx[i] = 0.0;
      }
      dz.swap(dx);
    }
  }
  if (loss_out) *loss_out = total;
  return grad;
}

void TrainConfig::validate() const {
  if (!(H[0] > 0.0) || !(H[1] > 0.0)) throw ParameterError("H entries must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (batch_size < 1) throw ParameterError("batch size must be positive");
  if (epochs < 0) throw ParameterError("epochs must be non-negative");
}

TrainResult train(std::span<const BcSample> samples, const TrainConfig& cfg, const BcParams* init) {
  cfg.validate();
  if (samples.empty()) throw DataError("training set is empty");
  TrainResult result;
  result.params = init ? *init : init_params(cfg.arch, cfg.seed);
  result.params.validate();
  BcParams& p = result.params;
  const double n = static_cast<double>(samples.size());
  result.loss_curve.push_back(bc_loss(p, samples, cfg.H) / n);
  if (cfg.epochs == 0) return result;

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  BcParams m = zeros_like(p), v = m;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, 0x5b0f));
  std::vector<BcSample> batch;
  long step = 0;

  auto update = [&](std::vector<double>& w, std::vector<double>& mw, std::vector<double>& vw,
                    const std::vector<double>& gw, double c1, double c2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      mw[i] = beta1 * mw[i] + (1.0 - beta1) * gw[i];
      vw[i] = beta2 * vw[i] + (1.0 - beta2) * gw[i] * gw[i];
      w[i] -= cfg.learning_rate * (mw[i] / c1) / (std::sqrt(vw[i] / c2) + eps);
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(samples[order[k]]);
      const BcParams g = bc_gradient(p, batch, cfg.H);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < p.layers.size(); ++k) {
        update(p.layers[k].w, m.layers[k].w, v.layers[k].w, g.layers[k].w, c1, c2);
        update(p.layers[k].b, m.layers[k].b, v.layers[k].b, g.layers[k].b, c1, c2);
      }
    }
    result.loss_curve.push_back(bc_loss(p, samples, cfg.H) / n);
  }
  return result;
}

std::vector<BcSample> samples_from_demos(std::span<const Demonstration> demos, int side) {
  std::vector<BcSample> out;
  for (const auto& demo : demos) {
    if (demo.depth.size() != demo.frames.size()) throw DataError("demonstration lacks depth for some frames");
    for (std::size_t i = 0; i < demo.frames.size(); ++i) {
      out.push_back({preprocess(demo.depth[i], side), {demo.frames[i].v, demo.frames[i].omega}});
    }
  }
  return out;
}

TrainResult train(std::span<const Demonstration> demos, const TrainConfig& cfg) {
  const auto samples = samples_from_demos(demos, cfg.arch.input_side);
  if (samples.empty()) throw DataError("no frames to train on");
  return train(samples, cfg);
}

Action bc_act(const BcParams& params, const Observation& obs) {
  if (!obs.depth) throw DataError("behavior cloning needs a depth image");
  const auto y = forward(params, preprocess(*obs.depth, params.input_side));
  return Action{y[0], y[1], true, true, true}.clamped();
}

namespace {

constexpr char kMagic[] = "VWBC1";
constexpr std::size_t kMagicLen = 5;

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    if (pos_ + 8 > bytes_.size()) throw DataError("VWBC1 data truncated");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void skip(std::size_t n) { pos_ += n; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_bc_params(const BcParams& params) {
  params.validate();
  std::string out(kMagic, kMagicLen);
  put_u64(out, params.layers.size());
  put_u64(out, static_cast<std::uint64_t>(params.input_side));
  for (const auto& l : params.layers) {
    for (const int v : {static_cast<int>(l.kind), l.out, l.in, l.kh, l.kw, l.stride, l.pad}) {
      put_u64(out, static_cast<std::uint64_t>(v));
    }
  }
  for (const auto& l : params.layers) {
    for (const double w : l.w) put_f64(out, w);
    for (const double b : l.b) put_f64(out, b);
  }
  return out;
}

BcParams decode_bc_params(const std::string& bytes) {
  if (bytes.compare(0, kMagicLen, kMagic) != 0) throw DataError("not a VWBC1 file");
  Reader r(bytes);
  r.skip(kMagicLen);
  const std::uint64_t count = r.u64();
  const std::uint64_t input_side = r.u64();
  if (count == 0 || count > 1024 || input_side == 0 || input_side > 4096) throw DataError("VWBC1 header out of range");
  BcParams p;
  p.input_side = static_cast<int>(input_side);
  int side = p.input_side;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint64_t f[7];
    for (auto& v : f) {
      v = r.u64();
      if (v > (1u << 24)) throw DataError("VWBC1 layer header out of range");
    }
    BcLayer l;
    if (f[0] > 1) throw DataError("VWBC1 unknown layer kind");
    l.kind = static_cast<LayerKind>(f[0]);
    l.out = static_cast<int>(f[1]);
    l.in = static_cast<int>(f[2]);
    l.kh = static_cast<int>(f[3]);
    l.kw = static_cast<int>(f[4]);
    l.stride = static_cast<int>(f[5]);
    l.pad = static_cast<int>(f[6]);
    if (l.kind == LayerKind::Conv) {
      if (l.stride < 1) throw DataError("VWBC1 bad stride");
      l.in_side = side;
      l.out_side = (side + 2 * l.pad - l.kh) / l.stride + 1;
      side = l.out_side;
    }
    const std::uint64_t n_w = f[1] * f[2] * f[3] * f[4];
    if (n_w + f[1] > bytes.size() / 8) throw DataError("VWBC1 layer larger than the file");
    l.w.resize(n_w);
    l.b.resize(l.out);
    p.layers.push_back(std::move(l));
  }
  for (auto& l : p.layers) {
    for (double& w : l.w) w = r.f64();
    for (double& b : l.b) b = r.f64();
  }
  if (!r.done()) throw DataError("VWBC1 trailing bytes");
  try {
    p.validate();
  } catch (const ShapeError& e) {
    throw DataError(std::string("VWBC1 shape: ") + e.what());
  }
  return p;
}

void save_bc_params(const BcParams& params, const std::filesystem::path& path) {
  write_file(path, encode_bc_params(params));
}

BcParams load_bc_params(const std::filesystem::path& path) { return decode_bc_params(read_file(path)); }

}  // namespace vw
