#include "povmap/imgcls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "povmap/error.hpp"
#include "povmap/parallel.hpp"
#include "povmap/stats.hpp"

namespace povmap::imgcls {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

std::string_view class_name(int c) {
  switch (c) {
    case kPoor: return "poor";
    case kLowerMiddle: return "lower_middle";
    case kUpperMiddle: return "upper_middle";
    case kRich: return "rich";
  }
  throw UsageError("class index out of range");
}

void ClassThresholds::validate() const {
  if (!(t1 < t2 && t2 < t3)) throw DataError("class thresholds must be strictly increasing");
}

Labels make_labels(std::span<const double> predictions, std::optional<ClassThresholds> thresholds) {
  Labels out;
  if (thresholds) {
    thresholds->validate();
    out.thresholds = *thresholds;
  } else {
    if (predictions.size() < 4) throw DataError("make_labels: need at least 4 predictions to fit thresholds");
    std::vector<double> sorted(predictions.begin(), predictions.end());
    std::sort(sorted.begin(), sorted.end());
    double t1 = percentile_sorted(sorted, 25.0), t2 = percentile_sorted(sorted, 50.0),
           t3 = percentile_sorted(sorted, 75.0);
    if (sorted.front() == sorted.back()) {
      out.degenerate = true;
      out.warning = "constant predictions: every place gets one class";
    } else if (!(t1 < t2 && t2 < t3)) {
      out.warning = "tied quartiles nudged apart";
    }
    if (!(t2 > t1)) t2 = std::nextafter(t1, INFINITY);
    if (!(t3 > t2)) t3 = std::nextafter(t2, INFINITY);
    out.thresholds = {t1, t2, t3};
  }
  out.labels.reserve(predictions.size());
  for (double p : predictions) out.labels.push_back(out.thresholds.classify(p));
  return out;
}

void ArchSpec::validate() const {
  if (input_size == 0 || in_channels == 0) throw UsageError("cnn: empty input shape");
  if (convs.empty()) throw UsageError("cnn: at least one convolution required");
  std::size_t s = input_size;
  for (const auto& c : convs) {
    if (c.channels == 0 || c.kernel == 0 || c.stride == 0) throw UsageError("cnn: invalid convolution spec");
    if (s + 2 * (c.kernel / 2) < c.kernel) throw UsageError("cnn: input too small for the convolution stack");
    s = (s + 2 * (c.kernel / 2) - c.kernel) / c.stride + 1;
  }
  for (std::size_t w : fc_hidden) {
    if (w == 0) throw UsageError("cnn: zero-width hidden layer");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("cnn: dropout must be in [0, 1)");
}

std::size_t ArchSpec::conv_output_size(std::size_t layer) const {
  std::size_t s = input_size;
  for (std::size_t i = 0; i <= layer; ++i) {
    const auto& c = convs[i];
    s = (s + 2 * (c.kernel / 2) - c.kernel) / c.stride + 1;
  }
  return s;
}

std::size_t ArchSpec::flat_size() const {
  const std::size_t s = conv_output_size(convs.size() - 1);
  return convs.back().channels * s * s;
}

std::vector<Param> CnnModel::parameters() {
  std::vector<Param> out;
  for (std::size_t l = 0; l < conv.size(); ++l) {
    const std::string p = "conv" + std::to_string(l);
    out.push_back({p + ".w", &conv[l].w, LrGroup::kLow});
    out.push_back({p + ".gamma", &conv[l].gamma, LrGroup::kLow});
    out.push_back({p + ".beta", &conv[l].beta, LrGroup::kLow});
  }
  for (std::size_t l = 0; l < fc.size(); ++l) {
    const std::string p = "fc" + std::to_string(l);
    out.push_back({p + ".w", &fc[l].w, LrGroup::kHigh});
    out.push_back({p + ".b", &fc[l].b, LrGroup::kHigh});
  }
  return out;
}

std::vector<ConstParam> CnnModel::parameters() const {
  std::vector<ConstParam> out;
  for (auto& p : const_cast<CnnModel*>(this)->parameters()) out.push_back({p.name, p.values, p.group});
  return out;
}

std::size_t CnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.values->size();
  return n;
}

namespace {

void he_init(std::vector<double>& w, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : w) v = to_f32(dist(rng));
}

std::vector<FcParams> make_fc(std::size_t flat, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<FcParams> fc;
  std::size_t in = flat;
  std::vector<std::size_t> widths = hidden;
  widths.push_back(kClassCount);
  for (std::size_t out : widths) {
    FcParams p;
    p.w.resize(out * in);
    p.b.assign(out, 0.0);
    he_init(p.w, in, rng);
    fc.push_back(std::move(p));
    in = out;
  }
  return fc;
}

}  // namespace

CnnModel make_model(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  CnnModel m;
  m.arch = arch;
  Rng rng(seed);
  std::size_t in_ch = arch.in_channels;
  for (const auto& c : arch.convs) {
    ConvParams p;
    p.w.resize(c.channels * in_ch * c.kernel * c.kernel);
    he_init(p.w, in_ch * c.kernel * c.kernel, rng);
    p.gamma.assign(c.channels, 1.0);
    p.beta.assign(c.channels, 0.0);
    p.running_mean.assign(c.channels, 0.0);
    p.running_var.assign(c.channels, 1.0);
    m.conv.push_back(std::move(p));
    in_ch = c.channels;
  }
  m.fc = make_fc(arch.flat_size(), arch.fc_hidden, rng);
  return m;
}

CnnModel warm_start(const CnnModel& prev, const std::vector<std::size_t>& fc_hidden, std::uint64_t seed) {
  ArchSpec arch = prev.arch;
  arch.fc_hidden = fc_hidden;
  arch.validate();
  if (prev.conv.size() != arch.convs.size()) throw UsageError("warm_start: convolution stack mismatch");
  CnnModel m;
  m.arch = arch;
  m.conv = prev.conv;
  Rng rng(seed);
  m.fc = make_fc(arch.flat_size(), arch.fc_hidden, rng);
  m.thresholds = prev.thresholds;
  m.warm_started = true;
  m.train_config = prev.train_config;
  return m;
}

namespace {

struct Shape {
  int in_ch, in_size, out_ch, out_size, k, s, pad;
};

std::vector<Shape> conv_shapes(const ArchSpec& a) {
  std::vector<Shape> out;
  int in_ch = static_cast<int>(a.in_channels), in_size = static_cast<int>(a.input_size);
  for (std::size_t l = 0; l < a.convs.size(); ++l) {
    const auto& c = a.convs[l];
    Shape s{in_ch, in_size, static_cast<int>(c.channels), static_cast<int>(a.conv_output_size(l)),
            static_cast<int>(c.kernel), static_cast<int>(c.stride), static_cast<int>(c.kernel / 2)};
    out.push_back(s);
    in_ch = s.out_ch;
    in_size = s.out_size;
  }
  return out;
}

// Output columns ox with 0 <= ox*s + kx - pad < in_size.
inline void col_range(const Shape& L, int kx, int& lo, int& hi) {
  lo = std::max(0, (L.pad - kx + L.s - 1) / L.s);
  if (L.pad - kx < 0) lo = 0;
  hi = std::min(L.out_size, (L.in_size - kx + L.pad + L.s - 1) / L.s);
}

void conv_forward(const double* in, double* out, const double* w, const Shape& L) {
  const int S = L.out_size, H = L.in_size;
  std::fill(out, out + static_cast<std::ptrdiff_t>(L.out_ch) * S * S, 0.0);
  for (int o = 0; o < L.out_ch; ++o) {
    double* op = out + static_cast<std::ptrdiff_t>(o) * S * S;
    for (int c = 0; c < L.in_ch; ++c) {
      const double* ip = in + static_cast<std::ptrdiff_t>(c) * H * H;
      for (int ky = 0; ky < L.k; ++ky) {
        for (int kx = 0; kx < L.k; ++kx) {
          const double wv = w[((o * L.in_ch + c) * L.k + ky) * L.k + kx];
          int lo, hi;
          col_range(L, kx, lo, hi);
          for (int oy = 0; oy < S; ++oy) {
            const int iy = oy * L.s + ky - L.pad;
            if (iy < 0 || iy >= H) continue;
            const double* irow = ip + static_cast<std::ptrdiff_t>(iy) * H + kx - L.pad;
            double* orow = op + static_cast<std::ptrdiff_t>(oy) * S;
            for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * irow[ox * L.s];
          }
        }
      }
    }
  }
}

void conv_backward_input(const double* dout, double* din, const double* w, const Shape& L) {
  const int S = L.out_size, H = L.in_size;
  std::fill(din, din + static_cast<std::ptrdiff_t>(L.in_ch) * H * H, 0.0);
  for (int o = 0; o < L.out_ch; ++o) {
    const double* dp = dout + static_cast<std::ptrdiff_t>(o) * S * S;
    for (int c = 0; c < L.in_ch; ++c) {
      double* ip = din + static_cast<std::ptrdiff_t>(c) * H * H;
      for (int ky = 0; ky < L.k; ++ky) {
        for (int kx = 0; kx < L.k; ++kx) {
          const double wv = w[((o * L.in_ch + c) * L.k + ky) * L.k + kx];
          int lo, hi;
          col_range(L, kx, lo, hi);
          for (int oy = 0; oy < S; ++oy) {
            const int iy = oy * L.s + ky - L.pad;
            if (iy < 0 || iy >= H) continue;
            double* irow = ip + static_cast<std::ptrdiff_t>(iy) * H + kx - L.pad;
            const double* drow = dp + static_cast<std::ptrdiff_t>(oy) * S;
            for (int ox = lo; ox < hi; ++ox) irow[ox * L.s] += wv * drow[ox];
          }
        }
      }
    }
  }
}

// Weight gradient of output channel o summed over the batch.
void conv_backward_weights(const double* in, const double* dout, std::size_t batch, double* dw, const Shape& L, int o) {
  const int S = L.out_size, H = L.in_size;
  const std::ptrdiff_t in_stride = static_cast<std::ptrdiff_t>(L.in_ch) * H * H;
  const std::ptrdiff_t out_stride = static_cast<std::ptrdiff_t>(L.out_ch) * S * S;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* dp = dout + static_cast<std::ptrdiff_t>(b) * out_stride + static_cast<std::ptrdiff_t>(o) * S * S;
    for (int c = 0; c < L.in_ch; ++c) {
      const double* ip = in + static_cast<std::ptrdiff_t>(b) * in_stride + static_cast<std::ptrdiff_t>(c) * H * H;
      for (int ky = 0; ky < L.k; ++ky) {
        for (int kx = 0; kx < L.k; ++kx) {
          int lo, hi;
          col_range(L, kx, lo, hi);
          double acc = 0.0;
          for (int oy = 0; oy < S; ++oy) {
            const int iy = oy * L.s + ky - L.pad;
            if (iy < 0 || iy >= H) continue;
            const double* irow = ip + static_cast<std::ptrdiff_t>(iy) * H + kx - L.pad;
            const double* drow = dp + static_cast<std::ptrdiff_t>(oy) * S;
            for (int ox = lo; ox < hi; ++ox) acc += drow[ox] * irow[ox * L.s];
          }
          dw[((o * L.in_ch + c) * L.k + ky) * L.k + kx] += acc;
        }
      }
    }
  }
}

struct Pass {
  std::size_t batch = 0;
  std::vector<std::vector<double>> act;     // act[l]: input of conv l; act.back(): flattened features
  std::vector<std::vector<double>> xhat;    // per conv layer
  std::vector<std::vector<double>> invstd;  // per conv layer, per channel
  std::vector<std::vector<double>> fc_in;   // input of each fc layer
  std::vector<std::vector<double>> fc_pre;  // pre-activation of hidden layers
  std::vector<std::vector<double>> mask;    // dropout multipliers of hidden layers
  std::vector<double> probs;                // batch x 4
};

void softmax_row(const double* logits, double* probs) {
  const double mx = *std::max_element(logits, logits + kClassCount);
  double sum = 0.0;
  for (std::size_t j = 0; j < kClassCount; ++j) {
    probs[j] = std::exp(logits[j] - mx);
    sum += probs[j];
  }
  for (std::size_t j = 0; j < kClassCount; ++j) probs[j] /= sum;
}

void run_forward(const CnnModel& m, std::span<const double> inputs, std::size_t batch, bool training, Rng* dropout,
                 Pass& pass, BatchNormStats* stats) {
  const auto shapes = conv_shapes(m.arch);
  pass.batch = batch;
  pass.act.assign(shapes.size() + 1, {});
  pass.xhat.assign(shapes.size(), {});
  pass.invstd.assign(shapes.size(), {});
  pass.act[0].assign(inputs.begin(), inputs.end());
  if (stats) {
    stats->mean.assign(shapes.size(), {});
    stats->var.assign(shapes.size(), {});
  }

  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const Shape& L = shapes[l];
    const std::size_t in_sz = static_cast<std::size_t>(L.in_ch) * L.in_size * L.in_size;
    const std::size_t plane = static_cast<std::size_t>(L.out_size) * L.out_size;
    const std::size_t out_sz = static_cast<std::size_t>(L.out_ch) * plane;
    std::vector<double> z(batch * out_sz);
    const auto& in = pass.act[l];
    const ConvParams& P = m.conv[l];
    parallel_for(batch, [&](std::size_t b) {
      conv_forward(in.data() + b * in_sz, z.data() + b * out_sz, P.w.data(), L);
    });
    auto& xh = pass.xhat[l];
    xh.resize(z.size());
    auto& inv = pass.invstd[l];
    inv.resize(static_cast<std::size_t>(L.out_ch));
    std::vector<double> out(z.size());
    std::vector<double> means(inv.size()), vars(inv.size());
    const double count = static_cast<double>(batch * plane);
    parallel_for(inv.size(), [&](std::size_t o) {
      double mean, var;
      if (training) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* zp = z.data() + b * out_sz + o * plane;
          for (std::size_t i = 0; i < plane; ++i) s += zp[i];
        }
        mean = s / count;
        double ss = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* zp = z.data() + b * out_sz + o * plane;
          for (std::size_t i = 0; i < plane; ++i) ss += (zp[i] - mean) * (zp[i] - mean);
        }
        var = ss / count;
      } else {
        mean = P.running_mean[o];
        var = P.running_var[o];
      }
      means[o] = mean;
      vars[o] = var;
      inv[o] = 1.0 / std::sqrt(var + kBnEps);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t base = b * out_sz + o * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double x = (z[base + i] - mean) * inv[o];
          xh[base + i] = x;
          out[base + i] = std::max(0.0, P.gamma[o] * x + P.beta[o]);
        }
      }
    });
    if (stats) {
      stats->mean[l] = std::move(means);
      stats->var[l] = std::move(vars);
    }
    pass.act[l + 1] = std::move(out);
  }

  const std::size_t n_fc = m.fc.size();
  pass.fc_in.assign(n_fc, {});
  pass.fc_pre.assign(n_fc, {});
  pass.mask.assign(n_fc, {});
  std::vector<double> cur = pass.act.back();
  std::size_t in_w = m.arch.flat_size();
  for (std::size_t l = 0; l < n_fc; ++l) {
    const FcParams& F = m.fc[l];
    const std::size_t out_w = F.b.size();
    pass.fc_in[l] = cur;
    std::vector<double> pre(batch * out_w);
    parallel_for(batch, [&](std::size_t b) {
      const double* x = cur.data() + b * in_w;
      for (std::size_t o = 0; o < out_w; ++o) {
        const double* w = F.w.data() + o * in_w;
        double s = F.b[o];
        for (std::size_t j = 0; j < in_w; ++j) s += w[j] * x[j];
        pre[b * out_w + o] = s;
      }
    });
    if (l + 1 == n_fc) {
      pass.probs.resize(batch * kClassCount);
      for (std::size_t b = 0; b < batch; ++b) softmax_row(pre.data() + b * kClassCount, pass.probs.data() + b * kClassCount);
      break;
    }
    std::vector<double> mask(pre.size(), 1.0);
    if (l == 0 && training && dropout && m.arch.dropout > 0.0) {
      std::bernoulli_distribution keep(1.0 - m.arch.dropout);
      const double scale = 1.0 / (1.0 - m.arch.dropout);
      for (double& v : mask) v = keep(*dropout) ? scale : 0.0;
    }
    std::vector<double> next(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) next[i] = std::max(0.0, pre[i]) * mask[i];
    pass.fc_pre[l] = std::move(pre);
    pass.mask[l] = std::move(mask);
    cur = std::move(next);
    in_w = out_w;
  }
}

void check_input(const CnnModel& m, std::size_t values, std::size_t batch) {
  const std::size_t per = m.arch.in_channels * m.arch.input_size * m.arch.input_size;
  if (values != per * batch) throw UsageError("cnn: input size does not match the architecture");
}

}  // namespace

double loss_and_gradients(const CnnModel& model, std::span<const double> inputs, std::span<const int> labels,
                          Rng* dropout, Gradients* grads, BatchNormStats* stats) {
  const std::size_t batch = labels.size();
  if (batch == 0) throw UsageError("cnn: empty batch");
  check_input(model, inputs.size(), batch);
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(kClassCount)) throw DataError("cnn: label out of range");
  }
  Pass pass;
  run_forward(model, inputs, batch, true, dropout, pass, stats);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    loss -= std::log(std::max(pass.probs[b * kClassCount + static_cast<std::size_t>(labels[b])], 1e-300));
  }
  loss /= static_cast<double>(batch);
  if (!grads) return loss;

  const auto params = model.parameters();
  grads->assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) (*grads)[i].assign(params[i].values->size(), 0.0);
  const std::size_t n_conv = model.conv.size(), n_fc = model.fc.size();

  std::vector<double> d(batch * kClassCount);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < kClassCount; ++j) {
      d[b * kClassCount + j] =
          (pass.probs[b * kClassCount + j] - (static_cast<int>(j) == labels[b] ? 1.0 : 0.0)) / static_cast<double>(batch);
    }
  }
  for (std::size_t l = n_fc; l-- > 0;) {
    const FcParams& F = model.fc[l];
    const std::size_t out_w = F.b.size(), in_w = F.w.size() / out_w;
    if (l + 1 < n_fc) {
      const auto& pre = pass.fc_pre[l];
      const auto& mask = pass.mask[l];
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= pre[i] > 0.0 ? mask[i] : 0.0;
    }
    auto& gw = (*grads)[3 * n_conv + 2 * l];
    auto& gb = (*grads)[3 * n_conv + 2 * l + 1];
    const auto& x = pass.fc_in[l];
    parallel_for(out_w, [&](std::size_t o) {
      double* gwo = gw.data() + o * in_w;
      for (std::size_t b = 0; b < batch; ++b) {
        const double dv = d[b * out_w + o];
        gb[o] += dv;
        const double* xb = x.data() + b * in_w;
        for (std::size_t j = 0; j < in_w; ++j) gwo[j] += dv * xb[j];
      }
    });
    std::vector<double> din(batch * in_w, 0.0);
    parallel_for(batch, [&](std::size_t b) {
      double* di = din.data() + b * in_w;
      for (std::size_t o = 0; o < out_w; ++o) {
        const double dv = d[b * out_w + o];
        const double* w = F.w.data() + o * in_w;
        for (std::size_t j = 0; j < in_w; ++j) di[j] += w[j] * dv;
      }
    });
    d = std::move(din);
  }

  const auto shapes = conv_shapes(model.arch);
  for (std::size_t l = n_conv; l-- > 0;) {
    const Shape& L = shapes[l];
    const ConvParams& P = model.conv[l];
    const std::size_t plane = static_cast<std::size_t>(L.out_size) * L.out_size;
    const std::size_t out_sz = static_cast<std::size_t>(L.out_ch) * plane;
    const std::size_t in_sz = static_cast<std::size_t>(L.in_ch) * L.in_size * L.in_size;
    const auto& out = pass.act[l + 1];
    const auto& xh = pass.xhat[l];
    auto& gw = (*grads)[3 * l];
    auto& gg = (*grads)[3 * l + 1];
    auto& gbeta = (*grads)[3 * l + 2];
    const double count = static_cast<double>(batch * plane);
    std::vector<double> dz(d.size());
    parallel_for(static_cast<std::size_t>(L.out_ch), [&](std::size_t o) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t base = b * out_sz + o * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double dy = out[base + i] > 0.0 ? d[base + i] : 0.0;
          sum_dy += dy;
          sum_dy_xh += dy * xh[base + i];
        }
      }
      gg[o] = sum_dy_xh;
      gbeta[o] = sum_dy;
      const double g = P.gamma[o], inv = pass.invstd[l][o];
      // dxhat = dy * gamma; sums of dxhat scale by gamma.
      const double s1 = g * sum_dy, s2 = g * sum_dy_xh;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t base = b * out_sz + o * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double dxh = (out[base + i] > 0.0 ? d[base + i] : 0.0) * g;
          dz[base + i] = inv / count * (count * dxh - s1 - xh[base + i] * s2);
        }
      }
    });
    const auto& in = pass.act[l];
    parallel_for(static_cast<std::size_t>(L.out_ch), [&](std::size_t o) {
      conv_backward_weights(in.data(), dz.data(), batch, gw.data(), L, static_cast<int>(o));
    });
    if (l == 0) break;
    std::vector<double> din(batch * in_sz);
    parallel_for(batch, [&](std::size_t b) {
      conv_backward_input(dz.data() + b * out_sz, din.data() + b * in_sz, P.w.data(), L);
    });
    d = std::move(din);
  }
  return loss;
}

Probs forward(const CnnModel& model, const Tile& tile) {
  if (tile.size != model.arch.input_size) {
    throw UsageError("tile " + tile.place_id + " is " + std::to_string(tile.size) + " px; model expects " +
                     std::to_string(model.arch.input_size));
  }
  std::vector<double> in(tile.pixels.begin(), tile.pixels.end());
  check_input(model, in.size(), 1);
  Pass pass;
  run_forward(model, in, 1, false, nullptr, pass, nullptr);
  Probs p;
  std::copy(pass.probs.begin(), pass.probs.end(), p.begin());
  return p;
}

std::vector<Probs> forward_all(const CnnModel& model, std::span<const Tile> tiles) {
  std::vector<Probs> out(tiles.size());
  parallel_for(tiles.size(), [&](std::size_t i) { out[i] = forward(model, tiles[i]); });
  return out;
}

Adam::Adam(const CnnModel& model) {
  for (const auto& p : model.parameters()) {
    m_.emplace_back(p.values->size(), 0.0);
    v_.emplace_back(p.values->size(), 0.0);
  }
}

void Adam::step(CnnModel& model, const Gradients& grads, double lr_low, double lr_high) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto params = model.parameters();
  if (grads.size() != params.size()) throw UsageError("adam: gradient shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = *params[i].values;
    const double lr = params[i].group == LrGroup::kLow ? lr_low : lr_high;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = grads[i][j];
      m_[i][j] = b1 * m_[i][j] + (1.0 - b1) * g;
      v_[i][j] = b2 * v_[i][j] + (1.0 - b2) * g * g;
      const double mh = m_[i][j] / c1, vh = v_[i][j] / c2;
      w[j] = to_f32(w[j] - lr * mh / (std::sqrt(vh) + eps));
    }
  }
}

void rotate90(std::span<double> chw, std::size_t channels, std::size_t size, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  std::vector<double> tmp(size * size);
  for (int t = 0; t < quarter_turns; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = chw.data() + c * size * size;
      for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t col = 0; col < size; ++col) tmp[r * size + col] = p[(size - 1 - col) * size + r];
      }
      std::copy(tmp.begin(), tmp.end(), p);
    }
  }
}

void augment(std::span<double> chw, std::size_t channels, std::size_t size, Rng& rng) {
  std::uniform_int_distribution<int> turns(0, 3);
  std::bernoulli_distribution coin(0.5);
  rotate90(chw, channels, size, turns(rng));
  const bool hflip = coin(rng), vflip = coin(rng);
  for (std::size_t c = 0; c < channels; ++c) {
    double* p = chw.data() + c * size * size;
    if (hflip) {
      for (std::size_t r = 0; r < size; ++r) std::reverse(p + r * size, p + (r + 1) * size);
    }
    if (vflip) {
      for (std::size_t r = 0; r < size / 2; ++r) std::swap_ranges(p + r * size, p + (r + 1) * size, p + (size - 1 - r) * size);
    }
  }
}

namespace {

double inference_loss(const CnnModel& m, std::span<const std::vector<double>> inputs, std::span<const int> labels,
                      std::span<const std::size_t> idx, std::size_t* correct) {
  std::vector<double> losses(idx.size());
  std::vector<int> hit(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    Pass pass;
    run_forward(m, inputs[idx[i]], 1, false, nullptr, pass, nullptr);
    const int y = labels[idx[i]];
    losses[i] = -std::log(std::max(pass.probs[static_cast<std::size_t>(y)], 1e-300));
    hit[i] = static_cast<int>(std::max_element(pass.probs.begin(), pass.probs.end()) - pass.probs.begin()) == y;
  });
  if (correct) *correct = static_cast<std::size_t>(std::accumulate(hit.begin(), hit.end(), 0));
  double s = 0.0;
  for (double l : losses) s += l;
  return idx.empty() ? 0.0 : s / static_cast<double>(idx.size());
}

}  // namespace

TrainReport train_cls(CnnModel& model, std::span<const Tile> tiles, std::span<const int> labels,
                      const TrainConfig& config) {
  if (tiles.size() != labels.size()) throw UsageError("train_cls: tiles and labels differ in count");
  if (tiles.empty()) throw DataError("train_cls: no labeled tiles");
  if (config.batch_size == 0) throw UsageError("train_cls: batch_size must be positive");
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(kClassCount)) throw DataError("train_cls: label out of range");
  }
  const std::size_t S = model.arch.input_size, C = model.arch.in_channels, per = C * S * S;
  std::vector<std::vector<double>> inputs(tiles.size());
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    if (tiles[i].size != S || tiles[i].pixels.size() != per) {
      throw UsageError("train_cls: tile " + tiles[i].place_id + " does not match the model input size");
    }
    inputs[i].assign(tiles[i].pixels.begin(), tiles[i].pixels.end());
  }

  std::vector<std::size_t> order(tiles.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(config.seed, "split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_val = 0;
  if (tiles.size() >= 10 && config.validation_fraction > 0.0) {
    n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(tiles.size())));
  }
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  TrainReport report;
  Adam adam(model);
  double lr_high = config.learning_rate;
  double lr_low = model.warm_started ? config.learning_rate_low : config.learning_rate;
  double best = INFINITY;
  std::size_t wait = 0;
  Rng rng(derive_seed(config.seed, "train"));
  bool done = false;

  for (std::size_t epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::vector<std::size_t> perm = train;
    std::shuffle(perm.begin(), perm.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size) {
      const std::size_t end = std::min(perm.size(), start + config.batch_size);
      if (end - start < 2 && perm.size() >= 2) continue;  // batch statistics need two samples
      std::vector<double> batch;
      std::vector<int> y;
      batch.reserve((end - start) * per);
      for (std::size_t i = start; i < end; ++i) {
        std::vector<double> x = inputs[perm[i]];
        if (config.augment) augment(x, C, S, rng);
        batch.insert(batch.end(), x.begin(), x.end());
        y.push_back(labels[perm[i]]);
      }
      Gradients grads;
      BatchNormStats stats;
      const double loss = loss_and_gradients(model, batch, y, &rng, &grads, &stats);
      if (!std::isfinite(loss)) {
        throw DataError("train_cls: non-finite loss at step " + std::to_string(report.steps) + " (epoch " +
                        std::to_string(epoch) + ", learning rate " + std::to_string(lr_high) + ")");
      }
      adam.step(model, grads, lr_low, lr_high);
      for (std::size_t l = 0; l < model.conv.size(); ++l) {
        auto& P = model.conv[l];
        for (std::size_t o = 0; o < P.running_mean.size(); ++o) {
          P.running_mean[o] = to_f32(kBnMomentum * P.running_mean[o] + (1.0 - kBnMomentum) * stats.mean[l][o]);
          P.running_var[o] = to_f32(kBnMomentum * P.running_var[o] + (1.0 - kBnMomentum) * stats.var[l][o]);
        }
      }
      report.step_loss.push_back(loss);
      epoch_loss += loss;
      ++epoch_steps;
      ++report.steps;
      if (config.max_steps && report.steps >= config.max_steps) {
        done = true;
        break;
      }
    }
    const double monitor = val.empty() ? (epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0)
                                       : inference_loss(model, inputs, labels, val, nullptr);
    report.epoch_monitor_loss.push_back(monitor);
    report.lr_history.push_back(lr_high);
    if (monitor < best) {
      best = monitor;
      wait = 0;
    } else if (++wait >= config.plateau_patience) {
      lr_high *= config.plateau_factor;
      lr_low *= config.plateau_factor;
      wait = 0;
    }
  }
  std::size_t correct = 0;
  inference_loss(model, inputs, labels, train, &correct);
  report.train_accuracy = train.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(train.size());
  model.train_config = config;
  return report;
}

}  // namespace povmap::imgcls
