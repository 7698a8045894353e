#include "glam/embedding.hpp"

#include <cmath>

#include "glam/errors.hpp"
#include "init.hpp"

namespace glam {

HeadParams HeadParams::init(std::size_t channels, std::size_t dim, std::mt19937_64& rng,
                            double dropout_rate, double gem_p) {
  if (gem_p < 1.0) throw std::invalid_argument("GeM exponent must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  HeadParams h;
  h.gem_p = Var::parameter(Tensor::scalar(gem_p));
  h.fc_weight = detail::uniform_param({dim, channels}, channels, rng);
  h.fc_bias = Var::parameter(Tensor({dim}));
  h.bn_gamma = Var::parameter(Tensor({dim}, 1.0));
  h.bn_beta = Var::parameter(Tensor({dim}));
  h.running_mean = Tensor({dim});
  h.running_var = Tensor({dim}, 1.0);
  h.dropout_rate = dropout_rate;
  return h;
}

namespace {

void require_exponent(double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("gem_pool: exponent must be >= 1, got " + std::to_string(p));
}

}  // namespace

Tensor gem_pool(const Tensor& features, double p) {
  NoGradGuard guard;
  return gem_pool(Var::constant(features), Var::constant(Tensor::scalar(p))).value();
}

Var gem_pool(const Var& features, const Var& exponent) {
  const Tensor& x = features.value();
  if (x.rank() != 3) throw ShapeError("gem_pool: expected [c,h,w], got " + shape_string(x.shape()));
  const double p = exponent.value()[0];
  require_exponent(p);
  const std::size_t c = x.extent(0), n = x.extent(1) * x.extent(2);
  // Evaluated as m * mean((v/m)^p)^(1/p) with m the channel maximum, which
  // keeps every power in (0,1] for any p.
  Tensor out({c}), scaled_mean({c}), log_moment({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* row = x.data() + ch * n;
    double m = kGemClamp;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, row[i]);
    double s = 0.0, sl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::max(row[i], kGemClamp) / m;
      const double rp = std::pow(r, p);
      s += rp;
      sl += rp * std::log(r);
    }
    scaled_mean[ch] = s / static_cast<double>(n);
    log_moment[ch] = sl / static_cast<double>(n);
    out[ch] = m * std::pow(scaled_mean[ch], 1.0 / p);
  }
  const Tensor y = out;
  return Var::from_op(
      std::move(out), {features, exponent},
      [x, p, y, scaled_mean, log_moment](const Tensor& g, const std::vector<bool>& needed) {
        const std::size_t c = x.extent(0), n = x.extent(1) * x.extent(2);
        std::vector<Tensor> grads(2);
        if (needed[0]) {
          Tensor gx(x.shape());
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double* row = x.data() + ch * n;
            double m = kGemClamp;
            for (std::size_t i = 0; i < n; ++i) m = std::max(m, row[i]);
            const double coeff = g[ch] * std::pow(scaled_mean[ch], 1.0 / p - 1.0) / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
              const double v = row[i];
              gx[ch * n + i] = v > kGemClamp ? coeff * std::pow(v / m, p - 1.0) : 0.0;
            }
          }
          grads[0] = std::move(gx);
        }
        if (needed[1]) {
          double gp = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double s = scaled_mean[ch];
            gp += g[ch] * y[ch] * (-std::log(s) / (p * p) + log_moment[ch] / (p * s));
          }
          grads[1] = Tensor::scalar(gp);
        }
        return grads;
      });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const std::size_t c = x.value().size();
  const std::size_t d = weight.shape()[0];
  return add(reshape(matmul(weight, reshape(x, {c, 1})), {d}), bias);
}

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps, BatchStats* stats) {
  const Tensor& in = x.value();
  if (in.rank() != 2) throw ShapeError("batch_norm: expected [B,d]");
  const std::size_t b = in.extent(0), d = in.extent(1);
  if (b < 2) throw ShapeError("batch_norm: train mode needs at least 2 samples per batch");
  Tensor mean({d}), var({d}), inv_std({d}), xhat(in.shape()), out(in.shape());
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < b; ++i) s += in[i * d + j];
    mean[j] = s / static_cast<double>(b);
    double v = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double t = in[i * d + j] - mean[j];
      v += t * t;
    }
    var[j] = v / static_cast<double>(b);
    inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  }
  const Tensor& gm = gamma.value();
  const Tensor& bt = beta.value();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (in[i * d + j] - mean[j]) * inv_std[j];
      out[i * d + j] = gm[j] * xhat[i * d + j] + bt[j];
    }
  }
  if (stats) *stats = {mean, var};
  const Tensor gm_copy = gm;
  return Var::from_op(
      std::move(out), {x, gamma, beta},
      [xhat, inv_std, gm_copy](const Tensor& g, const std::vector<bool>& needed) {
        const std::size_t b = xhat.extent(0), d = xhat.extent(1);
        const double bn = static_cast<double>(b);
        std::vector<Tensor> grads(3);
        Tensor gx(xhat.shape()), gg({d}), gb({d});
        for (std::size_t j = 0; j < d; ++j) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < b; ++i) {
            sum_g += g[i * d + j];
            sum_gx += g[i * d + j] * xhat[i * d + j];
          }
          gg[j] = sum_gx;
          gb[j] = sum_g;
          // dx = gamma * inv_std / B * (B g - sum g - xhat * sum(g xhat))
          const double k = gm_copy[j] * inv_std[j] / bn;
          for (std::size_t i = 0; i < b; ++i) {
            gx[i * d + j] = k * (bn * g[i * d + j] - sum_g - xhat[i * d + j] * sum_gx);
          }
        }
        if (needed[0]) grads[0] = std::move(gx);
        if (needed[1]) grads[1] = std::move(gg);
        if (needed[2]) grads[2] = std::move(gb);
        return grads;
      });
}

Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                    const Tensor& running_var, double eps) {
  const std::size_t d = running_mean.size();
  Tensor inv_std({d}), shifted_scale({1, d}), shift({1, d});
  for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
  // y = (x - mean) * inv_std * gamma + beta
  const Var centered = subtract(x, Var::constant(running_mean.reshaped({1, d})));
  const Var normalized = ewmul_broadcast(centered, Var::constant(inv_std.reshaped({1, d})));
  return add(ewmul_broadcast(normalized, reshape(gamma, {1, d})), reshape(beta, {1, d}));
}

Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  const double scale_kept = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = keep(rng) ? scale_kept : 0.0;
  return ewmul_broadcast(x, Var::constant(std::move(mask)));
}

HeadBatch embed_batch(const std::vector<Var>& features, const HeadParams& head, Mode mode,
                      std::mt19937_64* rng) {
  if (features.empty()) throw ShapeError("embed: empty batch");
  std::vector<Var> rows;
  rows.reserve(features.size());
  for (const Var& f : features) {
    if (f.value().rank() != 3 || f.value().extent(0) != head.channels()) {
      throw ShapeError("embed: head expects " + std::to_string(head.channels()) +
                       " channels, got " + shape_string(f.value().shape()));
    }
    rows.push_back(linear(gem_pool(f, head.gem_p), head.fc_weight, head.fc_bias));
  }
  const Var stacked = stack_rows(rows);
  HeadBatch out;
  Var normalized;
  if (mode == Mode::train) {
    normalized = batch_norm_train(stacked, head.bn_gamma, head.bn_beta, head.bn_eps, &out.stats);
    if (head.dropout_rate > 0.0) {
      if (!rng) throw std::invalid_argument("embed: train-mode dropout needs a random generator");
      normalized = dropout(normalized, head.dropout_rate, *rng);
    }
  } else {
    normalized = batch_norm_eval(stacked, head.bn_gamma, head.bn_beta, head.running_mean,
                                 head.running_var, head.bn_eps);
  }
  out.descriptors = l2_normalize_rows(normalized);
  return out;
}

void update_running_stats(HeadParams& head, const BatchStats& stats, std::size_t batch_size) {
  const double m = head.bn_momentum;
  const double unbias = static_cast<double>(batch_size) / static_cast<double>(batch_size - 1);
  for (std::size_t j = 0; j < head.running_mean.size(); ++j) {
    head.running_mean[j] = (1.0 - m) * head.running_mean[j] + m * stats.mean[j];
    head.running_var[j] = (1.0 - m) * head.running_var[j] + m * stats.variance[j] * unbias;
  }
}

Embedding embed(const Tensor& features, const HeadParams& head) {
  NoGradGuard guard;
  const HeadBatch batch = embed_batch({Var::constant(features)}, head, Mode::eval);
  const Tensor& d = batch.descriptors.value();
  Embedding e{d.reshaped({d.size()}), false};
  double ss = 0.0;
  for (double v : e.vec.values()) ss += v * v;
  e.degenerate = ss == 0.0;
  return e;
}

Tensor resize_bilinear(const Tensor& image, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("resize_bilinear: scale must be positive");
  if (image.rank() != 3) throw ShapeError("resize_bilinear: expected [c,h,w]");
  auto target = [scale](std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scale * static_cast<double>(n))));
  };
  return resize_bilinear_to(image, target(image.extent(1)), target(image.extent(2)));
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> t(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    t[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

Tensor resize_bilinear_to(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("resize_bilinear: expected [c,h,w]");
  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  if (out_h == h && out_w == w) return image;
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);
  Tensor out({c, out_h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        const double a = image.at(ch, ty[y].lo, tx[x].lo), b = image.at(ch, ty[y].lo, tx[x].hi);
        const double cc = image.at(ch, ty[y].hi, tx[x].lo), d = image.at(ch, ty[y].hi, tx[x].hi);
        const double top = a + tx[x].frac * (b - a);
        const double bottom = cc + tx[x].frac * (d - cc);
        out.at(ch, y, x) = top + ty[y].frac * (bottom - top);
      }
    }
  }
  return out;
}

}  // namespace glam
