#include "glam/arcface.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "glam/errors.hpp"

namespace glam {
namespace {

// d margin_cosine / d cosine
double margin_cosine_slope(double cosine, double margin) {
  if (cosine <= std::cos(std::numbers::pi - margin)) return 1.0;
  const double s2 = 1.0 - cosine * cosine;
  if (s2 <= 0.0) return std::cos(margin);
  return std::cos(margin) + std::sin(margin) * cosine / std::sqrt(s2);
}

}  // namespace

double margin_cosine(double cosine, double margin) {
  const double threshold = std::cos(std::numbers::pi - margin);
  if (cosine <= threshold) return cosine - std::sin(std::numbers::pi - margin) * margin;
  const double sine = std::sqrt(std::max(0.0, 1.0 - cosine * cosine));
  return cosine * std::cos(margin) - sine * std::sin(margin);
}

ArcFaceParams ArcFaceParams::init(std::size_t dim, std::size_t classes, std::mt19937_64& rng,
                                  double margin, double scale) {
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2)) {
    throw std::invalid_argument("arcface: margin must lie in [0, pi/2)");
  }
  if (!(scale > 0.0)) throw std::invalid_argument("arcface: scale must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor w({dim, classes});
  for (double& v : w.values()) v = normal(rng);
  ArcFaceParams p{Var::parameter(std::move(w)), margin, scale};
  p.renormalize();
  return p;
}

void ArcFaceParams::renormalize() {
  Tensor& w = weights.mutable_value();
  const std::size_t d = w.extent(0), n = w.extent(1);
  for (std::size_t j = 0; j < n; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < d; ++i) ss += w[i * n + j] * w[i * n + j];
    const double norm = std::sqrt(ss);
    if (norm > 0.0) {
      for (std::size_t i = 0; i < d; ++i) w[i * n + j] /= norm;
    }
  }
}

ArcFaceResult arcface_loss(std::span<const double> descriptor, std::size_t label,
                           const Tensor& weights, double margin, double scale) {
  if (weights.rank() != 2 || weights.extent(0) != descriptor.size()) {
    throw ShapeError("arcface: weights must be [d, classes] with d = " + std::to_string(descriptor.size()));
  }
  const std::size_t d = weights.extent(0), n = weights.extent(1);
  if (label >= n) throw std::invalid_argument("arcface: label " + std::to_string(label) + " out of range");
  double ss = 0.0;
  for (double v : descriptor) ss += v * v;
  if (std::abs(std::sqrt(ss) - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("arcface: descriptor is not unit norm (|x| = " + std::to_string(std::sqrt(ss)) + ")");
  }
  std::vector<double> cosines(n, 0.0), logits(n);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < n; ++j) cosines[j] += descriptor[i] * weights[i * n + j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    logits[j] = scale * (j == label ? margin_cosine(cosines[j], margin) : cosines[j]);
  }
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double total = 0.0;
  std::vector<double> prob(n);
  for (std::size_t j = 0; j < n; ++j) {
    prob[j] = std::exp(logits[j] - mx);
    total += prob[j];
  }
  for (double& p : prob) p /= total;

  ArcFaceResult r;
  r.loss = -(logits[label] - mx - std::log(total));
  r.grad_descriptor = Tensor({d});
  r.grad_weights = Tensor({d, n});
  for (std::size_t j = 0; j < n; ++j) {
    const double dz = prob[j] - (j == label ? 1.0 : 0.0);
    const double dcos = dz * scale * (j == label ? margin_cosine_slope(cosines[j], margin) : 1.0);
    for (std::size_t i = 0; i < d; ++i) {
      r.grad_descriptor[i] += dcos * weights[i * n + j];
      r.grad_weights[i * n + j] = dcos * descriptor[i];
    }
  }
  return r;
}

ArcFaceResult arcface_loss(std::span<const double> descriptor, std::size_t label,
                           const ArcFaceParams& p) {
  return arcface_loss(descriptor, label, p.weights.value(), p.margin, p.scale);
}

Var arcface_loss(const Var& descriptors, std::span<const std::size_t> labels, const ArcFaceParams& p) {
  const Tensor& x = descriptors.value();
  if (x.rank() != 2 || x.extent(0) != labels.size()) {
    throw ShapeError("arcface: expected [B,d] descriptors with B labels");
  }
  const std::size_t b = x.extent(0), d = x.extent(1);
  const Tensor& w = p.weights.value();
  Tensor gx(x.shape()), gw(w.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const ArcFaceResult res =
        arcface_loss(std::span<const double>(x.data() + r * d, d), labels[r], w, p.margin, p.scale);
    total += res.loss;
    for (std::size_t i = 0; i < d; ++i) gx[r * d + i] = res.grad_descriptor[i] / static_cast<double>(b);
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += res.grad_weights[i] / static_cast<double>(b);
  }
  return Var::from_op(Tensor::scalar(total / static_cast<double>(b)), {descriptors, p.weights},
                      [gx, gw](const Tensor& g, const std::vector<bool>&) {
                        return std::vector<Tensor>{scale(gx, g[0]), scale(gw, g[0])};
                      });
}

}  // namespace glam
