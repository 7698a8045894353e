#pragma once

#include <cmath>
#include <random>
#include <string>

#include "glam/attention.hpp"
#include "glam/tensor.hpp"

namespace glam::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Tensor random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({d});
  double ss = 0.0;
  for (double& v : t.values()) {
    v = n(rng);
    ss += v * v;
  }
  for (double& v : t.values()) v /= std::sqrt(ss);
  return t;
}

/// Attention parameters with nonzero biases and fusion logits so every
/// parameter affects the output.
inline AttentionParams make_params(std::size_t c, std::uint64_t seed, bool local = true, bool global = true) {
  std::mt19937_64 rng(seed);
  AttentionConfig cfg;
  cfg.channels = c;
  cfg.use_local = local;
  cfg.use_global = global;
  AttentionParams p = AttentionParams::init(cfg, rng);
  p.visit([&](const std::string& name, Var& v) {
    if (name.find("bias") != std::string::npos || name == "fusion.logits") {
      v.mutable_value() = random_tensor(v.shape(), rng, -0.5, 0.5);
    }
  });
  return p;
}

}  // namespace glam::test
