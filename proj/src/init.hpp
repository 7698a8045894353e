#pragma once

#include <cmath>
#include <random>

#include "glam/autograd.hpp"

namespace glam::detail {

/// Leaf with entries ~ U(-b, b), b = sqrt(3 / fan_in): unit-variance preserving.
inline Var uniform_param(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return Var::parameter(std::move(t));
}

}  // namespace glam::detail
