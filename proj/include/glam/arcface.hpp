#pragma once

// Additive angular margin loss: logits s*cos(theta_j) for j != y and
// s*cos(theta_y + m) for the target class, followed by softmax cross-entropy.

#include <cstddef>
#include <random>
#include <span>

#include "glam/autograd.hpp"

namespace glam {

struct ArcFaceParams {
  Var weights;          // [d, classes], unit-norm columns
  double margin = 0.3;  // additive angle, radians
  double scale = 30.0;

  static ArcFaceParams init(std::size_t dim, std::size_t classes, std::mt19937_64& rng,
                            double margin = 0.3, double scale = 30.0);
  std::size_t classes() const { return weights.shape()[1]; }
  /// Rescales every class column to unit norm.
  void renormalize();
};

struct ArcFaceResult {
  double loss = 0.0;
  Tensor grad_descriptor;  // [d]
  Tensor grad_weights;     // [d, classes]
};

inline constexpr double kUnitTolerance = 1e-4;

/// Loss and analytic gradients for one unit-norm descriptor.
/// Throws std::invalid_argument for a non-unit descriptor or bad label.
ArcFaceResult arcface_loss(std::span<const double> descriptor, std::size_t label,
                           const Tensor& weights, double margin, double scale);
ArcFaceResult arcface_loss(std::span<const double> descriptor, std::size_t label,
                           const ArcFaceParams& p);

/// Mean loss over the rows of a [B,d] descriptor batch.
Var arcface_loss(const Var& descriptors, std::span<const std::size_t> labels, const ArcFaceParams& p);

/// Target-class logit before scaling, cos(theta + m) with a linear fallback
/// past theta = pi - m so the loss stays monotone in the target cosine.
double margin_cosine(double cosine, double margin);

}  // namespace glam
