#pragma once

// Forward tensor operations. Pure functions; inner loops run on the active
// SIMD kernel table with a fixed per-element summation order, so results do
// not depend on the caller's threading.

#include <cstddef>
#include <span>

#include "glam/tensor.hpp"

namespace glam {

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
};

/// Output length of a 1-D sliding window; throws ShapeError if it would be empty.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, const ConvOptions& opts);

/// Cross-correlation of input[cin,h,w] with weight[cout,cin,kh,kw], zero padded.
/// `bias` is either empty or a [cout] vector.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias = {},
              ConvOptions opts = {});

/// Same-length zero-padded 1-D cross-correlation of input[c] with kernel[k], k odd.
Tensor conv1d_same(const Tensor& input, const Tensor& kernel, double bias = 0.0);

/// Global average pooling: [c,h,w] -> [c].
Tensor gap(const Tensor& input);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

/// Softmax along `axis`, max-subtracted.
Tensor softmax_axis(const Tensor& x, std::size_t axis);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);

/// Extents after same-rank broadcasting (each pair equal or one of them 1).
Shape broadcast_shape(const Shape& a, const Shape& b);
Tensor ewmul_broadcast(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double alpha);

/// Sums `g` over the axes where `target` has extent 1 (adjoint of broadcasting).
Tensor reduce_to_shape(const Tensor& g, const Shape& target);

/// Concatenation along axis 0.
Tensor concat(std::span<const Tensor> parts);

/// Edge-replicating spatial padding of a [c,h,w] tensor.
Tensor pad_replicate(const Tensor& input, std::size_t pad);

inline constexpr double kNormFloor = 1e-12;

struct Normalized {
  Tensor value;
  bool degenerate = false;  // norm <= kNormFloor; value is all zeros
};
Normalized l2_normalize(const Tensor& v);

// Convolution lowering shared by the forward pass and its adjoint.
Tensor im2col(const Tensor& input, std::size_t kh, std::size_t kw, const ConvOptions& opts);
Tensor col2im(const Tensor& cols, const Shape& input_shape, std::size_t kh, std::size_t kw,
              const ConvOptions& opts);

}  // namespace glam
