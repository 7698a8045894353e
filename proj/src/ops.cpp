#include "glam/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glam/errors.hpp"
#include "glam/simd.hpp"

namespace glam {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

// Visits output rows of a same-rank broadcast. For every position of the
// leading axes, `fn(out_offset, a_offset, b_offset)` is called; the last
// axis is handled by the callee using the returned inner strides.
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_stride, b_stride;  // 0 on broadcast axes
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  plan.out = broadcast_shape(a, b);
  const std::size_t r = plan.out.size();
  plan.a_stride.assign(r, 0);
  plan.b_stride.assign(r, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = r; i-- > 0;) {
    plan.a_stride[i] = a[i] == 1 ? 0 : sa;
    plan.b_stride[i] = b[i] == 1 ? 0 : sb;
    sa *= a[i];
    sb *= b[i];
  }
  return plan;
}

enum class BinaryOp { mul, add, sub };

Tensor broadcast_binary(const Tensor& a, const Tensor& b, BinaryOp op) {
  const auto& k = simd::active();
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    switch (op) {
      case BinaryOp::mul: k.mul(a.data(), b.data(), out.data(), a.size()); break;
      case BinaryOp::add: k.add(a.data(), b.data(), out.data(), a.size()); break;
      case BinaryOp::sub:
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
        break;
    }
    return out;
  }
  const BroadcastPlan plan = plan_broadcast(a.shape(), b.shape());
  Tensor out(plan.out);
  const std::size_t r = plan.out.size();
  const std::size_t inner = plan.out[r - 1];
  const std::size_t rows = out.size() / inner;
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t ax = 0; ax + 1 < r; ++ax) {
      oa += idx[ax] * plan.a_stride[ax];
      ob += idx[ax] * plan.b_stride[ax];
    }
    const double* pa = a.data() + oa;
    const double* pb = b.data() + ob;
    double* po = out.data() + row * inner;
    const bool a_full = plan.a_stride[r - 1] != 0;
    const bool b_full = plan.b_stride[r - 1] != 0;
    if (op == BinaryOp::mul && a_full && b_full) {
      k.mul(pa, pb, po, inner);
    } else if (op == BinaryOp::mul && a_full) {
      k.scale(*pb, pa, po, inner);
    } else if (op == BinaryOp::mul && b_full) {
      k.scale(*pa, pb, po, inner);
    } else {
      for (std::size_t j = 0; j < inner; ++j) {
        const double x = pa[a_full ? j : 0];
        const double y = pb[b_full ? j : 0];
        po[j] = op == BinaryOp::mul ? x * y : op == BinaryOp::add ? x + y : x - y;
      }
    }
    for (std::size_t ax = r - 1; ax-- > 0;) {
      if (++idx[ax] < plan.out[ax]) break;
      idx[ax] = 0;
    }
  }
  return out;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, const ConvOptions& opts) {
  if (opts.stride == 0 || opts.dilation == 0) {
    throw ShapeError("conv: stride and dilation must be positive");
  }
  const std::size_t span = (kernel - 1) * opts.dilation + 1;
  const std::size_t padded = in + 2 * opts.padding;
  if (padded < span) {
    throw ShapeError("conv: receptive field " + std::to_string(span) + " exceeds padded extent " +
                     std::to_string(padded));
  }
  return (padded - span) / opts.stride + 1;
}

Tensor im2col(const Tensor& input, std::size_t kh, std::size_t kw, const ConvOptions& opts) {
  require_rank(input, 3, "im2col");
  const std::size_t cin = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t ho = conv_output_extent(h, kh, opts);
  const std::size_t wo = conv_output_extent(w, kw, opts);
  Tensor cols({cin * kh * kw, ho * wo});
  double* dst = cols.data();
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * opts.stride + ky * opts.dilation) -
                          static_cast<std::ptrdiff_t>(opts.padding);
          for (std::size_t ox = 0; ox < wo; ++ox, ++dst) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * opts.stride + kx * opts.dilation) -
                            static_cast<std::ptrdiff_t>(opts.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                ix < static_cast<std::ptrdiff_t>(w);
            *dst = inside ? input.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix))
                          : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

Tensor col2im(const Tensor& cols, const Shape& input_shape, std::size_t kh, std::size_t kw,
              const ConvOptions& opts) {
  const std::size_t cin = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t ho = conv_output_extent(h, kh, opts);
  const std::size_t wo = conv_output_extent(w, kw, opts);
  if (cols.shape() != Shape{cin * kh * kw, ho * wo}) throw ShapeError("col2im: bad column shape");
  Tensor out(input_shape);
  const double* src = cols.data();
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * opts.stride + ky * opts.dilation) -
                          static_cast<std::ptrdiff_t>(opts.padding);
          for (std::size_t ox = 0; ox < wo; ++ox, ++src) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * opts.stride + kx * opts.dilation) -
                            static_cast<std::ptrdiff_t>(opts.padding);
            if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                ix < static_cast<std::ptrdiff_t>(w)) {
              out.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += *src;
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvOptions opts) {
  require_rank(input, 3, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  const std::size_t cin = input.extent(0);
  const std::size_t cout = weight.extent(0), kh = weight.extent(2), kw = weight.extent(3);
  if (weight.extent(1) != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, weight expects " +
                     std::to_string(weight.extent(1)));
  }
  if (!bias.empty() && bias.shape() != Shape{cout}) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(cout) + "], got " +
                     shape_string(bias.shape()));
  }
  const std::size_t ho = conv_output_extent(input.extent(1), kh, opts);
  const std::size_t wo = conv_output_extent(input.extent(2), kw, opts);
  const bool pointwise = kh == 1 && kw == 1 && opts.stride == 1 && opts.padding == 0;
  Tensor lowered;
  if (!pointwise) lowered = im2col(input, kh, kw, opts);
  const double* cols = pointwise ? input.data() : lowered.data();

  const std::size_t taps = cin * kh * kw, npos = ho * wo;
  Tensor out({cout, ho, wo});
  const auto& k = simd::active();
  for (std::size_t co = 0; co < cout; ++co) {
    double* row = out.data() + co * npos;
    if (!bias.empty()) std::fill(row, row + npos, bias[co]);
    const double* wrow = weight.data() + co * taps;
    for (std::size_t r = 0; r < taps; ++r) k.axpy(wrow[r], cols + r * npos, row, npos);
  }
  return out;
}

Tensor conv1d_same(const Tensor& input, const Tensor& kernel, double bias) {
  require_rank(input, 1, "conv1d_same input");
  require_rank(kernel, 1, "conv1d_same kernel");
  const std::size_t ks = kernel.size();
  if (ks % 2 == 0) throw ShapeError("conv1d_same: kernel size must be odd, got " + std::to_string(ks));
  const auto half = static_cast<std::ptrdiff_t>(ks / 2);
  const auto c = static_cast<std::ptrdiff_t>(input.size());
  Tensor out(input.shape());
  for (std::ptrdiff_t i = 0; i < c; ++i) {
    double acc = bias;
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(ks); ++t) {
      const std::ptrdiff_t j = i + t - half;
      if (j >= 0 && j < c) acc += kernel[static_cast<std::size_t>(t)] * input[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

Tensor gap(const Tensor& input) {
  require_rank(input, 3, "gap");
  const std::size_t c = input.extent(0), n = input.extent(1) * input.extent(2);
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* p = input.data() + ch * n;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    out[ch] = s / static_cast<double>(n);
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Branches keep exp() from overflowing for large |x|.
    const double v = x[i];
    if (v >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor softmax_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("softmax_axis: axis out of range for " + shape_string(x.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.extent(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.extent(i);
  const std::size_t n = x.extent(axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) m = std::max(m, x[base + j * inner]);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(x[base + j * inner] - m);
        out[base + j * inner] = e;
        s += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= s;
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t m = a.extent(0), kk = a.extent(1), n = b.extent(1);
  if (b.extent(0) != kk) {
    throw ShapeError("matmul: inner extents differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor out({m, n});
  const auto& k = simd::active();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t t = 0; t < kk; ++t) k.axpy(a[i * kk + t], b.data() + t * n, row, n);
  }
  return out;
}

Tensor transpose(const Tensor& m) {
  require_rank(m, 2, "transpose");
  const std::size_t r = m.extent(0), c = m.extent(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m[i * c + j];
  }
  return out;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("broadcast: ranks differ " + shape_string(a) + " vs " + shape_string(b));
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && a[i] != 1 && b[i] != 1) {
      throw ShapeError("broadcast: incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
    }
    out[i] = std::max(a[i], b[i]);
  }
  return out;
}

Tensor ewmul_broadcast(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, BinaryOp::mul);
}
Tensor add(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryOp::add); }
Tensor subtract(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryOp::sub); }

Tensor scale(const Tensor& x, double alpha) {
  Tensor out(x.shape());
  simd::active().scale(alpha, x.data(), out.data(), x.size());
  return out;
}

Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  if (broadcast_shape(g.shape(), target) != g.shape()) {
    throw ShapeError("reduce_to_shape: " + shape_string(target) + " does not broadcast to " +
                     shape_string(g.shape()));
  }
  Tensor out(target);
  const std::size_t r = target.size();
  std::vector<std::size_t> stride(r);
  std::size_t s = 1;
  for (std::size_t i = r; i-- > 0;) {
    stride[i] = target[i] == 1 ? 0 : s;
    s *= target[i];
  }
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t ax = 0; ax < r; ++ax) off += idx[ax] * stride[ax];
    out[off] += g[flat];
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < g.shape()[ax]) break;
      idx[ax] = 0;
    }
  }
  return out;
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ShapeError("concat: empty tensor");
  std::size_t lead = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw ShapeError("concat: trailing extents differ, " + shape_string(p.shape()) + " vs " +
                       shape_string(shape));
    }
    lead += p.extent(0);
  }
  shape[0] = lead;
  Tensor out(shape);
  double* dst = out.data();
  for (const Tensor& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

Tensor pad_replicate(const Tensor& input, std::size_t pad) {
  require_rank(input, 3, "pad_replicate");
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  Tensor out({c, h + 2 * pad, w + 2 * pad});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h + 2 * pad; ++y) {
      const std::size_t sy = std::min(h - 1, y < pad ? 0 : y - pad);
      for (std::size_t x = 0; x < w + 2 * pad; ++x) {
        const std::size_t sx = std::min(w - 1, x < pad ? 0 : x - pad);
        out.at(ch, y, x) = input.at(ch, sy, sx);
      }
    }
  }
  return out;
}

Normalized l2_normalize(const Tensor& v) {
  double ss = 0.0;
  for (double x : v.values()) ss += x * x;
  const double norm = std::sqrt(ss);
  Normalized result{Tensor(v.shape()), false};
  if (!(norm > kNormFloor)) {
    result.degenerate = true;
    return result;
  }
  for (std::size_t i = 0; i < v.size(); ++i) result.value[i] = v[i] / norm;
  return result;
}

}  // namespace glam
