#include "glam/attention.hpp"

#include <cmath>

#include "glam/errors.hpp"
#include "init.hpp"

namespace glam {
namespace {

Var conv1x1(const Var& x, const Var& w, const Var& b) { return conv2d(x, w, b, ConvOptions{}); }

void require_chw(const Tensor& t, const char* what) {
  if (t.rank() != 3) {
    throw ShapeError(std::string(what) + ": expected a [c,h,w] tensor, got " + shape_string(t.shape()));
  }
}

Var constant_or(const std::optional<Tensor>& injected, const Shape& expected, const char* what,
                Var computed_if_absent) {
  if (!injected) return computed_if_absent;
  if (injected->shape() != expected) {
    throw ShapeError(std::string("override ") + what + " must be " + shape_string(expected) +
                     ", got " + shape_string(injected->shape()));
  }
  return Var::constant(*injected);
}

}  // namespace

AttentionParams AttentionParams::init(const AttentionConfig& config, std::mt19937_64& rng) {
  if (config.channels == 0) throw ShapeError("attention: channels must be positive");
  if (config.kernel_size % 2 == 0) throw ShapeError("attention: 1-D kernel size must be odd");
  const std::size_t c = config.channels, k = config.kernel_size;
  const std::size_t cl = config.local_reduced(), cg = config.global_reduced();
  AttentionParams p;
  p.config = config;

  p.local_channel.kernel = detail::uniform_param({k}, k, rng);

  auto& ls = p.local_spatial;
  ls.reduce_weight = detail::uniform_param({cl, c, 1, 1}, c, rng);
  ls.reduce_bias = Var::parameter(Tensor({cl}));
  ls.branch_weight[0] = detail::uniform_param({cl, cl, 1, 1}, cl, rng);
  ls.branch_bias[0] = Var::parameter(Tensor({cl}));
  for (int b = 1; b < 4; ++b) {
    ls.branch_weight[b] = detail::uniform_param({cl, cl, 3, 3}, cl * 9, rng);
    ls.branch_bias[b] = Var::parameter(Tensor({cl}));
  }
  ls.project_weight = detail::uniform_param({1, 4 * cl, 1, 1}, 4 * cl, rng);
  ls.project_bias = Var::parameter(Tensor({1}));

  p.global_channel.query_kernel = detail::uniform_param({k}, k, rng);
  p.global_channel.key_kernel = detail::uniform_param({k}, k, rng);

  auto& gs = p.global_spatial;
  gs.query_weight = detail::uniform_param({cg, c, 1, 1}, c, rng);
  gs.query_bias = Var::parameter(Tensor({cg}));
  gs.key_weight = detail::uniform_param({cg, c, 1, 1}, c, rng);
  gs.key_bias = Var::parameter(Tensor({cg}));
  gs.value_weight = detail::uniform_param({cg, c, 1, 1}, c, rng);
  gs.value_bias = Var::parameter(Tensor({cg}));
  gs.out_weight = detail::uniform_param({c, cg, 1, 1}, cg, rng);
  gs.out_bias = Var::parameter(Tensor({c}));

  p.fusion.logits = Var::parameter(Tensor({3}));
  return p;
}

Var local_channel_attention(const Var& features, const LocalChannelParams& p) {
  require_chw(features.value(), "local_channel_attention");
  const std::size_t c = features.shape()[0];
  return reshape(sigmoid(conv1d_same(gap(features), p.kernel)), {c, 1, 1});
}

Var local_spatial_attention(const Var& features, const LocalSpatialParams& p) {
  require_chw(features.value(), "local_spatial_attention");
  const Var reduced = conv1x1(features, p.reduce_weight, p.reduce_bias);
  std::vector<Var> branches;
  branches.reserve(4);
  branches.push_back(conv1x1(reduced, p.branch_weight[0], p.branch_bias[0]));
  for (int b = 1; b < 4; ++b) {
    const std::size_t d = kLocalDilations[b - 1];
    branches.push_back(conv2d(reduced, p.branch_weight[b], p.branch_bias[b],
                              ConvOptions{.stride = 1, .dilation = d, .padding = d}));
  }
  return sigmoid(conv1x1(concat(branches), p.project_weight, p.project_bias));
}

Var local_feature_map(const Var& features, const Var& channel_map, const Var& spatial_map) {
  const Var channel_weighted = add(ewmul_broadcast(features, channel_map), features);
  return add(ewmul_broadcast(channel_weighted, spatial_map), channel_weighted);
}

MapAndFeatures global_channel_attention(const Var& features, const GlobalChannelParams& p) {
  require_chw(features.value(), "global_channel_attention");
  const Shape shape = features.shape();
  const std::size_t c = shape[0], hw = shape[1] * shape[2];
  const Var pooled = gap(features);
  const Var query = sigmoid(conv1d_same(pooled, p.query_kernel));
  const Var key = sigmoid(conv1d_same(pooled, p.key_kernel));
  // logits[i][j] = key_i * query_j; columns are normalized over i.
  const Var logits = matmul(reshape(key, {c, 1}), reshape(query, {1, c}));
  const Var attention = softmax_axis(logits, 0);
  const Var mixed = matmul(transpose(attention), reshape(features, {c, hw}));
  return {attention, reshape(mixed, shape)};
}

MapAndFeatures global_spatial_attention(const Var& features, const GlobalSpatialParams& p) {
  require_chw(features.value(), "global_spatial_attention");
  const Shape shape = features.shape();
  const std::size_t hw = shape[1] * shape[2];
  const std::size_t reduced = p.query_weight.shape()[0];
  const Var query = reshape(conv1x1(features, p.query_weight, p.query_bias), {reduced, hw});
  const Var key = reshape(conv1x1(features, p.key_weight, p.key_bias), {reduced, hw});
  const Var value = reshape(conv1x1(features, p.value_weight, p.value_bias), {reduced, hw});
  // logits[p][q] = <key_p, query_q>; column q is a distribution over keys p.
  const Var attention = softmax_axis(matmul(transpose(key), query), 0);
  const Var attended = reshape(matmul(value, attention), {reduced, shape[1], shape[2]});
  return {attention, conv1x1(attended, p.out_weight, p.out_bias)};
}

Var global_feature_map(const Var& features, const Var& channel_features, const Var& spatial_features) {
  const Var channel_weighted = ewmul_broadcast(features, channel_features);
  return add(ewmul_broadcast(channel_weighted, spatial_features), channel_weighted);
}

Var fuse(const Var& features, const Var& local, const Var& global, const FusionParams& p) {
  if (!local.defined() && !global.defined()) return features;
  const Shape& shape = features.shape();
  if ((local.defined() && local.shape() != shape) || (global.defined() && global.shape() != shape)) {
    throw ShapeError("fuse: branch shapes must equal the input shape " + shape_string(shape));
  }
  // Written as F + w_l (F^l - F) + w_g (F^g - F), which equals the weighted
  // average because the three weights sum to one, and returns F exactly when
  // every branch equals F.
  const Shape unit(shape.size(), 1);
  auto weighted_delta = [&](const Var& weight, const Var& branch) {
    return ewmul_broadcast(reshape(weight, unit), subtract(branch, features));
  };
  if (local.defined() && global.defined()) {
    const Var w = softmax_axis(p.logits, 0);
    return add(add(features, weighted_delta(select(w, 0), local)), weighted_delta(select(w, 1), global));
  }
  const std::size_t branch_index = local.defined() ? 0 : 1;
  const Var w = softmax_axis(concat({select(p.logits, branch_index), select(p.logits, 2)}), 0);
  return add(features, weighted_delta(select(w, 0), local.defined() ? local : global));
}

AttentionGraph glam_graph(const Var& features, const AttentionParams& params,
                          const AttentionOverrides* overrides) {
  const Tensor& f = features.value();
  require_chw(f, "glam_forward");
  if (f.extent(0) != params.config.channels) {
    throw ShapeError("glam_forward: model expects " + std::to_string(params.config.channels) +
                     " channels, input is " + shape_string(f.shape()));
  }
  const AttentionOverrides none;
  const AttentionOverrides& o = overrides ? *overrides : none;
  const std::size_t c = f.extent(0), h = f.extent(1), w = f.extent(2);
  AttentionGraph g;
  if (params.config.use_local) {
    g.local_channel = o.local_channel
                          ? constant_or(o.local_channel, {c, 1, 1}, "local_channel", {})
                          : local_channel_attention(features, params.local_channel);
    g.local_spatial = o.local_spatial
                          ? constant_or(o.local_spatial, {1, h, w}, "local_spatial", {})
                          : local_spatial_attention(features, params.local_spatial);
    g.local_features = local_feature_map(features, g.local_channel, g.local_spatial);
  }
  if (params.config.use_global) {
    if (o.global_channel_features) {
      g.global_channel_features = constant_or(o.global_channel_features, f.shape(), "global_channel_features", {});
    } else {
      auto gc = global_channel_attention(features, params.global_channel);
      g.global_channel = gc.attention;
      g.global_channel_features = gc.features;
    }
    if (o.global_spatial_features) {
      g.global_spatial_features = constant_or(o.global_spatial_features, f.shape(), "global_spatial_features", {});
    } else {
      auto gs = global_spatial_attention(features, params.global_spatial);
      g.global_spatial = gs.attention;
      g.global_spatial_features = gs.features;
    }
    g.global_features = global_feature_map(features, g.global_channel_features, g.global_spatial_features);
  }
  g.fused = fuse(features, g.local_features, g.global_features, params.fusion);
  return g;
}

AttentionBundle AttentionGraph::bundle() const {
  auto v = [](const Var& x) { return x.defined() ? x.value() : Tensor(); };
  AttentionBundle b;
  b.local_channel = v(local_channel);
  b.local_spatial = v(local_spatial);
  b.global_channel = v(global_channel);
  b.global_spatial = v(global_spatial);
  b.global_channel_features = v(global_channel_features);
  b.global_spatial_features = v(global_spatial_features);
  b.local_features = v(local_features);
  b.global_features = v(global_features);
  b.fused = v(fused);
  return b;
}

// --- Tensor front-ends -------------------------------------------------------

Tensor local_channel_attention(const Tensor& features, const LocalChannelParams& p) {
  NoGradGuard guard;
  return local_channel_attention(Var::constant(features), p).value();
}

Tensor local_spatial_attention(const Tensor& features, const LocalSpatialParams& p) {
  NoGradGuard guard;
  return local_spatial_attention(Var::constant(features), p).value();
}

Tensor local_feature_map(const Tensor& features, const Tensor& channel_map, const Tensor& spatial_map) {
  NoGradGuard guard;
  return local_feature_map(Var::constant(features), Var::constant(channel_map),
                           Var::constant(spatial_map)).value();
}

AttentionResult global_channel_attention(const Tensor& features, const GlobalChannelParams& p) {
  NoGradGuard guard;
  auto r = global_channel_attention(Var::constant(features), p);
  return {r.attention.value(), r.features.value()};
}

AttentionResult global_spatial_attention(const Tensor& features, const GlobalSpatialParams& p) {
  NoGradGuard guard;
  auto r = global_spatial_attention(Var::constant(features), p);
  return {r.attention.value(), r.features.value()};
}

Tensor global_feature_map(const Tensor& features, const Tensor& channel_features,
                          const Tensor& spatial_features) {
  NoGradGuard guard;
  return global_feature_map(Var::constant(features), Var::constant(channel_features),
                            Var::constant(spatial_features)).value();
}

Tensor fuse(const Tensor& features, const Tensor& local, const Tensor& global, const FusionParams& p) {
  NoGradGuard guard;
  return fuse(Var::constant(features), local.empty() ? Var() : Var::constant(local),
              global.empty() ? Var() : Var::constant(global), p).value();
}

GlamOutput glam_forward(const Tensor& features, const AttentionParams& params,
                        const AttentionOverrides* overrides) {
  NoGradGuard guard;
  const AttentionGraph g = glam_graph(Var::constant(features), params, overrides);
  return {g.fused.value(), g.bundle()};
}

}  // namespace glam
