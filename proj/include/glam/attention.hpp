#pragma once

// Global-local attention over a [c,h,w] feature map: local channel and
// spatial maps (ECA-style 1-D conv, multi-dilation spatial convs), global
// channel and spatial maps (pairwise softmax attention), and a learned
// convex fusion with the input.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <random>
#include <string>

#include "glam/autograd.hpp"
#include "glam/tensor.hpp"

namespace glam {

struct AttentionConfig {
  std::size_t channels = 32;
  std::size_t kernel_size = 3;  // 1-D conv extent for both channel attentions
  bool use_local = true;
  bool use_global = true;

  std::size_t local_reduced() const noexcept { return std::max<std::size_t>(1, channels / 4); }
  std::size_t global_reduced() const noexcept { return std::max<std::size_t>(1, channels / 8); }
};

struct LocalChannelParams {
  Var kernel;  // [k]
};

/// Dilations of the three 3x3 branches; branch 0 is a 1x1 conv.
inline constexpr std::size_t kLocalDilations[3] = {1, 2, 3};

struct LocalSpatialParams {
  Var reduce_weight, reduce_bias;    // [c',c,1,1], [c']
  Var branch_weight[4];              // [c',c',1,1], then 3 x [c',c',3,3]
  Var branch_bias[4];                // [c']
  Var project_weight, project_bias;  // [1,4c',1,1], [1]
};

struct GlobalChannelParams {
  Var query_kernel;  // [k]
  Var key_kernel;    // [k]
};

struct GlobalSpatialParams {
  Var query_weight, query_bias;  // [c',c,1,1], [c']
  Var key_weight, key_bias;
  Var value_weight, value_bias;
  Var out_weight, out_bias;  // [c,c',1,1], [c]
};

struct FusionParams {
  Var logits;  // [3]: local, global, identity
};

struct AttentionParams {
  AttentionConfig config;
  LocalChannelParams local_channel;
  LocalSpatialParams local_spatial;
  GlobalChannelParams global_channel;
  GlobalSpatialParams global_spatial;
  FusionParams fusion;

  /// Uniform fan-in-scaled conv weights, zero biases, zero fusion logits.
  static AttentionParams init(const AttentionConfig& config, std::mt19937_64& rng);

  /// Calls fn(name, Var&) for every parameter used by the configured variant.
  template <class Fn>
  void visit(Fn&& fn);
};

/// Maps injected in place of computed ones (test hooks). Any subset may be set.
struct AttentionOverrides {
  std::optional<Tensor> local_channel;            // A_c^l, [c,1,1]
  std::optional<Tensor> local_spatial;            // A_s^l, [1,h,w]
  std::optional<Tensor> global_channel_features;  // G_c, [c,h,w]
  std::optional<Tensor> global_spatial_features;  // G_s, [c,h,w]
};

/// Every intermediate map of one forward pass. Maps of a disabled branch stay empty.
struct AttentionBundle {
  Tensor local_channel;    // A_c^l [c,1,1]
  Tensor local_spatial;    // A_s^l [1,h,w]
  Tensor global_channel;   // A_c^g [c,c], columns sum to 1
  Tensor global_spatial;   // A_s^g [hw,hw], columns sum to 1
  Tensor global_channel_features;  // G_c
  Tensor global_spatial_features;  // G_s
  Tensor local_features;   // F^l
  Tensor global_features;  // F^g
  Tensor fused;            // F^gl
};

struct AttentionGraph {
  Var fused;
  Var local_channel, local_spatial, global_channel, global_spatial;
  Var global_channel_features, global_spatial_features;
  Var local_features, global_features;

  AttentionBundle bundle() const;
};

struct MapAndFeatures {
  Var attention;
  Var features;
};

// Differentiable building blocks.
Var local_channel_attention(const Var& features, const LocalChannelParams& p);
Var local_spatial_attention(const Var& features, const LocalSpatialParams& p);
Var local_feature_map(const Var& features, const Var& channel_map, const Var& spatial_map);
MapAndFeatures global_channel_attention(const Var& features, const GlobalChannelParams& p);
MapAndFeatures global_spatial_attention(const Var& features, const GlobalSpatialParams& p);
Var global_feature_map(const Var& features, const Var& channel_features, const Var& spatial_features);
/// Softmax-weighted average of the branches with the input. Undefined
/// branches drop out of the softmax.
Var fuse(const Var& features, const Var& local, const Var& global, const FusionParams& p);
AttentionGraph glam_graph(const Var& features, const AttentionParams& params,
                          const AttentionOverrides* overrides = nullptr);

// Tensor front-ends (no gradient recording).
Tensor local_channel_attention(const Tensor& features, const LocalChannelParams& p);
Tensor local_spatial_attention(const Tensor& features, const LocalSpatialParams& p);
Tensor local_feature_map(const Tensor& features, const Tensor& channel_map, const Tensor& spatial_map);

struct AttentionResult {
  Tensor attention;
  Tensor features;
};
AttentionResult global_channel_attention(const Tensor& features, const GlobalChannelParams& p);
AttentionResult global_spatial_attention(const Tensor& features, const GlobalSpatialParams& p);
Tensor global_feature_map(const Tensor& features, const Tensor& channel_features,
                          const Tensor& spatial_features);
Tensor fuse(const Tensor& features, const Tensor& local, const Tensor& global, const FusionParams& p);

struct GlamOutput {
  Tensor output;  // F^gl, same shape as the input
  AttentionBundle bundle;
};
GlamOutput glam_forward(const Tensor& features, const AttentionParams& params,
                        const AttentionOverrides* overrides = nullptr);

// ---------------------------------------------------------------------------

template <class Fn>
void AttentionParams::visit(Fn&& fn) {
  if (config.use_local) {
    fn(std::string("local_channel.kernel"), local_channel.kernel);
    fn(std::string("local_spatial.reduce.weight"), local_spatial.reduce_weight);
    fn(std::string("local_spatial.reduce.bias"), local_spatial.reduce_bias);
    for (int b = 0; b < 4; ++b) {
      const std::string prefix = "local_spatial.branch" + std::to_string(b);
      fn(prefix + ".weight", local_spatial.branch_weight[b]);
      fn(prefix + ".bias", local_spatial.branch_bias[b]);
    }
    fn(std::string("local_spatial.project.weight"), local_spatial.project_weight);
    fn(std::string("local_spatial.project.bias"), local_spatial.project_bias);
  }
  if (config.use_global) {
    fn(std::string("global_channel.query_kernel"), global_channel.query_kernel);
    fn(std::string("global_channel.key_kernel"), global_channel.key_kernel);
    fn(std::string("global_spatial.query.weight"), global_spatial.query_weight);
    fn(std::string("global_spatial.query.bias"), global_spatial.query_bias);
    fn(std::string("global_spatial.key.weight"), global_spatial.key_weight);
    fn(std::string("global_spatial.key.bias"), global_spatial.key_bias);
    fn(std::string("global_spatial.value.weight"), global_spatial.value_weight);
    fn(std::string("global_spatial.value.bias"), global_spatial.value_bias);
    fn(std::string("global_spatial.out.weight"), global_spatial.out_weight);
    fn(std::string("global_spatial.out.bias"), global_spatial.out_bias);
  }
  if (config.use_local || config.use_global) fn(std::string("fusion.logits"), fusion.logits);
}

}  // namespace glam
