#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "glam/arcface.hpp"
#include "glam/attention.hpp"
#include "glam/backbone.hpp"
#include "glam/embedding.hpp"

namespace glam {

struct ModelConfig {
  std::array<std::size_t, 3> backbone_widths{8, 16, 32};
  std::size_t kernel_size = 3;
  std::size_t dim = 512;
  std::size_t classes = 4;
  bool use_local = true;
  bool use_global = true;
  double dropout_rate = 0.2;
  double gem_p = 3.0;
  double margin = 0.3;
  double scale = 30.0;
};

/// Every learnable parameter of the pipeline plus the batch-norm buffers.
struct GlamModel {
  ModelConfig config;
  BackboneParams backbone;
  AttentionParams attention;
  HeadParams head;
  ArcFaceParams arcface;

  static GlamModel init(const ModelConfig& config, std::uint64_t seed);

  /// Deep copy; parameter leaves are not shared with the source.
  GlamModel clone() const;

  /// fn(name, Var&) over every learnable parameter, in a fixed order.
  template <class Fn>
  void visit(Fn&& fn) {
    backbone.visit(fn);
    attention.visit(fn);
    head.visit(fn);
    fn(std::string("arcface.weights"), arcface.weights);
  }

  std::vector<Var> parameters();
  void zero_grad();
};

/// Single-scale eval-mode descriptor: backbone -> attention -> head.
Embedding describe(const Tensor& image, const GlamModel& model, AttentionBundle* bundle = nullptr);

inline const std::vector<double> kDefaultScales = {0.5, 0.70710678118654752, 1.0};

/// Averages the unit descriptors of `image` resized to each scale and
/// re-normalizes. Scales are processed in sorted order, so the result does
/// not depend on list order. Degenerate scales are skipped; throws
/// NumericError if all are degenerate.
Tensor multi_resolution_descriptor(const Tensor& image, const GlamModel& model,
                                   std::vector<double> scales = kDefaultScales);

}  // namespace glam
