#pragma once

// Stand-in feature extractor: three stride-2 3x3 conv + ReLU stages. Edges
// are replicate-padded, so a constant image yields a constant feature map.

#include <array>
#include <random>
#include <string>

#include "glam/autograd.hpp"

namespace glam {

struct BackboneParams {
  std::array<std::size_t, 3> widths{8, 16, 32};
  std::array<Var, 3> weight;  // [width_i, width_{i-1}, 3, 3], width_{-1} = 3
  std::array<Var, 3> bias;

  static BackboneParams init(std::mt19937_64& rng, std::array<std::size_t, 3> widths = {8, 16, 32});
  std::size_t out_channels() const noexcept { return widths[2]; }

  template <class Fn>
  void visit(Fn&& fn) {
    for (std::size_t i = 0; i < 3; ++i) {
      fn("backbone.conv" + std::to_string(i) + ".weight", weight[i]);
      fn("backbone.conv" + std::to_string(i) + ".bias", bias[i]);
    }
  }
};

inline constexpr std::size_t kBackboneMinExtent = 8;

/// Spatial extent after the three stages: three rounds of floor((n - 1) / 2) + 1.
std::size_t backbone_output_extent(std::size_t in);

Var tiny_backbone(const Var& image, const BackboneParams& p);
Tensor tiny_backbone(const Tensor& image, const BackboneParams& p);

}  // namespace glam
