#include "glam/backbone.hpp"

#include "glam/errors.hpp"
#include "init.hpp"

namespace glam {

BackboneParams BackboneParams::init(std::mt19937_64& rng, std::array<std::size_t, 3> widths) {
  BackboneParams p;
  p.widths = widths;
  std::size_t in = 3;
  for (std::size_t i = 0; i < 3; ++i) {
    p.weight[i] = detail::uniform_param({widths[i], in, 3, 3}, in * 9, rng);
    p.bias[i] = Var::parameter(Tensor({widths[i]}));
    in = widths[i];
  }
  return p;
}

std::size_t backbone_output_extent(std::size_t in) {
  for (int i = 0; i < 3; ++i) in = (in - 1) / 2 + 1;
  return in;
}

Var tiny_backbone(const Var& image, const BackboneParams& p) {
  const Tensor& x = image.value();
  if (x.rank() != 3 || x.extent(0) != 3) {
    throw ShapeError("tiny_backbone: expected a [3,h,w] image, got " + shape_string(x.shape()));
  }
  if (x.extent(1) < kBackboneMinExtent || x.extent(2) < kBackboneMinExtent) {
    throw ShapeError("tiny_backbone: image " + shape_string(x.shape()) + " is smaller than " +
                     std::to_string(kBackboneMinExtent) + "x" + std::to_string(kBackboneMinExtent));
  }
  Var h = image;
  for (std::size_t i = 0; i < 3; ++i) {
    h = relu(conv2d(pad_replicate(h, 1), p.weight[i], p.bias[i], ConvOptions{.stride = 2}));
  }
  return h;
}

Tensor tiny_backbone(const Tensor& image, const BackboneParams& p) {
  NoGradGuard guard;
  return tiny_backbone(Var::constant(image), p).value();
}

}  // namespace glam
