#include "glam/model.hpp"

#include <algorithm>
#include <random>

#include "glam/errors.hpp"
#include "glam/ops.hpp"

namespace glam {

GlamModel GlamModel::init(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GlamModel m;
  m.config = config;
  m.backbone = BackboneParams::init(rng, config.backbone_widths);
  AttentionConfig ac;
  ac.channels = config.backbone_widths[2];
  ac.kernel_size = config.kernel_size;
  ac.use_local = config.use_local;
  ac.use_global = config.use_global;
  m.attention = AttentionParams::init(ac, rng);
  m.head = HeadParams::init(ac.channels, config.dim, rng, config.dropout_rate, config.gem_p);
  m.arcface = ArcFaceParams::init(config.dim, config.classes, rng, config.margin, config.scale);
  return m;
}

GlamModel GlamModel::clone() const {
  GlamModel copy = *this;
  auto deepen = [](const std::string&, Var& v) { v = Var::parameter(v.value()); };
  copy.backbone.visit(deepen);
  // Parameters of disabled branches are not visited by visit(); copy them too.
  AttentionParams& a = copy.attention;
  const AttentionConfig saved = a.config;
  a.config.use_local = a.config.use_global = true;
  a.visit(deepen);
  a.config = saved;
  copy.head.visit(deepen);
  deepen("", copy.arcface.weights);
  return copy;
}

std::vector<Var> GlamModel::parameters() {
  std::vector<Var> out;
  visit([&](const std::string&, Var& v) { out.push_back(v); });
  return out;
}

void GlamModel::zero_grad() {
  visit([](const std::string&, Var& v) { v.zero_grad(); });
}

Embedding describe(const Tensor& image, const GlamModel& model, AttentionBundle* bundle) {
  NoGradGuard guard;
  const Tensor features = tiny_backbone(image, model.backbone);
  GlamOutput g = glam_forward(features, model.attention);
  if (bundle) *bundle = std::move(g.bundle);
  return embed(g.output, model.head);
}

Tensor multi_resolution_descriptor(const Tensor& image, const GlamModel& model,
                                   std::vector<double> scales) {
  if (scales.empty()) throw std::invalid_argument("multi_resolution_descriptor: no scales");
  std::sort(scales.begin(), scales.end());
  Tensor total;
  std::size_t used = 0;
  for (double s : scales) {
    const Embedding e = describe(resize_bilinear(image, s), model);
    if (e.degenerate) continue;
    total = total.empty() ? e.vec : add(total, e.vec);
    ++used;
  }
  if (used == 0) throw NumericError("multi_resolution_descriptor: every scale produced a degenerate descriptor");
  const Normalized n = l2_normalize(total);
  if (n.degenerate) throw NumericError("multi_resolution_descriptor: averaged descriptor vanished");
  return n.value;
}

}  // namespace glam
