#include "glam/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "glam/errors.hpp"
#include "json.hpp"

namespace glam {

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.velocity.empty()) {
    for (Tensor* p : params) state.velocity.emplace_back(p->shape(), 0.0);
  }
  if (state.velocity.size() != params.size()) {
    throw ShapeError("sgd_step: optimizer state tracks a different parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& v = state.velocity[k];
    const Tensor& g = grads[k];
    if (v.shape() != p.shape() || (!g.empty() && g.shape() != p.shape())) {
      throw ShapeError("sgd_step: shape mismatch for parameter " + std::to_string(k) + ": " +
                       shape_string(p.shape()) + " vs gradient " + shape_string(g.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      v[i] = state.momentum * v[i] + (gi + state.weight_decay * p[i]);
      p[i] -= state.lr * v[i];
    }
  }
}

void sgd_step(std::span<Var> params, OptimState& state) {
  std::vector<Tensor*> values;
  std::vector<Tensor> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (Var& v : params) {
    values.push_back(&v.mutable_value());
    grads.push_back(v.grad());
  }
  sgd_step(values, grads, state);
}

std::vector<Batch> group_size_batches(std::span<const ImageMeta> metas, std::size_t batch_size,
                                      std::span<const double> breakpoints, std::size_t target_area) {
  if (batch_size == 0) throw std::invalid_argument("group_size_batches: batch_size must be >= 1");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end())) {
    throw std::invalid_argument("group_size_batches: breakpoints must be ascending");
  }
  std::vector<std::vector<std::size_t>> buckets(breakpoints.size() + 1);
  for (std::size_t i = 0; i < metas.size(); ++i) {
    if (metas[i].width == 0 || metas[i].height == 0) {
      throw std::invalid_argument("group_size_batches: image '" + metas[i].id + "' has a zero extent");
    }
    const double r = metas[i].aspect();
    const auto b = static_cast<std::size_t>(
        std::upper_bound(breakpoints.begin(), breakpoints.end(), r) - breakpoints.begin());
    buckets[b].push_back(i);
  }
  std::vector<Batch> out;
  const double area = static_cast<double>(target_area);
  for (const auto& bucket : buckets) {
    if (bucket.empty()) continue;
    std::vector<double> ratios;
    for (std::size_t i : bucket) ratios.push_back(metas[i].aspect());
    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    const double rep = n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
    const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(area / rep))));
    const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(area * rep))));
    for (std::size_t start = 0; start < bucket.size(); start += batch_size) {
      Batch b;
      b.height = h;
      b.width = w;
      const std::size_t end = std::min(bucket.size(), start + batch_size);
      b.members.assign(bucket.begin() + static_cast<std::ptrdiff_t>(start),
                       bucket.begin() + static_cast<std::ptrdiff_t>(end));
      out.push_back(std::move(b));
    }
  }
  return out;
}

TrainConfig parse_train_config(const std::string& json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError("train config", e.byte, "json", e.what());
  }
  if (!j.is_object()) throw FormatError("train config", 0, "root", "expected a JSON object");
  TrainConfig c;
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    } catch (const json::exception& e) {
      throw FormatError("train config", 0, key, e.what());
    }
  };
  read("steps", c.steps);
  read("lr", c.lr);
  read("momentum", c.momentum);
  read("weight_decay", c.weight_decay);
  read("margin", c.margin);
  read("scale", c.scale);
  read("batch_size", c.batch_size);
  read("seed", c.seed);
  read("dropout_rate", c.dropout_rate);
  read("dims", c.dims);
  read("use_local", c.use_local);
  read("use_global", c.use_global);
  read("target_area", c.target_area);
  read("breakpoints", c.breakpoints);
  if (c.batch_size < 2) throw FormatError("train config", 0, "batch_size", "must be at least 2");
  if (c.dims == 0) throw FormatError("train config", 0, "dims", "must be positive");
  if (!(c.lr >= 0.0)) throw FormatError("train config", 0, "lr", "must be non-negative");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw FormatError("train config", 0, "dropout_rate", "must lie in [0, 1)");
  }
  if (c.target_area == 0) throw FormatError("train config", 0, "target_area", "must be positive");
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

ModelConfig model_config_for(const TrainConfig& config, std::size_t classes) {
  ModelConfig m;
  m.dim = config.dims;
  m.classes = classes;
  m.use_local = config.use_local;
  m.use_global = config.use_global;
  m.dropout_rate = config.dropout_rate;
  m.margin = config.margin;
  m.scale = config.scale;
  return m;
}

namespace {

void validate_dataset(std::span<const LabeledImage> dataset) {
  std::map<std::size_t, std::size_t> per_class;
  for (const LabeledImage& item : dataset) {
    const Tensor& im = item.image;
    if (im.rank() != 3 || im.extent(0) != 3 || im.extent(1) != item.meta.height ||
        im.extent(2) != item.meta.width) {
      throw ShapeError("train_toy: image '" + item.meta.id + "' does not match its metadata");
    }
    ++per_class[item.meta.label];
  }
  if (per_class.size() < 2) throw std::invalid_argument("train_toy: need at least 2 classes");
  for (const auto& [label, count] : per_class) {
    if (count < 4) {
      throw std::invalid_argument("train_toy: class " + std::to_string(label) + " has only " +
                                  std::to_string(count) + " images (need 4)");
    }
  }
  const std::size_t top = per_class.rbegin()->first;
  if (top + 1 != per_class.size()) {
    throw std::invalid_argument("train_toy: labels must be 0..n-1 without gaps");
  }
}

// Reshuffles and regroups the dataset once per pass; singleton batches are
// dropped because batch statistics need two samples.
std::vector<Batch> next_epoch(std::span<const LabeledImage> dataset, const TrainConfig& config,
                              std::mt19937_64& rng) {
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ImageMeta> metas;
  for (std::size_t i : order) metas.push_back(dataset[i].meta);
  std::vector<Batch> batches =
      group_size_batches(metas, config.batch_size, config.breakpoints, config.target_area);
  std::vector<Batch> kept;
  for (Batch& b : batches) {
    if (b.members.size() < 2) continue;
    for (std::size_t& m : b.members) m = order[m];
    kept.push_back(std::move(b));
  }
  std::shuffle(kept.begin(), kept.end(), rng);
  return kept;
}

}  // namespace

TrainResult train_toy(std::span<const LabeledImage> dataset, const TrainConfig& config) {
  validate_dataset(dataset);
  std::size_t classes = 0;
  for (const LabeledImage& item : dataset) classes = std::max(classes, item.meta.label + 1);

  TrainResult result{GlamModel::init(model_config_for(config, classes), config.seed), {}};
  GlamModel& model = result.model;
  std::vector<Var> params = model.parameters();
  OptimState state;
  state.lr = config.lr;
  state.momentum = config.momentum;
  state.weight_decay = config.weight_decay;

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Batch> epoch;
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    if (cursor == epoch.size()) {
      epoch = next_epoch(dataset, config, rng);
      cursor = 0;
      if (epoch.empty()) throw std::invalid_argument("train_toy: no batch holds two images");
    }
    const Batch& batch = epoch[cursor++];
    model.zero_grad();
    std::vector<Var> features;
    std::vector<std::size_t> labels;
    for (std::size_t idx : batch.members) {
      const Var image = Var::constant(resize_bilinear_to(dataset[idx].image, batch.height, batch.width));
      features.push_back(glam_graph(tiny_backbone(image, model.backbone), model.attention).fused);
      labels.push_back(dataset[idx].meta.label);
    }
    const HeadBatch head = embed_batch(features, model.head, Mode::train, &rng);
    const Tensor& desc = head.descriptors.value();
    for (std::size_t b = 0; b < desc.extent(0); ++b) {
      double ss = 0.0;
      for (std::size_t i = 0; i < desc.extent(1); ++i) ss += desc.at(b, i) * desc.at(b, i);
      if (!(std::abs(std::sqrt(ss) - 1.0) <= kUnitTolerance)) {
        throw NumericError("train_toy: non-finite or degenerate descriptor at step " + std::to_string(step));
      }
    }
    const Var loss = arcface_loss(head.descriptors, labels, model.arcface);
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
      throw NumericError("train_toy: non-finite loss at step " + std::to_string(step));
    }
    result.losses.push_back(value);
    backward(loss);
    sgd_step(params, state);
    model.arcface.renormalize();
    double& p = model.head.gem_p.mutable_value()[0];
    p = std::max(p, 1.0);
    update_running_stats(model.head, head.stats, batch.members.size());
    for (const Var& v : params) {
      for (double x : v.value().values()) {
        if (!std::isfinite(x)) {
          throw NumericError("train_toy: non-finite parameter after step " + std::to_string(step) +
                             " (learning rate " + std::to_string(config.lr) + ")");
        }
      }
    }
  }
  return result;
}

}  // namespace glam
