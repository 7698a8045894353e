#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "glam/model.hpp"

namespace glam {

struct OptimState {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::vector<Tensor> velocity;  // mirrors the parameter list; created on first step
};

/// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
/// An empty gradient counts as zero.
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimState& state);
/// Same, reading gradients from the parameter leaves.
void sgd_step(std::span<Var> params, OptimState& state);

struct ImageMeta {
  std::string id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t label = 0;

  double aspect() const { return static_cast<double>(width) / static_cast<double>(height); }
};

struct Batch {
  std::vector<std::size_t> members;  // indices into the input list
  std::size_t height = 0;            // shared target size
  std::size_t width = 0;
};

inline const std::vector<double> kDefaultAspectBreakpoints = {2.0 / 3.0, 1.0, 1.5};
inline constexpr std::size_t kDefaultTargetArea = 96 * 96;

/// Buckets images by aspect ratio (width/height; bucket i holds ratios with i
/// breakpoints <= ratio), then cuts each bucket into consecutive batches of
/// at most `batch_size` in input order. Each batch gets a target size of
/// roughly `target_area` pixels at the bucket's median aspect ratio.
std::vector<Batch> group_size_batches(std::span<const ImageMeta> metas, std::size_t batch_size,
                                      std::span<const double> breakpoints = kDefaultAspectBreakpoints,
                                      std::size_t target_area = kDefaultTargetArea);

struct LabeledImage {
  ImageMeta meta;
  Tensor image;  // [3,h,w], normalized
};

struct TrainConfig {
  std::size_t steps = 200;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double margin = 0.3;
  double scale = 30.0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double dropout_rate = 0.2;
  std::size_t dims = 512;
  bool use_local = true;
  bool use_global = true;
  std::size_t target_area = kDefaultTargetArea;
  std::vector<double> breakpoints = kDefaultAspectBreakpoints;
};

/// Reads the JSON keys steps, lr, momentum, weight_decay, margin, scale,
/// batch_size, seed, dropout_rate, dims (plus optional use_local,
/// use_global, target_area, breakpoints). Missing keys keep their defaults.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::filesystem::path& path);

struct TrainResult {
  GlamModel model;
  std::vector<double> losses;  // one mean batch loss per step
};

/// Runs backbone -> attention -> head -> ArcFace -> SGD for `config.steps`
/// batches. Serial and seed-deterministic. Throws NumericError on a
/// non-finite loss.
TrainResult train_toy(std::span<const LabeledImage> dataset, const TrainConfig& config);

/// Model configuration implied by a training configuration.
ModelConfig model_config_for(const TrainConfig& config, std::size_t classes);

}  // namespace glam
