#pragma once

// Descriptor head: GeM pooling -> FC -> batch norm -> dropout -> l2.

#include <random>
#include <string>
#include <vector>

#include "glam/autograd.hpp"

namespace glam {

enum class Mode { train, eval };

inline constexpr double kGemClamp = 1e-6;

struct HeadParams {
  Var gem_p;                // [1], kept >= 1
  Var fc_weight, fc_bias;   // [d,c], [d]
  Var bn_gamma, bn_beta;    // [d]
  Tensor running_mean;      // [d]
  Tensor running_var;       // [d]
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  double dropout_rate = 0.2;

  static HeadParams init(std::size_t channels, std::size_t dim, std::mt19937_64& rng,
                         double dropout_rate = 0.2, double gem_p = 3.0);
  std::size_t dim() const { return fc_weight.shape()[0]; }
  std::size_t channels() const { return fc_weight.shape()[1]; }

  template <class Fn>
  void visit(Fn&& fn) {
    fn(std::string("head.gem_p"), gem_p);
    fn(std::string("head.fc.weight"), fc_weight);
    fn(std::string("head.fc.bias"), fc_bias);
    fn(std::string("head.bn.gamma"), bn_gamma);
    fn(std::string("head.bn.beta"), bn_beta);
  }
};

/// Per-channel (mean(max(x, kGemClamp)^p))^(1/p); throws for p < 1.
Tensor gem_pool(const Tensor& features, double p);
Var gem_pool(const Var& features, const Var& p);

Var linear(const Var& x, const Var& weight, const Var& bias);

struct BatchStats {
  Tensor mean;      // [d]
  Tensor variance;  // [d], biased
};
/// Normalizes [B,d] with batch statistics; B must be at least 2.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps,
                     BatchStats* stats = nullptr);
Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                    const Tensor& running_var, double eps);
/// Inverted dropout; identity for rate 0.
Var dropout(const Var& x, double rate, std::mt19937_64& rng);

struct HeadBatch {
  Var descriptors;  // [B,d], unit rows (zero rows when degenerate)
  BatchStats stats; // filled in train mode
};

/// Runs the head on a batch of [c,h,w] feature maps. Train mode uses batch
/// statistics and needs `rng` when dropout is active; eval mode uses the
/// running statistics and is deterministic.
HeadBatch embed_batch(const std::vector<Var>& features, const HeadParams& head, Mode mode,
                      std::mt19937_64* rng = nullptr);

/// Exponential moving update of the running statistics from one train batch.
void update_running_stats(HeadParams& head, const BatchStats& stats, std::size_t batch_size);

struct Embedding {
  Tensor vec;               // [d]
  bool degenerate = false;  // pre-normalization vector was ~0; vec is zero
};

/// Eval-mode descriptor of one feature map.
Embedding embed(const Tensor& features, const HeadParams& head);

/// Bilinear resampling with half-pixel centers (corners not aligned).
/// Output extents are max(1, round(scale * extent)).
Tensor resize_bilinear(const Tensor& image, double scale);
/// Same, to explicit output extents.
Tensor resize_bilinear_to(const Tensor& image, std::size_t out_h, std::size_t out_w);

}  // namespace glam
