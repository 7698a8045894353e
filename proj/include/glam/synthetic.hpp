#pragma once

// Toy data: colored disks on noisy gray backgrounds, one color per class,
// with varied aspect ratios. Used by the training smoke run and the CLI.

#include <cstdint>
#include <span>
#include <vector>

#include "glam/retrieval.hpp"
#include "glam/training.hpp"

namespace glam {

struct SyntheticConfig {
  std::size_t classes = 4;     // at most 8
  std::size_t per_class = 16;  // training images per class
  std::uint64_t seed = 0;
  std::size_t area = 64 * 64;  // approximate pixels per image
  double noise = 0.04;
};

struct SyntheticImage {
  ImageMeta meta;
  Tensor rgb;  // [3,h,w], multiples of 1/255 in [0,1]
};

enum class Difficulty { easy, hard, junk };

/// One image of `label`. Hard images have a small low-contrast disk; junk
/// images have the disk mostly outside the frame.
SyntheticImage render_blob(const std::string& id, std::size_t label, Difficulty difficulty,
                           const SyntheticConfig& config, std::mt19937_64& rng);

std::vector<SyntheticImage> make_blob_images(const SyntheticConfig& config);

struct RetrievalSplit {
  std::vector<SyntheticImage> queries;
  std::vector<SyntheticImage> database;
  RetrievalGroundTruth gt;  // same-class database images, split by difficulty
};

/// Held-out queries and database drawn from a stream independent of
/// make_blob_images for the same seed.
RetrievalSplit make_retrieval_split(const SyntheticConfig& config, std::size_t queries_per_class = 2,
                                    std::size_t db_per_class = 10);

/// Normalized training samples.
std::vector<LabeledImage> to_labeled(std::span<const SyntheticImage> images);

}  // namespace glam
