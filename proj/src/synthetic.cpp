#include "glam/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "glam/image_io.hpp"

namespace glam {

namespace {

constexpr std::array<std::array<double, 3>, 8> kPalette = {{
    {0.90, 0.15, 0.10},
    {0.10, 0.75, 0.20},
    {0.15, 0.25, 0.90},
    {0.95, 0.85, 0.10},
    {0.80, 0.20, 0.80},
    {0.10, 0.80, 0.85},
    {0.95, 0.55, 0.10},
    {0.45, 0.25, 0.10},
}};

constexpr std::array<double, 5> kAspects = {0.6, 0.8, 1.0, 1.25, 1.6};

std::string numbered(const char* prefix, std::size_t label, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_c%zu_%03zu", prefix, label, index);
  return buf;
}

}  // namespace

SyntheticImage render_blob(const std::string& id, std::size_t label, Difficulty difficulty,
                           const SyntheticConfig& config, std::mt19937_64& rng) {
  if (label >= kPalette.size()) throw std::invalid_argument("render_blob: at most 8 classes");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, kAspects.size() - 1);
  std::normal_distribution<double> noise(0.0, config.noise);

  const double aspect = kAspects[pick(rng)];
  const double area = static_cast<double>(config.area);
  const auto h = std::max<std::size_t>(16, static_cast<std::size_t>(std::lround(std::sqrt(area / aspect))));
  const auto w = std::max<std::size_t>(16, static_cast<std::size_t>(std::lround(std::sqrt(area * aspect))));
  const double short_side = static_cast<double>(std::min(h, w));

  double radius = short_side * (0.22 + 0.1 * unit(rng));
  double contrast = 1.0;
  double cy = static_cast<double>(h) * (0.3 + 0.4 * unit(rng));
  double cx = static_cast<double>(w) * (0.3 + 0.4 * unit(rng));
  if (difficulty == Difficulty::hard) {
    radius = short_side * (0.12 + 0.05 * unit(rng));
    contrast = 0.6;
  } else if (difficulty == Difficulty::junk) {
    // Center just outside a random edge so only a sliver is visible.
    const double out = radius * 0.8;
    switch (pick(rng) % 4) {
      case 0: cy = -out; break;
      case 1: cy = static_cast<double>(h) + out; break;
      case 2: cx = -out; break;
      default: cx = static_cast<double>(w) + out; break;
    }
  }

  const double background = 0.45 + 0.1 * unit(rng);
  const auto& color = kPalette[label];
  SyntheticImage img;
  img.meta = {id, w, h, label};
  img.rgb = Tensor({3, h, w});
  const std::size_t plane = h * w;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
      const double alpha = contrast * std::clamp(radius - std::sqrt(dy * dy + dx * dx) + 0.5, 0.0, 1.0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = (1.0 - alpha) * background + alpha * color[c] + noise(rng);
        img.rgb[c * plane + y * w + x] = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
      }
    }
  }
  return img;
}

std::vector<SyntheticImage> make_blob_images(const SyntheticConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::vector<SyntheticImage> out;
  for (std::size_t i = 0; i < config.per_class; ++i) {
    for (std::size_t k = 0; k < config.classes; ++k) {
      out.push_back(render_blob(numbered("train", k, i), k, Difficulty::easy, config, rng));
    }
  }
  return out;
}

RetrievalSplit make_retrieval_split(const SyntheticConfig& config, std::size_t queries_per_class,
                                    std::size_t db_per_class) {
  std::mt19937_64 rng(config.seed ^ 0x5bd1e9955bd1e995ULL);
  RetrievalSplit split;
  std::vector<std::vector<std::string>> easy(config.classes), hard(config.classes), junk(config.classes);
  for (std::size_t k = 0; k < config.classes; ++k) {
    for (std::size_t i = 0; i < db_per_class; ++i) {
      const Difficulty d = i % 5 == 4 ? Difficulty::junk : i % 5 >= 2 ? Difficulty::hard : Difficulty::easy;
      SyntheticImage img = render_blob(numbered("db", k, i), k, d, config, rng);
      auto& list = d == Difficulty::easy ? easy[k] : d == Difficulty::hard ? hard[k] : junk[k];
      list.push_back(img.meta.id);
      split.database.push_back(std::move(img));
    }
  }
  for (std::size_t k = 0; k < config.classes; ++k) {
    for (std::size_t i = 0; i < queries_per_class; ++i) {
      SyntheticImage q = render_blob(numbered("query", k, i), k, Difficulty::easy, config, rng);
      split.gt.queries.push_back({q.meta.id, easy[k], hard[k], junk[k]});
      split.queries.push_back(std::move(q));
    }
  }
  return split;
}

std::vector<LabeledImage> to_labeled(std::span<const SyntheticImage> images) {
  std::vector<LabeledImage> out;
  out.reserve(images.size());
  for (const SyntheticImage& img : images) out.push_back({img.meta, normalize_rgb(img.rgb)});
  return out;
}

}  // namespace glam
