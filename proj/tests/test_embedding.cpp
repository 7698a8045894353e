#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "glam/backbone.hpp"
#include "glam/embedding.hpp"
#include "glam/errors.hpp"
#include "glam/gradcheck.hpp"
#include "glam/model.hpp"
#include "support.hpp"

using namespace glam;
using glam::test::random_tensor;

namespace {

HeadParams random_head(std::size_t c, std::size_t d, std::uint64_t seed, double dropout = 0.0) {
  std::mt19937_64 rng(seed);
  HeadParams h = HeadParams::init(c, d, rng, dropout, 3.0);
  h.fc_bias.mutable_value() = random_tensor({d}, rng, -0.3, 0.3);
  h.bn_gamma.mutable_value() = random_tensor({d}, rng, 0.5, 1.5);
  h.bn_beta.mutable_value() = random_tensor({d}, rng, -0.3, 0.3);
  h.running_mean = random_tensor({d}, rng, -0.2, 0.2);
  h.running_var = random_tensor({d}, rng, 0.5, 2.0);
  return h;
}

double norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST(Gem, ReducesToMeanAtPOne) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({3, 4, 4}, rng, 0.01, 2.0);
  const Tensor g = gem_pool(x, 1.0);
  const Tensor m = gap(x);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(g[c], m[c], 1e-12);
}

TEST(Gem, ConstantChannelAnyExponent) {
  for (double p : {1.0, 2.5, 3.0, 10.0, 100.0}) {
    const Tensor g = gem_pool(Tensor({2, 3, 3}, 0.7), p);
    EXPECT_NEAR(g[0], 0.7, 1e-14) << "p=" << p;
  }
}

TEST(Gem, TwoValueChannel) {
  const Tensor x({1, 1, 2}, std::vector<double>{1.0, 2.0});
  EXPECT_NEAR(gem_pool(x, 2.0)[0], std::sqrt(2.5), 1e-15);
}

TEST(Gem, RejectsExponentBelowOne) {
  EXPECT_THROW(gem_pool(Tensor({1, 2, 2}, 1.0), 0.5), std::invalid_argument);
}

TEST(Gem, ClampsNonPositiveValues) {
  const Tensor x({1, 1, 2}, std::vector<double>{-3.0, 0.0});
  EXPECT_NEAR(gem_pool(x, 3.0)[0], kGemClamp, 1e-20);
  EXPECT_NEAR(gem_pool(x, 100.0)[0], kGemClamp, 1e-20);
}

TEST(Gem, MonotoneInExponentAndApproachesMax) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({2, 3, 4}, rng, 0.01, 3.0);
    double prev0 = 0.0;
    for (double p : {1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0}) {
      const double v = gem_pool(x, p)[0];
      EXPECT_GE(v, prev0 - 1e-12);
      prev0 = v;
    }
    const double mx = *std::max_element(x.values().begin(), x.values().begin() + 12);
    EXPECT_GE(prev0, 0.95 * mx);
    EXPECT_LE(prev0, mx * (1 + 1e-12));
  }
}

TEST(Embed, IdentityHeadIsNormalizedGem) {
  std::mt19937_64 rng(3);
  HeadParams h = HeadParams::init(4, 4, rng, 0.2, 3.0);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  h.fc_weight.mutable_value() = eye;
  const Tensor f = random_tensor({4, 3, 3}, rng, 0.0, 1.0);
  const Embedding e = embed(f, h);
  const Tensor want = l2_normalize(gem_pool(f, 3.0)).value;
  EXPECT_LT(max_abs_difference(e.vec, want), 1e-14);
}

TEST(Embed, EvalIsDeterministicAndUnitNorm) {
  const HeadParams h = random_head(8, 4, 4);
  std::mt19937_64 rng(4);
  const Tensor f = random_tensor({8, 3, 2}, rng, 0.0, 1.0);
  const Embedding a = embed(f, h), b = embed(f, h);
  EXPECT_TRUE(bitwise_equal(a.vec, b.vec));
  EXPECT_FALSE(a.degenerate);
  EXPECT_NEAR(norm(a.vec), 1.0, 1e-6);
}

TEST(Embed, MatchesStepByStepComposition) {
  const HeadParams h = random_head(8, 4, 5);
  std::mt19937_64 rng(5);
  const Tensor f = random_tensor({8, 2, 3}, rng, 0.0, 1.0);
  const double p = h.gem_p.value()[0];
  const Tensor pooled = gem_pool(f, p);
  Tensor z({4});
  for (std::size_t j = 0; j < 4; ++j) {
    double s = h.fc_bias.value()[j];
    for (std::size_t c = 0; c < 8; ++c) s += h.fc_weight.value().at(j, c) * pooled[c];
    z[j] = (s - h.running_mean[j]) / std::sqrt(h.running_var[j] + h.bn_eps) * h.bn_gamma.value()[j] +
           h.bn_beta.value()[j];
  }
  EXPECT_LT(max_abs_difference(embed(f, h).vec, l2_normalize(z).value), 1e-13);
}

TEST(Embed, DegenerateInputGivesZeroDescriptor) {
  std::mt19937_64 rng(6);
  HeadParams h = HeadParams::init(4, 3, rng);
  h.fc_weight.mutable_value().fill(0.0);
  h.bn_beta.mutable_value().fill(0.0);
  const Embedding e = embed(Tensor({4, 2, 2}, 1.0), h);
  EXPECT_TRUE(e.degenerate);
  for (double v : e.vec.values()) EXPECT_EQ(v, 0.0);
}

TEST(Embed, ShapeMismatchRejected) {
  const HeadParams h = random_head(8, 4, 7);
  EXPECT_THROW(embed(Tensor({4, 2, 2}), h), ShapeError);
}

TEST(BatchNorm, TrainModeUsesBatchStatistics) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({5, 3}, rng, -2, 2);
  BatchStats stats;
  const Tensor y = batch_norm_train(Var::constant(x), Var::constant(Tensor({3}, 1.0)),
                                    Var::constant(Tensor({3})), 1e-5, &stats).value();
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 5; ++i) mean += x.at(i, j) / 5.0;
    for (std::size_t i = 0; i < 5; ++i) var += (x.at(i, j) - mean) * (x.at(i, j) - mean) / 5.0;
    EXPECT_NEAR(stats.mean[j], mean, 1e-15);
    EXPECT_NEAR(stats.variance[j], var, 1e-15);
    double ym = 0.0;
    for (std::size_t i = 0; i < 5; ++i) ym += y.at(i, j);
    EXPECT_NEAR(ym, 0.0, 1e-12);
  }
  EXPECT_THROW(batch_norm_train(Var::constant(Tensor({1, 3})), Var::constant(Tensor({3}, 1.0)),
                                Var::constant(Tensor({3})), 1e-5),
               ShapeError);
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  HeadParams h = random_head(2, 2, 9);
  const Tensor m0 = h.running_mean, v0 = h.running_var;
  const BatchStats s{Tensor::from_vector({1.0, -1.0}), Tensor::from_vector({0.5, 2.0})};
  update_running_stats(h, s, 4);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(h.running_mean[j], 0.9 * m0[j] + 0.1 * s.mean[j], 1e-15);
    EXPECT_NEAR(h.running_var[j], 0.9 * v0[j] + 0.1 * s.variance[j] * 4.0 / 3.0, 1e-15);
  }
}

TEST(Dropout, ZeroRateIsIdentityAndKeptScaled) {
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor({4, 50}, rng);
  EXPECT_TRUE(bitwise_equal(dropout(Var::constant(x), 0.0, rng).value(), x));
  const Tensor y = dropout(Var::constant(x), 0.25, rng).value();
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] == 0.0) {
      ++dropped;
    } else {
      EXPECT_NEAR(y[i], x[i] / 0.75, 1e-15);
    }
  }
  EXPECT_GT(dropped, 20u);
  EXPECT_LT(dropped, 80u);
  EXPECT_THROW(dropout(Var::constant(x), 1.0, rng), std::invalid_argument);
}

TEST(EmbedGradient, TrainModeWithoutDropoutMatchesFiniteDifferences) {
  HeadParams h = random_head(4, 3, 11);
  std::mt19937_64 rng(11);
  const GradReport r = check_op(
      "embed",
      [&h](const std::vector<Var>& v) {
        HeadParams p = h;
        p.fc_weight = v[3];
        p.bn_gamma = v[4];
        p.bn_beta = v[5];
        p.gem_p = v[6];
        return embed_batch({v[0], v[1], v[2]}, p, Mode::train).descriptors;
      },
      {{"f0", random_tensor({4, 2, 2}, rng, 0.05, 1)},
       {"f1", random_tensor({4, 2, 2}, rng, 0.05, 1)},
       {"f2", random_tensor({4, 2, 2}, rng, 0.05, 1)},
       {"fc_weight", h.fc_weight.value()},
       {"gamma", h.bn_gamma.value()},
       {"beta", h.bn_beta.value()},
       {"p", h.gem_p.value()}});
  EXPECT_TRUE(r.pass) << r.max_rel;
}

TEST(EmbedGradient, FcBiasGradientVanishesUnderBatchStatistics) {
  HeadParams h = random_head(4, 3, 12);
  std::mt19937_64 rng(12);
  std::vector<Var> feats;
  for (int b = 0; b < 3; ++b) feats.push_back(Var::constant(random_tensor({4, 2, 2}, rng, 0.05, 1)));
  const HeadBatch out = embed_batch(feats, h, Mode::train);
  backward(weighted_sum(out.descriptors, random_tensor({3, 3}, rng)));
  for (double g : h.fc_bias.grad().values()) EXPECT_LT(std::abs(g), 1e-12);
}

TEST(Resize, IdentityAndConstant) {
  std::mt19937_64 rng(13);
  const Tensor img = random_tensor({3, 5, 7}, rng);
  EXPECT_TRUE(bitwise_equal(resize_bilinear(img, 1.0), img));
  for (double s : {0.3, 0.5, 0.7071, 1.6, 2.0}) {
    const Tensor r = resize_bilinear(Tensor({3, 5, 7}, 0.42), s);
    EXPECT_EQ(r.extent(1), std::max<std::size_t>(1, std::lround(5 * s)));
    for (double v : r.values()) EXPECT_NEAR(v, 0.42, 1e-15);
  }
  EXPECT_THROW(resize_bilinear(img, 0.0), std::invalid_argument);
}

TEST(Resize, CheckerboardUpscaleMatchesPointwiseFormula) {
  const Tensor board({1, 2, 2}, std::vector<double>{0, 1, 1, 0});
  const Tensor up = resize_bilinear(board, 2.0);
  ASSERT_EQ(up.shape(), (Shape{1, 4, 4}));
  auto src = [](std::size_t o) { return std::clamp((o + 0.5) / 2.0 - 0.5, 0.0, 1.0); };
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      const double sy = src(y), sx = src(x);
      const double want = (1 - sy) * (1 - sx) * 0 + (1 - sy) * sx * 1 + sy * (1 - sx) * 1 + sy * sx * 0;
      EXPECT_NEAR(up[y * 4 + x], want, 1e-15) << y << "," << x;
    }
  }
}

TEST(Backbone, ZeroImageZeroBiasesGiveZero) {
  std::mt19937_64 rng(14);
  BackboneParams p = BackboneParams::init(rng);
  for (Var& b : p.bias) b.mutable_value().fill(0.0);
  const Tensor f = tiny_backbone(Tensor({3, 16, 16}), p);
  for (double v : f.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backbone, OutputExtents) {
  std::mt19937_64 rng(15);
  const BackboneParams p = BackboneParams::init(rng);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {17, 30}, {64, 40}}) {
    const Tensor f = tiny_backbone(Tensor({3, h, w}, 0.1), p);
    EXPECT_EQ(f.shape(), (Shape{32, backbone_output_extent(h), backbone_output_extent(w)}));
  }
  EXPECT_EQ(backbone_output_extent(64), 8u);
  EXPECT_EQ(backbone_output_extent(17), 3u);
  EXPECT_THROW(tiny_backbone(Tensor({3, 7, 20}), p), ShapeError);
}

TEST(Backbone, ConstantImageGivesConstantFeatures) {
  std::mt19937_64 rng(16);
  const BackboneParams p = BackboneParams::init(rng);
  const Tensor f = tiny_backbone(Tensor({3, 24, 20}, 0.3), p);
  const std::size_t plane = f.extent(1) * f.extent(2);
  for (std::size_t c = 0; c < f.extent(0); ++c)
    for (std::size_t i = 0; i < plane; ++i) EXPECT_EQ(f[c * plane + i], f[c * plane]);
}

TEST(Backbone, Deterministic) {
  std::mt19937_64 a(17), b(17), rng(18);
  const Tensor img = random_tensor({3, 20, 20}, rng);
  EXPECT_TRUE(bitwise_equal(tiny_backbone(img, BackboneParams::init(a)), tiny_backbone(img, BackboneParams::init(b))));
}

class MultiResolution : public ::testing::Test {
 protected:
  void SetUp() override {
    ModelConfig cfg;
    cfg.dim = 16;
    model_ = GlamModel::init(cfg, 3);
    std::mt19937_64 rng(19);
    image_ = random_tensor({3, 40, 48}, rng);
  }
  GlamModel model_;
  Tensor image_;
};

TEST_F(MultiResolution, SingleScaleEqualsDescribe) {
  const Tensor d = multi_resolution_descriptor(image_, model_, {1.0});
  EXPECT_LT(max_abs_difference(d, describe(image_, model_).vec), 1e-15);
}

TEST_F(MultiResolution, RepeatedScaleIsFixedPoint) {
  const Tensor d = multi_resolution_descriptor(image_, model_, {0.7, 0.7, 0.7});
  EXPECT_LT(max_abs_difference(d, describe(resize_bilinear(image_, 0.7), model_).vec), 1e-15);
}

TEST_F(MultiResolution, AveragesPerScaleDescriptors) {
  const Tensor a = describe(resize_bilinear(image_, 0.5), model_).vec;
  const Tensor b = describe(image_, model_).vec;
  Tensor mean({a.size()});
  for (std::size_t i = 0; i < a.size(); ++i) mean[i] = (a[i] + b[i]) / 2.0;
  EXPECT_LT(max_abs_difference(multi_resolution_descriptor(image_, model_, {0.5, 1.0}),
                               l2_normalize(mean).value),
            1e-14);
}

TEST_F(MultiResolution, ScaleOrderDoesNotMatter) {
  const Tensor a = multi_resolution_descriptor(image_, model_, {0.5, 0.70710678118654752, 1.0});
  const Tensor b = multi_resolution_descriptor(image_, model_, {1.0, 0.5, 0.70710678118654752});
  EXPECT_TRUE(bitwise_equal(a, b));
  EXPECT_NEAR(norm(a), 1.0, 1e-12);
}

TEST_F(MultiResolution, EmptyOrDegenerateRejected) {
  EXPECT_THROW(multi_resolution_descriptor(image_, model_, {}), std::invalid_argument);
  GlamModel dead = model_.clone();
  dead.head.fc_weight.mutable_value().fill(0.0);
  dead.head.bn_beta.mutable_value().fill(0.0);
  EXPECT_THROW(multi_resolution_descriptor(image_, dead, {1.0}), NumericError);
}
