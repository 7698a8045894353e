#include <gtest/gtest.h>

#include <cmath>

#include "glam/attention.hpp"
#include "glam/errors.hpp"
#include "glam/gradcheck.hpp"
#include "support.hpp"

using namespace glam;
using glam::test::random_tensor;

TEST(FiniteDifference, SumOfSquares) {
  const Tensor x = Tensor::from_vector({1.0, 2.0, 3.0});
  const Tensor g = finite_difference_grad(
      [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.values()) s += v * v;
        return s;
      },
      x);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
  EXPECT_NEAR(g[2], 6.0, 1e-8);
}

TEST(FiniteDifference, ConstantFunctionHasZeroGradient) {
  const Tensor g = finite_difference_grad([](const Tensor&) { return 4.0; }, Tensor({2, 2}, 1.0));
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifference, NonFiniteProbeRejected) {
  EXPECT_THROW(finite_difference_grad([](const Tensor& t) { return std::log(t[0]); }, Tensor({1}, 0.0)),
               NumericError);
}

TEST(RelativeError, UsesFloorForTinyValues) {
  EXPECT_EQ(max_relative_error(Tensor({1}, 0.0), Tensor({1}, 0.0)), 0.0);
  EXPECT_NEAR(max_relative_error(Tensor({1}, 1e-12), Tensor({1}, 0.0)), 1e-4, 1e-18);
  EXPECT_NEAR(max_relative_error(Tensor::from_vector({2.0, 1.0}), Tensor::from_vector({1.0, 1.0})), 0.5, 1e-15);
}

TEST(CheckOp, SumOfSquaresPasses) {
  const GradReport r = check_op(
      "square", [](const std::vector<Var>& v) { return sum(ewmul_broadcast(v[0], v[0])); },
      {{"x", Tensor::from_vector({1.0, 2.0, 3.0})}});
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_rel, 1e-8);
  ASSERT_EQ(r.params.size(), 1u);
  EXPECT_EQ(r.params[0].name, "x");
  EXPECT_EQ(r.params[0].elements, 3u);
}

TEST(CheckOp, SmallAttentionInstancePasses) {
  AttentionConfig cfg;
  cfg.channels = 2;
  std::mt19937_64 rng(1);
  AttentionParams p = AttentionParams::init(cfg, rng);
  p.fusion.logits.mutable_value() = random_tensor({3}, rng);
  std::vector<GradInput> inputs{{"features", random_tensor({2, 2, 2}, rng)}};
  std::vector<Var*> slots;
  p.visit([&](const std::string& name, Var& v) {
    inputs.push_back({name, random_tensor(v.shape(), rng, -0.5, 0.5)});
    slots.push_back(&v);
  });
  const GradReport r = check_op(
      "glam",
      [&](const std::vector<Var>& v) {
        AttentionParams q = p;
        std::size_t k = 1;
        q.visit([&](const std::string&, Var& slot) { slot = v[k++]; });
        return glam_graph(v[0], q).fused;
      },
      inputs);
  EXPECT_TRUE(r.pass) << gradcheck_table({r});
  EXPECT_EQ(r.params.size(), inputs.size());
}

TEST(CheckOp, CorruptedAdjointIsCaught) {
  const auto bad_square = [](const Var& x) {
    const Tensor xv = x.value();
    Tensor y = xv;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= y[i];
    return Var::from_op(std::move(y), {x}, [xv](const Tensor& g, const std::vector<bool>&) {
      Tensor dx = g;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 2.1 * xv[i];  // should be 2x
      return std::vector<Tensor>{dx};
    });
  };
  const GradReport r = check_op("bad", [&](const std::vector<Var>& v) { return bad_square(v[0]); },
                                {{"x", Tensor::from_vector({0.5, -1.0, 2.0})}});
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_rel, 0.04);
}

TEST(CheckAll, EveryOpPassesAndZeroToleranceFailsAll) {
  const auto reports = check_all();
  EXPECT_GE(reports.size(), 25u);
  for (const GradReport& r : reports) {
    EXPECT_TRUE(r.pass) << r.op << " " << r.max_rel;
    EXPECT_EQ(r.tolerance, kGradTolerance);
  }
  std::size_t failed = 0;
  for (const GradReport& r : check_all(0.0)) failed += r.pass ? 0 : 1;
  // Ops whose adjoint is exact in floating point (e.g. transpose) can still hit zero error.
  EXPECT_GE(failed, reports.size() / 2);
}

TEST(CheckAll, CoversTheAttentionHeadAndLoss) {
  const auto reports = check_all();
  auto has = [&](const std::string& op) {
    for (const GradReport& r : reports)
      if (r.op == op) return true;
    return false;
  };
  for (const char* op : {"glam_forward", "embed_train", "embed_eval", "arcface_loss", "conv2d", "softmax_axis0"})
    EXPECT_TRUE(has(op)) << op;
}

TEST(CheckOp, ErrorShrinksWithStepSize) {
  std::mt19937_64 rng(2);
  const GradFn fn = [](const std::vector<Var>& v) { return softmax_axis(v[0], 0); };
  const std::vector<GradInput> in{{"x", random_tensor({4, 3}, rng)}};
  const double e4 = check_op("s", fn, in, kGradTolerance, 1e-3).max_rel;
  const double e5 = check_op("s", fn, in, kGradTolerance, 1e-4).max_rel;
  EXPECT_LT(e5, e4);
}

TEST(Reports, JsonAndTable) {
  const GradReport r = check_op("square", [](const std::vector<Var>& v) { return sum(ewmul_broadcast(v[0], v[0])); },
                                {{"x", Tensor::from_vector({1.0})}});
  EXPECT_NE(gradcheck_json({r}).find("\"square\""), std::string::npos);
  EXPECT_NE(gradcheck_table({r}).find("1 of 1 ops pass"), std::string::npos);
}
