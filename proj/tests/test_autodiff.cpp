#include <gtest/gtest.h>

#include "mcse/gradcheck.hpp"
#include "mcse/ops_registry.hpp"
#include "oracles.hpp"

using namespace mcse;
using namespace mcse::ad;

TEST(Autodiff, LinearMapGradientIsTheInput) {
  // loss = sum(w * x) => grad(w) = x
  ParamStore<double> ps;
  auto& w = ps.create("w", {4});
  for (int i = 0; i < 4; ++i) w.value[i] = 0.5 * i;
  Tensor<double> x({4}, {1.0, -2.0, 3.0, 0.25});
  Graph<double> g;
  const Var prod = mul(g, g.param(w), g.constant(x));
  const Var loss = scale(g, mean(g, prod), 4.0);  // mean * n = sum
  g.backward(loss);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(w.grad[i], x[i]);
}

TEST(Autodiff, MseGradient) {
  // loss = mean((w - t)^2) => grad(w) = 2 (w - t) / n
  ParamStore<double> ps;
  auto& w = ps.create("w", {3});
  w.value = Tensor<double>({3}, {1.0, 2.0, 3.0});
  Tensor<double> t({3}, {0.0, 1.0, -1.0});
  Graph<double> g;
  const Var d = sub(g, g.param(w), g.constant(t));
  const Var loss = mean(g, mul(g, d, d));
  g.backward(loss);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(w.grad[i], 2.0 * (w.value[i] - t[i]) / 3.0, 1e-12);
}

TEST(Autodiff, BackwardTwiceAccumulatesExactly) {
  ParamStore<double> ps;
  auto& w = ps.create("w", {5});
  Rng rng(2);
  fill_uniform(w, rng, -1, 1);
  Tensor<double> x({5});
  for (int i = 0; i < 5; ++i) x[i] = rng.uniform(-1, 1);

  Graph<double> g;
  const Var loss = mean(g, silu(g, mul(g, g.param(w), g.constant(x))));
  g.backward(loss);
  const Tensor<double> once = w.grad;
  g.backward(loss);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(w.grad[i], 2.0 * once[i]);
}

TEST(Autodiff, NonScalarLossRejected) {
  ParamStore<double> ps;
  auto& w = ps.create("w", {3});
  Graph<double> g;
  const Var v = exp(g, g.param(w));
  EXPECT_THROW(g.backward(v), ContractError);
}

TEST(Autodiff, FlipIsInvolutionAndConcatSliceIdentity) {
  Rng rng(4);
  Tensor<float> x({3, 5});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(rng.normal());
  Graph<float> g;
  const Var xv = g.constant(x);
  const Var ff = flip(g, flip(g, xv, 1), 1);
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(g.val(ff)[i], x[i]);

  const Var a = slice(g, xv, 1, 0, 2);
  const Var b = slice(g, xv, 1, 2, 3);
  const Var cat = concat(g, {a, b}, 1);
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(g.val(cat)[i], x[i]);
}

TEST(Autodiff, Conv2dIdentityKernelIsPassthrough) {
  // 1x1 kernel with identity weights and zero bias
  const int C = 3;
  Tensor<float> x({C, 4, 5});
  Rng rng(5);
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(rng.normal());
  Tensor<float> w({C, C, 1, 1});
  for (int c = 0; c < C; ++c) w(c, c, 0, 0) = 1.0f;
  Graph<float> g;
  const Var y = conv2d(g, g.constant(x), g.constant(w),
                       g.constant(Tensor<float>({C})));
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(g.val(y)[i], x[i]);
}

TEST(Autodiff, InstanceNormNormalizesPerChannel) {
  Tensor<float> x({4, 6, 7});
  Rng rng(6);
  for (int64_t i = 0; i < x.numel(); ++i)
    x[i] = float(3.0 + 2.5 * rng.normal());
  Graph<float> g;
  Tensor<float> gamma({4}, std::vector<float>(4, 1.0f));
  Tensor<float> beta({4});
  const Var y = instance_norm(g, g.constant(x), g.constant(gamma),
                              g.constant(beta));
  for (int c = 0; c < 4; ++c) {
    double mean = 0, var = 0;
    for (int64_t i = 0; i < 42; ++i) mean += g.val(y)[c * 42 + i];
    mean /= 42;
    for (int64_t i = 0; i < 42; ++i) {
      const double d = g.val(y)[c * 42 + i] - mean;
      var += d * d;
    }
    var /= 42;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Autodiff, PreluExample) {
  // slope 0.25 on [-2, 3] -> [-0.5, 3]
  Tensor<float> x({1, 2}, {-2.0f, 3.0f});
  Tensor<float> s({1}, {0.25f});
  Graph<float> g;
  const Var y = prelu(g, g.constant(x), g.constant(s), 0);
  EXPECT_EQ(g.val(y)[0], -0.5f);
  EXPECT_EQ(g.val(y)[1], 3.0f);
}

TEST(Autodiff, ShapeMismatchAndUnknownOpErrors) {
  Graph<float> g;
  const Var a = g.constant(Tensor<float>({2, 3}));
  const Var b = g.constant(Tensor<float>({4, 5}));
  EXPECT_THROW(mul(g, a, b), ShapeError);
  EXPECT_THROW(apply_op(g, "definitely_not_an_op", {a}), UnsupportedOpError);
}

TEST(Autodiff, RegistryRunsEveryCatalogId) {
  // every cataloged id dispatches (details are covered by the grad suite)
  Graph<float> g;
  const Var x = g.constant(Tensor<float>({2, 3}, std::vector<float>(6, 0.5f)));
  EXPECT_EQ(g.val(apply_op(g, "exp", {x})).numel(), 6);
  EXPECT_EQ(g.val(apply_op(g, "mean", {x})).numel(), 1);
  EXPECT_EQ(
      g.val(apply_op(g, "flip", {x}, nlohmann::json{{"axis", 1}})).numel(), 6);
}

TEST(GradCheck, SingleSigmoidIsNearlyExact) {
  ParamStore<double> ps;
  auto& w = ps.create("w", {4});
  Rng rng(7);
  fill_uniform(w, rng, -2, 2);
  const auto rep = grad_check("sigmoid_node", ps, [&](Graph<double>& g) {
    return mean(g, sigmoid(g, g.param(w)));
  });
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.max_rel_err, 1e-8);
}

TEST(GradCheck, CorruptedBackwardIsCaughtAndNamed) {
  // negative control: an op whose recorded backward is wrong by 2x
  ParamStore<double> ps;
  auto& w = ps.create("w", {3});
  Rng rng(8);
  fill_uniform(w, rng, 0.5, 1.5);
  auto forward = [&](Graph<double>& g) {
    const Var x = g.param(w);
    Tensor<double> y(g.val(x).shape());
    for (int64_t i = 0; i < y.numel(); ++i)
      y[i] = g.val(x)[i] * g.val(x)[i];
    const Var sq = g.make(std::move(y), {x}, "corrupted_square",
                          [x](Graph<double>& gg, Var out) {
                            const auto& go = gg.grad(out);
                            for (int64_t i = 0; i < go.numel(); ++i)
                              gg.grad(x)[i] += go[i] * gg.val(x)[i];  // missing 2x
                          });
    return mean(g, sq);
  };
  const auto rep = grad_check("corrupted_square", ps, forward);
  EXPECT_FALSE(rep.pass);
  EXPECT_EQ(rep.case_name, "corrupted_square");
  EXPECT_FALSE(rep.worst_param.empty());
}

TEST(Autodiff, ReleaseBuffersStillDeliversParameterGradients) {
  ParamStore<float> ps;
  auto& w = ps.create("w", {6});
  Rng rng(9);
  for (int i = 0; i < 6; ++i) w.value[i] = float(rng.normal());
  Tensor<float> t({6});
  for (int i = 0; i < 6; ++i) t[i] = float(rng.normal());

  auto run = [&](bool release) {
    ps.zero_grad();
    Graph<float> g;
    const Var d = sub(g, silu(g, g.param(w)), g.constant(t));
    const Var loss = mean(g, mul(g, d, d));
    g.backward(loss, release);
    return w.grad;
  };
  const auto keep = run(false);
  const auto rel = run(true);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(keep[i], rel[i]);
}

TEST(Autodiff, DebugBuildsRejectNonFiniteForward) {
#ifndef NDEBUG
  Graph<float> g;
  Tensor<float> x({2}, {700.0f, 0.0f});  // exp overflows to inf
  EXPECT_THROW(exp(g, g.constant(x)), NumericError);
#else
  GTEST_SKIP() << "finite checks are debug-only";
#endif
}
