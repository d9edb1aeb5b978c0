#include <gtest/gtest.h>

#include "mcse/gradcheck.hpp"
#include "mcse/mamba.hpp"
#include "oracles.hpp"

using namespace mcse;
using namespace mcse::ad;

namespace {

mamba::MambaUnitConfig toy_unit() {
  mamba::MambaUnitConfig c;
  c.d_model = 4;
  c.n_state = 2;
  return c;
}

template <typename T>
void zero_all(ParamStore<T>& ps) {
  for (size_t i = 0; i < ps.size(); ++i) ps.at(i).value.fill(T(0));
}

Tensor<double> random3(int64_t a, int64_t b, int64_t c, uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t({a, b, c});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
  return t;
}

}  // namespace

TEST(MambaUnit, ZeroWeightsGiveZeroOutput) {
  ParamStore<double> ps;
  Rng rng(1);
  auto w = mamba::make_mamba_unit(ps, "u", toy_unit(), rng);
  zero_all(ps);
  Graph<double> g;
  const Var y = mamba::mamba_unit(g, g.constant(random3(2, 6, 4, 2)), w);
  for (int64_t i = 0; i < g.val(y).numel(); ++i) EXPECT_EQ(g.val(y)[i], 0.0);
}

TEST(MambaUnit, SingleStepSequenceIsWellDefined) {
  ParamStore<double> ps;
  Rng rng(3);
  auto w = mamba::make_mamba_unit(ps, "u", toy_unit(), rng);
  Graph<double> g;
  const Var y = mamba::mamba_unit(g, g.constant(random3(1, 1, 4, 4)), w);
  EXPECT_EQ(g.val(y).shape(), (Shape{1, 1, 4}));
  for (int64_t i = 0; i < 4; ++i) EXPECT_TRUE(std::isfinite(g.val(y)[i]));
}

TEST(MambaUnit, ToyGradientsPass) {
  ParamStore<double> ps;
  Rng rng(5);
  auto w = mamba::make_mamba_unit(ps, "u", toy_unit(), rng);
  const auto x = random3(1, 6, 4, 6);
  Rng prng(7);
  Tensor<double> probe({1, 6, 4});
  for (int64_t i = 0; i < probe.numel(); ++i) probe[i] = prng.normal();
  const auto rep = grad_check("mamba_unit_toy", ps, [&](Graph<double>& g) {
    return mean(g, mul(g, mamba::mamba_unit(g, g.constant(x), w),
                       g.constant(probe)));
  });
  EXPECT_TRUE(rep.pass) << rep.summary();
}

TEST(BidirectionalMamba, PalindromeWithTiedWeightsIsMirrorSymmetric) {
  ParamStore<double> ps;
  Rng rng(8);
  mamba::BiMambaWeights<double> w;
  w.fwd = mamba::make_mamba_unit(ps, "fwd", toy_unit(), rng);
  w.bwd = w.fwd;  // share every parameter: fwd == bwd

  const int64_t L = 7;
  Tensor<double> x({1, L, 4});
  Rng drng(9);
  for (int64_t i = 0; i < 4; ++i) {
    // palindrome along L
    for (int64_t t = 0; t <= L / 2; ++t) {
      const double v = drng.normal();
      x(0, t, i) = v;
      x(0, L - 1 - t, i) = v;
    }
  }
  Graph<double> g;
  const Var y = mamba::bidirectional_mamba(g, g.constant(x), w);
  ASSERT_EQ(g.val(y).shape(), (Shape{1, L, 8}));
  // forward half at t equals backward half at L-1-t
  for (int64_t t = 0; t < L; ++t)
    for (int64_t c = 0; c < 4; ++c)
      EXPECT_NEAR(g.val(y)(0, t, c), g.val(y)(0, L - 1 - t, c + 4), 1e-12);
}

TEST(BidirectionalMamba, ZeroInputGivesZeroOutput) {
  ParamStore<double> ps;
  Rng rng(10);
  auto w = mamba::make_bi_mamba(ps, "bi", toy_unit(), rng);
  // in-projection biases are zero-initialized, so zero input stays zero
  Graph<double> g;
  const Var y =
      mamba::bidirectional_mamba(g, g.constant(Tensor<double>({1, 5, 4})), w);
  for (int64_t i = 0; i < g.val(y).numel(); ++i) EXPECT_EQ(g.val(y)[i], 0.0);
}

TEST(BidirectionalMamba, ImpulsePositionSplitsCausally) {
  // an impulse at step t influences the forward half only at >= t and the
  // backward half only at <= t
  ParamStore<double> ps;
  Rng rng(11);
  auto w = mamba::make_bi_mamba(ps, "bi", toy_unit(), rng);
  const int64_t L = 9, t0 = 4;
  Tensor<double> base({1, L, 4});
  Tensor<double> bumped = base;
  for (int64_t c = 0; c < 4; ++c) bumped(0, t0, c) = 1.0;

  Graph<double> g;
  const Var yb = mamba::bidirectional_mamba(g, g.constant(base), w);
  const Var yi = mamba::bidirectional_mamba(g, g.constant(bumped), w);
  for (int64_t t = 0; t < L; ++t)
    for (int64_t c = 0; c < 8; ++c) {
      const double diff =
          std::abs(g.val(yi)(0, t, c) - g.val(yb)(0, t, c));
      const bool fwd_half = c < 4;
      const bool can_see = fwd_half ? t >= t0 : t <= t0;
      if (!can_see)
        EXPECT_EQ(diff, 0.0) << "t=" << t << " c=" << c;
      else if (t == t0)
        EXPECT_GT(diff, 0.0);
    }
}

TEST(BidirectionalMamba, ReversalWithSwappedWeightsReversesOutput) {
  ParamStore<double> ps;
  Rng rng(12);
  auto w = mamba::make_bi_mamba(ps, "bi", toy_unit(), rng);
  mamba::BiMambaWeights<double> swapped;
  swapped.fwd = w.bwd;
  swapped.bwd = w.fwd;

  const auto x = random3(2, 6, 4, 13);
  Graph<double> g;
  const Var xv = g.constant(x);
  const Var y = mamba::bidirectional_mamba(g, xv, w);
  const Var yr =
      mamba::bidirectional_mamba(g, flip(g, xv, 1), swapped);
  // reversing input and swapping directions reverses the sequence and swaps
  // the two channel halves, exactly
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t t = 0; t < 6; ++t)
      for (int64_t c = 0; c < 4; ++c) {
        EXPECT_EQ(g.val(yr)(b, 5 - t, c + 4), g.val(y)(b, t, c));
        EXPECT_EQ(g.val(yr)(b, 5 - t, c), g.val(y)(b, t, c + 4));
      }
}

namespace {
mamba::TfBlockConfig toy_block() {
  mamba::TfBlockConfig c;
  c.unit = toy_unit();
  return c;
}
}  // namespace

TEST(TfBlock, ZeroWeightsActAsIdentity) {
  ParamStore<double> ps;
  Rng rng(14);
  auto w = mamba::make_tf_block(ps, "tf", toy_block(), rng);
  zero_all(ps);
  const auto x = random3(4, 5, 3, 15);
  Graph<double> g;
  const Var y = mamba::tf_block(g, g.constant(x), w);
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(g.val(y)[i], x[i]);
}

TEST(TfBlock, ShapePreservedAndStackable) {
  ParamStore<double> ps;
  Rng rng(16);
  auto w1 = mamba::make_tf_block(ps, "tf1", toy_block(), rng);
  auto w2 = mamba::make_tf_block(ps, "tf2", toy_block(), rng);
  for (auto dims : {Shape{4, 3, 2}, Shape{4, 7, 5}, Shape{4, 1, 1}}) {
    Rng drng(17);
    Tensor<double> x(dims);
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = drng.normal();
    Graph<double> g;
    const Var y = mamba::tf_block(g, mamba::tf_block(g, g.constant(x), w1), w2);
    EXPECT_EQ(g.val(y).shape(), dims);
    for (int64_t i = 0; i < x.numel(); ++i)
      ASSERT_TRUE(std::isfinite(g.val(y)[i]));
  }
}

TEST(TfBlock, ToyGradientsPass) {
  ParamStore<double> ps;
  Rng rng(18);
  auto w = mamba::make_tf_block(ps, "tf", toy_block(), rng);
  const auto x = random3(4, 5, 3, 19);
  Rng prng(20);
  Tensor<double> probe({4, 5, 3});
  for (int64_t i = 0; i < probe.numel(); ++i) probe[i] = prng.normal();
  const auto rep = grad_check("tf_block_toy", ps, [&](Graph<double>& g) {
    return mean(
        g, mul(g, mamba::tf_block(g, g.constant(x), w), g.constant(probe)));
  });
  EXPECT_TRUE(rep.pass) << rep.summary();
}
