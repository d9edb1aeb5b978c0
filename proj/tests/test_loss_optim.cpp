#include <gtest/gtest.h>

#include "mcse/loss.hpp"
#include "mcse/optimizer.hpp"
#include "oracles.hpp"

using namespace mcse;
using namespace mcse::ad;

namespace {

Tensor<float> random_phase(int64_t t, int64_t f, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> p({t, f});
  for (int64_t i = 0; i < p.numel(); ++i)
    p[i] = float(rng.uniform(-kPi, kPi));
  return p;
}

double phase_loss_oracle(const Tensor<float>& est, const Tensor<float>& ref) {
  // direct scalar evaluation of the three anti-wrapped terms
  const int64_t T = est.dim(0), F = est.dim(1);
  auto term = [](double d) { return 1.0 - std::cos(d); };
  double ip = 0;
  for (int64_t i = 0; i < est.numel(); ++i) ip += term(est[i] - ref[i]);
  ip /= double(est.numel());
  double gd = 0;
  for (int64_t t = 0; t < T; ++t)
    for (int64_t f = 0; f + 1 < F; ++f)
      gd += term((est(t, f + 1) - est(t, f)) - (ref(t, f + 1) - ref(t, f)));
  gd /= double(T * (F - 1));
  double iaf = 0;
  for (int64_t t = 0; t + 1 < T; ++t)
    for (int64_t f = 0; f < F; ++f)
      iaf += term((est(t + 1, f) - est(t, f)) - (ref(t + 1, f) - ref(t, f)));
  iaf /= double((T - 1) * F);
  return ip + gd + iaf;
}

}  // namespace

TEST(PhaseLoss, ZeroForIdenticalPhases) {
  const auto p = random_phase(4, 6, 1);
  Graph<float> g;
  const Var l = loss::phase_loss(g, g.constant(p), g.constant(p));
  EXPECT_NEAR(g.val(l)[0], 0.0f, 1e-7);
}

TEST(PhaseLoss, InvariantUnderFullTurnOffset) {
  const auto p = random_phase(4, 6, 2);
  Tensor<float> shifted(p.shape());
  for (int64_t i = 0; i < p.numel(); ++i)
    shifted[i] = p[i] + float(2.0 * kPi);
  Graph<float> g;
  const Var l =
      loss::phase_loss(g, g.constant(shifted), g.constant(p));
  EXPECT_NEAR(g.val(l)[0], 0.0f, 1e-5);
}

TEST(PhaseLoss, MatchesDirectFormulaOracle) {
  const auto est = random_phase(5, 7, 3);
  const auto ref = random_phase(5, 7, 4);
  Graph<float> g;
  const Var l = loss::phase_loss(g, g.constant(est), g.constant(ref));
  EXPECT_NEAR(g.val(l)[0], phase_loss_oracle(est, ref), 1e-5);
}

namespace {

struct LossFixture {
  StftConfig stft;
  SpectroPair<float> clean;
  std::vector<float> wave;
  GeneratorOutput<float> out;
  Graph<float> g;

  explicit LossFixture(uint64_t seed, bool perfect) {
    stft.window_len = 16;
    stft.hop = 4;
    stft.fft_len = 16;
    Rng rng(seed);
    wave.resize(48);
    for (auto& v : wave) v = float(rng.uniform(-0.5, 0.5));
    clean = dsp::analyze(wave, stft);
    Tensor<float> cmag = clean.cmag, pha = clean.pha;
    if (!perfect) {
      for (int64_t i = 0; i < cmag.numel(); ++i) {
        cmag[i] = std::max(0.0f, cmag[i] + float(rng.uniform(-0.2, 0.2)));
        pha[i] = float(rng.uniform(-kPi, kPi));
      }
    }
    out.y_cmag = g.constant(cmag);
    out.y_pha = g.constant(pha);
    out.mask = g.constant(Tensor<float>({1}));
  }
};

}  // namespace

TEST(TotalLoss, PerfectOutputGivesZeroEverywhere) {
  LossFixture fx(5, /*perfect=*/true);
  TrainConfig tc;
  const auto tgt = loss::make_targets(fx.g, fx.clean, fx.wave);
  const auto L = loss::total_loss(fx.g, fx.out, tgt, tc, fx.stft);
  EXPECT_NEAR(fx.g.val(L.mag)[0], 0.0f, 1e-9);
  EXPECT_NEAR(fx.g.val(L.phase)[0], 0.0f, 1e-6);
  EXPECT_NEAR(fx.g.val(L.cplx)[0], 0.0f, 1e-9);
  EXPECT_NEAR(fx.g.val(L.time)[0], 0.0f, 2e-4);  // istft round trip in f32
  EXPECT_NEAR(fx.g.val(L.total)[0], 0.0f, 2e-4);
}

TEST(TotalLoss, MagOnlyWeightsReduceToMse) {
  LossFixture fx(6, /*perfect=*/false);
  TrainConfig tc;
  tc.w_mag = 1.0;
  tc.w_phase = tc.w_complex = tc.w_time = 0.0;
  const auto tgt = loss::make_targets(fx.g, fx.clean, fx.wave);
  const auto L = loss::total_loss(fx.g, fx.out, tgt, tc, fx.stft);
  EXPECT_FLOAT_EQ(fx.g.val(L.total)[0], fx.g.val(L.mag)[0]);
  // and mag is exactly the mse of compressed magnitudes
  double mse = 0;
  const auto& est = fx.g.val(fx.out.y_cmag);
  for (int64_t i = 0; i < est.numel(); ++i) {
    const double d = double(est[i]) - double(fx.clean.cmag[i]);
    mse += d * d;
  }
  mse /= double(est.numel());
  EXPECT_NEAR(fx.g.val(L.mag)[0], mse, 1e-6);
}

TEST(TotalLoss, WeightedSumMatchesComponentOracle) {
  LossFixture fx(7, /*perfect=*/false);
  TrainConfig tc;  // defaults 1.0 / 0.3 / 0.1 / 0.2
  const auto tgt = loss::make_targets(fx.g, fx.clean, fx.wave);
  const auto L = loss::total_loss(fx.g, fx.out, tgt, tc, fx.stft);
  const double expect = tc.w_mag * fx.g.val(L.mag)[0] +
                        tc.w_phase * fx.g.val(L.phase)[0] +
                        tc.w_complex * fx.g.val(L.cplx)[0] +
                        tc.w_time * fx.g.val(L.time)[0];
  EXPECT_NEAR(fx.g.val(L.total)[0], expect, 1e-6);
}

TEST(AdamW, MatchesScalarReferenceImplementation) {
  // three-parameter toy problem, loss = mean((w - t)^2)
  TrainConfig tc;
  tc.weight_decay = 0.01;
  ParamStore<float> ps;
  auto& w = ps.create("w", {3});
  w.value = Tensor<float>({3}, {1.0f, -2.0f, 0.5f});
  const Tensor<float> target({3}, {0.2f, 0.4f, -0.1f});
  AdamW<float> opt(ps, tc);

  // independent scalar reference state
  double rw[3] = {1.0, -2.0, 0.5}, rm[3] = {0, 0, 0}, rv[3] = {0, 0, 0};

  const double lr = 5e-4;
  for (int step = 1; step <= 25; ++step) {
    opt.zero_grad();
    Graph<float> g;
    const Var d = sub(g, g.param(w), g.constant(target));
    const Var l = mean(g, mul(g, d, d));
    g.backward(l);
    opt.step(lr);

    for (int i = 0; i < 3; ++i) {
      const double grad = 2.0 * (rw[i] - double(target[i])) / 3.0;
      rw[i] *= 1.0 - lr * tc.weight_decay;
      rm[i] = tc.beta1 * rm[i] + (1 - tc.beta1) * grad;
      rv[i] = tc.beta2 * rv[i] + (1 - tc.beta2) * grad * grad;
      const double mhat = rm[i] / (1 - std::pow(tc.beta1, step));
      const double vhat = rv[i] / (1 - std::pow(tc.beta2, step));
      rw[i] -= lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
      EXPECT_NEAR(w.value[i], rw[i], 1e-6) << "step " << step << " i " << i;
    }
  }
}

TEST(AdamW, LearningRateScheduleIsExact) {
  TrainConfig tc;
  EXPECT_DOUBLE_EQ(tc.lr_at_epoch(0), 5e-4);
  EXPECT_DOUBLE_EQ(tc.lr_at_epoch(10), 5e-4 * std::pow(0.99, 10));
  EXPECT_DOUBLE_EQ(tc.lr_at_epoch(49), 5e-4 * std::pow(0.99, 49));
}

TEST(AdamW, GradClippingBoundsTheGlobalNorm) {
  TrainConfig tc;
  ParamStore<float> ps;
  auto& w = ps.create("w", {4});
  w.grad = Tensor<float>({4}, {3.0f, 4.0f, 0.0f, 0.0f});  // norm 5
  AdamW<float> opt(ps, tc);
  const double before = opt.clip_grad_norm(1.0);
  EXPECT_NEAR(before, 5.0, 1e-6);
  double norm = 0;
  for (int i = 0; i < 4; ++i) norm += w.grad[i] * w.grad[i];
  EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-6);
}

TEST(TrainConfig, PaperValuesAreTheDefaults) {
  TrainConfig tc;
  EXPECT_DOUBLE_EQ(tc.lr, 5e-4);
  EXPECT_DOUBLE_EQ(tc.beta1, 0.8);
  EXPECT_DOUBLE_EQ(tc.beta2, 0.99);
  EXPECT_DOUBLE_EQ(tc.lr_decay_per_epoch, 0.99);
  EXPECT_EQ(tc.epochs, 50);
  EXPECT_EQ(tc.batch_size, 1);
  EXPECT_NO_THROW(tc.validate());
  TrainConfig bad = tc;
  bad.lr = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}
