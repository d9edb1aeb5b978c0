#include <gtest/gtest.h>

#include "mcse/gradcheck_suite.hpp"
#include "mcse/network.hpp"
#include "oracles.hpp"

using namespace mcse;
using namespace mcse::ad;

namespace {

ModelConfig tiny_cfg(int mics = 2) {
  ModelConfig cfg = ad::suite::toy_model_config();
  cfg.n_mics = mics;
  cfg.wav_channels = mics;
  return cfg;
}

Tensor<float> random_features(const ModelConfig& cfg, int64_t frames,
                              uint64_t seed) {
  Rng rng(seed);
  Tensor<float> f({2 * cfg.n_mics, frames, cfg.stft.bins()});
  for (int64_t i = 0; i < f.numel(); ++i) {
    // even channels are compressed magnitudes (>= 0), odd ones phases
    f[i] = float(rng.uniform(0, 1));
  }
  return f;
}

}  // namespace

TEST(InputProj, ParameterCountFollowsThePaperFormula) {
  // weights-only kernel count = 2M * c_mid; one more mic adds 2 * c_mid
  ModelConfig cfg = ModelConfig::paper(1);
  auto gen = Generator<float>(cfg, 0);
  const auto* w = gen.params().find("encoder.g_cnn.weight");
  const auto* b = gen.params().find("encoder.g_cnn.bias");
  ASSERT_NE(w, nullptr);
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(w->numel(), 2 * 1 * 64);
  EXPECT_EQ(b->numel(), 64);
  EXPECT_EQ(w->numel() + b->numel(), 192);  // M=1, c_mid=64
}

TEST(ParamCount, PerMicDeltaIs128AtCmid64) {
  for (int m = 1; m <= 5; ++m) {
    ModelConfig a = ModelConfig::paper(m);
    ModelConfig b = ModelConfig::paper(m + 1);
    EXPECT_EQ(param_count(b).total - param_count(a).total, 128)
        << "M=" << m;
  }
}

TEST(ParamCount, PerMicDeltaIsTwoCmidForAnyWidth) {
  for (int c_mid : {8, 16, 32}) {
    ModelConfig a = tiny_cfg(2);
    ModelConfig b = tiny_cfg(3);
    a.c_mid = b.c_mid = c_mid;
    EXPECT_EQ(param_count(b).total - param_count(a).total, 2 * c_mid)
        << "c_mid=" << c_mid;
  }
}

TEST(ParamCount, PaperScaleTotalIsReported) {
  // the published six-mic model lists 2.3 M parameters; our reconstruction
  // of the unpublished internals lands in the same ballpark and is reported,
  // not asserted equal
  const auto rep = param_count(ModelConfig::paper(6));
  EXPECT_GT(rep.total, 1'000'000);
  EXPECT_LT(rep.total, 4'000'000);
  std::cout << "paper-scale total parameters: " << rep.total << "\n";
}

TEST(InputProj, IdentityLikeInitCopiesReferenceChannels) {
  ModelConfig cfg = tiny_cfg(2);
  Generator<float> gen(cfg, 1);
  // first two output channels copy input channels 0 and 1, rest zero
  auto& w = *gen.params().find("encoder.g_cnn.weight");
  auto& b = *gen.params().find("encoder.g_cnn.bias");
  w.value.fill(0.0f);
  b.value.fill(0.0f);
  w.value(0, 0, 0, 0) = 1.0f;
  w.value(1, 1, 0, 0) = 1.0f;

  const auto feats = random_features(cfg, 4, 2);
  Graph<float> g;
  const Var fv = g.constant(feats);
  const Var h = conv2d(g, fv, g.param(w), g.param(b));
  const int64_t tf = 4 * cfg.stft.bins();
  for (int64_t i = 0; i < tf; ++i) {
    EXPECT_EQ(g.val(h)[i], feats[i]);            // channel 0 = cmag(mic 0)
    EXPECT_EQ(g.val(h)[tf + i], feats[tf + i]);  // channel 1 = pha(mic 0)
  }
  for (int64_t c = 2; c < cfg.c_mid; ++c)
    for (int64_t i = 0; i < tf; ++i) EXPECT_EQ(g.val(h)[c * tf + i], 0.0f);
}

TEST(DenseEncoder, HalvesFrequencyAxis) {
  // F = 201 -> F' = 101 with the default analysis config
  ModelConfig cfg = ModelConfig::desk(2);
  cfg.wav_channels = 2;
  cfg.c_mid = 4;
  cfg.n_tf_blocks = 1;
  cfg.n_state = 2;
  cfg.densenet_depth = 2;
  cfg.densenet_dilations = {1, 2};
  Generator<float> gen(cfg, 3);
  const auto feats = random_features(cfg, 3, 4);
  const auto res = gen.infer(feats);
  EXPECT_EQ(res.y_cmag.shape(), (Shape{3, 201}));
  // the halving itself: floor((201 - 1) / 2) + 1
  EXPECT_EQ((201 + 2 * 1 - 3) / 2 + 1, 101);
}

TEST(DilatedDensenet, DepthOneIsASinglePaddedConv) {
  ParamStore<float> ps;
  Rng rng(5);
  auto w = net::make_densenet(ps, "d", 3, 1, {1}, rng);
  Tensor<float> x({3, 6, 7});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(rng.normal());
  Graph<float> g;
  const Var xv = g.constant(x);
  const Var y = net::dilated_densenet(g, xv, w);
  EXPECT_EQ(g.val(y).shape(), x.shape());
  Conv2dAttrs a;
  a.pad_h = 1;
  a.pad_w = 1;
  const Var direct = conv2d(g, xv, g.param(*w.w[0]), g.param(*w.b[0]), a);
  for (int64_t i = 0; i < x.numel(); ++i)
    EXPECT_EQ(g.val(y)[i], g.val(direct)[i]);
}

TEST(DilatedDensenet, ImpulseStaysInsideThe31FrameReceptiveField) {
  // depth 4, time dilations 1,2,4,8: receptive field 1 + 2*(1+2+4+8) = 31
  ParamStore<float> ps;
  Rng rng(6);
  auto w = net::make_densenet(ps, "d", 2, 4, {1, 2, 4, 8}, rng);
  const int64_t T = 80, F = 5, t0 = 40;
  Tensor<float> base({2, T, F});
  for (int64_t i = 0; i < base.numel(); ++i) base[i] = float(rng.normal());
  Tensor<float> bump = base;
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t f = 0; f < F; ++f) bump(c, t0, f) += 1.0f;

  Graph<float> g;
  const Var y0 = net::dilated_densenet(g, g.constant(base), w);
  const Var y1 = net::dilated_densenet(g, g.constant(bump), w);
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t t = 0; t < T; ++t) {
      double diff = 0;
      for (int64_t f = 0; f < F; ++f)
        diff += std::abs(double(g.val(y1)(c, t, f) - g.val(y0)(c, t, f)));
      if (std::abs(t - t0) <= 15)
        continue;  // inside the field, difference allowed
      EXPECT_EQ(diff, 0.0) << "leak at t=" << t;
    }
  // and the field is actually used end to end
  double at_edge = 0;
  for (int64_t f = 0; f < F; ++f)
    at_edge += std::abs(
        double(g.val(y1)(0, t0 + 15, f) - g.val(y0)(0, t0 + 15, f)));
  EXPECT_GT(at_edge, 0.0);
}

TEST(MaskDecoder, RangeAndLearnableSigmoidMidpoint) {
  ModelConfig cfg = tiny_cfg(2);
  Generator<float> gen(cfg, 7);
  const auto feats = random_features(cfg, 5, 8);
  const auto res = gen.infer(feats);
  for (int64_t i = 0; i < res.mask.numel(); ++i) {
    EXPECT_GT(res.mask[i], 0.0f);
    EXPECT_LT(res.mask[i], float(cfg.mask_beta));
  }
  // alpha = 0 everywhere -> mask = beta / 2
  gen.params().find("mask_dec.lsigmoid.alpha")->value.fill(0.0f);
  const auto res0 = gen.infer(feats);
  for (int64_t i = 0; i < res0.mask.numel(); ++i)
    EXPECT_FLOAT_EQ(res0.mask[i], float(cfg.mask_beta) / 2.0f);
}

TEST(MaskDecoder, ZeroReferenceMagnitudeForcesZeroOutput) {
  ModelConfig cfg = tiny_cfg(2);
  Generator<float> gen(cfg, 9);
  auto feats = random_features(cfg, 5, 10);
  // zero the reference slot's cmag channel (slot 0 for non-6ch input)
  const int ref = cfg.resolved_reference_slot();
  const int64_t tf = 5 * cfg.stft.bins();
  for (int64_t i = 0; i < tf; ++i) feats[2 * ref * tf + i] = 0.0f;
  const auto res = gen.infer(feats);
  for (int64_t i = 0; i < res.y_cmag.numel(); ++i)
    EXPECT_EQ(res.y_cmag[i], 0.0f);
}

TEST(PhaseDecoder, HeadConventionsAndRange) {
  ModelConfig cfg = tiny_cfg(2);
  Generator<float> gen(cfg, 11);
  // force the real head to 1 and imag head to 0 -> phase identically 0
  auto zero_head = [&](const std::string& prefix, float bias) {
    gen.params().find(prefix + ".weight")->value.fill(0.0f);
    gen.params().find(prefix + ".bias")->value.fill(bias);
  };
  zero_head("phase_dec.real_conv", 1.0f);
  zero_head("phase_dec.imag_conv", 0.0f);
  const auto feats = random_features(cfg, 5, 12);
  auto res = gen.infer(feats);
  for (int64_t i = 0; i < res.y_pha.numel(); ++i)
    EXPECT_EQ(res.y_pha[i], 0.0f);

  // (r, i) = (0, 1) -> pi/2
  zero_head("phase_dec.real_conv", 0.0f);
  zero_head("phase_dec.imag_conv", 1.0f);
  res = gen.infer(feats);
  for (int64_t i = 0; i < res.y_pha.numel(); ++i)
    EXPECT_FLOAT_EQ(res.y_pha[i], float(kPi) / 2.0f);
}

TEST(ModelForward, OutputContractsOverRandomInputs) {
  ModelConfig cfg = tiny_cfg(3);
  Generator<float> gen(cfg, 13);
  Rng rng(14);
  for (int rep = 0; rep < 5; ++rep) {
    const int64_t frames = 2 + int64_t(rng.uniform_int(6));
    const auto feats = random_features(cfg, frames, 100 + rep);
    const auto res = gen.infer(feats);
    EXPECT_EQ(res.y_cmag.shape(), (Shape{frames, cfg.stft.bins()}));
    EXPECT_EQ(res.y_pha.shape(), (Shape{frames, cfg.stft.bins()}));
    const int ref = cfg.resolved_reference_slot();
    const int64_t tf = frames * cfg.stft.bins();
    for (int64_t i = 0; i < tf; ++i) {
      EXPECT_GE(res.y_cmag[i], 0.0f);
      EXPECT_GT(res.y_pha[i], -float(kPi));
      EXPECT_LE(res.y_pha[i], float(kPi));
      // y_cmag = mask * x_cmag_ref, elementwise exact
      EXPECT_EQ(res.y_cmag[i], res.mask[i] * feats[2 * ref * tf + i]);
    }
  }
}

TEST(ModelForward, NonReferenceChannelsNeverTouchTheMaskInput) {
  ModelConfig cfg = tiny_cfg(3);
  Generator<float> gen(cfg, 15);
  auto feats = random_features(cfg, 4, 16);
  const auto res1 = gen.infer(feats);
  // perturb every non-reference channel
  const int ref = cfg.resolved_reference_slot();
  const int64_t tf = 4 * cfg.stft.bins();
  for (int m = 0; m < cfg.n_mics; ++m) {
    if (m == ref) continue;
    for (int64_t i = 0; i < 2 * tf; ++i) feats[2 * m * tf + i] += 0.37f;
  }
  const auto res2 = gen.infer(feats);
  // mask changes (features changed), but the multiplicand is untouched:
  // y_cmag / mask must recover the same reference cmag
  for (int64_t i = 0; i < tf; ++i) {
    EXPECT_EQ(res2.y_cmag[i], res2.mask[i] * feats[2 * ref * tf + i]);
    EXPECT_EQ(res1.y_cmag[i], res1.mask[i] * feats[2 * ref * tf + i]);
  }
}

TEST(ModelForward, MicCountMismatchIsAConfigError) {
  ModelConfig cfg = tiny_cfg(2);
  Generator<float> gen(cfg, 17);
  Tensor<float> feats({6, 5, cfg.stft.bins()});  // 3 mics against a 2-mic net
  EXPECT_THROW(gen.infer(feats), ConfigError);
}

TEST(ModelForward, DeterministicBitIdenticalRepeats) {
  ModelConfig cfg = tiny_cfg(2);
  Generator<float> gen(cfg, 19);
  const auto feats = random_features(cfg, 6, 20);
  const auto a = gen.infer(feats);
  const auto b = gen.infer(feats);
  for (int64_t i = 0; i < a.y_cmag.numel(); ++i) {
    EXPECT_EQ(a.y_cmag[i], b.y_cmag[i]);
    EXPECT_EQ(a.y_pha[i], b.y_pha[i]);
    EXPECT_EQ(a.mask[i], b.mask[i]);
  }
}

TEST(ModelConfig, DefaultChannelMapsKeepTheReferenceMic) {
  // six-channel recordings: subsets grow around wav channel 4 (the fifth
  // microphone), which is always the reference
  const std::vector<std::vector<int>> expect = {
      {4}, {3, 4}, {3, 4, 5}, {0, 3, 4, 5}, {0, 1, 3, 4, 5},
      {0, 1, 2, 3, 4, 5}};
  for (int m = 1; m <= 6; ++m) {
    ModelConfig cfg = ModelConfig::desk(m);
    EXPECT_EQ(cfg.resolved_channel_map(), expect[size_t(m - 1)]);
    EXPECT_EQ(cfg.resolved_channel_map()[size_t(cfg.resolved_reference_slot())],
              4);
  }
  EXPECT_EQ(ModelConfig::desk(6).resolved_reference_slot(), 4);
}

TEST(ModelConfig, ValidationCatchesBadSettings) {
  ModelConfig cfg = tiny_cfg(2);
  cfg.densenet_dilations = {1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_cfg(2);
  cfg.channel_map = {0, 5};  // out of range for 2 wav channels
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_cfg(2);
  cfg.n_mics = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
