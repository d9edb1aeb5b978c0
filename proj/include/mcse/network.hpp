#pragma once

#include <optional>

#include "mcse/mamba.hpp"
#include "mcse/stft.hpp"

namespace mcse {

// Complete architectural description. The desk preset shrinks the network so
// CPU training runs finish in minutes; the paper preset matches the published
// configuration (c_mid = 64, kernel 1 input conv).
struct ModelConfig {
  int n_mics = 6;
  int c_mid = 64;
  int n_tf_blocks = 4;
  int densenet_depth = 4;
  std::vector<int> densenet_dilations = {1, 2, 4, 8};
  double mask_beta = 2.0;
  StftConfig stft;
  bool desk_scale = false;

  // sequence-model shape
  int expand = 2;
  int d_conv = 4;
  int n_state = 16;

  // wav consumption: model input slot m reads wav channel channel_map[m];
  // reference_slot is the slot whose compressed magnitude the mask scales
  int wav_channels = 6;
  std::vector<int> channel_map;  // empty -> default for (n_mics, wav_channels)
  int reference_slot = -1;       // -1 -> auto

  static ModelConfig desk(int mics = 6) {
    ModelConfig c;
    c.n_mics = mics;
    c.c_mid = 16;
    c.n_tf_blocks = 2;
    c.n_state = 8;
    c.desk_scale = true;
    return c;
  }

  static ModelConfig paper(int mics = 6) {
    ModelConfig c;
    c.n_mics = mics;
    return c;
  }

  // Default channel subsets on six-channel recordings keep the reference
  // microphone (wav channel 4) and grow outward from it.
  std::vector<int> resolved_channel_map() const {
    if (!channel_map.empty()) {
      MCSE_CHECK(int(channel_map.size()) == n_mics, ConfigError,
                 "ModelConfig: channel_map size must equal n_mics");
      return channel_map;
    }
    if (wav_channels == 6) {
      static const std::vector<std::vector<int>> presets = {
          {4}, {3, 4}, {3, 4, 5}, {0, 3, 4, 5}, {0, 1, 3, 4, 5},
          {0, 1, 2, 3, 4, 5}};
      if (n_mics >= 1 && n_mics <= 6) return presets[size_t(n_mics - 1)];
    }
    MCSE_CHECK(n_mics == wav_channels, ConfigError,
               "ModelConfig: no default channel_map for n_mics=" +
                   std::to_string(n_mics) + " on " +
                   std::to_string(wav_channels) + "-channel input");
    std::vector<int> id(size_t(n_mics), 0);
    for (int i = 0; i < n_mics; ++i) id[size_t(i)] = i;
    return id;
  }

  int resolved_reference_slot() const {
    if (reference_slot >= 0) {
      MCSE_CHECK(reference_slot < n_mics, ConfigError,
                 "ModelConfig: reference_slot out of range");
      return reference_slot;
    }
    const auto map = resolved_channel_map();
    for (size_t i = 0; i < map.size(); ++i)
      if (map[i] == 4 && wav_channels == 6) return int(i);
    return 0;
  }

  void validate() const {
    MCSE_CHECK(n_mics >= 1, ConfigError, "ModelConfig: n_mics must be >= 1");
    MCSE_CHECK(c_mid >= 1 && n_tf_blocks >= 1 && densenet_depth >= 1,
               ConfigError, "ModelConfig: counts must be >= 1");
    MCSE_CHECK(int(densenet_dilations.size()) == densenet_depth, ConfigError,
               "ModelConfig: need one dilation per densenet layer");
    MCSE_CHECK(mask_beta > 0, ConfigError, "ModelConfig: mask_beta must be > 0");
    MCSE_CHECK(wav_channels >= 1, ConfigError,
               "ModelConfig: wav_channels must be >= 1");
    for (int ch : resolved_channel_map())
      MCSE_CHECK(ch >= 0 && ch < wav_channels, ConfigError,
                 "ModelConfig: channel_map entry out of range");
    (void)resolved_reference_slot();
    stft.validate();
  }

  mamba::TfBlockConfig tf_config() const {
    mamba::TfBlockConfig t;
    t.unit.d_model = c_mid;
    t.unit.expand = expand;
    t.unit.d_conv = d_conv;
    t.unit.n_state = n_state;
    return t;
  }
};

namespace net {

template <typename T>
struct DenseNetWeights {
  std::vector<ad::Parameter<T>*> w;  // layer i: (c, c*(i+1), 3, 3)
  std::vector<ad::Parameter<T>*> b;
  std::vector<int> dilations;
};

template <typename T>
DenseNetWeights<T> make_densenet(ad::ParamStore<T>& ps,
                                 const std::string& prefix, int64_t c,
                                 int depth, const std::vector<int>& dilations,
                                 Rng& rng) {
  DenseNetWeights<T> w;
  w.dilations = dilations;
  for (int i = 0; i < depth; ++i) {
    const int64_t cin = c * (i + 1);
    auto& wp = ps.create(prefix + ".layer" + std::to_string(i) + ".weight",
                         {c, cin, 3, 3});
    ad::init_uniform_fan(wp, cin * 9, rng);
    w.w.push_back(&wp);
    w.b.push_back(
        &ps.create(prefix + ".layer" + std::to_string(i) + ".bias", {c}));
  }
  return w;
}

// Layer i convolves the concatenation of the input and all previous layer
// outputs (3x3 kernel, time dilation dilations[i], frequency dilation 1,
// padding chosen to preserve T x F). The result is the last layer's output.
template <typename T>
ad::Var dilated_densenet(ad::Graph<T>& g, ad::Var x,
                         const DenseNetWeights<T>& w) {
  using namespace ad;
  std::vector<Var> feats = {x};
  Var out = x;
  for (size_t i = 0; i < w.w.size(); ++i) {
    const Var in = feats.size() == 1 ? feats[0] : concat(g, feats, 0);
    Conv2dAttrs a;
    a.dil_h = w.dilations[i];
    a.pad_h = w.dilations[i];
    a.pad_w = 1;
    out = conv2d(g, in, g.param(*w.w[i]), g.param(*w.b[i]), a);
    feats.push_back(out);
  }
  return out;
}

template <typename T>
struct NormActWeights {
  ad::Parameter<T>* gamma = nullptr;
  ad::Parameter<T>* beta = nullptr;
  ad::Parameter<T>* slope = nullptr;
};

template <typename T>
NormActWeights<T> make_norm_act(ad::ParamStore<T>& ps,
                                const std::string& prefix, int64_t c) {
  NormActWeights<T> w;
  w.gamma = &ps.create(prefix + "_norm.gamma", {c});
  ad::init_const(*w.gamma, T(1));
  w.beta = &ps.create(prefix + "_norm.beta", {c});
  w.slope = &ps.create(prefix + "_prelu.slope", {c});
  ad::init_const(*w.slope, T(0.25));
  return w;
}

template <typename T>
ad::Var norm_act(ad::Graph<T>& g, ad::Var x, const NormActWeights<T>& w) {
  using namespace ad;
  return prelu(g, instance_norm(g, x, g.param(*w.gamma), g.param(*w.beta)),
               g.param(*w.slope), 0);
}

}  // namespace net

// Output bundle of one forward pass; tensors are (T, F).
template <typename T>
struct GeneratorOutput {
  ad::Var mask = ad::kNoVar;
  ad::Var y_cmag = ad::kNoVar;
  ad::Var y_pha = ad::kNoVar;
};

template <typename T>
struct GeneratorResult {
  Tensor<T> mask, y_cmag, y_pha;
};

// The full mask+phase generator: 1x1 input projection over the stacked
// per-microphone features, dense encoder with frequency halving, a stack of
// time/frequency blocks, and the two decoder heads.
template <typename T>
class Generator {
 public:
  explicit Generator(ModelConfig cfg, uint64_t seed = 0)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed ^ 0x6d637365ULL);
    build(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore<T>& params() { return params_; }
  const ad::ParamStore<T>& params() const { return params_; }

  // features: (2M, T, F) packed per dsp::pack_features. The reference
  // channel's compressed magnitude is sliced out of the features and scaled
  // by the decoded mask.
  GeneratorOutput<T> forward(ad::Graph<T>& g, ad::Var features) const {
    using namespace ad;
    const Tensor<T>& fv = g.val(features);
    MCSE_CHECK(fv.rank() == 3, ShapeError, "forward: features must be 2MxTxF");
    MCSE_CHECK(fv.dim(0) == 2 * cfg_.n_mics, ConfigError,
               "forward: feature channels " + std::to_string(fv.dim(0)) +
                   " do not match config (2M = " +
                   std::to_string(2 * cfg_.n_mics) + ")");
    MCSE_CHECK(fv.dim(2) == cfg_.stft.bins(), ShapeError,
               "forward: frequency bins do not match stft config");
    const int64_t Tn = fv.dim(1), F = fv.dim(2);
    const int ref = cfg_.resolved_reference_slot();
    const Var x_ref = reshape(
        g, slice(g, features, 0, 2 * ref, 1), {Tn, F});

    // input projection (the per-microphone fan-in lives entirely here)
    Var h = conv2d(g, features, g.param(*g_cnn_w_), g.param(*g_cnn_b_));

    // dense encoder
    h = conv2d(g, h, g.param(*pre_w_), g.param(*pre_b_));
    h = net::norm_act(g, h, pre_na_);
    h = net::dilated_densenet(g, h, enc_dense_);
    {
      ad::Conv2dAttrs a;
      a.stride_w = 2;
      a.pad_w = 1;
      a.dil_h = 1;
      h = conv2d(g, h, g.param(*down_w_), g.param(*down_b_), a);
    }
    h = net::norm_act(g, h, down_na_);

    for (const auto& blk : blocks_) h = mamba::tf_block(g, h, blk);

    GeneratorOutput<T> out;
    // mask decoder
    {
      Var d = net::dilated_densenet(g, h, mask_dense_);
      d = upsample(g, d, *mask_up_w_, *mask_up_b_, F);
      d = net::norm_act(g, d, mask_na_);
      d = conv2d(g, d, g.param(*mask_out_w_), g.param(*mask_out_b_));
      const Var z = reshape(g, d, {Tn, F});
      out.mask = learnable_sigmoid(g, z, g.param(*mask_alpha_),
                                   T(cfg_.mask_beta));
      out.y_cmag = mul(g, out.mask, x_ref);
    }
    // phase decoder
    {
      Var d = net::dilated_densenet(g, h, pha_dense_);
      d = upsample(g, d, *pha_up_w_, *pha_up_b_, F);
      d = net::norm_act(g, d, pha_na_);
      const Var re = reshape(
          g, conv2d(g, d, g.param(*pha_re_w_), g.param(*pha_re_b_)), {Tn, F});
      const Var im = reshape(
          g, conv2d(g, d, g.param(*pha_im_w_), g.param(*pha_im_b_)), {Tn, F});
      out.y_pha = ad::atan2(g, im, re);
    }
    return out;
  }

  GeneratorResult<T> infer(const Tensor<T>& features) const {
    ad::Graph<T> g;
    const ad::Var f = g.constant(features, "features");
    const auto out = forward(g, f);
    return {g.val(out.mask), g.val(out.y_cmag), g.val(out.y_pha)};
  }

 private:
  void build(Rng& rng) {
    using ad::init_uniform_fan;
    const int64_t C = cfg_.c_mid;
    const int64_t M2 = 2 * int64_t(cfg_.n_mics);
    const int64_t F = cfg_.stft.bins();

    g_cnn_w_ = &params_.create("encoder.g_cnn.weight", {C, M2, 1, 1});
    init_uniform_fan(*g_cnn_w_, M2, rng);
    g_cnn_b_ = &params_.create("encoder.g_cnn.bias", {C});
    pre_w_ = &params_.create("encoder.pre_conv.weight", {C, C, 1, 1});
    init_uniform_fan(*pre_w_, C, rng);
    pre_b_ = &params_.create("encoder.pre_conv.bias", {C});
    pre_na_ = net::make_norm_act(params_, "encoder.pre", C);
    enc_dense_ = net::make_densenet(params_, "encoder.dense", C,
                                    cfg_.densenet_depth,
                                    cfg_.densenet_dilations, rng);
    down_w_ = &params_.create("encoder.down_conv.weight", {C, C, 1, 3});
    init_uniform_fan(*down_w_, C * 3, rng);
    down_b_ = &params_.create("encoder.down_conv.bias", {C});
    down_na_ = net::make_norm_act(params_, "encoder.down", C);

    for (int i = 0; i < cfg_.n_tf_blocks; ++i)
      blocks_.push_back(mamba::make_tf_block(
          params_, "tf" + std::to_string(i), cfg_.tf_config(), rng));

    mask_dense_ = net::make_densenet(params_, "mask_dec.dense", C,
                                     cfg_.densenet_depth,
                                     cfg_.densenet_dilations, rng);
    mask_up_w_ = &params_.create("mask_dec.up_conv.weight", {C, C, 1, 3});
    init_uniform_fan(*mask_up_w_, C * 3, rng);
    mask_up_b_ = &params_.create("mask_dec.up_conv.bias", {C});
    mask_na_ = net::make_norm_act(params_, "mask_dec.up", C);
    mask_out_w_ = &params_.create("mask_dec.out_conv.weight", {1, C, 1, 1});
    init_uniform_fan(*mask_out_w_, C, rng);
    mask_out_b_ = &params_.create("mask_dec.out_conv.bias", {1});
    mask_alpha_ = &params_.create("mask_dec.lsigmoid.alpha", {F});
    ad::init_const(*mask_alpha_, T(1));

    pha_dense_ = net::make_densenet(params_, "phase_dec.dense", C,
                                    cfg_.densenet_depth,
                                    cfg_.densenet_dilations, rng);
    pha_up_w_ = &params_.create("phase_dec.up_conv.weight", {C, C, 1, 3});
    init_uniform_fan(*pha_up_w_, C * 3, rng);
    pha_up_b_ = &params_.create("phase_dec.up_conv.bias", {C});
    pha_na_ = net::make_norm_act(params_, "phase_dec.up", C);
    pha_re_w_ = &params_.create("phase_dec.real_conv.weight", {1, C, 1, 1});
    init_uniform_fan(*pha_re_w_, C, rng);
    pha_re_b_ = &params_.create("phase_dec.real_conv.bias", {1});
    pha_im_w_ = &params_.create("phase_dec.imag_conv.weight", {1, C, 1, 1});
    init_uniform_fan(*pha_im_w_, C, rng);
    pha_im_b_ = &params_.create("phase_dec.imag_conv.bias", {1});
  }

  // stride-2 transposed conv along frequency, cropped back to `target` bins
  ad::Var upsample(ad::Graph<T>& g, ad::Var x, ad::Parameter<T>& w,
                   ad::Parameter<T>& b, int64_t target) const {
    const int64_t Fp = g.val(x).dim(2);
    const int64_t full = (Fp - 1) * 2 + 3;
    const int64_t crop = full - target;
    MCSE_CHECK(crop >= 0, ShapeError, "upsample: target wider than output");
    ad::ConvT2dAttrs a;
    a.stride_w = 2;
    a.crop_w0 = int(crop / 2);
    a.crop_w1 = int(crop - crop / 2);
    return conv2d_transpose(g, x, g.param(w), g.param(b), a);
  }

  ModelConfig cfg_;
  ad::ParamStore<T> params_;

  ad::Parameter<T>*g_cnn_w_, *g_cnn_b_, *pre_w_, *pre_b_, *down_w_, *down_b_;
  net::NormActWeights<T> pre_na_, down_na_;
  net::DenseNetWeights<T> enc_dense_, mask_dense_, pha_dense_;
  std::vector<mamba::TfBlockWeights<T>> blocks_;
  ad::Parameter<T>*mask_up_w_, *mask_up_b_, *mask_out_w_, *mask_out_b_,
      *mask_alpha_;
  net::NormActWeights<T> mask_na_, pha_na_;
  ad::Parameter<T>*pha_up_w_, *pha_up_b_, *pha_re_w_, *pha_re_b_, *pha_im_w_,
      *pha_im_b_;
};

// Parameter accounting, grouped by top-level module path.
struct ParamCountReport {
  std::vector<std::pair<std::string, int64_t>> by_module;
  int64_t total = 0;
};

inline ParamCountReport param_count(const ModelConfig& cfg) {
  Generator<float> gen(cfg, 0);
  ParamCountReport rep;
  for (size_t i = 0; i < gen.params().size(); ++i) {
    const auto& p = gen.params().at(i);
    const std::string mod = p.name.substr(0, p.name.find('.'));
    if (rep.by_module.empty() || rep.by_module.back().first != mod)
      rep.by_module.push_back({mod, 0});
    rep.by_module.back().second += p.numel();
    rep.total += p.numel();
  }
  return rep;
}

}  // namespace mcse
