#pragma once

#include "mcse/ssm.hpp"

namespace mcse {
namespace mamba {

struct MambaUnitConfig {
  int d_model = 64;
  int expand = 2;
  int d_conv = 4;
  int n_state = 16;

  int d_inner() const { return expand * d_model; }
};

template <typename T>
struct MambaUnitWeights {
  MambaUnitConfig cfg;
  ad::Parameter<T>* in_w = nullptr;    // (2*d_inner, d_model)
  ad::Parameter<T>* in_b = nullptr;    // (2*d_inner)
  ad::Parameter<T>* conv_w = nullptr;  // (d_inner, d_conv)
  ad::Parameter<T>* conv_b = nullptr;  // (d_inner)
  ssm::S6Weights<T> s6;
  ad::Parameter<T>* out_w = nullptr;   // (d_model, d_inner)
  ad::Parameter<T>* out_b = nullptr;   // (d_model)
};

template <typename T>
MambaUnitWeights<T> make_mamba_unit(ad::ParamStore<T>& ps,
                                    const std::string& prefix,
                                    const MambaUnitConfig& cfg, Rng& rng) {
  const int64_t dm = cfg.d_model, di = cfg.d_inner();
  MambaUnitWeights<T> w;
  w.cfg = cfg;
  w.in_w = &ps.create(prefix + ".in_proj.weight", {2 * di, dm});
  ad::init_uniform_fan(*w.in_w, dm, rng);
  w.in_b = &ps.create(prefix + ".in_proj.bias", {2 * di});
  w.conv_w = &ps.create(prefix + ".conv.weight", {di, cfg.d_conv});
  ad::init_uniform_fan(*w.conv_w, cfg.d_conv, rng);
  w.conv_b = &ps.create(prefix + ".conv.bias", {di});
  ssm::S6Config scfg;
  scfg.d_inner = int(di);
  scfg.n_state = cfg.n_state;
  w.s6 = ssm::make_s6(ps, prefix + ".s6", scfg, rng);
  w.out_w = &ps.create(prefix + ".out_proj.weight", {dm, di});
  ad::init_uniform_fan(*w.out_w, di, rng);
  w.out_b = &ps.create(prefix + ".out_proj.bias", {dm});
  return w;
}

// Gated unit: in-projection to (h, z), causal depthwise conv + SiLU on h,
// the S6 scan, then y = s6(h) * SiLU(z) and an out-projection.
// x is (B, L, d_model).
template <typename T>
ad::Var mamba_unit(ad::Graph<T>& g, ad::Var x, const MambaUnitWeights<T>& w) {
  using namespace ad;
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(xv.rank() == 3 && xv.dim(2) == w.cfg.d_model, ShapeError,
             "mamba_unit: expected (B,L," + std::to_string(w.cfg.d_model) +
                 "), got " + shape_str(xv.shape()));
  const int64_t di = w.cfg.d_inner();
  const Var hz = dense(g, x, g.param(*w.in_w), g.param(*w.in_b));
  Var h = slice(g, hz, 2, 0, di);
  const Var z = slice(g, hz, 2, di, di);
  h = conv1d_depthwise(g, h, g.param(*w.conv_w), g.param(*w.conv_b));
  h = silu(g, h);
  h = ssm::s6_forward(g, h, w.s6);
  const Var gated = mul(g, h, silu(g, z));
  return dense(g, gated, g.param(*w.out_w), g.param(*w.out_b));
}

template <typename T>
struct BiMambaWeights {
  MambaUnitWeights<T> fwd;
  MambaUnitWeights<T> bwd;
};

template <typename T>
BiMambaWeights<T> make_bi_mamba(ad::ParamStore<T>& ps,
                                const std::string& prefix,
                                const MambaUnitConfig& cfg, Rng& rng) {
  BiMambaWeights<T> w;
  w.fwd = make_mamba_unit(ps, prefix + ".fwd", cfg, rng);
  w.bwd = make_mamba_unit(ps, prefix + ".bwd", cfg, rng);
  return w;
}

// concat(fwd(x), flip(bwd(flip(x)))) along channels: (B,L,C) -> (B,L,2C).
// The two directions have independent weights.
template <typename T>
ad::Var bidirectional_mamba(ad::Graph<T>& g, ad::Var x,
                            const BiMambaWeights<T>& w) {
  using namespace ad;
  const Var f = mamba_unit(g, x, w.fwd);
  const Var b = flip(g, mamba_unit(g, flip(g, x, 1), w.bwd), 1);
  return concat(g, {f, b}, 2);
}

struct TfBlockConfig {
  MambaUnitConfig unit;
  int tconv_kernel = 4;
};

template <typename T>
struct TfBlockWeights {
  TfBlockConfig cfg;
  BiMambaWeights<T> time;
  ad::Parameter<T>* time_tconv_w = nullptr;  // (2C, C, k)
  ad::Parameter<T>* time_tconv_b = nullptr;  // (C)
  BiMambaWeights<T> freq;
  ad::Parameter<T>* freq_tconv_w = nullptr;
  ad::Parameter<T>* freq_tconv_b = nullptr;
};

template <typename T>
TfBlockWeights<T> make_tf_block(ad::ParamStore<T>& ps,
                                const std::string& prefix,
                                const TfBlockConfig& cfg, Rng& rng) {
  const int64_t C = cfg.unit.d_model, k = cfg.tconv_kernel;
  TfBlockWeights<T> w;
  w.cfg = cfg;
  w.time = make_bi_mamba(ps, prefix + ".time", cfg.unit, rng);
  w.time_tconv_w = &ps.create(prefix + ".time.tconv.weight", {2 * C, C, k});
  ad::init_uniform_fan(*w.time_tconv_w, 2 * C * k, rng);
  w.time_tconv_b = &ps.create(prefix + ".time.tconv.bias", {C});
  w.freq = make_bi_mamba(ps, prefix + ".freq", cfg.unit, rng);
  w.freq_tconv_w = &ps.create(prefix + ".freq.tconv.weight", {2 * C, C, k});
  ad::init_uniform_fan(*w.freq_tconv_w, 2 * C * k, rng);
  w.freq_tconv_b = &ps.create(prefix + ".freq.tconv.bias", {C});
  return w;
}

namespace detail {

// bidirectional pass + stride-1 transposed conv (2C -> C, length
// preserved by cropping (k-1)/2 left and the rest right) + residual
template <typename T>
ad::Var directional_pass(ad::Graph<T>& g, ad::Var seq,
                         const BiMambaWeights<T>& bi,
                         ad::Parameter<T>& tw, ad::Parameter<T>& tb, int k) {
  using namespace ad;
  Var h = bidirectional_mamba(g, seq, bi);
  ConvT1dAttrs at;
  at.crop_left = (k - 1) / 2;
  at.crop_right = (k - 1) - at.crop_left;
  h = conv1d_transpose(g, h, g.param(tw), g.param(tb), at);
  return add(g, seq, h);
}

}  // namespace detail

// One time/frequency block over x (C, T, F'): a bidirectional pass along
// time (sequences are the F' frequency columns), then the symmetric pass
// along frequency. Shape-preserving, so blocks stack without adapters.
template <typename T>
ad::Var tf_block(ad::Graph<T>& g, ad::Var x, const TfBlockWeights<T>& w) {
  using namespace ad;
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(xv.rank() == 3 && xv.dim(0) == w.cfg.unit.d_model, ShapeError,
             "tf_block: expected (C,T,F) with C == d_model");
  const int k = w.cfg.tconv_kernel;

  // time axis: (C,T,F) -> (F,T,C)
  Var seq = permute(g, x, {2, 1, 0});
  seq = detail::directional_pass(g, seq, w.time, *w.time_tconv_w,
                                 *w.time_tconv_b, k);
  const Var x1 = permute(g, seq, {2, 1, 0});

  // frequency axis: (C,T,F) -> (T,F,C)
  Var seqf = permute(g, x1, {1, 2, 0});
  seqf = detail::directional_pass(g, seqf, w.freq, *w.freq_tconv_w,
                                  *w.freq_tconv_b, k);
  return permute(g, seqf, {2, 0, 1});
}

}  // namespace mamba
}  // namespace mcse
