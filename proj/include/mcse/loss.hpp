#pragma once

#include "mcse/config.hpp"
#include "mcse/network.hpp"
#include "mcse/ops_spectral.hpp"

namespace mcse {

namespace loss {

namespace detail {

template <typename T>
ad::Var mse(ad::Graph<T>& g, ad::Var a, ad::Var b) {
  const ad::Var d = ad::sub(g, a, b);
  return ad::mean(g, ad::mul(g, d, d));
}

// mean(1 - cos(a - b)) over whatever the inputs are
template <typename T>
ad::Var anti_wrap(ad::Graph<T>& g, ad::Var a, ad::Var b) {
  const ad::Var m = ad::mean(g, ad::cos(g, ad::sub(g, a, b)));
  return ad::offset(g, ad::scale(g, m, T(-1)), T(1));
}

template <typename T>
ad::Var diff_along(ad::Graph<T>& g, ad::Var x, int axis) {
  const int64_t n = g.val(x).dim(axis);
  return ad::sub(g, ad::slice(g, x, axis, 1, n - 1),
                 ad::slice(g, x, axis, 0, n - 1));
}

}  // namespace detail

// Anti-wrapped phase loss: instantaneous term plus group-delay (first
// differences along frequency) and instantaneous-frequency (first
// differences along time) terms, each 1 - cos(.) averaged, equally weighted.
// Invariant under adding 2*pi to either argument.
template <typename T>
ad::Var phase_loss(ad::Graph<T>& g, ad::Var pha_est, ad::Var pha_ref) {
  MCSE_CHECK(g.val(pha_est).same_shape(g.val(pha_ref)) &&
                 g.val(pha_est).rank() == 2,
             ShapeError, "phase_loss: inputs must be TxF");
  const int64_t Tn = g.val(pha_est).dim(0), F = g.val(pha_est).dim(1);
  ad::Var total = detail::anti_wrap(g, pha_est, pha_ref);
  if (F >= 2)
    total = ad::add(g, total,
                    detail::anti_wrap(g, detail::diff_along(g, pha_est, 1),
                                      detail::diff_along(g, pha_ref, 1)));
  if (Tn >= 2)
    total = ad::add(g, total,
                    detail::anti_wrap(g, detail::diff_along(g, pha_est, 0),
                                      detail::diff_along(g, pha_ref, 0)));
  return total;
}

template <typename T>
struct CleanTargets {
  ad::Var cmag = ad::kNoVar;   // (T, F)
  ad::Var pha = ad::kNoVar;    // (T, F)
  ad::Var wave = ad::kNoVar;   // (len)
};

template <typename T>
CleanTargets<T> make_targets(ad::Graph<T>& g, const SpectroPair<T>& clean,
                             const std::vector<T>& clean_wave) {
  CleanTargets<T> t;
  t.cmag = g.constant(clean.cmag, "clean_cmag");
  t.pha = g.constant(clean.pha, "clean_pha");
  t.wave = g.constant(Tensor<T>({int64_t(clean_wave.size())}, clean_wave),
                      "clean_wave");
  return t;
}

template <typename T>
struct LossVars {
  ad::Var total = ad::kNoVar;
  ad::Var mag = ad::kNoVar;
  ad::Var phase = ad::kNoVar;
  ad::Var cplx = ad::kNoVar;
  ad::Var time = ad::kNoVar;
};

// Signal-domain objective: weighted sum of compressed-magnitude MSE, the
// anti-wrapped phase loss, MSE on the compressed complex spectrum, and
// mean-absolute-error on the resynthesized waveform.
template <typename T>
LossVars<T> total_loss(ad::Graph<T>& g, const GeneratorOutput<T>& out,
                       const CleanTargets<T>& tgt, const TrainConfig& tc,
                       const StftConfig& stft) {
  using namespace ad;
  LossVars<T> L;
  L.mag = detail::mse(g, out.y_cmag, tgt.cmag);
  L.phase = phase_loss(g, out.y_pha, tgt.pha);

  const Var cos_e = ad::cos(g, out.y_pha);
  const Var sin_e = ad::sin(g, out.y_pha);
  const Var re_e = mul(g, out.y_cmag, cos_e);
  const Var im_e = mul(g, out.y_cmag, sin_e);
  const Var re_t = mul(g, tgt.cmag, ad::cos(g, tgt.pha));
  const Var im_t = mul(g, tgt.cmag, ad::sin(g, tgt.pha));
  L.cplx = add(g, detail::mse(g, re_e, re_t), detail::mse(g, im_e, im_t));

  const int64_t wave_len = g.val(tgt.wave).numel();
  const Var mag_full = power(g, out.y_cmag, 1.0 / stft.compression);
  const Var wave =
      ad::istft(g, mul(g, mag_full, cos_e), mul(g, mag_full, sin_e), stft,
                wave_len);
  L.time = mean(g, ad::abs(g, sub(g, wave, tgt.wave)));

  L.total = add(g, add(g, scale(g, L.mag, T(tc.w_mag)),
                       scale(g, L.phase, T(tc.w_phase))),
                add(g, scale(g, L.cplx, T(tc.w_complex)),
                    scale(g, L.time, T(tc.w_time))));
  return L;
}

}  // namespace loss
}  // namespace mcse
