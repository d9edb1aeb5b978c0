#pragma once

#include "mcse/ops.hpp"
#include "mcse/stft.hpp"

namespace mcse::ad {

// Differentiable inverse STFT. Takes the real/imaginary parts of a one-sided
// T x F spectrum and produces the time-domain signal via windowed
// overlap-add with window-square normalization (matching dsp::istft). The
// op is linear, so the reverse pass is its adjoint: zero-pad, divide by the
// same normalization, re-frame with the window, and run a forward transform.
// Imaginary parts of the DC and Nyquist bins are ignored (hermitian
// convention) and therefore receive zero gradient.
template <typename T>
Var istft(Graph<T>& g, Var re, Var im, const StftConfig& cfg,
          int64_t out_len) {
  const Tensor<T>& rv = g.val(re);
  const Tensor<T>& iv = g.val(im);
  MCSE_CHECK(rv.same_shape(iv) && rv.rank() == 2 && rv.dim(1) == cfg.bins(),
             ShapeError, "istft: re/im must be TxF matching the config");
  Tensor<std::complex<T>> spec(rv.shape());
  for (int64_t i = 0; i < rv.numel(); ++i) spec[i] = {rv[i], iv[i]};
  Tensor<T> y({out_len}, dsp::istft(spec, cfg, out_len));

  const int64_t frames = rv.dim(0);
  return g.make(
      std::move(y), {re, im}, "istft",
      [re, im, cfg, out_len, frames](Graph<T>& gg, Var o) {
        const bool nr = gg.needs(re), ni = gg.needs(im);
        if (!nr && !ni) return;
        const Tensor<T>& go = gg.grad(o);
        const int64_t full = (frames - 1) * cfg.hop + cfg.window_len;
        const int64_t pad = cfg.pad();
        const int bins = cfg.bins();
        const auto window = StftConfig::template make_window<T>(cfg);

        // reconstruct the normalization used by the forward pass
        std::vector<T> norm(size_t(full), T(0));
        for (int64_t t = 0; t < frames; ++t)
          for (int n = 0; n < cfg.window_len; ++n)
            norm[size_t(t * cfg.hop + n)] +=
                window[size_t(n)] * window[size_t(n)];

        std::vector<T> gacc(size_t(full), T(0));
        for (int64_t i = 0; i < out_len; ++i)
          gacc[size_t(i + pad)] = go[i] / norm[size_t(i + pad)];

        fft::RealPlan<T> plan(cfg.fft_len);
        std::vector<T> seg(size_t(cfg.fft_len), T(0));
        std::vector<std::complex<T>> G(size_t(bins), std::complex<T>{});
        const T invN = T(1) / T(cfg.fft_len);
        for (int64_t t = 0; t < frames; ++t) {
          for (int n = 0; n < cfg.window_len; ++n)
            seg[size_t(n)] =
                gacc[size_t(t * cfg.hop + n)] * window[size_t(n)];
          plan.forward(seg.data(), G.data());
          for (int k = 0; k < bins; ++k) {
            const bool edge = k == 0 || k == bins - 1;
            const T cr = (edge ? T(1) : T(2)) * invN;
            if (nr) gg.grad(re)(t, k) += cr * G[size_t(k)].real();
            if (ni && !edge) gg.grad(im)(t, k) += cr * G[size_t(k)].imag();
          }
        }
      });
}

}  // namespace mcse::ad
