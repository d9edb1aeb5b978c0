#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "mcse/fft.hpp"
#include "mcse/tensor.hpp"

namespace mcse {

// Analysis/synthesis configuration. Defaults follow the 16 kHz front end:
// 400-sample periodic Hann window, hop 100, 400-point transform, magnitude
// compression exponent 0.3.
struct StftConfig {
  int window_len = 400;
  int hop = 100;
  int fft_len = 400;
  int sample_rate = 16000;
  double compression = 0.3;

  int bins() const { return fft_len / 2 + 1; }
  int pad() const { return window_len / 2; }

  int64_t frames_for(int64_t out_len) const {
    return 1 + (out_len + 2 * int64_t(pad()) - window_len) / hop;
  }

  void validate() const {
    MCSE_CHECK(window_len > 0 && hop > 0 && fft_len > 0, ConfigError,
               "StftConfig: sizes must be positive");
    MCSE_CHECK(hop <= window_len, ConfigError,
               "StftConfig: hop must not exceed window length");
    MCSE_CHECK(fft_len >= window_len, ConfigError,
               "StftConfig: fft length must cover the window");
    MCSE_CHECK(fft_len % 2 == 0, ConfigError,
               "StftConfig: fft length must be even");
    // constant-overlap-add within 1e-6 relative deviation
    const auto w = make_window<double>(*this);
    double lo = 0.0, hi = 0.0;
    for (int n = 0; n < hop; ++n) {
      double s = 0.0;
      for (int k = n; k < window_len; k += hop) s += w[size_t(k)];
      if (n == 0) {
        lo = hi = s;
      } else {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    }
    MCSE_CHECK(hi > 0.0 && (hi - lo) / hi <= 1e-6, ConfigError,
               "StftConfig: window does not satisfy constant overlap-add");
  }

  template <typename T>
  static std::vector<T> make_window(const StftConfig& cfg) {
    std::vector<T> w(size_t(cfg.window_len), T(0));
    for (int n = 0; n < cfg.window_len; ++n)
      w[size_t(n)] =
          T(0.5 - 0.5 * std::cos(2.0 * kPi * n / double(cfg.window_len)));
    return w;
  }
};

// Compressed magnitude + phase of a single channel, each T x F.
template <typename T>
struct SpectroPair {
  Tensor<T> cmag;
  Tensor<T> pha;
};

namespace dsp {

// reflect padding without edge duplication: [1 2 3 4] pad 2 -> [3 2 1 2 3 4 3 2]
template <typename T>
std::vector<T> reflect_pad(const std::vector<T>& x, int pad) {
  const int64_t n = int64_t(x.size());
  MCSE_CHECK(n > pad, ContractError, "reflect_pad: input too short");
  std::vector<T> out(size_t(n + 2 * pad));
  for (int64_t i = 0; i < n + 2 * pad; ++i) {
    int64_t idx = i - pad;
    if (idx < 0) idx = -idx;
    if (idx >= n) idx = 2 * (n - 1) - idx;
    out[size_t(i)] = x[size_t(idx)];
  }
  return out;
}

// Forward transform: reflect-pads by window_len/2 on both ends, frames with
// the periodic Hann window, returns the one-sided spectrum as T x F.
template <typename T>
Tensor<std::complex<T>> stft(const std::vector<T>& wave,
                             const StftConfig& cfg) {
  cfg.validate();
  MCSE_CHECK(int64_t(wave.size()) >= cfg.window_len, ContractError,
             "stft: input too short (need at least one window of samples)");
  const auto padded = reflect_pad(wave, cfg.pad());
  const int64_t frames =
      1 + (int64_t(padded.size()) - cfg.window_len) / cfg.hop;
  const int bins = cfg.bins();
  const auto window = StftConfig::make_window<T>(cfg);
  fft::RealPlan<T> plan(cfg.fft_len);

  Tensor<std::complex<T>> spec({frames, bins});
  std::vector<T> frame(size_t(cfg.fft_len), T(0));
  for (int64_t t = 0; t < frames; ++t) {
    const T* src = padded.data() + t * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n)
      frame[size_t(n)] = src[n] * window[size_t(n)];
    plan.forward(frame.data(), spec.data() + t * bins);
  }
  return spec;
}

// Inverse transform via weighted overlap-add with window-square
// normalization; the reflect padding added by stft() is trimmed off.
template <typename T>
std::vector<T> istft(const Tensor<std::complex<T>>& spec,
                     const StftConfig& cfg, int64_t out_len) {
  cfg.validate();
  MCSE_CHECK(spec.rank() == 2 && spec.dim(1) == cfg.bins(), ShapeError,
             "istft: spectrum shape inconsistent with config");
  const int64_t frames = spec.dim(0);
  const int64_t full = (frames - 1) * cfg.hop + cfg.window_len;
  const auto window = StftConfig::make_window<T>(cfg);
  fft::RealPlan<T> plan(cfg.fft_len);

  std::vector<T> acc(size_t(full), T(0));
  std::vector<T> norm(size_t(full), T(0));
  std::vector<T> frame(size_t(cfg.fft_len), T(0));
  for (int64_t t = 0; t < frames; ++t) {
    plan.inverse(spec.data() + t * cfg.bins(), frame.data());
    T* dst = acc.data() + t * cfg.hop;
    T* nrm = norm.data() + t * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n) {
      dst[n] += frame[size_t(n)] * window[size_t(n)];
      nrm[n] += window[size_t(n)] * window[size_t(n)];
    }
  }

  const int64_t pad = cfg.pad();
  std::vector<T> out(size_t(out_len), T(0));
  for (int64_t i = 0; i < out_len; ++i) {
    const int64_t n = i + pad;
    MCSE_CHECK(n < full && norm[size_t(n)] > T(1e-10), NumericError,
               "istft: zero overlap-add normalization at output sample " +
                   std::to_string(i));
    out[size_t(i)] = acc[size_t(n)] / norm[size_t(n)];
  }
  return out;
}

template <typename T>
Tensor<T> compress_mag(const Tensor<T>& mag, double c) {
  MCSE_CHECK(c > 0.0 && c <= 1.0, ContractError,
             "compress_mag: exponent must lie in (0, 1]");
  Tensor<T> out(mag.shape());
  for (int64_t i = 0; i < mag.numel(); ++i) {
    MCSE_CHECK(mag[i] >= T(0), DomainError,
               "compress_mag: negative magnitude");
    out[i] = T(std::pow(double(mag[i]), c));
  }
  return out;
}

template <typename T>
Tensor<T> decompress_mag(const Tensor<T>& cmag, double c) {
  MCSE_CHECK(c > 0.0 && c <= 1.0, ContractError,
             "decompress_mag: exponent must lie in (0, 1]");
  Tensor<T> out(cmag.shape());
  for (int64_t i = 0; i < cmag.numel(); ++i) {
    MCSE_CHECK(cmag[i] >= T(0), DomainError,
               "decompress_mag: negative magnitude");
    out[i] = T(std::pow(double(cmag[i]), 1.0 / c));
  }
  return out;
}

// Split a complex spectrum into compressed magnitude and phase. Phase of an
// exactly zero bin is defined as 0.
template <typename T>
SpectroPair<T> to_spectro_pair(const Tensor<std::complex<T>>& spec,
                               const StftConfig& cfg) {
  SpectroPair<T> out;
  out.cmag = Tensor<T>(spec.shape());
  out.pha = Tensor<T>(spec.shape());
  for (int64_t i = 0; i < spec.numel(); ++i) {
    const T re = spec[i].real(), im = spec[i].imag();
    const T mag = std::sqrt(re * re + im * im);
    out.cmag[i] = T(std::pow(double(mag), cfg.compression));
    out.pha[i] = mag == T(0) ? T(0) : std::atan2(im, re);
  }
  return out;
}

template <typename T>
SpectroPair<T> analyze(const std::vector<T>& wave, const StftConfig& cfg) {
  return to_spectro_pair(stft(wave, cfg), cfg);
}

// Rebuild a waveform from compressed magnitude + phase.
template <typename T>
std::vector<T> reconstruct(const Tensor<T>& cmag, const Tensor<T>& pha,
                           const StftConfig& cfg, int64_t out_len) {
  MCSE_CHECK(cmag.same_shape(pha), ShapeError,
             "reconstruct: cmag/pha shape mismatch");
  Tensor<std::complex<T>> spec(cmag.shape());
  for (int64_t i = 0; i < cmag.numel(); ++i) {
    const T mag = T(std::pow(double(cmag[i]), 1.0 / cfg.compression));
    spec[i] = {mag * std::cos(pha[i]), mag * std::sin(pha[i])};
  }
  return istft(spec, cfg, out_len);
}

// Stack M per-microphone pairs into the 2M x T x F network input, channel
// layout [cmag(0), pha(0), cmag(1), pha(1), ...].
template <typename T>
Tensor<T> pack_features(const std::vector<SpectroPair<T>>& specs) {
  MCSE_CHECK(!specs.empty(), ContractError, "pack_features: no channels");
  const Shape base = specs[0].cmag.shape();
  MCSE_CHECK(base.size() == 2, ShapeError, "pack_features: pairs must be TxF");
  for (const auto& s : specs)
    MCSE_CHECK(s.cmag.shape() == base && s.pha.shape() == base, ShapeError,
               "pack_features: T/F mismatch across channels");
  const int64_t tf = base[0] * base[1];
  Tensor<T> out({int64_t(2 * specs.size()), base[0], base[1]});
  for (size_t m = 0; m < specs.size(); ++m) {
    std::copy_n(specs[m].cmag.data(), tf, out.data() + int64_t(2 * m) * tf);
    std::copy_n(specs[m].pha.data(), tf, out.data() + int64_t(2 * m + 1) * tf);
  }
  return out;
}

template <typename T>
std::vector<SpectroPair<T>> unpack_features(const Tensor<T>& feats) {
  MCSE_CHECK(feats.rank() == 3 && feats.dim(0) % 2 == 0, ShapeError,
             "unpack_features: expected 2M x T x F");
  const int64_t tf = feats.dim(1) * feats.dim(2);
  std::vector<SpectroPair<T>> out(size_t(feats.dim(0) / 2));
  for (size_t m = 0; m < out.size(); ++m) {
    out[m].cmag = Tensor<T>({feats.dim(1), feats.dim(2)});
    out[m].pha = Tensor<T>({feats.dim(1), feats.dim(2)});
    std::copy_n(feats.data() + int64_t(2 * m) * tf, tf, out[m].cmag.data());
    std::copy_n(feats.data() + int64_t(2 * m + 1) * tf, tf, out[m].pha.data());
  }
  return out;
}

}  // namespace dsp
}  // namespace mcse
