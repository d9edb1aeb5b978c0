#pragma once

#include <numeric>
#include <vector>

#include "mcse/fft.hpp"
#include "mcse/tensor.hpp"

namespace mcse {
namespace metrics {

inline constexpr double kSdrCapDb = 100.0;

namespace detail {

inline double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

}  // namespace detail

// Scale-invariant signal-to-distortion ratio in dB. The estimate is
// projected onto the reference with the optimal scalar; the result is capped
// at +/-100 dB when either energy term vanishes numerically.
inline double si_sdr(const std::vector<float>& ref,
                     const std::vector<float>& est) {
  MCSE_CHECK(ref.size() == est.size() && !ref.empty(), ShapeError,
             "si_sdr: length mismatch");
  const double rr = detail::dot(ref, ref);
  MCSE_CHECK(rr > 0, DomainError, "si_sdr: reference has zero energy");
  const double alpha = detail::dot(est, ref) / rr;
  const double num = alpha * alpha * rr;
  double den = 0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double d = double(est[i]) - alpha * double(ref[i]);
    den += d * d;
  }
  if (den <= 0) return kSdrCapDb;
  if (num <= 0) return -kSdrCapDb;
  return std::min(kSdrCapDb, 10.0 * std::log10(num / den));
}

// Plain signal-to-noise ratio against the unscaled reference. This is a
// simplification of the BSS-Eval SDR (no 512-tap projection filter); reports
// flag it so the numbers are not confused with published SDR columns.
inline double sdr(const std::vector<float>& ref,
                  const std::vector<float>& est) {
  MCSE_CHECK(ref.size() == est.size() && !ref.empty(), ShapeError,
             "sdr: length mismatch");
  const double rr = detail::dot(ref, ref);
  MCSE_CHECK(rr > 0, DomainError, "sdr: reference has zero energy");
  double den = 0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double d = double(est[i]) - double(ref[i]);
    den += d * d;
  }
  if (den <= 0) return kSdrCapDb;
  return std::min(kSdrCapDb, 10.0 * std::log10(rr / den));
}

// Polyphase windowed-sinc resampler (64 taps per phase, Hann window).
inline std::vector<float> resample_poly(const std::vector<float>& x, int up,
                                        int down) {
  MCSE_CHECK(up >= 1 && down >= 1, ContractError, "resample: bad factors");
  if (up == down) return x;
  const double ratio = double(up) / double(down);
  const double cutoff = std::min(1.0, ratio);  // in input Nyquist units
  const double half_width = 32.0 / cutoff;     // 64 taps per polyphase branch
  const int64_t n_out = int64_t(x.size()) * up / down;
  std::vector<float> y(size_t(n_out), 0.0f);
  for (int64_t j = 0; j < n_out; ++j) {
    const double center = double(j) * down / up;
    const int64_t k0 =
        std::max<int64_t>(0, int64_t(std::ceil(center - half_width)));
    const int64_t k1 = std::min<int64_t>(int64_t(x.size()) - 1,
                                         int64_t(std::floor(center + half_width)));
    double acc = 0;
    for (int64_t k = k0; k <= k1; ++k) {
      const double t = (center - double(k)) * cutoff;
      const double s = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
      const double w =
          0.5 + 0.5 * std::cos(kPi * (center - double(k)) / half_width);
      acc += double(x[size_t(k)]) * s * w;
    }
    y[size_t(j)] = float(acc * cutoff);
  }
  return y;
}

namespace stoi_detail {

inline constexpr int kFs = 10000;
inline constexpr int kFrame = 256;
inline constexpr int kHop = 128;
inline constexpr int kNfft = 512;
inline constexpr int kBands = 15;
inline constexpr int kSegFrames = 30;          // 384 ms at 10 kHz
inline constexpr double kDynRangeDb = 40.0;    // silent-frame threshold
inline constexpr double kClipDb = 15.0;        // -15 dB SDR clip floor

inline std::vector<double> hann_window() {
  std::vector<double> w(kFrame);
  for (int i = 0; i < kFrame; ++i)
    w[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / kFrame);
  return w;
}

// One-third-octave band membership matrix over the one-sided kNfft grid,
// 15 bands starting at 150 Hz.
inline std::vector<std::vector<int>> third_octave_bins() {
  std::vector<std::vector<int>> bands(kBands);
  for (int j = 0; j < kBands; ++j) {
    const double cf = 150.0 * std::pow(2.0, j / 3.0);
    const double lo = cf / std::pow(2.0, 1.0 / 6.0);
    const double hi = cf * std::pow(2.0, 1.0 / 6.0);
    for (int k = 0; k <= kNfft / 2; ++k) {
      const double f = double(k) * kFs / kNfft;
      if (f >= lo && f < hi) bands[size_t(j)].push_back(k);
    }
  }
  return bands;
}

// removes frames whose (reference) energy is more than 40 dB below the
// loudest frame; both signals keep the same frame set and are rebuilt by
// overlap-add of the windowed kept frames
inline void remove_silent_frames(std::vector<float>& ref,
                                 std::vector<float>& est) {
  const auto w = hann_window();
  const int64_t n_frames =
      ref.size() >= kFrame ? 1 + (int64_t(ref.size()) - kFrame) / kHop : 0;
  MCSE_CHECK(n_frames > 0, ContractError, "stoi: input too short");
  std::vector<double> energy(size_t(n_frames), 0.0);
  double emax = -1e300;
  for (int64_t t = 0; t < n_frames; ++t) {
    double e = 0;
    for (int i = 0; i < kFrame; ++i) {
      const double v = double(ref[size_t(t * kHop + i)]) * w[size_t(i)];
      e += v * v;
    }
    energy[size_t(t)] = 10.0 * std::log10(e + 1e-30);
    emax = std::max(emax, energy[size_t(t)]);
  }
  std::vector<int64_t> keep;
  for (int64_t t = 0; t < n_frames; ++t)
    if (energy[size_t(t)] > emax - kDynRangeDb) keep.push_back(t);
  MCSE_CHECK(!keep.empty(), ContractError,
             "stoi: no frames above the silence threshold");

  const int64_t out_len = (int64_t(keep.size()) - 1) * kHop + kFrame;
  std::vector<float> r2(size_t(out_len), 0.0f), e2(size_t(out_len), 0.0f);
  for (size_t m = 0; m < keep.size(); ++m) {
    const int64_t src = keep[m] * kHop;
    const int64_t dst = int64_t(m) * kHop;
    for (int i = 0; i < kFrame; ++i) {
      r2[size_t(dst + i)] += float(double(ref[size_t(src + i)]) * w[size_t(i)]);
      e2[size_t(dst + i)] += float(double(est[size_t(src + i)]) * w[size_t(i)]);
    }
  }
  ref = std::move(r2);
  est = std::move(e2);
}

// band-envelope matrix (kBands x n_frames)
inline Tensor<double> band_envelopes(const std::vector<float>& x) {
  const auto w = hann_window();
  const auto bands = third_octave_bins();
  const int64_t n_frames =
      x.size() >= kFrame ? 1 + (int64_t(x.size()) - kFrame) / kHop : 0;
  fft::RealPlan<double> plan(kNfft);
  std::vector<double> frame(kNfft, 0.0);
  std::vector<std::complex<double>> spec(size_t(plan.bins()));
  Tensor<double> env({kBands, n_frames});
  for (int64_t t = 0; t < n_frames; ++t) {
    for (int i = 0; i < kFrame; ++i)
      frame[size_t(i)] = double(x[size_t(t * kHop + i)]) * w[size_t(i)];
    std::fill(frame.begin() + kFrame, frame.end(), 0.0);
    plan.forward(frame.data(), spec.data());
    for (int j = 0; j < kBands; ++j) {
      double e = 0;
      for (int k : bands[size_t(j)]) e += std::norm(spec[size_t(k)]);
      env(j, t) = std::sqrt(e);
    }
  }
  return env;
}

}  // namespace stoi_detail

// Short-time objective intelligibility: resample to 10 kHz, drop silent
// frames, one-third-octave band envelopes, per-segment normalization and
// clipping, mean band/segment correlation.
inline double stoi(const std::vector<float>& ref_in,
                   const std::vector<float>& est_in, int fs) {
  using namespace stoi_detail;
  MCSE_CHECK(ref_in.size() == est_in.size(), ShapeError,
             "stoi: length mismatch");
  MCSE_CHECK(double(ref_in.size()) / fs >= 0.5, ContractError,
             "stoi: need at least 0.5 s of signal");

  std::vector<float> ref = ref_in, est = est_in;
  if (fs != kFs) {
    const int g = int(std::gcd(int64_t(fs), int64_t(kFs)));
    ref = resample_poly(ref, kFs / g, fs / g);
    est = resample_poly(est, kFs / g, fs / g);
  }
  remove_silent_frames(ref, est);

  const Tensor<double> X = band_envelopes(ref);
  const Tensor<double> Y = band_envelopes(est);
  const int64_t frames = X.dim(1);
  MCSE_CHECK(frames >= kSegFrames, ContractError,
             "stoi: too short after silence removal");

  const double clip = std::pow(10.0, kClipDb / 20.0);
  double acc = 0;
  int64_t count = 0;
  std::vector<double> xs(kSegFrames), ys(kSegFrames);
  for (int64_t m = kSegFrames; m <= frames; ++m) {
    for (int j = 0; j < kBands; ++j) {
      double ex = 0, ey = 0;
      for (int i = 0; i < kSegFrames; ++i) {
        xs[size_t(i)] = X(j, m - kSegFrames + i);
        ys[size_t(i)] = Y(j, m - kSegFrames + i);
        ex += xs[size_t(i)] * xs[size_t(i)];
        ey += ys[size_t(i)] * ys[size_t(i)];
      }
      const double alpha = ey > 0 ? std::sqrt(ex / ey) : 0.0;
      double mx = 0, my = 0;
      for (int i = 0; i < kSegFrames; ++i) {
        ys[size_t(i)] = std::min(alpha * ys[size_t(i)],
                                 xs[size_t(i)] * (1.0 + clip));
        mx += xs[size_t(i)];
        my += ys[size_t(i)];
      }
      mx /= kSegFrames;
      my /= kSegFrames;
      double sxy = 0, sxx = 0, syy = 0;
      for (int i = 0; i < kSegFrames; ++i) {
        const double dx = xs[size_t(i)] - mx, dy = ys[size_t(i)] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      const double d =
          sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
      acc += d;
      ++count;
    }
  }
  return acc / double(count);
}

}  // namespace metrics
}  // namespace mcse
