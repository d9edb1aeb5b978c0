// Test-only oracles, kept independent of the implementation paths they check.
#pragma once

#include <complex>
#include <vector>

#include "mcse/rng.hpp"
#include "mcse/stft.hpp"
#include "mcse/tensor.hpp"

namespace oracle {

// O(n^2) DFT straight from the definition
template <typename T>
std::vector<std::complex<double>> naive_dft(const std::vector<T>& x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> X(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0, 0};
    for (size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * mcse::kPi * double(k) * double(j) / double(n);
      acc += double(x[j]) * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    X[k] = acc;
  }
  return X;
}

// Direct overlap-add reconstruction from a one-sided spectrum, written
// independently of dsp::istft (naive inverse DFT per frame, double math).
inline std::vector<double> direct_overlap_add(
    const mcse::Tensor<std::complex<float>>& spec, const mcse::StftConfig& cfg,
    int64_t out_len) {
  const int64_t frames = spec.dim(0);
  const int bins = cfg.bins();
  const int n = cfg.fft_len;
  const auto w = mcse::StftConfig::make_window<double>(cfg);
  const int64_t full = (frames - 1) * cfg.hop + cfg.window_len;
  std::vector<double> acc(size_t(full), 0.0), norm(size_t(full), 0.0);
  for (int64_t t = 0; t < frames; ++t) {
    // hermitian inverse DFT from the definition
    for (int i = 0; i < cfg.window_len; ++i) {
      double v = 0;
      for (int k = 0; k < bins; ++k) {
        const double ang = 2.0 * mcse::kPi * double(k) * double(i) / double(n);
        const std::complex<double> X(spec(t, k).real(), spec(t, k).imag());
        const double term =
            X.real() * std::cos(ang) - X.imag() * std::sin(ang);
        v += (k == 0 || k == bins - 1) ? term : 2.0 * term;
      }
      v /= double(n);
      acc[size_t(t * cfg.hop + i)] += v * w[size_t(i)];
      norm[size_t(t * cfg.hop + i)] += w[size_t(i)] * w[size_t(i)];
    }
  }
  std::vector<double> out(size_t(out_len), 0.0);
  for (int64_t i = 0; i < out_len; ++i)
    out[size_t(i)] = acc[size_t(i + cfg.pad())] / norm[size_t(i + cfg.pad())];
  return out;
}

template <typename T>
double snr_db(const std::vector<T>& ref, const std::vector<T>& est) {
  double num = 0, den = 0;
  for (size_t i = 0; i < ref.size(); ++i) {
    num += double(ref[i]) * double(ref[i]);
    const double d = double(ref[i]) - double(est[i]);
    den += d * d;
  }
  if (den == 0) return 300.0;
  return 10.0 * std::log10(num / den);
}

inline std::vector<float> random_wave(int64_t n, uint64_t seed,
                                      double amp = 0.5) {
  mcse::Rng rng(seed);
  std::vector<float> x(size_t(n), 0.0f);
  for (auto& v : x) v = float(rng.uniform(-amp, amp));
  return x;
}

}  // namespace oracle
