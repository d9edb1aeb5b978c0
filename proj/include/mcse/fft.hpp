#pragma once

#include <complex>
#include <vector>

#include "mcse/common.hpp"

namespace mcse::fft {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int next_pow2(int n) {
  int m = 1;
  while (m < n) m <<= 1;
  return m;
}

// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
template <typename T>
void fft_pow2(std::complex<T>* a, int n, bool inverse) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / len * (inverse ? 1.0 : -1.0);
    const std::complex<T> wl(T(std::cos(ang)), T(std::sin(ang)));
    for (int i = 0; i < n; i += len) {
      std::complex<T> w(T(1), T(0));
      for (int k = 0; k < len / 2; ++k) {
        const std::complex<T> u = a[i + k];
        const std::complex<T> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Complex transform plan for an arbitrary length. Powers of two run radix-2
// directly; other lengths go through Bluestein's chirp-z reformulation on a
// padded power-of-two grid.
template <typename T>
class Plan {
 public:
  explicit Plan(int n) : n_(n) {
    MCSE_CHECK(n >= 1, ContractError, "fft: transform length must be >= 1");
    if (is_pow2(n_) || n_ == 1) return;
    m_ = next_pow2(2 * n_ - 1);
    chirp_.resize(size_t(n_));
    for (int j = 0; j < n_; ++j) {
      // j^2 mod 2n keeps the angle argument small and exact
      const int64_t q = (int64_t(j) * j) % (2 * n_);
      const double ang = -kPi * double(q) / double(n_);
      chirp_[size_t(j)] = {T(std::cos(ang)), T(std::sin(ang))};
    }
    fft_b_.assign(size_t(m_), {T(0), T(0)});
    fft_b_[0] = std::conj(chirp_[0]);
    for (int j = 1; j < n_; ++j) {
      fft_b_[size_t(j)] = std::conj(chirp_[size_t(j)]);
      fft_b_[size_t(m_ - j)] = std::conj(chirp_[size_t(j)]);
    }
    fft_pow2(fft_b_.data(), m_, false);
  }

  int size() const { return n_; }

  void forward(std::complex<T>* a) const { run(a, false); }
  void inverse(std::complex<T>* a) const {
    // ifft(x) = conj(fft(conj(x))) / n
    for (int i = 0; i < n_; ++i) a[i] = std::conj(a[i]);
    run(a, false);
    const T s = T(1) / T(n_);
    for (int i = 0; i < n_; ++i) a[i] = std::conj(a[i]) * s;
  }

 private:
  void run(std::complex<T>* a, bool inverse) const {
    if (n_ == 1) return;
    if (is_pow2(n_)) {
      fft_pow2(a, n_, inverse);
      return;
    }
    std::vector<std::complex<T>> work(size_t(m_), {T(0), T(0)});
    for (int j = 0; j < n_; ++j) work[size_t(j)] = a[j] * chirp_[size_t(j)];
    fft_pow2(work.data(), m_, false);
    for (int j = 0; j < m_; ++j) work[size_t(j)] *= fft_b_[size_t(j)];
    fft_pow2(work.data(), m_, true);
    const T s = T(1) / T(m_);
    for (int k = 0; k < n_; ++k) a[k] = work[size_t(k)] * chirp_[size_t(k)] * s;
  }

  int n_;
  int m_ = 0;
  std::vector<std::complex<T>> chirp_;
  std::vector<std::complex<T>> fft_b_;
};

// One-sided real transforms of length n (n even). forward() fills n/2+1 bins;
// inverse() treats the spectrum as hermitian and ignores the imaginary parts
// of the DC and Nyquist bins.
template <typename T>
class RealPlan {
 public:
  explicit RealPlan(int n) : n_(n), plan_(n), buf_(size_t(n)) {
    MCSE_CHECK(n >= 2 && n % 2 == 0, ContractError,
               "rfft: length must be even and >= 2");
  }

  int bins() const { return n_ / 2 + 1; }

  void forward(const T* x, std::complex<T>* spec) const {
    for (int i = 0; i < n_; ++i) buf_[size_t(i)] = {x[i], T(0)};
    plan_.forward(buf_.data());
    for (int k = 0; k <= n_ / 2; ++k) spec[k] = buf_[size_t(k)];
  }

  void inverse(const std::complex<T>* spec, T* x) const {
    buf_[0] = {spec[0].real(), T(0)};
    buf_[size_t(n_ / 2)] = {spec[n_ / 2].real(), T(0)};
    for (int k = 1; k < n_ / 2; ++k) {
      buf_[size_t(k)] = spec[k];
      buf_[size_t(n_ - k)] = std::conj(spec[k]);
    }
    plan_.inverse(buf_.data());
    for (int i = 0; i < n_; ++i) x[i] = buf_[size_t(i)].real();
  }

 private:
  int n_;
  Plan<T> plan_;
  mutable std::vector<std::complex<T>> buf_;
};

}  // namespace mcse::fft
