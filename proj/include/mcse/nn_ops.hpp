#pragma once

#include "mcse/ops.hpp"

namespace mcse::ad {

// Affine map on the last axis: x (..., in) with w (out, in), optional b (out).
template <typename T>
Var dense(Graph<T>& g, Var x, Var w, Var b = kNoVar) {
  const Tensor<T>& xv = g.val(x);
  const Tensor<T>& wv = g.val(w);
  MCSE_CHECK(wv.rank() == 2, ShapeError, "dense: weight must be (out, in)");
  const int64_t in = wv.dim(1), out = wv.dim(0);
  MCSE_CHECK(xv.rank() >= 1 && xv.dim(xv.rank() - 1) == in, ShapeError,
             "dense: input last dim " + shape_str(xv.shape()) +
                 " does not match weight " + shape_str(wv.shape()));
  const int64_t rows = xv.numel() / in;
  const T* bias = nullptr;
  if (b != kNoVar) {
    MCSE_CHECK(g.val(b).numel() == out, ShapeError, "dense: bad bias shape");
    bias = g.val(b).data();
  }

  Shape os = xv.shape();
  os.back() = out;
  Tensor<T> y(os);
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * in;
    T* yr = y.data() + r * out;
    for (int64_t o = 0; o < out; ++o) {
      const T* wr = wv.data() + o * in;
      T acc = bias ? bias[o] : T(0);
      for (int64_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }

  std::vector<Var> parents = b == kNoVar ? std::vector<Var>{x, w}
                                         : std::vector<Var>{x, w, b};
  return g.make(std::move(y), std::move(parents), "dense",
                [x, w, b, rows, in, out](Graph<T>& gg, Var o) {
                  const Tensor<T>& go = gg.grad(o);
                  const Tensor<T>& xv2 = gg.val(x);
                  const Tensor<T>& wv2 = gg.val(w);
                  const bool nx = gg.needs(x), nw = gg.needs(w);
                  for (int64_t r = 0; r < rows; ++r) {
                    const T* gr = go.data() + r * out;
                    const T* xr = xv2.data() + r * in;
                    T* dxr = nx ? gg.grad(x).data() + r * in : nullptr;
                    for (int64_t oo = 0; oo < out; ++oo) {
                      const T gv = gr[oo];
                      if (gv == T(0)) continue;
                      if (nx) {
                        const T* wr = wv2.data() + oo * in;
                        for (int64_t i = 0; i < in; ++i) dxr[i] += gv * wr[i];
                      }
                      if (nw) {
                        T* dwr = gg.grad(w).data() + oo * in;
                        for (int64_t i = 0; i < in; ++i) dwr[i] += gv * xr[i];
                      }
                    }
                  }
                  if (b != kNoVar && gg.needs(b)) {
                    T* db = gg.grad(b).data();
                    for (int64_t r = 0; r < rows; ++r) {
                      const T* gr = go.data() + r * out;
                      for (int64_t oo = 0; oo < out; ++oo) db[oo] += gr[oo];
                    }
                  }
                });
}

struct Conv2dAttrs {
  int stride_h = 1, stride_w = 1;
  int dil_h = 1, dil_w = 1;
  int pad_h = 0, pad_w = 0;
};

// x (Cin, H, W), w (Cout, Cin, kh, kw) -> (Cout, Ho, Wo)
template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, Conv2dAttrs a = {}) {
  const Tensor<T>& xv = g.val(x);
  const Tensor<T>& wv = g.val(w);
  MCSE_CHECK(xv.rank() == 3 && wv.rank() == 4 && xv.dim(0) == wv.dim(1),
             ShapeError,
             "conv2d: expected x (Cin,H,W) and w (Cout,Cin,kh,kw), got " +
                 shape_str(xv.shape()) + " / " + shape_str(wv.shape()));
  const int64_t Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int64_t Cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const int64_t Ho = (H + 2 * a.pad_h - a.dil_h * (kh - 1) - 1) / a.stride_h + 1;
  const int64_t Wo = (W + 2 * a.pad_w - a.dil_w * (kw - 1) - 1) / a.stride_w + 1;
  MCSE_CHECK(Ho >= 1 && Wo >= 1, ShapeError, "conv2d: empty output");
  const T* bias = nullptr;
  if (b != kNoVar) {
    MCSE_CHECK(g.val(b).numel() == Cout, ShapeError, "conv2d: bad bias shape");
    bias = g.val(b).data();
  }

  // valid wo range for a kernel column offset, so inner loops are branch-free
  auto wrange = [W, Wo, a](int64_t off, int64_t& lo, int64_t& hi) {
    lo = off < 0 ? (-off + a.stride_w - 1) / a.stride_w : 0;
    hi = off <= W - 1 ? (W - 1 - off) / a.stride_w + 1 : 0;
    if (hi > Wo) hi = Wo;
    if (lo > hi) lo = hi;
  };

  Tensor<T> y({Cout, Ho, Wo});
  for (int64_t co = 0; co < Cout; ++co) {
    if (bias) std::fill_n(y.data() + co * Ho * Wo, Ho * Wo, bias[co]);
    for (int64_t ci = 0; ci < Cin; ++ci)
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
          const T wt = wv(co, ci, i, j);
          if (wt == T(0)) continue;
          const int64_t off = j * a.dil_w - a.pad_w;
          int64_t lo, hi;
          wrange(off, lo, hi);
          for (int64_t ho = 0; ho < Ho; ++ho) {
            const int64_t hi_in = ho * a.stride_h + i * a.dil_h - a.pad_h;
            if (hi_in < 0 || hi_in >= H) continue;
            const T* xr = xv.data() + (ci * H + hi_in) * W + off;
            T* yr = y.data() + (co * Ho + ho) * Wo;
            if (a.stride_w == 1) {
              for (int64_t wo = lo; wo < hi; ++wo) yr[wo] += wt * xr[wo];
            } else {
              for (int64_t wo = lo; wo < hi; ++wo)
                yr[wo] += wt * xr[wo * a.stride_w];
            }
          }
        }
  }

  std::vector<Var> parents = b == kNoVar ? std::vector<Var>{x, w}
                                         : std::vector<Var>{x, w, b};
  return g.make(
      std::move(y), std::move(parents), "conv2d",
      [x, w, b, a, Cin, H, W, Cout, kh, kw, Ho, Wo, wrange](Graph<T>& gg,
                                                            Var o) {
        const Tensor<T>& go = gg.grad(o);
        const Tensor<T>& xv2 = gg.val(x);
        const Tensor<T>& wv2 = gg.val(w);
        if (gg.needs(x)) {
          Tensor<T>& gx = gg.grad(x);
          for (int64_t ci = 0; ci < Cin; ++ci)
            for (int64_t co = 0; co < Cout; ++co)
              for (int64_t i = 0; i < kh; ++i)
                for (int64_t j = 0; j < kw; ++j) {
                  const T wt = wv2(co, ci, i, j);
                  if (wt == T(0)) continue;
                  const int64_t off = j * a.dil_w - a.pad_w;
                  int64_t lo, hi;
                  wrange(off, lo, hi);
                  for (int64_t ho = 0; ho < Ho; ++ho) {
                    const int64_t hi_in =
                        ho * a.stride_h + i * a.dil_h - a.pad_h;
                    if (hi_in < 0 || hi_in >= H) continue;
                    T* dxr = gx.data() + (ci * H + hi_in) * W + off;
                    const T* gr = go.data() + (co * Ho + ho) * Wo;
                    if (a.stride_w == 1) {
                      for (int64_t wo = lo; wo < hi; ++wo)
                        dxr[wo] += wt * gr[wo];
                    } else {
                      for (int64_t wo = lo; wo < hi; ++wo)
                        dxr[wo * a.stride_w] += wt * gr[wo];
                    }
                  }
                }
        }
        if (gg.needs(w)) {
          Tensor<T>& gw = gg.grad(w);
          for (int64_t co = 0; co < Cout; ++co)
            for (int64_t ci = 0; ci < Cin; ++ci)
              for (int64_t i = 0; i < kh; ++i)
                for (int64_t j = 0; j < kw; ++j) {
                  const int64_t off = j * a.dil_w - a.pad_w;
                  int64_t lo, hi;
                  wrange(off, lo, hi);
                  T acc = 0;
                  for (int64_t ho = 0; ho < Ho; ++ho) {
                    const int64_t hi_in =
                        ho * a.stride_h + i * a.dil_h - a.pad_h;
                    if (hi_in < 0 || hi_in >= H) continue;
                    const T* xr = xv2.data() + (ci * H + hi_in) * W + off;
                    const T* gr = go.data() + (co * Ho + ho) * Wo;
                    if (a.stride_w == 1) {
                      for (int64_t wo = lo; wo < hi; ++wo)
                        acc += gr[wo] * xr[wo];
                    } else {
                      for (int64_t wo = lo; wo < hi; ++wo)
                        acc += gr[wo] * xr[wo * a.stride_w];
                    }
                  }
                  gw(co, ci, i, j) += acc;
                }
        }
        if (b != kNoVar && gg.needs(b)) {
          T* db = gg.grad(b).data();
          for (int64_t co = 0; co < Cout; ++co) {
            const T* gr = go.data() + co * Ho * Wo;
            T acc = 0;
            for (int64_t i = 0; i < Ho * Wo; ++i) acc += gr[i];
            db[co] += acc;
          }
        }
      });
}

struct ConvT2dAttrs {
  int stride_h = 1, stride_w = 1;
  // crop applied to the full (H-1)*s + k output
  int crop_h0 = 0, crop_h1 = 0, crop_w0 = 0, crop_w1 = 0;
};

// x (Cin, H, W), w (Cin, Cout, kh, kw) -> (Cout, Ho, Wo) with
// Ho = (H-1)*stride_h + kh - crop_h0 - crop_h1 (same along W).
template <typename T>
Var conv2d_transpose(Graph<T>& g, Var x, Var w, Var b, ConvT2dAttrs a = {}) {
  const Tensor<T>& xv = g.val(x);
  const Tensor<T>& wv = g.val(w);
  MCSE_CHECK(xv.rank() == 3 && wv.rank() == 4 && xv.dim(0) == wv.dim(0),
             ShapeError,
             "conv2d_transpose: expected x (Cin,H,W), w (Cin,Cout,kh,kw)");
  const int64_t Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int64_t Cout = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
  const int64_t Ho = (H - 1) * a.stride_h + kh - a.crop_h0 - a.crop_h1;
  const int64_t Wo = (W - 1) * a.stride_w + kw - a.crop_w0 - a.crop_w1;
  MCSE_CHECK(Ho >= 1 && Wo >= 1, ShapeError, "conv2d_transpose: empty output");
  const T* bias = nullptr;
  if (b != kNoVar) {
    MCSE_CHECK(g.val(b).numel() == Cout, ShapeError,
               "conv2d_transpose: bad bias shape");
    bias = g.val(b).data();
  }

  Tensor<T> y({Cout, Ho, Wo});
  if (bias)
    for (int64_t co = 0; co < Cout; ++co)
      std::fill_n(y.data() + co * Ho * Wo, Ho * Wo, bias[co]);
  for (int64_t ci = 0; ci < Cin; ++ci)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
          const T wt = wv(ci, co, i, j);
          if (wt == T(0)) continue;
          for (int64_t h = 0; h < H; ++h) {
            const int64_t oh = h * a.stride_h + i - a.crop_h0;
            if (oh < 0 || oh >= Ho) continue;
            const T* xr = xv.data() + (ci * H + h) * W;
            T* yr = y.data() + (co * Ho + oh) * Wo;
            for (int64_t ww = 0; ww < W; ++ww) {
              const int64_t ow = ww * a.stride_w + j - a.crop_w0;
              if (ow < 0 || ow >= Wo) continue;
              yr[ow] += wt * xr[ww];
            }
          }
        }

  std::vector<Var> parents = b == kNoVar ? std::vector<Var>{x, w}
                                         : std::vector<Var>{x, w, b};
  return g.make(
      std::move(y), std::move(parents), "conv2d_transpose",
      [x, w, b, a, Cin, H, W, Cout, kh, kw, Ho, Wo](Graph<T>& gg, Var o) {
        const Tensor<T>& go = gg.grad(o);
        const Tensor<T>& xv2 = gg.val(x);
        const Tensor<T>& wv2 = gg.val(w);
        const bool nx = gg.needs(x), nw = gg.needs(w);
        for (int64_t ci = 0; ci < Cin; ++ci)
          for (int64_t co = 0; co < Cout; ++co)
            for (int64_t i = 0; i < kh; ++i)
              for (int64_t j = 0; j < kw; ++j) {
                const T wt = wv2(ci, co, i, j);
                T acc = 0;
                for (int64_t h = 0; h < H; ++h) {
                  const int64_t oh = h * a.stride_h + i - a.crop_h0;
                  if (oh < 0 || oh >= Ho) continue;
                  const T* xr = xv2.data() + (ci * H + h) * W;
                  const T* gr = go.data() + (co * Ho + oh) * Wo;
                  T* dxr = nx ? gg.grad(x).data() + (ci * H + h) * W : nullptr;
                  for (int64_t ww = 0; ww < W; ++ww) {
                    const int64_t ow = ww * a.stride_w + j - a.crop_w0;
                    if (ow < 0 || ow >= Wo) continue;
                    if (nx) dxr[ww] += wt * gr[ow];
                    if (nw) acc += xr[ww] * gr[ow];
                  }
                }
                if (nw) gg.grad(w)(ci, co, i, j) += acc;
              }
        if (b != kNoVar && gg.needs(b)) {
          T* db = gg.grad(b).data();
          for (int64_t co = 0; co < Cout; ++co) {
            const T* gr = go.data() + co * Ho * Wo;
            T acc = 0;
            for (int64_t i = 0; i < Ho * Wo; ++i) acc += gr[i];
            db[co] += acc;
          }
        }
      });
}

// Causal depthwise conv along the middle axis of x (B, L, C); w (C, k),
// b (C). Left-padded by k-1 so y[l] sees x[l-k+1 .. l].
template <typename T>
Var conv1d_depthwise(Graph<T>& g, Var x, Var w, Var b = kNoVar) {
  const Tensor<T>& xv = g.val(x);
  const Tensor<T>& wv = g.val(w);
  MCSE_CHECK(xv.rank() == 3 && wv.rank() == 2 && wv.dim(0) == xv.dim(2),
             ShapeError, "conv1d_depthwise: expected x (B,L,C), w (C,k)");
  const int64_t B = xv.dim(0), L = xv.dim(1), C = xv.dim(2), K = wv.dim(1);
  const T* bias = nullptr;
  if (b != kNoVar) {
    MCSE_CHECK(g.val(b).numel() == C, ShapeError,
               "conv1d_depthwise: bad bias shape");
    bias = g.val(b).data();
  }

  // repack weights to (k, C) so the channel loop is contiguous
  std::vector<T> wt(size_t(K * C), T(0));
  for (int64_t c = 0; c < C; ++c)
    for (int64_t k = 0; k < K; ++k) wt[size_t(k * C + c)] = wv(c, k);

  Tensor<T> y({B, L, C});
  for (int64_t bb = 0; bb < B; ++bb)
    for (int64_t l = 0; l < L; ++l) {
      T* yr = y.data() + (bb * L + l) * C;
      if (bias) std::copy_n(bias, C, yr);
      for (int64_t k = 0; k < K; ++k) {
        const int64_t li = l - (K - 1) + k;
        if (li < 0) continue;
        const T* xr = xv.data() + (bb * L + li) * C;
        const T* wk = wt.data() + k * C;
        for (int64_t c = 0; c < C; ++c) yr[c] += wk[c] * xr[c];
      }
    }

  std::vector<Var> parents = b == kNoVar ? std::vector<Var>{x, w}
                                         : std::vector<Var>{x, w, b};
  return g.make(std::move(y), std::move(parents), "conv1d_depthwise",
                [x, w, b, B, L, C, K, wt](Graph<T>& gg, Var o) {
                  const Tensor<T>& go = gg.grad(o);
                  const Tensor<T>& xv2 = gg.val(x);
                  const bool nx = gg.needs(x), nw = gg.needs(w);
                  std::vector<T> dwt(size_t(K * C), T(0));
                  for (int64_t bb = 0; bb < B; ++bb)
                    for (int64_t l = 0; l < L; ++l) {
                      const T* gr = go.data() + (bb * L + l) * C;
                      for (int64_t k = 0; k < K; ++k) {
                        const int64_t li = l - (K - 1) + k;
                        if (li < 0) continue;
                        const T* xr = xv2.data() + (bb * L + li) * C;
                        const T* wk = wt.data() + k * C;
                        T* dxr =
                            nx ? gg.grad(x).data() + (bb * L + li) * C
                               : nullptr;
                        T* dwk = dwt.data() + k * C;
                        for (int64_t c = 0; c < C; ++c) {
                          if (nx) dxr[c] += wk[c] * gr[c];
                          if (nw) dwk[c] += xr[c] * gr[c];
                        }
                      }
                    }
                  if (nw) {
                    Tensor<T>& gw = gg.grad(w);
                    for (int64_t c = 0; c < C; ++c)
                      for (int64_t k = 0; k < K; ++k)
                        gw(c, k) += dwt[size_t(k * C + c)];
                  }
                  if (b != kNoVar && gg.needs(b)) {
                    T* db = gg.grad(b).data();
                    for (int64_t r = 0; r < B * L; ++r) {
                      const T* gr = go.data() + r * C;
                      for (int64_t c = 0; c < C; ++c) db[c] += gr[c];
                    }
                  }
                });
}

struct ConvT1dAttrs {
  int crop_left = 0, crop_right = 0;  // stride is fixed at 1
};

// Length-preserving transposed conv along the middle axis:
// x (B, L, Cin), w (Cin, Cout, k) -> (B, L + k - 1 - crops, Cout).
template <typename T>
Var conv1d_transpose(Graph<T>& g, Var x, Var w, Var b, ConvT1dAttrs a = {}) {
  const Tensor<T>& xv = g.val(x);
  const Tensor<T>& wv = g.val(w);
  MCSE_CHECK(xv.rank() == 3 && wv.rank() == 3 && wv.dim(0) == xv.dim(2),
             ShapeError, "conv1d_transpose: expected x (B,L,Cin), w (Cin,Cout,k)");
  const int64_t B = xv.dim(0), L = xv.dim(1), Cin = xv.dim(2);
  const int64_t Cout = wv.dim(1), K = wv.dim(2);
  const int64_t Lo = L + K - 1 - a.crop_left - a.crop_right;
  MCSE_CHECK(Lo >= 1, ShapeError, "conv1d_transpose: empty output");
  const T* bias = nullptr;
  if (b != kNoVar) {
    MCSE_CHECK(g.val(b).numel() == Cout, ShapeError,
               "conv1d_transpose: bad bias shape");
    bias = g.val(b).data();
  }

  // repack weights to (k, Cin, Cout)
  std::vector<T> wt(size_t(K * Cin * Cout), T(0));
  for (int64_t ci = 0; ci < Cin; ++ci)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t k = 0; k < K; ++k)
        wt[size_t((k * Cin + ci) * Cout + co)] = wv(ci, co, k);

  Tensor<T> y({B, Lo, Cout});
  if (bias)
    for (int64_t r = 0; r < B * Lo; ++r)
      std::copy_n(bias, Cout, y.data() + r * Cout);
  for (int64_t bb = 0; bb < B; ++bb)
    for (int64_t l = 0; l < L; ++l) {
      const T* xr = xv.data() + (bb * L + l) * Cin;
      for (int64_t k = 0; k < K; ++k) {
        const int64_t ol = l + k - a.crop_left;
        if (ol < 0 || ol >= Lo) continue;
        T* yr = y.data() + (bb * Lo + ol) * Cout;
        const T* wk = wt.data() + k * Cin * Cout;
        for (int64_t ci = 0; ci < Cin; ++ci) {
          const T xvl = xr[ci];
          if (xvl == T(0)) continue;
          const T* wr = wk + ci * Cout;
          for (int64_t co = 0; co < Cout; ++co) yr[co] += xvl * wr[co];
        }
      }
    }

  std::vector<Var> parents = b == kNoVar ? std::vector<Var>{x, w}
                                         : std::vector<Var>{x, w, b};
  return g.make(
      std::move(y), std::move(parents), "conv1d_transpose",
      [x, w, b, a, B, L, Cin, Cout, K, Lo, wt](Graph<T>& gg, Var o) {
        const Tensor<T>& go = gg.grad(o);
        const Tensor<T>& xv2 = gg.val(x);
        const bool nx = gg.needs(x), nw = gg.needs(w);
        std::vector<T> dwt(size_t(K * Cin * Cout), T(0));
        for (int64_t bb = 0; bb < B; ++bb)
          for (int64_t l = 0; l < L; ++l) {
            const T* xr = xv2.data() + (bb * L + l) * Cin;
            T* dxr = nx ? gg.grad(x).data() + (bb * L + l) * Cin : nullptr;
            for (int64_t k = 0; k < K; ++k) {
              const int64_t ol = l + k - a.crop_left;
              if (ol < 0 || ol >= Lo) continue;
              const T* gr = go.data() + (bb * Lo + ol) * Cout;
              const T* wk = wt.data() + k * Cin * Cout;
              T* dwk = dwt.data() + k * Cin * Cout;
              for (int64_t ci = 0; ci < Cin; ++ci) {
                if (nx) {
                  const T* wr = wk + ci * Cout;
                  T acc = 0;
                  for (int64_t co = 0; co < Cout; ++co)
                    acc += wr[co] * gr[co];
                  dxr[ci] += acc;
                }
                if (nw) {
                  const T xvl = xr[ci];
                  T* dwr = dwk + ci * Cout;
                  for (int64_t co = 0; co < Cout; ++co)
                    dwr[co] += xvl * gr[co];
                }
              }
            }
          }
        if (nw) {
          Tensor<T>& gw = gg.grad(w);
          for (int64_t ci = 0; ci < Cin; ++ci)
            for (int64_t co = 0; co < Cout; ++co)
              for (int64_t k = 0; k < K; ++k)
                gw(ci, co, k) += dwt[size_t((k * Cin + ci) * Cout + co)];
        }
        if (b != kNoVar && gg.needs(b)) {
          T* db = gg.grad(b).data();
          for (int64_t r = 0; r < B * Lo; ++r) {
            const T* gr = go.data() + r * Cout;
            for (int64_t co = 0; co < Cout; ++co) db[co] += gr[co];
          }
        }
      });
}

// Per-channel normalization of x (C, ...) over all trailing axes, with
// learnable affine (gamma, beta), epsilon inside the square root.
template <typename T>
Var instance_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps = T(1e-5)) {
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(xv.rank() >= 2, ShapeError, "instance_norm: rank must be >= 2");
  const int64_t C = xv.dim(0);
  const int64_t m = xv.numel() / C;
  MCSE_CHECK(g.val(gamma).numel() == C && g.val(beta).numel() == C, ShapeError,
             "instance_norm: affine parameter shape mismatch");

  std::vector<T> mu(size_t(C), T(0)), inv(size_t(C), T(0));
  Tensor<T> y(xv.shape());
  const T* gam = g.val(gamma).data();
  const T* bet = g.val(beta).data();
  for (int64_t c = 0; c < C; ++c) {
    const T* xr = xv.data() + c * m;
    T s = 0;
    for (int64_t i = 0; i < m; ++i) s += xr[i];
    const T mean = s / T(m);
    T v = 0;
    for (int64_t i = 0; i < m; ++i) {
      const T d = xr[i] - mean;
      v += d * d;
    }
    const T ivar = T(1) / std::sqrt(v / T(m) + eps);
    mu[size_t(c)] = mean;
    inv[size_t(c)] = ivar;
    T* yr = y.data() + c * m;
    for (int64_t i = 0; i < m; ++i)
      yr[i] = gam[c] * (xr[i] - mean) * ivar + bet[c];
  }

  return g.make(
      std::move(y), {x, gamma, beta}, "instance_norm",
      [x, gamma, beta, C, m, mu, inv](Graph<T>& gg, Var o) {
        const Tensor<T>& go = gg.grad(o);
        const Tensor<T>& xv2 = gg.val(x);
        const T* gam = gg.val(gamma).data();
        const bool nx = gg.needs(x);
        const bool ng = gg.needs(gamma), nb = gg.needs(beta);
        for (int64_t c = 0; c < C; ++c) {
          const T* xr = xv2.data() + c * m;
          const T* gr = go.data() + c * m;
          const T mean = mu[size_t(c)], ivar = inv[size_t(c)];
          T sum_g = 0, sum_gx = 0;
          for (int64_t i = 0; i < m; ++i) {
            const T xh = (xr[i] - mean) * ivar;
            sum_g += gr[i];
            sum_gx += gr[i] * xh;
          }
          if (ng) gg.grad(gamma)[c] += sum_gx;
          if (nb) gg.grad(beta)[c] += sum_g;
          if (nx) {
            T* dxr = gg.grad(x).data() + c * m;
            const T k1 = gam[c] * ivar;
            const T c1 = sum_g / T(m);
            const T c2 = sum_gx / T(m);
            for (int64_t i = 0; i < m; ++i) {
              const T xh = (xr[i] - mean) * ivar;
              dxr[i] += k1 * (gr[i] - c1 - xh * c2);
            }
          }
        }
      });
}

// PReLU with one learnable slope per channel along `axis`.
template <typename T>
Var prelu(Graph<T>& g, Var x, Var slope, int axis = 0) {
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(axis >= 0 && axis < xv.rank(), ShapeError, "prelu: bad axis");
  const int64_t C = xv.dim(axis);
  MCSE_CHECK(g.val(slope).numel() == C, ShapeError,
             "prelu: slope count must match channel axis");
  int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  for (int i = 0; i < axis; ++i) outer *= xv.dim(i);

  const T* sl = g.val(slope).data();
  Tensor<T> y(xv.shape());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t c = 0; c < C; ++c) {
      const T s = sl[c];
      const T* xr = xv.data() + (o * C + c) * inner;
      T* yr = y.data() + (o * C + c) * inner;
      for (int64_t i = 0; i < inner; ++i)
        yr[i] = xr[i] > T(0) ? xr[i] : s * xr[i];
    }

  return g.make(std::move(y), {x, slope}, "prelu",
                [x, slope, C, inner, outer](Graph<T>& gg, Var o) {
                  const Tensor<T>& go = gg.grad(o);
                  const Tensor<T>& xv2 = gg.val(x);
                  const T* sl = gg.val(slope).data();
                  const bool nx = gg.needs(x), ns = gg.needs(slope);
                  for (int64_t oo = 0; oo < outer; ++oo)
                    for (int64_t c = 0; c < C; ++c) {
                      const T s = sl[c];
                      const T* xr = xv2.data() + (oo * C + c) * inner;
                      const T* gr = go.data() + (oo * C + c) * inner;
                      T* dxr =
                          nx ? gg.grad(x).data() + (oo * C + c) * inner
                             : nullptr;
                      T acc = 0;
                      for (int64_t i = 0; i < inner; ++i) {
                        if (xr[i] > T(0)) {
                          if (nx) dxr[i] += gr[i];
                        } else {
                          if (nx) dxr[i] += s * gr[i];
                          acc += gr[i] * xr[i];
                        }
                      }
                      if (ns) gg.grad(slope)[c] += acc;
                    }
                });
}

// Bounded mask activation: beta * sigmoid(alpha_f * z) with one learnable
// alpha per frequency bin (z is T x F, alpha is F). The sigmoid value is
// clamped to [1e-7, 1 - 1e-7] so the output stays strictly inside (0, beta)
// in finite float arithmetic.
template <typename T>
Var learnable_sigmoid(Graph<T>& g, Var z, Var alpha, T beta) {
  const Tensor<T>& zv = g.val(z);
  MCSE_CHECK(zv.rank() == 2, ShapeError, "learnable_sigmoid: z must be TxF");
  const int64_t Tn = zv.dim(0), F = zv.dim(1);
  MCSE_CHECK(g.val(alpha).numel() == F, ShapeError,
             "learnable_sigmoid: alpha must have one entry per bin");
  const T lo = T(1e-7), hi = T(1) - T(1e-7);
  const T* al = g.val(alpha).data();
  Tensor<T> y({Tn, F});
  for (int64_t t = 0; t < Tn; ++t) {
    const T* zr = zv.data() + t * F;
    T* yr = y.data() + t * F;
    for (int64_t f = 0; f < F; ++f) {
      T s = detail::stable_sigmoid(al[f] * zr[f]);
      s = std::min(hi, std::max(lo, s));
      yr[f] = beta * s;
    }
  }
  return g.make(std::move(y), {z, alpha}, "learnable_sigmoid",
                [z, alpha, beta, Tn, F](Graph<T>& gg, Var o) {
                  const Tensor<T>& go = gg.grad(o);
                  const Tensor<T>& zv2 = gg.val(z);
                  const Tensor<T>& yv = gg.val(o);
                  const T* al = gg.val(alpha).data();
                  const bool nz = gg.needs(z), na = gg.needs(alpha);
                  for (int64_t t = 0; t < Tn; ++t) {
                    const T* zr = zv2.data() + t * F;
                    const T* yr = yv.data() + t * F;
                    const T* gr = go.data() + t * F;
                    T* dzr = nz ? gg.grad(z).data() + t * F : nullptr;
                    for (int64_t f = 0; f < F; ++f) {
                      const T s = yr[f] / beta;
                      const T d = gr[f] * beta * s * (T(1) - s);
                      if (nz) dzr[f] += d * al[f];
                      if (na) gg.grad(alpha)[f] += d * zr[f];
                    }
                  }
                });
}

}  // namespace mcse::ad
