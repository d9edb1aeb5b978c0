#pragma once

#include <cmath>

#include "mcse/autodiff.hpp"

namespace mcse::ad {

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    const int64_t da = i < r - ra ? 1 : a[i - (r - ra)];
    const int64_t db = i < r - rb ? 1 : b[i - (r - rb)];
    MCSE_CHECK(da == db || da == 1 || db == 1, ShapeError,
               std::string(op) + ": shapes " + shape_str(a) + " and " +
                   shape_str(b) + " are not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

// strides of `in` viewed under the broadcast shape `out` (0 where broadcast)
inline std::vector<int64_t> broadcast_strides(const Shape& in,
                                              const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  int64_t acc = 1;
  for (size_t i = 0; i < in.size(); ++i) {
    const size_t j = in.size() - 1 - i;
    st[out.size() - 1 - i] = in[j] == 1 ? 0 : acc;
    acc *= in[j];
  }
  return st;
}

// odometer walk over `out`, reporting (flat_out, off_a, off_b)
template <class F>
void bcast_iterate(const Shape& out, const std::vector<int64_t>& sa,
                   const std::vector<int64_t>& sb, F&& f) {
  const size_t r = out.size();
  const int64_t n = shape_numel(out);
  std::vector<int64_t> idx(r, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t o = 0; o < n; ++o) {
    f(o, oa, ob);
    for (size_t k = r; k-- > 0;) {
      ++idx[k];
      oa += sa[k];
      ob += sb[k];
      if (idx[k] < out[k]) break;
      oa -= sa[k] * out[k];
      ob -= sb[k] * out[k];
      idx[k] = 0;
    }
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

// ---- elementwise unary -----------------------------------------------------

template <typename T>
Var exp(Graph<T>& g, Var x) {
  Tensor<T> y(g.val(x).shape());
  const Tensor<T>& xv = g.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = std::exp(xv[i]);
  return g.make(std::move(y), {x}, "exp", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& yo = gg.val(out);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * yo[i];
  });
}

template <typename T>
Var cos(Graph<T>& g, Var x) {
  Tensor<T> y(g.val(x).shape());
  const Tensor<T>& xv = g.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = std::cos(xv[i]);
  return g.make(std::move(y), {x}, "cos", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& xv = gg.val(x);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i)
      gx[i] -= go[i] * std::sin(xv[i]);
  });
}

template <typename T>
Var sin(Graph<T>& g, Var x) {
  Tensor<T> y(g.val(x).shape());
  const Tensor<T>& xv = g.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = std::sin(xv[i]);
  return g.make(std::move(y), {x}, "sin", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& xv = gg.val(x);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i)
      gx[i] += go[i] * std::cos(xv[i]);
  });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var x) {
  Tensor<T> y(g.val(x).shape());
  const Tensor<T>& xv = g.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i)
    y[i] = detail::stable_sigmoid(xv[i]);
  return g.make(std::move(y), {x}, "sigmoid", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& yo = gg.val(out);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i)
      gx[i] += go[i] * yo[i] * (T(1) - yo[i]);
  });
}

template <typename T>
Var silu(Graph<T>& g, Var x) {
  Tensor<T> y(g.val(x).shape());
  const Tensor<T>& xv = g.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i)
    y[i] = xv[i] * detail::stable_sigmoid(xv[i]);
  return g.make(std::move(y), {x}, "silu", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& xv = gg.val(x);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i) {
      const T s = detail::stable_sigmoid(xv[i]);
      gx[i] += go[i] * (s + xv[i] * s * (T(1) - s));
    }
  });
}

template <typename T>
Var softplus(Graph<T>& g, Var x) {
  Tensor<T> y(g.val(x).shape());
  const Tensor<T>& xv = g.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i)
    y[i] = xv[i] > T(30) ? xv[i] : T(std::log1p(std::exp(double(xv[i]))));
  return g.make(std::move(y), {x}, "softplus", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& xv = gg.val(x);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i)
      gx[i] += go[i] * detail::stable_sigmoid(xv[i]);
  });
}

template <typename T>
Var abs(Graph<T>& g, Var x) {
  Tensor<T> y(g.val(x).shape());
  const Tensor<T>& xv = g.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = std::abs(xv[i]);
  return g.make(std::move(y), {x}, "abs", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& xv = gg.val(x);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i) {
      const T s = xv[i] > T(0) ? T(1) : (xv[i] < T(0) ? T(-1) : T(0));
      gx[i] += go[i] * s;
    }
  });
}

// x^p for x >= 0. Gradient at x == 0 is defined as 0 (only exponents > 1 are
// differentiated in this codebase).
template <typename T>
Var power(Graph<T>& g, Var x, double p) {
  const Tensor<T>& xv = g.val(x);
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i) {
    MCSE_CHECK(xv[i] >= T(0), DomainError, "power: negative base");
    y[i] = T(std::pow(double(xv[i]), p));
  }
  return g.make(std::move(y), {x}, "power", [x, p](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& xv = gg.val(x);
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i) {
      const T d = xv[i] == T(0)
                      ? T(0)
                      : T(p * std::pow(double(xv[i]), p - 1.0));
      gx[i] += go[i] * d;
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var x, T c) {
  const Tensor<T>& xv = g.val(x);
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = c * xv[i];
  return g.make(std::move(y), {x}, "scale", [x, c](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i) gx[i] += c * go[i];
  });
}

template <typename T>
Var offset(Graph<T>& g, Var x, T c) {
  const Tensor<T>& xv = g.val(x);
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = c + xv[i];
  return g.make(std::move(y), {x}, "offset", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
  });
}

// ---- elementwise binary (numpy-style broadcasting) -------------------------

namespace detail {

template <typename T, int Kind>  // 0 add, 1 sub, 2 mul
Var binary_op(Graph<T>& g, Var a, Var b, const char* name) {
  const Tensor<T>& av = g.val(a);
  const Tensor<T>& bv = g.val(b);
  if (av.same_shape(bv)) {
    Tensor<T> y(av.shape());
    for (int64_t i = 0; i < av.numel(); ++i) {
      if constexpr (Kind == 0) y[i] = av[i] + bv[i];
      if constexpr (Kind == 1) y[i] = av[i] - bv[i];
      if constexpr (Kind == 2) y[i] = av[i] * bv[i];
    }
    return g.make(std::move(y), {a, b}, name, [a, b](Graph<T>& gg, Var out) {
      const Tensor<T>& go = gg.grad(out);
      if (gg.needs(a)) {
        Tensor<T>& ga = gg.grad(a);
        if constexpr (Kind == 2) {
          const Tensor<T>& bv2 = gg.val(b);
          for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * bv2[i];
        } else {
          for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
        }
      }
      if (gg.needs(b)) {
        Tensor<T>& gb = gg.grad(b);
        if constexpr (Kind == 0) {
          for (int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i];
        } else if constexpr (Kind == 1) {
          for (int64_t i = 0; i < go.numel(); ++i) gb[i] -= go[i];
        } else {
          const Tensor<T>& av2 = gg.val(a);
          for (int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * av2[i];
        }
      }
    });
  }

  const Shape os = broadcast_shape(av.shape(), bv.shape(), name);
  const auto sa = broadcast_strides(av.shape(), os);
  const auto sb = broadcast_strides(bv.shape(), os);
  Tensor<T> y(os);
  bcast_iterate(os, sa, sb, [&](int64_t o, int64_t ia, int64_t ib) {
    if constexpr (Kind == 0) y[o] = av[ia] + bv[ib];
    if constexpr (Kind == 1) y[o] = av[ia] - bv[ib];
    if constexpr (Kind == 2) y[o] = av[ia] * bv[ib];
  });
  return g.make(std::move(y), {a, b}, name,
                [a, b, os, sa, sb](Graph<T>& gg, Var out) {
                  const Tensor<T>& go = gg.grad(out);
                  const bool na = gg.needs(a), nb = gg.needs(b);
                  const Tensor<T>& av2 = gg.val(a);
                  const Tensor<T>& bv2 = gg.val(b);
                  Tensor<T>& ga = gg.grad(a);
                  Tensor<T>& gb = gg.grad(b);
                  bcast_iterate(os, sa, sb,
                                [&](int64_t o, int64_t ia, int64_t ib) {
                                  if constexpr (Kind == 0) {
                                    if (na) ga[ia] += go[o];
                                    if (nb) gb[ib] += go[o];
                                  } else if constexpr (Kind == 1) {
                                    if (na) ga[ia] += go[o];
                                    if (nb) gb[ib] -= go[o];
                                  } else {
                                    if (na) ga[ia] += go[o] * bv2[ib];
                                    if (nb) gb[ib] += go[o] * av2[ia];
                                  }
                                });
                });
}

}  // namespace detail

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  return detail::binary_op<T, 0>(g, a, b, "add");
}
template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  return detail::binary_op<T, 1>(g, a, b, "sub");
}
template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  return detail::binary_op<T, 2>(g, a, b, "mul");
}

// atan2(y, x), elementwise, same shapes. (0,0) maps to 0 with zero gradient;
// an exact -pi result is folded to +pi so outputs live in (-pi, pi].
template <typename T>
Var atan2(Graph<T>& g, Var y, Var x) {
  const Tensor<T>& yv = g.val(y);
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(yv.same_shape(xv), ShapeError, "atan2: shape mismatch");
  Tensor<T> out(yv.shape());
  const T pi = T(kPi);
  for (int64_t i = 0; i < yv.numel(); ++i) {
    if (yv[i] == T(0) && xv[i] == T(0)) {
      out[i] = T(0);
    } else {
      T a = std::atan2(yv[i], xv[i]);
      if (a == -pi) a = pi;
      out[i] = a;
    }
  }
  return g.make(std::move(out), {y, x}, "atan2",
                [y, x](Graph<T>& gg, Var o) {
                  const Tensor<T>& yv2 = gg.val(y);
                  const Tensor<T>& xv2 = gg.val(x);
                  const Tensor<T>& go = gg.grad(o);
                  const bool ny = gg.needs(y), nx = gg.needs(x);
                  for (int64_t i = 0; i < go.numel(); ++i) {
                    const T d = yv2[i] * yv2[i] + xv2[i] * xv2[i];
                    if (d == T(0)) continue;
                    if (ny) gg.grad(y)[i] += go[i] * xv2[i] / d;
                    if (nx) gg.grad(x)[i] -= go[i] * yv2[i] / d;
                  }
                });
}

// ---- shape ops --------------------------------------------------------------

template <typename T>
Var reshape(Graph<T>& g, Var x, Shape shape) {
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(shape_numel(shape) == xv.numel(), ShapeError,
             "reshape: element count mismatch");
  Tensor<T> y(std::move(shape), xv.vec());
  return g.make(std::move(y), {x}, "reshape", [x](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const Tensor<T>& go = gg.grad(out);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
  });
}

namespace detail {

template <typename T>
void permute_copy(const Tensor<T>& in, const std::vector<int>& perm,
                  Tensor<T>& out, bool accumulate_back) {
  const int r = in.rank();
  std::vector<int64_t> in_strides(size_t(r), 1);
  for (int i = r - 2; i >= 0; --i)
    in_strides[size_t(i)] = in_strides[size_t(i + 1)] * in.dim(i + 1);
  // stride of output axis k in the input = stride of in axis perm[k]
  std::vector<int64_t> st(size_t(r), 0);
  for (int k = 0; k < r; ++k) st[size_t(k)] = in_strides[size_t(perm[size_t(k)])];
  const Shape& os = out.shape();
  std::vector<int64_t> idx(size_t(r), 0);
  int64_t off = 0;
  const int64_t n = in.numel();
  for (int64_t o = 0; o < n; ++o) {
    if (accumulate_back)
      const_cast<Tensor<T>&>(in).vec()[size_t(off)] += out[o];
    else
      out[o] = in[off];
    for (int k = r; k-- > 0;) {
      ++idx[size_t(k)];
      off += st[size_t(k)];
      if (idx[size_t(k)] < os[size_t(k)]) break;
      off -= st[size_t(k)] * os[size_t(k)];
      idx[size_t(k)] = 0;
    }
  }
}

}  // namespace detail

template <typename T>
Var permute(Graph<T>& g, Var x, std::vector<int> perm) {
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(int(perm.size()) == xv.rank(), ShapeError,
             "permute: rank mismatch");
  Shape os(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) os[i] = xv.dim(perm[i]);
  Tensor<T> y(os);
  detail::permute_copy(xv, perm, y, false);
  return g.make(std::move(y), {x}, "permute",
                [x, perm](Graph<T>& gg, Var out) {
                  if (!gg.needs(x)) return;
                  detail::permute_copy(gg.grad(x), perm, gg.grad(out), true);
                });
}

template <typename T>
Var flip(Graph<T>& g, Var x, int axis) {
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(axis >= 0 && axis < xv.rank(), ShapeError, "flip: bad axis");
  const int64_t n_axis = xv.dim(axis);
  int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
  Tensor<T> y(xv.shape());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t a = 0; a < n_axis; ++a) {
      const T* src = xv.data() + (o * n_axis + a) * inner;
      T* dst = y.data() + (o * n_axis + (n_axis - 1 - a)) * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] = src[i];
    }
  return g.make(std::move(y), {x}, "flip",
                [x, n_axis, inner, outer](Graph<T>& gg, Var out) {
                  if (!gg.needs(x)) return;
                  const Tensor<T>& go = gg.grad(out);
                  Tensor<T>& gx = gg.grad(x);
                  for (int64_t o = 0; o < outer; ++o)
                    for (int64_t a = 0; a < n_axis; ++a) {
                      const T* src = go.data() + (o * n_axis + a) * inner;
                      T* dst =
                          gx.data() + (o * n_axis + (n_axis - 1 - a)) * inner;
                      for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
                    }
                });
}

template <typename T>
Var slice(Graph<T>& g, Var x, int axis, int64_t start, int64_t len) {
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(axis >= 0 && axis < xv.rank(), ShapeError, "slice: bad axis");
  MCSE_CHECK(start >= 0 && len >= 1 && start + len <= xv.dim(axis), ShapeError,
             "slice: range out of bounds");
  const int64_t n_axis = xv.dim(axis);
  int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
  Shape os = xv.shape();
  os[size_t(axis)] = len;
  Tensor<T> y(os);
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(xv.data() + (o * n_axis + start) * inner, len * inner,
                y.data() + o * len * inner);
  return g.make(std::move(y), {x}, "slice",
                [x, n_axis, inner, outer, start, len](Graph<T>& gg, Var out) {
                  if (!gg.needs(x)) return;
                  const Tensor<T>& go = gg.grad(out);
                  Tensor<T>& gx = gg.grad(x);
                  for (int64_t o = 0; o < outer; ++o) {
                    const T* src = go.data() + o * len * inner;
                    T* dst = gx.data() + (o * n_axis + start) * inner;
                    for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                  }
                });
}

template <typename T>
Var concat(Graph<T>& g, const std::vector<Var>& xs, int axis) {
  MCSE_CHECK(!xs.empty(), ContractError, "concat: no inputs");
  const Tensor<T>& first = g.val(xs[0]);
  const int r = first.rank();
  MCSE_CHECK(axis >= 0 && axis < r, ShapeError, "concat: bad axis");
  int64_t total = 0;
  for (Var v : xs) {
    const Tensor<T>& t = g.val(v);
    MCSE_CHECK(t.rank() == r, ShapeError, "concat: rank mismatch");
    for (int i = 0; i < r; ++i)
      MCSE_CHECK(i == axis || t.dim(i) == first.dim(i), ShapeError,
                 "concat: non-axis dimension mismatch");
    total += t.dim(axis);
  }
  Shape os = first.shape();
  os[size_t(axis)] = total;
  int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < r; ++i) inner *= first.dim(i);
  for (int i = 0; i < axis; ++i) outer *= first.dim(i);

  Tensor<T> y(os);
  std::vector<int64_t> sizes;
  int64_t pos = 0;
  for (Var v : xs) {
    const Tensor<T>& t = g.val(v);
    const int64_t na = t.dim(axis);
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(t.data() + o * na * inner, na * inner,
                  y.data() + (o * total + pos) * inner);
    sizes.push_back(na);
    pos += na;
  }
  return g.make(std::move(y), xs, "concat",
                [xs, sizes, inner, outer, total](Graph<T>& gg, Var out) {
                  const Tensor<T>& go = gg.grad(out);
                  int64_t p = 0;
                  for (size_t k = 0; k < xs.size(); ++k) {
                    const int64_t na = sizes[k];
                    if (gg.needs(xs[k])) {
                      Tensor<T>& gx = gg.grad(xs[k]);
                      for (int64_t o = 0; o < outer; ++o) {
                        const T* src = go.data() + (o * total + p) * inner;
                        T* dst = gx.data() + o * na * inner;
                        for (int64_t i = 0; i < na * inner; ++i)
                          dst[i] += src[i];
                      }
                    }
                    p += na;
                  }
                });
}

// ---- reductions & matmul ----------------------------------------------------

template <typename T>
Var mean(Graph<T>& g, Var x) {
  const Tensor<T>& xv = g.val(x);
  MCSE_CHECK(xv.numel() > 0, ContractError, "mean: empty input");
  T acc = 0;
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  const int64_t n = xv.numel();
  Tensor<T> y = Tensor<T>::scalar(acc / T(n));
  return g.make(std::move(y), {x}, "mean", [x, n](Graph<T>& gg, Var out) {
    if (!gg.needs(x)) return;
    const T go = gg.grad(out)[0] / T(n);
    Tensor<T>& gx = gg.grad(x);
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += go;
  });
}

// (B, m, k) x (B, k, n) -> (B, m, n)
template <typename T>
Var bmm(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& av = g.val(a);
  const Tensor<T>& bv = g.val(b);
  MCSE_CHECK(av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0) &&
                 av.dim(2) == bv.dim(1),
             ShapeError, "bmm: incompatible shapes");
  const int64_t B = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor<T> y({B, m, n});
  for (int64_t bb = 0; bb < B; ++bb) {
    const T* A = av.data() + bb * m * k;
    const T* Bm = bv.data() + bb * k * n;
    T* Y = y.data() + bb * m * n;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t kk = 0; kk < k; ++kk) {
        const T s = A[i * k + kk];
        const T* brow = Bm + kk * n;
        T* yrow = Y + i * n;
        for (int64_t j = 0; j < n; ++j) yrow[j] += s * brow[j];
      }
  }
  return g.make(std::move(y), {a, b}, "bmm",
                [a, b, B, m, k, n](Graph<T>& gg, Var out) {
                  const Tensor<T>& go = gg.grad(out);
                  const Tensor<T>& av2 = gg.val(a);
                  const Tensor<T>& bv2 = gg.val(b);
                  for (int64_t bb = 0; bb < B; ++bb) {
                    const T* G = go.data() + bb * m * n;
                    const T* A = av2.data() + bb * m * k;
                    const T* Bm = bv2.data() + bb * k * n;
                    if (gg.needs(a)) {
                      T* gA = gg.grad(a).data() + bb * m * k;
                      for (int64_t i = 0; i < m; ++i)
                        for (int64_t kk = 0; kk < k; ++kk) {
                          T acc = 0;
                          const T* grow = G + i * n;
                          const T* brow = Bm + kk * n;
                          for (int64_t j = 0; j < n; ++j)
                            acc += grow[j] * brow[j];
                          gA[i * k + kk] += acc;
                        }
                    }
                    if (gg.needs(b)) {
                      T* gB = gg.grad(b).data() + bb * k * n;
                      for (int64_t i = 0; i < m; ++i)
                        for (int64_t kk = 0; kk < k; ++kk) {
                          const T s = A[i * k + kk];
                          const T* grow = G + i * n;
                          T* gbrow = gB + kk * n;
                          for (int64_t j = 0; j < n; ++j)
                            gbrow[j] += s * grow[j];
                        }
                    }
                  }
                });
}

}  // namespace mcse::ad
