#pragma once

#include <cmath>

#include "mcse/autodiff.hpp"
#include "mcse/rng.hpp"

namespace mcse::ad {

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), the default for dense/conv
// weights in this codebase
template <typename T>
void init_uniform_fan(Parameter<T>& p, int64_t fan_in, Rng& rng) {
  const double a = 1.0 / std::sqrt(double(std::max<int64_t>(1, fan_in)));
  for (int64_t i = 0; i < p.numel(); ++i) p.value[i] = T(rng.uniform(-a, a));
}

template <typename T>
void init_const(Parameter<T>& p, T v) {
  p.value.fill(v);
}

}  // namespace mcse::ad
