#pragma once

#include "mcse/autodiff.hpp"
#include "mcse/config.hpp"

namespace mcse {

// Adaptive moments with decoupled weight decay: the decay multiplies the
// weights directly by (1 - lr * wd) before the moment update is applied.
template <typename T>
class AdamW {
 public:
  AdamW(ad::ParamStore<T>& params, const TrainConfig& cfg)
      : params_(params),
        beta1_(T(cfg.beta1)),
        beta2_(T(cfg.beta2)),
        eps_(T(cfg.adam_eps)),
        weight_decay_(T(cfg.weight_decay)) {
    for (size_t i = 0; i < params_.size(); ++i) {
      m_.emplace_back(params_.at(i).value.shape());
      v_.emplace_back(params_.at(i).value.shape());
    }
  }

  int64_t steps() const { return t_; }

  // Scales all gradients so the global L2 norm is at most max_norm.
  // Returns the pre-clip norm.
  double clip_grad_norm(double max_norm) {
    double sq = 0;
    for (size_t i = 0; i < params_.size(); ++i) {
      const Tensor<T>& gr = params_.at(i).grad;
      for (int64_t k = 0; k < gr.numel(); ++k)
        sq += double(gr[k]) * double(gr[k]);
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
      const T s = T(max_norm / norm);
      for (size_t i = 0; i < params_.size(); ++i) {
        Tensor<T>& gr = params_.at(i).grad;
        for (int64_t k = 0; k < gr.numel(); ++k) gr[k] *= s;
      }
    }
    return norm;
  }

  void step(double lr) {
    ++t_;
    const T bc1 = T(1) - T(std::pow(double(beta1_), double(t_)));
    const T bc2 = T(1) - T(std::pow(double(beta2_), double(t_)));
    const T lrt = T(lr);
    for (size_t i = 0; i < params_.size(); ++i) {
      ad::Parameter<T>& p = params_.at(i);
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (int64_t k = 0; k < p.numel(); ++k) {
        const T g = p.grad[k];
        p.value[k] *= (T(1) - lrt * weight_decay_);
        m[k] = beta1_ * m[k] + (T(1) - beta1_) * g;
        v[k] = beta2_ * v[k] + (T(1) - beta2_) * g * g;
        const T mhat = m[k] / bc1;
        const T vhat = v[k] / bc2;
        p.value[k] -= lrt * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grad() { params_.zero_grad(); }

 private:
  ad::ParamStore<T>& params_;
  std::vector<Tensor<T>> m_, v_;
  T beta1_, beta2_, eps_, weight_decay_;
  int64_t t_ = 0;
};

}  // namespace mcse
