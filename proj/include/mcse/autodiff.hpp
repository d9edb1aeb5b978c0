#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mcse/tensor.hpp"

namespace mcse::ad {

using Var = int32_t;
inline constexpr Var kNoVar = -1;

// A named, persistent learnable tensor. Gradients accumulate across
// backward() calls until zero_grad().
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  int64_t numel() const { return value.numel(); }
  void zero_grad() { grad.fill(T(0)); }
};

// Registration-ordered parameter container. Iteration order is stable, which
// keeps checkpoints and optimizer sweeps deterministic.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& create(const std::string& name, Shape shape) {
    MCSE_CHECK(index_.find(name) == index_.end(), ConfigError,
               "ParamStore: duplicate parameter name " + name);
    index_[name] = items_.size();
    items_.push_back(std::make_unique<Parameter<T>>(name, std::move(shape)));
    return *items_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }

  size_t size() const { return items_.size(); }
  Parameter<T>& at(size_t i) { return *items_[i]; }
  const Parameter<T>& at(size_t i) const { return *items_[i]; }

  void zero_grad() {
    for (auto& p : items_) p->zero_grad();
  }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& p : items_) n += p->numel();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
  std::map<std::string, size_t> index_;
};

// Dynamic tape. Nodes are appended in execution order, so walking the tape
// backwards is a valid reverse topological order.
template <typename T>
class Graph {
 public:
  using BackFn = std::function<void(Graph&, Var)>;

  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    std::vector<Var> parents;
    BackFn back;
    const char* op;
    bool needs_grad;
    Parameter<T>* bound = nullptr;
  };

  Var constant(Tensor<T> v, const char* op = "constant") {
    return push(std::move(v), {}, op, nullptr, false, nullptr);
  }

  Var param(Parameter<T>& p) {
    return push(p.value, {}, "param", nullptr, true, &p);
  }

  Var make(Tensor<T> val, std::vector<Var> parents, const char* op,
           BackFn back) {
    bool needs = false;
    for (Var p : parents) needs = needs || node(p).needs_grad;
#ifndef NDEBUG
    MCSE_CHECK(val.all_finite(), NumericError,
               std::string("non-finite forward value from op ") + op);
#endif
    return push(std::move(val), std::move(parents), op, std::move(back), needs,
                nullptr);
  }

  Node& node(Var v) { return nodes_[size_t(v)]; }
  const Node& node(Var v) const { return nodes_[size_t(v)]; }
  Tensor<T>& val(Var v) { return nodes_[size_t(v)].val; }
  const Tensor<T>& val(Var v) const { return nodes_[size_t(v)].val; }
  Tensor<T>& grad(Var v) { return nodes_[size_t(v)].grad; }
  bool needs(Var v) const { return nodes_[size_t(v)].needs_grad; }
  size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Gradients land in the bound Parameters
  // additively (two calls double them). With release_buffers the tape frees
  // node values/gradients as soon as they are consumed, which roughly halves
  // peak memory during training but makes a second backward() invalid.
  void backward(Var loss, bool release_buffers = false) {
    MCSE_CHECK(loss >= 0 && size_t(loss) < nodes_.size(), ContractError,
               "backward: invalid loss var");
    MCSE_CHECK(val(loss).numel() == 1, ContractError,
               "backward: loss must be a scalar");
    if (!node(loss).needs_grad) return;  // nothing reachable from parameters

    for (Var v = 0; v <= loss; ++v) {
      Node& n = node(v);
      if (n.needs_grad) n.grad = Tensor<T>::zeros(n.val.shape());
    }
    grad(loss)[0] = T(1);

    for (Var v = loss; v >= 0; --v) {
      Node& n = node(v);
      if (!n.needs_grad) continue;
      if (n.back) n.back(*this, v);
      if (n.bound) {
        Tensor<T>& pg = n.bound->grad;
        for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
      }
      if (release_buffers && !n.bound) {
        n.grad = Tensor<T>();
        if (n.back) n.val = Tensor<T>();
      }
    }
  }

 private:
  Var push(Tensor<T> val, std::vector<Var> parents, const char* op,
           BackFn back, bool needs, Parameter<T>* bound) {
    Node n;
    n.val = std::move(val);
    n.parents = std::move(parents);
    n.back = std::move(back);
    n.op = op;
    n.needs_grad = needs;
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Var(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace mcse::ad
