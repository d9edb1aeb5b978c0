#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mcse/autodiff.hpp"
#include "mcse/rng.hpp"

namespace mcse::ad {

struct GradCheckReport {
  std::string case_name;
  double max_rel_err = 0.0;
  std::string worst_param;
  bool pass = false;
  int64_t checked = 0;

  std::string summary() const {
    return case_name + ": " + (pass ? "pass" : "FAIL") +
           " (max rel err " + std::to_string(max_rel_err) + " at " +
           (worst_param.empty() ? "-" : worst_param) + ", " +
           std::to_string(checked) + " elements)";
  }
};

// Central finite differences in double precision against the recorded
// backward pass. Every element of every parameter in the store is perturbed;
// `forward` must rebuild the graph from the store's current values.
inline GradCheckReport grad_check(
    const std::string& case_name, ParamStore<double>& store,
    const std::function<Var(Graph<double>&)>& forward, double step = 1e-5,
    double tol = 1e-4) {
  MCSE_CHECK(store.size() > 0, ContractError,
             "grad_check: no parameters to check");

  store.zero_grad();
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    const Var loss = forward(g);
    g.backward(loss);
  }
  analytic.reserve(store.size());
  for (size_t p = 0; p < store.size(); ++p)
    analytic.push_back(store.at(p).grad);

  auto eval = [&]() {
    Graph<double> g;
    const Var loss = forward(g);
    return g.val(loss)[0];
  };

  GradCheckReport rep;
  rep.case_name = case_name;
  for (size_t p = 0; p < store.size(); ++p) {
    Parameter<double>& par = store.at(p);
    for (int64_t i = 0; i < par.numel(); ++i) {
      const double v0 = par.value[i];
      par.value[i] = v0 + step;
      const double lp = eval();
      par.value[i] = v0 - step;
      const double lm = eval();
      par.value[i] = v0;
      const double fd = (lp - lm) / (2.0 * step);
      const double an = analytic[p][i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
      const double rel = std::abs(fd - an) / denom;
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = par.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

inline void fill_uniform(Parameter<double>& p, Rng& rng, double lo,
                         double hi) {
  for (int64_t i = 0; i < p.numel(); ++i) p.value[i] = rng.uniform(lo, hi);
}

}  // namespace mcse::ad
