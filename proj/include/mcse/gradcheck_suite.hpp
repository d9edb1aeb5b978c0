#pragma once

#include <memory>

#include "mcse/gradcheck.hpp"
#include "mcse/loss.hpp"
#include "mcse/mamba.hpp"
#include "mcse/network.hpp"
#include "mcse/ops_registry.hpp"

namespace mcse::ad::suite {

struct SuiteCase {
  std::string name;
  std::function<GradCheckReport(uint64_t)> run;
};

namespace detail {

inline Tensor<double> rand_tensor(Shape s, Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  Tensor<double> t(std::move(s));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// loss = mean(x * random_weights): random weighting makes element routing
// visible to the finite-difference probe (a plain mean would not catch
// permutation/indexing mistakes)
inline Var weighted_mean(Graph<double>& g, Var x, const Tensor<double>& w) {
  return mean(g, mul(g, x, g.constant(w, "probe_weights")));
}

using Setup = std::function<std::function<Var(Graph<double>&)>(
    ParamStore<double>&, Rng&)>;

inline SuiteCase make_case(const std::string& name, Setup setup,
                           double tol = 1e-4) {
  return {name, [name, setup, tol](uint64_t seed) {
            auto store = std::make_shared<ParamStore<double>>();
            Rng rng(seed ^ 0x67636bULL);
            auto fwd = setup(*store, rng);
            return grad_check(name, *store, fwd, 1e-5, tol);
          }};
}

// single input through a registry op, then a weighted mean
inline SuiteCase unary_case(const std::string& op, Shape in_shape,
                            double lo, double hi,
                            nlohmann::json attrs = {}) {
  return make_case(op, [op, in_shape, lo, hi, attrs](ParamStore<double>& ps,
                                                     Rng& rng) {
    auto& x = ps.create("x", in_shape);
    fill_uniform(x, rng, lo, hi);
    Shape out_shape = in_shape;
    if (op == "mean") out_shape = {1};
    auto probe = std::make_shared<Tensor<double>>();
    return [&ps, op, attrs, probe, out_shape,
            seed0 = rng.next_u64()](Graph<double>& g) mutable {
      const Var xv = g.param(*ps.find("x"));
      const Var y = apply_op(g, op, {xv}, attrs);
      if (probe->empty()) {
        Rng prng(seed0);
        *probe = rand_tensor(g.val(y).shape(), prng);
      }
      return weighted_mean(g, y, *probe);
    };
  });
}

}  // namespace detail

// Tiny-but-complete model used by the end-to-end gradient check: two mics,
// 16/4/16 analysis (9 bins), one TF block.
inline ModelConfig toy_model_config() {
  ModelConfig cfg;
  cfg.n_mics = 2;
  cfg.c_mid = 4;
  cfg.n_tf_blocks = 1;
  cfg.densenet_depth = 2;
  cfg.densenet_dilations = {1, 2};
  cfg.n_state = 2;
  cfg.wav_channels = 2;
  cfg.stft.window_len = 16;
  cfg.stft.hop = 4;
  cfg.stft.fft_len = 16;
  return cfg;
}

// One named case per cataloged operator plus the composite subgraphs
// (Mamba unit, TF block, toy generator with the full training loss).
inline std::vector<SuiteCase> standard_suite() {
  using detail::make_case;
  using detail::rand_tensor;
  using detail::unary_case;
  using detail::weighted_mean;
  std::vector<SuiteCase> cases;

  // kink-free ranges: |x| kept well above the FD step
  cases.push_back(unary_case("exp", {3, 4}, -1.5, 1.5));
  cases.push_back(unary_case("cos", {3, 4}, -2.0, 2.0));
  cases.push_back(unary_case("sin", {3, 4}, -2.0, 2.0));
  cases.push_back(unary_case("sigmoid", {3, 4}, -3.0, 3.0));
  cases.push_back(unary_case("silu", {3, 4}, -3.0, 3.0));
  cases.push_back(unary_case("softplus", {3, 4}, -3.0, 3.0));
  cases.push_back(unary_case("abs", {3, 4}, 0.3, 2.0));
  cases.push_back(unary_case("power", {3, 4}, 0.5, 2.0,
                             nlohmann::json{{"p", 10.0 / 3.0}}));
  cases.push_back(unary_case("scale", {3, 4}, -2.0, 2.0,
                             nlohmann::json{{"c", -1.7}}));
  cases.push_back(unary_case("offset", {3, 4}, -2.0, 2.0,
                             nlohmann::json{{"c", 0.9}}));
  cases.push_back(unary_case("mean", {4, 5}, -2.0, 2.0));
  cases.push_back(unary_case("flip", {3, 4, 2}, -2.0, 2.0,
                             nlohmann::json{{"axis", 1}}));
  cases.push_back(unary_case("slice", {3, 6, 2}, -2.0, 2.0,
                             nlohmann::json{{"axis", 1}, {"start", 1}, {"len", 4}}));
  cases.push_back(unary_case("reshape", {3, 4}, -2.0, 2.0,
                             nlohmann::json{{"shape", {2, 6}}}));
  cases.push_back(unary_case("permute", {2, 3, 4}, -2.0, 2.0,
                             nlohmann::json{{"perm", {2, 0, 1}}}));

  auto binary_case = [&](const std::string& op, Shape sa, Shape sb, double lo,
                         double hi) {
    return make_case(
        op + (sa == sb ? "" : "_broadcast"),
        [op, sa, sb, lo, hi](ParamStore<double>& ps, Rng& rng) {
          auto& a = ps.create("a", sa);
          auto& b = ps.create("b", sb);
          fill_uniform(a, rng, lo, hi);
          fill_uniform(b, rng, lo, hi);
          auto probe = std::make_shared<Tensor<double>>();
          return [&ps, op, probe, seed0 = rng.next_u64()](
                     Graph<double>& g) mutable {
            const Var y =
                apply_op(g, op, {g.param(*ps.find("a")), g.param(*ps.find("b"))});
            if (probe->empty()) {
              Rng prng(seed0);
              *probe = rand_tensor(g.val(y).shape(), prng);
            }
            return weighted_mean(g, y, *probe);
          };
        });
  };
  cases.push_back(binary_case("add", {3, 4}, {3, 4}, -2, 2));
  cases.push_back(binary_case("sub", {3, 4}, {3, 4}, -2, 2));
  cases.push_back(binary_case("mul", {3, 4}, {3, 4}, -2, 2));
  cases.push_back(binary_case("mul", {3, 4}, {4}, -2, 2));
  cases.push_back(binary_case("add", {2, 3, 4}, {1, 4}, -2, 2));

  cases.push_back(make_case("atan2", [](ParamStore<double>& ps, Rng& rng) {
    auto& i = ps.create("i", {3, 4});
    auto& r = ps.create("r", {3, 4});
    fill_uniform(i, rng, -0.5, 0.5);
    fill_uniform(r, rng, 0.5, 2.0);  // keep phase far from the wrap point
    auto probe = std::make_shared<Tensor<double>>();
    return [&ps, probe, seed0 = rng.next_u64()](Graph<double>& g) mutable {
      const Var y =
          apply_op(g, "atan2", {g.param(*ps.find("i")), g.param(*ps.find("r"))});
      if (probe->empty()) {
        Rng prng(seed0);
        *probe = rand_tensor(g.val(y).shape(), prng);
      }
      return weighted_mean(g, y, *probe);
    };
  }));

  cases.push_back(make_case("concat", [](ParamStore<double>& ps, Rng& rng) {
    auto& a = ps.create("a", {2, 3});
    auto& b = ps.create("b", {2, 2});
    fill_uniform(a, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    Rng prng(rng.next_u64());
    const auto probe = rand_tensor({2, 5}, prng);
    return [&ps, probe](Graph<double>& g) {
      const Var y = apply_op(g, "concat",
                             {g.param(*ps.find("a")), g.param(*ps.find("b"))},
                             nlohmann::json{{"axis", 1}});
      return weighted_mean(g, y, probe);
    };
  }));

  cases.push_back(make_case("bmm", [](ParamStore<double>& ps, Rng& rng) {
    auto& a = ps.create("a", {2, 3, 4});
    auto& b = ps.create("b", {2, 4, 2});
    fill_uniform(a, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    Rng prng(rng.next_u64());
    const auto probe = rand_tensor({2, 3, 2}, prng);
    return [&ps, probe](Graph<double>& g) {
      const Var y =
          apply_op(g, "bmm", {g.param(*ps.find("a")), g.param(*ps.find("b"))});
      return weighted_mean(g, y, probe);
    };
  }));

  cases.push_back(make_case("dense", [](ParamStore<double>& ps, Rng& rng) {
    auto& x = ps.create("x", {2, 5, 3});
    auto& w = ps.create("w", {4, 3});
    auto& b = ps.create("b", {4});
    fill_uniform(x, rng, -1, 1);
    fill_uniform(w, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    Rng prng(rng.next_u64());
    const auto probe = rand_tensor({2, 5, 4}, prng);
    return [&ps, probe](Graph<double>& g) {
      const Var y = apply_op(g, "dense",
                             {g.param(*ps.find("x")), g.param(*ps.find("w")),
                              g.param(*ps.find("b"))});
      return weighted_mean(g, y, probe);
    };
  }));

  cases.push_back(make_case("conv2d", [](ParamStore<double>& ps, Rng& rng) {
    auto& x = ps.create("x", {3, 6, 7});
    auto& w = ps.create("w", {2, 3, 3, 3});
    auto& b = ps.create("b", {2});
    fill_uniform(x, rng, -1, 1);
    fill_uniform(w, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    const nlohmann::json attrs{{"stride_w", 2}, {"dil_h", 2},
                               {"pad_h", 2},    {"pad_w", 1}};
    auto probe = std::make_shared<Tensor<double>>();
    return [&ps, attrs, probe, seed0 = rng.next_u64()](
               Graph<double>& g) mutable {
      const Var y = apply_op(g, "conv2d",
                             {g.param(*ps.find("x")), g.param(*ps.find("w")),
                              g.param(*ps.find("b"))},
                             attrs);
      if (probe->empty()) {
        Rng prng(seed0);
        *probe = rand_tensor(g.val(y).shape(), prng);
      }
      return weighted_mean(g, y, *probe);
    };
  }));

  cases.push_back(
      make_case("conv2d_transpose", [](ParamStore<double>& ps, Rng& rng) {
        auto& x = ps.create("x", {2, 5, 6});
        auto& w = ps.create("w", {2, 3, 1, 3});
        auto& b = ps.create("b", {3});
        fill_uniform(x, rng, -1, 1);
        fill_uniform(w, rng, -1, 1);
        fill_uniform(b, rng, -1, 1);
        const nlohmann::json attrs{{"stride_w", 2}, {"crop_w0", 1},
                                   {"crop_w1", 1}};
        auto probe = std::make_shared<Tensor<double>>();
        return [&ps, attrs, probe, seed0 = rng.next_u64()](
                   Graph<double>& g) mutable {
          const Var y = apply_op(
              g, "conv2d_transpose",
              {g.param(*ps.find("x")), g.param(*ps.find("w")),
               g.param(*ps.find("b"))},
              attrs);
          if (probe->empty()) {
            Rng prng(seed0);
            *probe = rand_tensor(g.val(y).shape(), prng);
          }
          return weighted_mean(g, y, *probe);
        };
      }));

  cases.push_back(
      make_case("conv1d_depthwise", [](ParamStore<double>& ps, Rng& rng) {
        auto& x = ps.create("x", {2, 7, 3});
        auto& w = ps.create("w", {3, 4});
        auto& b = ps.create("b", {3});
        fill_uniform(x, rng, -1, 1);
        fill_uniform(w, rng, -1, 1);
        fill_uniform(b, rng, -1, 1);
        Rng prng(rng.next_u64());
        const auto probe = rand_tensor({2, 7, 3}, prng);
        return [&ps, probe](Graph<double>& g) {
          const Var y = apply_op(g, "conv1d_depthwise",
                                 {g.param(*ps.find("x")),
                                  g.param(*ps.find("w")),
                                  g.param(*ps.find("b"))});
          return weighted_mean(g, y, probe);
        };
      }));

  cases.push_back(
      make_case("conv1d_transpose", [](ParamStore<double>& ps, Rng& rng) {
        auto& x = ps.create("x", {2, 6, 4});
        auto& w = ps.create("w", {4, 2, 4});
        auto& b = ps.create("b", {2});
        fill_uniform(x, rng, -1, 1);
        fill_uniform(w, rng, -1, 1);
        fill_uniform(b, rng, -1, 1);
        const nlohmann::json attrs{{"crop_left", 1}, {"crop_right", 2}};
        Rng prng(rng.next_u64());
        const auto probe = rand_tensor({2, 6, 2}, prng);
        return [&ps, attrs, probe](Graph<double>& g) {
          const Var y = apply_op(g, "conv1d_transpose",
                                 {g.param(*ps.find("x")),
                                  g.param(*ps.find("w")),
                                  g.param(*ps.find("b"))},
                                 attrs);
          return weighted_mean(g, y, probe);
        };
      }));

  cases.push_back(
      make_case("instance_norm", [](ParamStore<double>& ps, Rng& rng) {
        auto& x = ps.create("x", {3, 4, 5});
        auto& gm = ps.create("gamma", {3});
        auto& bt = ps.create("beta", {3});
        fill_uniform(x, rng, -2, 2);
        fill_uniform(gm, rng, 0.5, 1.5);
        fill_uniform(bt, rng, -0.5, 0.5);
        Rng prng(rng.next_u64());
        const auto probe = rand_tensor({3, 4, 5}, prng);
        return [&ps, probe](Graph<double>& g) {
          const Var y = apply_op(g, "instance_norm",
                                 {g.param(*ps.find("x")),
                                  g.param(*ps.find("gamma")),
                                  g.param(*ps.find("beta"))});
          return weighted_mean(g, y, probe);
        };
      }));

  cases.push_back(make_case("prelu", [](ParamStore<double>& ps, Rng& rng) {
    auto& x = ps.create("x", {3, 4, 5});
    auto& s = ps.create("slope", {3});
    // keep activations away from the kink at zero
    for (int64_t i = 0; i < x.numel(); ++i) {
      const double v = rng.uniform(0.3, 2.0);
      x.value[i] = rng.uniform() < 0.5 ? -v : v;
    }
    fill_uniform(s, rng, 0.1, 0.5);
    Rng prng(rng.next_u64());
    const auto probe = rand_tensor({3, 4, 5}, prng);
    return [&ps, probe](Graph<double>& g) {
      const Var y = apply_op(
          g, "prelu", {g.param(*ps.find("x")), g.param(*ps.find("slope"))});
      return weighted_mean(g, y, probe);
    };
  }));

  cases.push_back(
      make_case("learnable_sigmoid", [](ParamStore<double>& ps, Rng& rng) {
        auto& z = ps.create("z", {4, 5});
        auto& a = ps.create("alpha", {5});
        fill_uniform(z, rng, -2, 2);
        fill_uniform(a, rng, 0.5, 1.5);
        Rng prng(rng.next_u64());
        const auto probe = rand_tensor({4, 5}, prng);
        return [&ps, probe](Graph<double>& g) {
          const Var y = apply_op(g, "learnable_sigmoid",
                                 {g.param(*ps.find("z")),
                                  g.param(*ps.find("alpha"))},
                                 nlohmann::json{{"beta", 2.0}});
          return weighted_mean(g, y, probe);
        };
      }));

  cases.push_back(make_case("s6_scan", [](ParamStore<double>& ps, Rng& rng) {
    const int64_t B = 2, L = 6, D = 3, N = 2;
    auto& u = ps.create("u", {B, L, D});
    auto& dt = ps.create("delta", {B, L, D});
    auto& A = ps.create("A", {D, N});
    auto& Bc = ps.create("B", {B, L, N});
    auto& Cc = ps.create("C", {B, L, N});
    fill_uniform(u, rng, -1, 1);
    fill_uniform(dt, rng, 0.05, 0.5);  // positive; FD step keeps it positive
    fill_uniform(A, rng, -2.0, -0.5);  // strictly negative
    fill_uniform(Bc, rng, -1, 1);
    fill_uniform(Cc, rng, -1, 1);
    Rng prng(rng.next_u64());
    const auto probe = rand_tensor({B, L, D}, prng);
    return [&ps, probe](Graph<double>& g) {
      const Var y = apply_op(g, "s6_scan",
                             {g.param(*ps.find("u")), g.param(*ps.find("delta")),
                              g.param(*ps.find("A")), g.param(*ps.find("B")),
                              g.param(*ps.find("C"))});
      return weighted_mean(g, y, probe);
    };
  }));

  cases.push_back(make_case("istft", [](ParamStore<double>& ps, Rng& rng) {
    StftConfig cfg;
    cfg.window_len = 8;
    cfg.hop = 2;
    cfg.fft_len = 8;
    const int64_t frames = 5;
    auto& re = ps.create("re", {frames, cfg.bins()});
    auto& im = ps.create("im", {frames, cfg.bins()});
    fill_uniform(re, rng, -1, 1);
    fill_uniform(im, rng, -1, 1);
    const nlohmann::json attrs{{"window_len", cfg.window_len},
                               {"hop", cfg.hop},
                               {"fft_len", cfg.fft_len},
                               {"out_len", 8}};
    Rng prng(rng.next_u64());
    const auto probe = rand_tensor({8}, prng);
    return [&ps, attrs, probe](Graph<double>& g) {
      const Var y = apply_op(
          g, "istft", {g.param(*ps.find("re")), g.param(*ps.find("im"))},
          attrs);
      return weighted_mean(g, y, probe);
    };
  }));

  // composite: full Mamba unit
  cases.push_back({"mamba_unit", [](uint64_t seed) {
    auto ps = std::make_shared<ParamStore<double>>();
    Rng rng(seed ^ 0x6d75ULL);
    mamba::MambaUnitConfig cfg;
    cfg.d_model = 4;
    cfg.n_state = 2;
    const auto w = mamba::make_mamba_unit(*ps, "unit", cfg, rng);
    Rng drng(rng.next_u64());
    const auto x = detail::rand_tensor({2, 6, 4}, drng);
    const auto probe = detail::rand_tensor({2, 6, 4}, drng);
    auto fwd = [ps, w, x, probe](Graph<double>& g) {
      const Var xv = g.constant(x, "x");
      return detail::weighted_mean(g, mamba::mamba_unit(g, xv, w), probe);
    };
    return grad_check("mamba_unit", *ps, fwd);
  }});

  // composite: full TF block at toy size
  cases.push_back({"tf_block", [](uint64_t seed) {
    auto ps = std::make_shared<ParamStore<double>>();
    Rng rng(seed ^ 0x7466ULL);
    mamba::TfBlockConfig cfg;
    cfg.unit.d_model = 4;
    cfg.unit.n_state = 2;
    const auto w = mamba::make_tf_block(*ps, "tf", cfg, rng);
    Rng drng(rng.next_u64());
    const auto x = detail::rand_tensor({4, 5, 3}, drng);
    const auto probe = detail::rand_tensor({4, 5, 3}, drng);
    auto fwd = [ps, w, x, probe](Graph<double>& g) {
      const Var xv = g.constant(x, "x");
      return detail::weighted_mean(g, mamba::tf_block(g, xv, w), probe);
    };
    return grad_check("tf_block", *ps, fwd);
  }});

  // composite: toy generator end to end through the full training loss
  cases.push_back({"toy_generator", [](uint64_t seed) {
    ModelConfig cfg = toy_model_config();
    auto gen = std::make_shared<Generator<double>>(cfg, seed ^ 0xe2eULL);
    Rng drng(seed ^ 0xfeedULL);
    const int64_t len = 28;  // T = 8 frames with the tiny stft config
    std::vector<double> wave(size_t(len), 0.0);
    for (auto& v : wave) v = drng.uniform(-0.5, 0.5);
    const auto clean = dsp::analyze(wave, cfg.stft);
    Tensor<double> feats =
        detail::rand_tensor({2 * cfg.n_mics, 8, cfg.stft.bins()}, drng, 0.0,
                            1.0);
    TrainConfig tc;
    auto fwd = [gen, feats, clean, wave, tc, cfg](Graph<double>& g) {
      const Var f = g.constant(feats, "features");
      const auto out = gen->forward(g, f);
      const auto tgt = loss::make_targets(g, clean, wave);
      return loss::total_loss(g, out, tgt, tc, cfg.stft).total;
    };
    return grad_check("toy_generator", gen->params(), fwd);
  }});

  return cases;
}

inline std::vector<GradCheckReport> run_standard_suite(uint64_t seed) {
  std::vector<GradCheckReport> reports;
  for (const auto& c : standard_suite()) reports.push_back(c.run(seed));
  return reports;
}

}  // namespace mcse::ad::suite
