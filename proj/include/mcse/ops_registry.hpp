#pragma once

#include <json.hpp>

#include "mcse/nn_ops.hpp"
#include "mcse/ops_spectral.hpp"
#include "mcse/ssm.hpp"

namespace mcse::ad {

// String-keyed dispatch over the operator catalog. The typed functions are
// what the network code calls; this surface exists so harnesses (gradcheck,
// tests) can enumerate the catalog uniformly. Unknown ids raise
// UnsupportedOpError.
template <typename T>
Var apply_op(Graph<T>& g, const std::string& op_id,
             const std::vector<Var>& in, const nlohmann::json& attrs = {}) {
  auto want = [&](size_t n) {
    MCSE_CHECK(in.size() == n, ContractError,
               op_id + ": expected " + std::to_string(n) + " inputs, got " +
                   std::to_string(in.size()));
  };
  auto geti = [&](const char* k, int64_t def) {
    return attrs.contains(k) ? attrs.at(k).get<int64_t>() : def;
  };
  auto getd = [&](const char* k, double def) {
    return attrs.contains(k) ? attrs.at(k).get<double>() : def;
  };

  if (op_id == "exp") { want(1); return exp(g, in[0]); }
  if (op_id == "cos") { want(1); return cos(g, in[0]); }
  if (op_id == "sin") { want(1); return sin(g, in[0]); }
  if (op_id == "sigmoid") { want(1); return sigmoid(g, in[0]); }
  if (op_id == "silu") { want(1); return silu(g, in[0]); }
  if (op_id == "softplus") { want(1); return softplus(g, in[0]); }
  if (op_id == "abs") { want(1); return abs(g, in[0]); }
  if (op_id == "power") { want(1); return power(g, in[0], getd("p", 2.0)); }
  if (op_id == "scale") { want(1); return scale(g, in[0], T(getd("c", 1.0))); }
  if (op_id == "offset") { want(1); return offset(g, in[0], T(getd("c", 0.0))); }
  if (op_id == "add") { want(2); return add(g, in[0], in[1]); }
  if (op_id == "sub") { want(2); return sub(g, in[0], in[1]); }
  if (op_id == "mul") { want(2); return mul(g, in[0], in[1]); }
  if (op_id == "atan2") { want(2); return atan2(g, in[0], in[1]); }
  if (op_id == "mean") { want(1); return mean(g, in[0]); }
  if (op_id == "bmm") { want(2); return bmm(g, in[0], in[1]); }
  if (op_id == "concat") {
    return concat(g, in, int(geti("axis", 0)));
  }
  if (op_id == "flip") { want(1); return flip(g, in[0], int(geti("axis", 0))); }
  if (op_id == "slice") {
    want(1);
    return slice(g, in[0], int(geti("axis", 0)), geti("start", 0),
                 geti("len", 1));
  }
  if (op_id == "reshape") {
    want(1);
    return reshape(g, in[0], attrs.at("shape").get<Shape>());
  }
  if (op_id == "permute") {
    want(1);
    return permute(g, in[0], attrs.at("perm").get<std::vector<int>>());
  }
  if (op_id == "dense") {
    MCSE_CHECK(in.size() == 2 || in.size() == 3, ContractError,
               "dense: expected 2 or 3 inputs");
    return dense(g, in[0], in[1], in.size() == 3 ? in[2] : kNoVar);
  }
  if (op_id == "conv2d") {
    MCSE_CHECK(in.size() == 2 || in.size() == 3, ContractError,
               "conv2d: expected 2 or 3 inputs");
    Conv2dAttrs a;
    a.stride_h = int(geti("stride_h", 1));
    a.stride_w = int(geti("stride_w", 1));
    a.dil_h = int(geti("dil_h", 1));
    a.dil_w = int(geti("dil_w", 1));
    a.pad_h = int(geti("pad_h", 0));
    a.pad_w = int(geti("pad_w", 0));
    return conv2d(g, in[0], in[1], in.size() == 3 ? in[2] : kNoVar, a);
  }
  if (op_id == "conv2d_transpose") {
    MCSE_CHECK(in.size() == 2 || in.size() == 3, ContractError,
               "conv2d_transpose: expected 2 or 3 inputs");
    ConvT2dAttrs a;
    a.stride_h = int(geti("stride_h", 1));
    a.stride_w = int(geti("stride_w", 1));
    a.crop_h0 = int(geti("crop_h0", 0));
    a.crop_h1 = int(geti("crop_h1", 0));
    a.crop_w0 = int(geti("crop_w0", 0));
    a.crop_w1 = int(geti("crop_w1", 0));
    return conv2d_transpose(g, in[0], in[1], in.size() == 3 ? in[2] : kNoVar,
                            a);
  }
  if (op_id == "conv1d_depthwise") {
    MCSE_CHECK(in.size() == 2 || in.size() == 3, ContractError,
               "conv1d_depthwise: expected 2 or 3 inputs");
    return conv1d_depthwise(g, in[0], in[1],
                            in.size() == 3 ? in[2] : kNoVar);
  }
  if (op_id == "conv1d_transpose") {
    MCSE_CHECK(in.size() == 2 || in.size() == 3, ContractError,
               "conv1d_transpose: expected 2 or 3 inputs");
    ConvT1dAttrs a;
    a.crop_left = int(geti("crop_left", 0));
    a.crop_right = int(geti("crop_right", 0));
    return conv1d_transpose(g, in[0], in[1], in.size() == 3 ? in[2] : kNoVar,
                            a);
  }
  if (op_id == "instance_norm") {
    want(3);
    return instance_norm(g, in[0], in[1], in[2], T(getd("eps", 1e-5)));
  }
  if (op_id == "prelu") {
    want(2);
    return prelu(g, in[0], in[1], int(geti("axis", 0)));
  }
  if (op_id == "learnable_sigmoid") {
    want(2);
    return learnable_sigmoid(g, in[0], in[1], T(getd("beta", 2.0)));
  }
  if (op_id == "s6_scan") {
    want(5);
    return ssm::s6_scan(g, in[0], in[1], in[2], in[3], in[4]);
  }
  if (op_id == "istft") {
    want(2);
    StftConfig cfg;
    cfg.window_len = int(geti("window_len", 400));
    cfg.hop = int(geti("hop", 100));
    cfg.fft_len = int(geti("fft_len", cfg.window_len));
    return istft(g, in[0], in[1], cfg, geti("out_len", 0));
  }
  throw UnsupportedOpError("apply_op: unknown operator id \"" + op_id + "\"");
}

}  // namespace mcse::ad
