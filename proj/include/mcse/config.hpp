#pragma once

#include <json.hpp>

#include "mcse/network.hpp"

namespace mcse {

using Json = nlohmann::ordered_json;

// Optimizer / loop settings. lr, betas, decay, epoch count and batch size
// follow the published recipe; loss weights and weight decay are artifact
// defaults (see README).
struct TrainConfig {
  double lr = 5e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double weight_decay = 1e-2;
  double lr_decay_per_epoch = 0.99;
  int epochs = 50;
  int batch_size = 1;
  double w_mag = 1.0;
  double w_phase = 0.3;
  double w_complex = 0.1;
  double w_time = 0.2;
  double crop_seconds = 2.0;
  double clip_norm = 5.0;
  uint64_t seed = 0;
  std::string validation_metric = "si_sdr";

  void validate() const {
    MCSE_CHECK(lr > 0, ConfigError, "TrainConfig: lr must be > 0");
    MCSE_CHECK(lr_decay_per_epoch > 0 && lr_decay_per_epoch <= 1, ConfigError,
               "TrainConfig: decay must lie in (0, 1]");
    MCSE_CHECK(w_mag >= 0 && w_phase >= 0 && w_complex >= 0 && w_time >= 0,
               ConfigError, "TrainConfig: loss weights must be >= 0");
    MCSE_CHECK(epochs >= 1 && batch_size == 1, ConfigError,
               "TrainConfig: epochs >= 1 and batch_size == 1 supported");
    MCSE_CHECK(validation_metric == "si_sdr", ConfigError,
               "TrainConfig: unknown validation metric " + validation_metric);
  }

  double lr_at_epoch(int epoch) const {
    return lr * std::pow(lr_decay_per_epoch, epoch);
  }
};

// Dataset synthesis settings for the `simulate` command.
struct SimulateConfig {
  int n_items = 20;
  double duration_s = 2.0;
  std::vector<double> snr_grid = {0.0, 5.0, 10.0};
  std::string geometry = "rect6";
  double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
  uint64_t seed = 0;
};

namespace cfgio {

template <typename V>
V get_or(const Json& j, const std::string& key, V fallback) {
  if (j.contains(key)) return j.at(key).get<V>();
  return fallback;
}

inline Json to_json(const StftConfig& c) {
  return Json{{"window_len", c.window_len},
              {"hop", c.hop},
              {"fft_len", c.fft_len},
              {"sample_rate", c.sample_rate},
              {"compression", c.compression}};
}

inline StftConfig stft_from_json(const Json& j) {
  StftConfig c;
  c.window_len = get_or(j, "window_len", c.window_len);
  c.hop = get_or(j, "hop", c.hop);
  c.fft_len = get_or(j, "fft_len", c.fft_len);
  c.sample_rate = get_or(j, "sample_rate", c.sample_rate);
  c.compression = get_or(j, "compression", c.compression);
  return c;
}

inline Json to_json(const ModelConfig& c) {
  return Json{{"n_mics", c.n_mics},
              {"c_mid", c.c_mid},
              {"n_tf_blocks", c.n_tf_blocks},
              {"densenet_depth", c.densenet_depth},
              {"densenet_dilations", c.densenet_dilations},
              {"mask_beta", c.mask_beta},
              {"expand", c.expand},
              {"d_conv", c.d_conv},
              {"n_state", c.n_state},
              {"wav_channels", c.wav_channels},
              {"channel_map", c.resolved_channel_map()},
              {"reference_slot", c.resolved_reference_slot()},
              {"desk_scale", c.desk_scale},
              {"stft", to_json(c.stft)}};
}

inline ModelConfig model_from_json(const Json& j) {
  ModelConfig base;
  if (get_or(j, "desk_scale", false)) base = ModelConfig::desk();
  ModelConfig c = base;
  c.n_mics = get_or(j, "n_mics", base.n_mics);
  c.c_mid = get_or(j, "c_mid", base.c_mid);
  c.n_tf_blocks = get_or(j, "n_tf_blocks", base.n_tf_blocks);
  c.densenet_depth = get_or(j, "densenet_depth", base.densenet_depth);
  c.densenet_dilations =
      get_or(j, "densenet_dilations", base.densenet_dilations);
  c.mask_beta = get_or(j, "mask_beta", base.mask_beta);
  c.expand = get_or(j, "expand", base.expand);
  c.d_conv = get_or(j, "d_conv", base.d_conv);
  c.n_state = get_or(j, "n_state", base.n_state);
  c.wav_channels = get_or(j, "wav_channels", base.wav_channels);
  c.channel_map = get_or(j, "channel_map", std::vector<int>{});
  c.reference_slot = get_or(j, "reference_slot", -1);
  if (j.contains("stft")) c.stft = stft_from_json(j.at("stft"));
  return c;
}

inline Json to_json(const TrainConfig& c) {
  return Json{{"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"weight_decay", c.weight_decay},
              {"lr_decay_per_epoch", c.lr_decay_per_epoch},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"loss_weights",
               Json{{"mag", c.w_mag},
                    {"phase", c.w_phase},
                    {"complex", c.w_complex},
                    {"time", c.w_time}}},
              {"crop_seconds", c.crop_seconds},
              {"clip_norm", c.clip_norm},
              {"seed", c.seed},
              {"validation_metric", c.validation_metric}};
}

inline TrainConfig train_from_json(const Json& j) {
  TrainConfig c;
  c.lr = get_or(j, "lr", c.lr);
  c.beta1 = get_or(j, "beta1", c.beta1);
  c.beta2 = get_or(j, "beta2", c.beta2);
  c.adam_eps = get_or(j, "adam_eps", c.adam_eps);
  c.weight_decay = get_or(j, "weight_decay", c.weight_decay);
  c.lr_decay_per_epoch = get_or(j, "lr_decay_per_epoch", c.lr_decay_per_epoch);
  c.epochs = get_or(j, "epochs", c.epochs);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  if (j.contains("loss_weights")) {
    const Json& w = j.at("loss_weights");
    c.w_mag = get_or(w, "mag", c.w_mag);
    c.w_phase = get_or(w, "phase", c.w_phase);
    c.w_complex = get_or(w, "complex", c.w_complex);
    c.w_time = get_or(w, "time", c.w_time);
  }
  c.crop_seconds = get_or(j, "crop_seconds", c.crop_seconds);
  c.clip_norm = get_or(j, "clip_norm", c.clip_norm);
  c.seed = get_or(j, "seed", c.seed);
  c.validation_metric = get_or(j, "validation_metric", c.validation_metric);
  return c;
}

inline Json to_json(const SimulateConfig& c) {
  return Json{{"n_items", c.n_items},
              {"duration_s", c.duration_s},
              {"snr_grid", c.snr_grid},
              {"geometry", c.geometry},
              {"split", Json{{"train", c.train_frac},
                             {"val", c.val_frac},
                             {"test", c.test_frac}}},
              {"seed", c.seed}};
}

inline SimulateConfig simulate_from_json(const Json& j) {
  SimulateConfig c;
  c.n_items = get_or(j, "n_items", c.n_items);
  c.duration_s = get_or(j, "duration_s", c.duration_s);
  c.snr_grid = get_or(j, "snr_grid", c.snr_grid);
  c.geometry = get_or(j, "geometry", c.geometry);
  if (j.contains("split")) {
    const Json& s = j.at("split");
    c.train_frac = get_or(s, "train", c.train_frac);
    c.val_frac = get_or(s, "val", c.val_frac);
    c.test_frac = get_or(s, "test", c.test_frac);
  }
  c.seed = get_or(j, "seed", c.seed);
  return c;
}

// "a.b.c=value" overrides applied to a JSON document; values parse as JSON
// when possible and fall back to strings.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  MCSE_CHECK(eq != std::string::npos, ConfigError,
             "override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (...) {
    value = raw;
  }
  Json* cur = &doc;
  size_t pos = 0;
  while (true) {
    const size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot - pos);
    MCSE_CHECK(!key.empty(), ConfigError, "bad override path: " + path);
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    pos = dot + 1;
  }
}

}  // namespace cfgio
}  // namespace mcse
