#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>

#include "mcse/checkpoint.hpp"
#include "mcse/evaluate.hpp"
#include "mcse/loss.hpp"
#include "mcse/optimizer.hpp"

namespace mcse {

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double mag = 0, phase = 0, cplx = 0, time = 0, total = 0;
  double val_si_sdr = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0;
  std::vector<double> step_losses;

  Json to_json() const {
    Json j{{"epoch", epoch},
           {"lr", lr},
           {"loss",
            Json{{"mag", mag},
                 {"phase", phase},
                 {"complex", cplx},
                 {"time", time},
                 {"total", total}}},
           {"wall_seconds", wall_seconds}};
    j["val_si_sdr"] = std::isnan(val_si_sdr) ? Json(nullptr) : Json(val_si_sdr);
    return j;
  }
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::string best_checkpoint;
  std::string last_checkpoint;
  double best_val_si_sdr = -1e300;
  int best_epoch = -1;
};

// Batch-size-one training loop: seeded shuffling, per-item random crops,
// signal-domain loss, gradient clipping, decoupled-weight-decay updates with
// lr(e) = lr * decay^e, per-epoch validation on SI-SDR, best/last checkpoints
// and an append-only JSONL log.
class Trainer {
 public:
  Trainer(Generator<float>& model, const Manifest& manifest,
          std::string base_dir, TrainConfig tcfg)
      : model_(model),
        manifest_(manifest),
        base_dir_(std::move(base_dir)),
        tcfg_(std::move(tcfg)),
        opt_(model.params(), tcfg_) {
    tcfg_.validate();
    MCSE_CHECK(!manifest_.train.empty(), ContractError,
               "Trainer: training split is empty");
    preload();
  }

  EpochStats train_epoch(int epoch_idx) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochStats st;
    st.epoch = epoch_idx;
    st.lr = tcfg_.lr_at_epoch(epoch_idx);

    std::vector<int> order(train_items_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    Rng shuffle_rng = Rng(tcfg_.seed).fork(0x5348 + uint64_t(epoch_idx));
    shuffle(order, shuffle_rng);

    const ModelConfig& mc = model_.config();
    const int fs = mc.stft.sample_rate;
    const int64_t crop = int64_t(std::llround(tcfg_.crop_seconds * fs));

    for (int local : order) {
      const LoadedItem& item = train_items_[size_t(local)];
      Rng crop_rng = Rng(tcfg_.seed).fork(
          0xC0 + uint64_t(epoch_idx) * 7919 + uint64_t(local));
      const int64_t len = int64_t(item.clean.size());
      const int64_t use = std::min(crop, len);
      const int64_t start =
          use < len ? int64_t(crop_rng.uniform_int(uint64_t(len - use + 1)))
                    : 0;

      std::vector<SpectroPair<float>> pairs;
      pairs.reserve(item.channels.size());
      for (const auto& ch : item.channels) {
        std::vector<float> seg(ch.begin() + start, ch.begin() + start + use);
        pairs.push_back(dsp::analyze(seg, mc.stft));
      }
      std::vector<float> clean_seg(item.clean.begin() + start,
                                   item.clean.begin() + start + use);
      const auto clean_pair = dsp::analyze(clean_seg, mc.stft);

      ad::Graph<float> g;
      const ad::Var feats =
          g.constant(dsp::pack_features(pairs), "features");
      const auto out = model_.forward(g, feats);
      const auto tgt = loss::make_targets(g, clean_pair, clean_seg);
      const auto L = loss::total_loss(g, out, tgt, tcfg_, mc.stft);

      const double total = g.val(L.total)[0];
      MCSE_CHECK(std::isfinite(total), NumericError,
                 "Trainer: non-finite loss at item " + item.name +
                     " (epoch " + std::to_string(epoch_idx) + ")");
      st.mag += g.val(L.mag)[0];
      st.phase += g.val(L.phase)[0];
      st.cplx += g.val(L.cplx)[0];
      st.time += g.val(L.time)[0];
      st.total += total;
      st.step_losses.push_back(total);

      opt_.zero_grad();
      g.backward(L.total, /*release_buffers=*/true);
      opt_.clip_grad_norm(tcfg_.clip_norm);
      opt_.step(st.lr);
    }

    const double n = double(train_items_.size());
    st.mag /= n;
    st.phase /= n;
    st.cplx /= n;
    st.time /= n;
    st.total /= n;
    if (!manifest_.val.empty()) st.val_si_sdr = validate();
    st.wall_seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    return st;
  }

  // mean SI-SDR of enhanced validation items against their clean references
  double validate() {
    double acc = 0;
    for (const auto& item : val_items_) {
      std::vector<SpectroPair<float>> pairs;
      for (const auto& ch : item.channels)
        pairs.push_back(dsp::analyze(ch, model_.config().stft));
      const auto res = model_.infer(dsp::pack_features(pairs));
      const auto wave = dsp::reconstruct(res.y_cmag, res.y_pha,
                                         model_.config().stft,
                                         int64_t(item.clean.size()));
      acc += metrics::si_sdr(item.clean, wave);
    }
    return acc / double(val_items_.size());
  }

  TrainResult run(const std::string& run_dir, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);
    const std::string log_path = (fs::path(run_dir) / "train_log.jsonl").string();
    std::ofstream jsonl(log_path, std::ios::app);
    MCSE_CHECK(jsonl.good(), IoError, "Trainer: cannot open " + log_path);

    TrainResult result;
    result.last_checkpoint = (fs::path(run_dir) / "last.ckpt").string();
    result.best_checkpoint = (fs::path(run_dir) / "best.ckpt").string();
    for (int e = 0; e < tcfg_.epochs; ++e) {
      EpochStats st = train_epoch(e);
      jsonl << st.to_json().dump() << "\n";
      jsonl.flush();
      if (log)
        (*log) << "epoch " << e << " lr " << st.lr << " loss " << st.total
               << " val_si_sdr " << st.val_si_sdr << " (" << st.wall_seconds
               << "s)\n";
      save_checkpoint(model_, result.last_checkpoint);
      const double score =
          std::isnan(st.val_si_sdr) ? -double(e) : st.val_si_sdr;
      if (score > result.best_val_si_sdr) {
        result.best_val_si_sdr = score;
        result.best_epoch = e;
        save_checkpoint(model_, result.best_checkpoint);
      }
      result.epochs.push_back(std::move(st));
    }
    return result;
  }

 private:
  struct LoadedItem {
    std::string name;
    std::vector<std::vector<float>> channels;  // mapped model inputs
    std::vector<float> clean;
  };

  void preload() {
    const auto map = model_.config().resolved_channel_map();
    auto load = [&](int idx) {
      namespace fs = std::filesystem;
      const auto& it = manifest_.items[size_t(idx)];
      const Audio noisy =
          read_wav((fs::path(base_dir_) / it.noisy_path).string());
      MCSE_CHECK(noisy.channels == model_.config().wav_channels, ConfigError,
                 "Trainer: wav channel count mismatch for " + it.noisy_path);
      const Audio clean =
          read_wav((fs::path(base_dir_) / it.clean_path).string());
      LoadedItem li;
      li.name = it.noisy_path;
      for (int ch : map) li.channels.push_back(noisy.channel(ch));
      li.clean = clean.channel(0);
      MCSE_CHECK(li.clean.size() == li.channels[0].size(), ShapeError,
                 "Trainer: clean/noisy length mismatch for " + it.noisy_path);
      return li;
    };
    for (int i : manifest_.train) train_items_.push_back(load(i));
    for (int i : manifest_.val) val_items_.push_back(load(i));
  }

  Generator<float>& model_;
  const Manifest& manifest_;
  std::string base_dir_;
  TrainConfig tcfg_;
  AdamW<float> opt_;
  std::vector<LoadedItem> train_items_, val_items_;
};

}  // namespace mcse
