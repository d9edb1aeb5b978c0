#pragma once

#include <filesystem>
#include <functional>
#include <iomanip>
#include <sstream>

#include "mcse/manifest.hpp"
#include "mcse/metrics.hpp"
#include "mcse/network.hpp"
#include "mcse/wav.hpp"

namespace mcse {
namespace eval {

struct ItemScores {
  double si_sdr = 0, sdr = 0, stoi = 0;
  bool ok = false;
  std::string error;
};

struct MetricReport {
  std::string split;
  std::vector<ItemScores> noisy, enhanced;
  int failures = 0;

  static double mean_of(const std::vector<ItemScores>& v,
                        double ItemScores::*field) {
    double s = 0;
    int n = 0;
    for (const auto& it : v)
      if (it.ok) {
        s += it.*field;
        ++n;
      }
    return n ? s / n : 0.0;
  }

  Json to_json() const {
    auto row = [](const std::vector<ItemScores>& v) {
      Json arr = Json::array();
      for (const auto& it : v)
        arr.push_back(it.ok ? Json{{"stoi", it.stoi},
                                   {"si_sdr", it.si_sdr},
                                   {"sdr", it.sdr}}
                            : Json{{"error", it.error}});
      return arr;
    };
    return Json{
        {"split", split},
        {"note",
         "SDR is plain SNR against the unscaled clean reference (no "
         "BSS-Eval projection); PESQ is n/a (out of scope)"},
        {"items", Json{{"noisy", row(noisy)}, {"enhanced", row(enhanced)}}},
        {"mean",
         Json{{"noisy",
               Json{{"stoi", mean_of(noisy, &ItemScores::stoi)},
                    {"si_sdr", mean_of(noisy, &ItemScores::si_sdr)},
                    {"sdr", mean_of(noisy, &ItemScores::sdr)}}},
              {"enhanced",
               Json{{"stoi", mean_of(enhanced, &ItemScores::stoi)},
                    {"si_sdr", mean_of(enhanced, &ItemScores::si_sdr)},
                    {"sdr", mean_of(enhanced, &ItemScores::sdr)}}}}},
        {"count", int(noisy.size())},
        {"failures", failures}};
  }

  std::string render() const {
    std::ostringstream os;
    os << "average scores, split '" << split << "' (" << noisy.size()
       << " items, " << failures << " failures)\n";
    os << "SDR here is plain SNR vs the clean reference, not BSS-Eval SDR.\n";
    os << std::fixed << std::setprecision(3);
    os << "           PESQ               STOI     SI-SDR    SDR\n";
    auto line = [&](const char* name, const std::vector<ItemScores>& v) {
      os << std::left << std::setw(11) << name
         << std::setw(19) << "n/a (out of scope)" << std::setw(9)
         << mean_of(v, &ItemScores::stoi) << std::setw(10)
         << mean_of(v, &ItemScores::si_sdr)
         << mean_of(v, &ItemScores::sdr) << "\n";
    };
    line("Noisy", noisy);
    line("Enhanced", enhanced);
    return os.str();
  }
};

// (features 2MxTxF, reference pair) -> (enhanced cmag, enhanced pha)
using EnhanceFn = std::function<std::pair<Tensor<float>, Tensor<float>>(
    const Tensor<float>&, const SpectroPair<float>&)>;

inline std::pair<Tensor<float>, SpectroPair<float>> features_from_audio(
    const Audio& noisy, const ModelConfig& cfg) {
  MCSE_CHECK(noisy.channels == cfg.wav_channels, ConfigError,
             "mic-count mismatch: wav has " + std::to_string(noisy.channels) +
                 " channels but the model expects " +
                 std::to_string(cfg.wav_channels));
  const auto map = cfg.resolved_channel_map();
  std::vector<SpectroPair<float>> pairs;
  pairs.reserve(map.size());
  for (int ch : map)
    pairs.push_back(dsp::analyze(noisy.channel(ch), cfg.stft));
  const SpectroPair<float> ref = pairs[size_t(cfg.resolved_reference_slot())];
  return {dsp::pack_features(pairs), ref};
}

// Scores each item of a split against its clean reference; per-item failures
// are recorded and excluded from the aggregate means.
inline MetricReport evaluate_items(const Manifest& manifest,
                                   const std::string& split_name,
                                   const std::string& base_dir,
                                   const ModelConfig& cfg,
                                   const EnhanceFn& enhance) {
  namespace fs = std::filesystem;
  const auto& idx = manifest.split(split_name);
  MCSE_CHECK(!idx.empty(), ContractError,
             "evaluate: split '" + split_name + "' is empty");
  MetricReport rep;
  rep.split = split_name;
  for (int i : idx) {
    const auto& item = manifest.items[size_t(i)];
    ItemScores ns, es;
    try {
      const Audio noisy =
          read_wav((fs::path(base_dir) / item.noisy_path).string());
      const Audio clean =
          read_wav((fs::path(base_dir) / item.clean_path).string());
      const auto clean_ref = clean.channel(0);
      const auto noisy_ref =
          noisy.channel(cfg.resolved_channel_map()[size_t(
              cfg.resolved_reference_slot())]);

      ns.si_sdr = metrics::si_sdr(clean_ref, noisy_ref);
      ns.sdr = metrics::sdr(clean_ref, noisy_ref);
      ns.stoi = metrics::stoi(clean_ref, noisy_ref, noisy.sample_rate);
      ns.ok = true;

      auto [feats, ref_pair] = features_from_audio(noisy, cfg);
      auto [cmag, pha] = enhance(feats, ref_pair);
      const auto wave =
          dsp::reconstruct(cmag, pha, cfg.stft, int64_t(clean_ref.size()));
      es.si_sdr = metrics::si_sdr(clean_ref, wave);
      es.sdr = metrics::sdr(clean_ref, wave);
      es.stoi = metrics::stoi(clean_ref, wave, noisy.sample_rate);
      es.ok = true;
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      if (!ns.ok) ns.error = msg;
      es.ok = false;
      es.error = msg;
      ++rep.failures;
    }
    rep.noisy.push_back(ns);
    rep.enhanced.push_back(es);
  }
  return rep;
}

inline MetricReport evaluate_model(const Generator<float>& model,
                                   const Manifest& manifest,
                                   const std::string& split_name,
                                   const std::string& base_dir) {
  return evaluate_items(
      manifest, split_name, base_dir, model.config(),
      [&model](const Tensor<float>& feats, const SpectroPair<float>&) {
        auto res = model.infer(feats);
        return std::make_pair(res.y_cmag, res.y_pha);
      });
}

}  // namespace eval
}  // namespace mcse
