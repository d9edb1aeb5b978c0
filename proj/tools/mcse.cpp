// Single entry point wiring simulation, training, inference, evaluation and
// the verification harnesses into reproducible commands.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "mcse/arraysim.hpp"
#include "mcse/checkpoint.hpp"
#include "mcse/evaluate.hpp"
#include "mcse/gradcheck_suite.hpp"
#include "mcse/trainer.hpp"

namespace {

using mcse::Json;

int log_level() {
  const char* v = std::getenv("MCSE_LOG");
  return v ? std::atoi(v) : 1;
}

std::string timestamp_tag() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d_%H%M%S", std::localtime(&t));
  return buf;
}

struct ConfigCli {
  std::string config_path;
  std::string preset = "desk";
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  int mics = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--preset", preset, "model preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--set", overrides,
                    "config override, e.g. --set model.c_mid=32");
    cmd->add_option("--seed", seed, "global random seed");
    cmd->add_option("--mics", mics, "number of microphone inputs");
  }

  Json resolve() const {
    const mcse::ModelConfig base = preset == "paper"
                                       ? mcse::ModelConfig::paper()
                                       : mcse::ModelConfig::desk();
    Json doc{{"model", mcse::cfgio::to_json(base)},
             {"train", mcse::cfgio::to_json(mcse::TrainConfig{})},
             {"simulate", mcse::cfgio::to_json(mcse::SimulateConfig{})}};
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      MCSE_CHECK(f.good(), mcse::ConfigError,
                 "cannot read config file " + config_path);
      Json file_doc;
      try {
        f >> file_doc;
      } catch (const std::exception& e) {
        throw mcse::ConfigError("config parse error in " + config_path + ": " +
                                e.what());
      }
      doc.merge_patch(file_doc);
    }
    if (mics > 0) {
      doc["model"]["n_mics"] = mics;
      doc["model"]["channel_map"] = Json::array();  // re-derive the default
      doc["model"]["reference_slot"] = -1;
    }
    doc["train"]["seed"] = seed;
    doc["simulate"]["seed"] = seed;
    for (const auto& o : overrides) mcse::cfgio::apply_override(doc, o);
    std::cout << "resolved config:\n" << doc.dump(2) << "\n";
    return doc;
  }
};

int cmd_simulate(const ConfigCli& cc, const std::string& out_dir) {
  const Json doc = cc.resolve();
  const auto scfg = mcse::cfgio::simulate_from_json(doc.at("simulate"));
  const auto geom = mcse::sim::geometry_preset(
      mcse::cfgio::get_or<std::string>(doc.at("simulate"), "geometry",
                                       "rect6"));
  const auto manifest = mcse::sim::simulate_dataset(scfg, geom, out_dir);
  std::cout << "wrote " << manifest.items.size() << " items to " << out_dir
            << " (train/val/test = " << manifest.train.size() << "/"
            << manifest.val.size() << "/" << manifest.test.size() << ")\n"
            << "manifest: " << out_dir << "/manifest.json\n";
  return 0;
}

int cmd_train(const ConfigCli& cc, const std::string& manifest_path,
              std::string run_dir) {
  const Json doc = cc.resolve();
  const auto mcfg = mcse::cfgio::model_from_json(doc.at("model"));
  const auto tcfg = mcse::cfgio::train_from_json(doc.at("train"));
  if (run_dir.empty())
    run_dir = "runs/run_" + timestamp_tag() + "_seed" +
              std::to_string(tcfg.seed);

  const auto manifest = mcse::Manifest::load(manifest_path);
  const std::string base_dir =
      std::filesystem::path(manifest_path).parent_path().string();
  mcse::Generator<float> model(mcfg, tcfg.seed);
  mcse::Trainer trainer(model, manifest, base_dir, tcfg);
  std::ostream* log = log_level() >= 1 ? &std::cout : nullptr;
  const auto result = trainer.run(run_dir, log);
  std::cout << "trained " << result.epochs.size() << " epochs; best epoch "
            << result.best_epoch << "\n"
            << "checkpoints: " << result.best_checkpoint << " (best), "
            << result.last_checkpoint << " (last)\n";
  return 0;
}

int cmd_enhance(const std::string& ckpt, const std::string& in_path,
                const std::string& out_path) {
  auto model = mcse::load_checkpoint(ckpt);
  std::cout << "checkpoint config:\n"
            << mcse::cfgio::to_json(model.config()).dump(2) << "\n";
  const mcse::Audio noisy = mcse::read_wav(in_path);
  MCSE_CHECK(noisy.sample_rate == model.config().stft.sample_rate,
             mcse::ConfigError,
             "enhance: wav sample rate " + std::to_string(noisy.sample_rate) +
                 " does not match the model");
  auto [feats, ref_pair] = mcse::eval::features_from_audio(noisy, model.config());
  const auto res = model.infer(feats);
  const auto wave = mcse::dsp::reconstruct(res.y_cmag, res.y_pha,
                                           model.config().stft,
                                           noisy.frames());
  mcse::Audio out;
  out.sample_rate = noisy.sample_rate;
  out.channels = 1;
  out.samples = wave;
  mcse::write_wav(out_path, out);
  std::cout << "enhanced " << in_path << " -> " << out_path << " ("
            << wave.size() << " samples)\n";
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& manifest_path,
                 const std::string& split, const std::string& json_out) {
  auto model = mcse::load_checkpoint(ckpt);
  const auto manifest = mcse::Manifest::load(manifest_path);
  const std::string base_dir =
      std::filesystem::path(manifest_path).parent_path().string();
  const auto report = mcse::eval::evaluate_model(model, manifest, split,
                                                 base_dir);
  std::cout << report.render();
  if (!json_out.empty()) {
    std::ofstream f(json_out);
    MCSE_CHECK(f.good(), mcse::IoError, "cannot write " + json_out);
    f << report.to_json().dump(2) << "\n";
    std::cout << "report json: " << json_out << "\n";
  }
  return report.failures == 0 ? 0 : 1;
}

int cmd_params(const ConfigCli& cc, int c_mid_flag) {
  const Json doc = cc.resolve();
  auto mcfg = mcse::cfgio::model_from_json(doc.at("model"));
  if (c_mid_flag > 0) mcfg.c_mid = c_mid_flag;

  const auto rep = mcse::param_count(mcfg);
  std::cout << "parameter breakdown (n_mics = " << mcfg.n_mics
            << ", c_mid = " << mcfg.c_mid << "):\n";
  for (const auto& [mod, n] : rep.by_module)
    std::cout << "  " << std::left << std::setw(12) << mod << n << "\n";
  std::cout << "  total        " << rep.total << "\n\n";

  std::cout << "per-microphone delta (only the input projection grows):\n";
  std::cout << "  mics  total        delta\n";
  int64_t prev = 0;
  for (int m = 1; m <= std::max(6, mcfg.n_mics); ++m) {
    auto c = mcfg;
    c.n_mics = m;
    c.channel_map.clear();
    c.reference_slot = -1;
    c.wav_channels = std::max(c.wav_channels, m);
    const auto r = mcse::param_count(c);
    std::cout << "  " << std::left << std::setw(6) << m << std::setw(13)
              << r.total;
    if (m > 1)
      std::cout << "+" << (r.total - prev) << " (= 2*1*" << mcfg.c_mid << ")";
    std::cout << "\n";
    prev = r.total;
  }
  return 0;
}

int cmd_gradcheck(uint64_t seed) {
  const auto reports = mcse::ad::suite::run_standard_suite(seed);
  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << r.summary() << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "gradcheck: all cases passed\n"
                         : "gradcheck: FAILURES present\n");
  return all_pass ? 0 : 1;
}

int cmd_scanbench(std::vector<int64_t> lengths, std::vector<int> chunks,
                  uint64_t seed) {
  using mcse::Tensor;
  if (lengths.empty()) lengths = {7, 64, 1000, 4096};
  if (chunks.empty()) chunks = {1, 8, 16, 100};
  const int64_t D = 16, N = 16;
  std::cout << "scan strategies, d_inner=" << D << " n_state=" << N << "\n";
  std::cout << std::left << std::setw(8) << "L" << std::setw(8) << "K"
            << std::setw(14) << "seq/s(seq)" << std::setw(14)
            << "seq/s(chunk)" << "max rel dev\n";
  for (int64_t L : lengths) {
    mcse::Rng rng(seed ^ uint64_t(L));
    Tensor<float> A({D, N}), B({L, N}), C({L, N}), delta({L, D}), u({L, D});
    for (int64_t i = 0; i < A.numel(); ++i)
      A[i] = float(-rng.uniform(0.5, 2.0));
    for (int64_t i = 0; i < B.numel(); ++i) B[i] = float(rng.normal());
    for (int64_t i = 0; i < C.numel(); ++i) C[i] = float(rng.normal());
    for (int64_t i = 0; i < delta.numel(); ++i)
      delta[i] = float(rng.uniform(0.01, 0.3));
    for (int64_t i = 0; i < u.numel(); ++i) u[i] = float(rng.normal());
    const auto [Abar, Bbar] = mcse::ssm::discretize(A, B, delta);

    const auto time_runs = [&](auto&& fn) {
      const auto t0 = std::chrono::steady_clock::now();
      int reps = 0;
      double elapsed = 0;
      do {
        fn();
        ++reps;
        elapsed = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      } while (elapsed < 0.2);
      return double(reps) / elapsed;
    };

    const auto y_ref = mcse::ssm::scan_sequential(Abar, Bbar, C, u);
    const double seq_rate =
        time_runs([&] { mcse::ssm::scan_sequential(Abar, Bbar, C, u); });
    for (int K : chunks) {
      const auto y_chunk = mcse::ssm::scan_chunked(Abar, Bbar, C, u, K);
      double max_dev = 0;
      for (int64_t i = 0; i < y_ref.numel(); ++i) {
        const double denom =
            std::max({std::abs(double(y_ref[i])), std::abs(double(y_chunk[i])),
                      1e-6});
        max_dev = std::max(
            max_dev, std::abs(double(y_ref[i]) - double(y_chunk[i])) / denom);
      }
      const double chunk_rate = time_runs(
          [&] { mcse::ssm::scan_chunked(Abar, Bbar, C, u, K); });
      std::cout << std::left << std::setw(8) << L << std::setw(8) << K
                << std::setw(14) << std::setprecision(6) << seq_rate
                << std::setw(14) << chunk_rate << std::scientific
                << max_dev << std::defaultfloat << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-channel speech enhancement toolkit"};
  app.require_subcommand(1);

  ConfigCli sim_cc, train_cc, params_cc;
  std::string out_dir, manifest_path, run_dir, ckpt, in_path, out_path,
      split = "test", json_out;
  int c_mid_flag = -1;
  uint64_t gc_seed = 0, bench_seed = 0;
  std::vector<int64_t> bench_lengths;
  std::vector<int> bench_chunks;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim_cc.attach(sim);
  sim->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model on a manifest");
  train_cc.attach(train);
  train->add_option("--manifest", manifest_path, "manifest.json path")
      ->required();
  train->add_option("--out", run_dir,
                    "run directory (default: runs/run_<timestamp>_<seed>)");

  auto* enh = app.add_subcommand("enhance", "enhance a multi-channel wav");
  enh->add_option("--checkpoint", ckpt, "checkpoint path")->required();
  enh->add_option("--in", in_path, "input wav")->required();
  enh->add_option("--out", out_path, "output wav")->required();

  auto* ev = app.add_subcommand("evaluate", "score a split of a manifest");
  ev->add_option("--checkpoint", ckpt, "checkpoint path")->required();
  ev->add_option("--manifest", manifest_path, "manifest.json path")
      ->required();
  ev->add_option("--split", split, "train|val|test");
  ev->add_option("--json", json_out, "also write the report as JSON");

  auto* par = app.add_subcommand("params", "parameter count breakdown");
  params_cc.attach(par);
  par->add_option("--c-mid", c_mid_flag, "encoder channel count");

  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference gradient suite");
  gc->add_option("--seed", gc_seed, "rng seed");

  auto* sb = app.add_subcommand("scanbench",
                                "sequential vs chunked scan throughput");
  sb->add_option("--lengths", bench_lengths, "sequence lengths");
  sb->add_option("--chunks", bench_chunks, "chunk sizes");
  sb->add_option("--seed", bench_seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_cc, out_dir);
    if (train->parsed()) return cmd_train(train_cc, manifest_path, run_dir);
    if (enh->parsed()) return cmd_enhance(ckpt, in_path, out_path);
    if (ev->parsed()) return cmd_evaluate(ckpt, manifest_path, split, json_out);
    if (par->parsed()) return cmd_params(params_cc, c_mid_flag);
    if (gc->parsed()) return cmd_gradcheck(gc_seed);
    if (sb->parsed()) return cmd_scanbench(bench_lengths, bench_chunks,
                                           bench_seed);
  } catch (const mcse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
