#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mcse/checkpoint.hpp"
#include "mcse/gradcheck_suite.hpp"
#include "oracles.hpp"

using namespace mcse;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

ModelConfig tiny_cfg(int mics) {
  ModelConfig cfg = ad::suite::toy_model_config();
  cfg.n_mics = mics;
  cfg.wav_channels = mics;
  return cfg;
}

Tensor<float> random_features(const ModelConfig& cfg, int64_t frames,
                              uint64_t seed) {
  Rng rng(seed);
  Tensor<float> f({2 * cfg.n_mics, frames, cfg.stft.bins()});
  for (int64_t i = 0; i < f.numel(); ++i) f[i] = float(rng.uniform(0, 1));
  return f;
}

}  // namespace

TEST(Checkpoint, SaveLoadForwardIsBitIdentical) {
  const ModelConfig cfg = tiny_cfg(2);
  Generator<float> gen(cfg, 21);
  const auto path = tmp_path("mcse_rt.ckpt");
  save_checkpoint(gen, path);

  auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config().n_mics, 2);
  EXPECT_EQ(loaded.params().size(), gen.params().size());
  for (size_t i = 0; i < gen.params().size(); ++i) {
    const auto& a = gen.params().at(i);
    const auto& b = loaded.params().at(i);
    ASSERT_EQ(a.name, b.name);
    for (int64_t k = 0; k < a.numel(); ++k)
      ASSERT_EQ(a.value[k], b.value[k]) << a.name;
  }
  const auto feats = random_features(cfg, 5, 22);
  const auto r1 = gen.infer(feats);
  const auto r2 = loaded.infer(feats);
  for (int64_t i = 0; i < r1.y_cmag.numel(); ++i) {
    ASSERT_EQ(r1.y_cmag[i], r2.y_cmag[i]);
    ASSERT_EQ(r1.y_pha[i], r2.y_pha[i]);
  }

  // saving the loaded model reproduces the file byte for byte
  const auto path2 = tmp_path("mcse_rt2.ckpt");
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  EXPECT_EQ(b1, b2);
}

TEST(Checkpoint, CorruptedHeaderIsAParseErrorWithoutPartialModel) {
  const auto path = tmp_path("mcse_corrupt.ckpt");
  {
    Generator<float> gen(tiny_cfg(2), 23);
    save_checkpoint(gen, path);
  }
  // stomp on the JSON header
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(12);
  f.write("\xff\xff\xff\xff", 4);
  f.close();
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  const auto path = tmp_path("mcse_trunc.ckpt");
  {
    Generator<float> gen(tiny_cfg(2), 24);
    save_checkpoint(gen, path);
  }
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 64);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, MicCountMismatchNamesTheInputProjection) {
  const auto path = tmp_path("mcse_m6.ckpt");
  {
    ModelConfig cfg6 = tiny_cfg(6);
    Generator<float> gen(cfg6, 25);
    save_checkpoint(gen, path);
  }
  ModelConfig cfg4 = tiny_cfg(4);
  Generator<float> target(cfg4, 26);
  try {
    load_checkpoint_into(target, path);
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.g_cnn.weight"),
              std::string::npos)
        << e.what();
  }
}

TEST(Checkpoint, UnsupportedVersionIsRejected) {
  const auto path = tmp_path("mcse_ver.ckpt");
  const std::string header = "{\"format_version\": 999, \"tensors\": []}";
  std::ofstream f(path, std::ios::binary);
  const uint64_t len = header.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = char((len >> (8 * i)) & 0xff);
  f.write(lenbuf, 8);
  f << header;
  f.close();
  EXPECT_THROW(load_checkpoint(path), IoError);
}
