#include <gtest/gtest.h>

#include <filesystem>

#include "mcse/wav.hpp"
#include "oracles.hpp"

using namespace mcse;

namespace {
std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST(Wav, Float32RoundTripIsBitExact) {
  Audio a;
  a.sample_rate = 16000;
  a.channels = 3;
  a.samples = oracle::random_wave(3 * 1000, 5, 0.9);
  const auto path = tmp_path("mcse_f32.wav");
  write_wav(path, a, WavFormat::float32);
  const Audio b = read_wav(path);
  EXPECT_EQ(b.sample_rate, 16000);
  EXPECT_EQ(b.channels, 3);
  ASSERT_EQ(b.samples.size(), a.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i)
    EXPECT_EQ(a.samples[i], b.samples[i]);
}

TEST(Wav, Pcm16RoundTripWithinQuantization) {
  Audio a;
  a.channels = 1;
  a.samples = oracle::random_wave(512, 6, 0.8);
  const auto path = tmp_path("mcse_pcm16.wav");
  write_wav(path, a, WavFormat::pcm16);
  const Audio b = read_wav(path);
  ASSERT_EQ(b.samples.size(), a.samples.size());
  // write scales by 32767, read divides by 32768: one LSB of headroom on
  // top of the rounding half-LSB
  for (size_t i = 0; i < a.samples.size(); ++i)
    EXPECT_NEAR(a.samples[i], b.samples[i], 2.0 / 32768.0);
}

TEST(Wav, ChannelExtraction) {
  Audio a = Audio::from_channels({{1, 2, 3}, {4, 5, 6}}, 8000);
  EXPECT_EQ(a.frames(), 3);
  EXPECT_EQ(a.channel(1), (std::vector<float>{4, 5, 6}));
  EXPECT_THROW(a.channel(2), ContractError);
}

TEST(Wav, Errors) {
  EXPECT_THROW(read_wav("/nonexistent/nope.wav"), IoError);
  const auto path = tmp_path("mcse_bad.wav");
  std::ofstream f(path, std::ios::binary);
  f << "RIFFxxxxWAVEjunk";
  f.close();
  EXPECT_THROW(read_wav(path), IoError);
}
