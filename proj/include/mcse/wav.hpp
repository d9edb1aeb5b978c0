#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mcse/common.hpp"

namespace mcse {

// Interleaved multi-channel audio buffer. Samples are float32 in [-1, 1]
// by convention; nothing clips on write for IEEE-float files.
struct Audio {
  int sample_rate = 16000;
  int channels = 1;
  std::vector<float> samples;  // frame-major: samples[frame * channels + ch]

  int64_t frames() const {
    return channels ? int64_t(samples.size()) / channels : 0;
  }

  std::vector<float> channel(int ch) const {
    MCSE_CHECK(ch >= 0 && ch < channels, ContractError,
               "Audio::channel: index out of range");
    std::vector<float> out(size_t(frames()), 0.0f);
    for (int64_t i = 0; i < frames(); ++i)
      out[size_t(i)] = samples[size_t(i * channels + ch)];
    return out;
  }

  static Audio from_channels(const std::vector<std::vector<float>>& chans,
                             int sample_rate) {
    MCSE_CHECK(!chans.empty(), ContractError, "Audio: no channels");
    Audio a;
    a.sample_rate = sample_rate;
    a.channels = int(chans.size());
    const size_t n = chans[0].size();
    for (const auto& c : chans)
      MCSE_CHECK(c.size() == n, ShapeError, "Audio: channel length mismatch");
    a.samples.resize(n * chans.size());
    for (size_t i = 0; i < n; ++i)
      for (size_t ch = 0; ch < chans.size(); ++ch)
        a.samples[i * chans.size() + ch] = chans[ch][i];
    return a;
  }
};

namespace detail {

inline void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
}
inline uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
inline uint16_t get_u16(const uint8_t* p) {
  return uint16_t(p[0]) | uint16_t(uint32_t(p[1]) << 8);
}

}  // namespace detail

enum class WavFormat { pcm16, float32 };

inline void write_wav(const std::string& path, const Audio& audio,
                      WavFormat fmt = WavFormat::float32) {
  const uint16_t format_tag = fmt == WavFormat::pcm16 ? 1 : 3;
  const uint16_t bits = fmt == WavFormat::pcm16 ? 16 : 32;
  const uint16_t block = uint16_t(audio.channels * bits / 8);
  const uint32_t data_bytes = uint32_t(audio.samples.size() * bits / 8);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, format_tag);
  detail::put_u16(out, uint16_t(audio.channels));
  detail::put_u32(out, uint32_t(audio.sample_rate));
  detail::put_u32(out, uint32_t(audio.sample_rate) * block);
  detail::put_u16(out, block);
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_bytes);

  if (fmt == WavFormat::pcm16) {
    for (float v : audio.samples) {
      const float c = std::min(1.0f, std::max(-1.0f, v));
      const int16_t q = int16_t(std::lrint(c * 32767.0f));
      out.push_back(char(q & 0xff));
      out.push_back(char((q >> 8) & 0xff));
    }
  } else {
    static_assert(sizeof(float) == 4);
    const size_t base = out.size();
    out.resize(base + audio.samples.size() * 4);
    std::memcpy(out.data() + base, audio.samples.data(),
                audio.samples.size() * 4);
  }

  std::ofstream f(path, std::ios::binary);
  MCSE_CHECK(f.good(), IoError, "write_wav: cannot open " + path);
  f.write(out.data(), std::streamsize(out.size()));
  MCSE_CHECK(f.good(), IoError, "write_wav: write failed for " + path);
}

inline Audio read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  MCSE_CHECK(f.good(), IoError, "read_wav: cannot open " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  MCSE_CHECK(raw.size() >= 44, IoError, "read_wav: truncated file " + path);
  MCSE_CHECK(std::memcmp(raw.data(), "RIFF", 4) == 0 &&
                 std::memcmp(raw.data() + 8, "WAVE", 4) == 0,
             IoError, "read_wav: not a RIFF/WAVE file: " + path);

  Audio audio;
  uint16_t format_tag = 0, bits = 0;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    const uint32_t sz = detail::get_u32(raw.data() + pos + 4);
    const size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      MCSE_CHECK(sz >= 16 && body + sz <= raw.size(), IoError,
                 "read_wav: bad fmt chunk in " + path);
      format_tag = detail::get_u16(raw.data() + body);
      audio.channels = detail::get_u16(raw.data() + body + 2);
      audio.sample_rate = int(detail::get_u32(raw.data() + body + 4));
      bits = detail::get_u16(raw.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      MCSE_CHECK(have_fmt, IoError, "read_wav: data before fmt in " + path);
      MCSE_CHECK(body + sz <= raw.size(), IoError,
                 "read_wav: truncated data chunk in " + path);
      if (format_tag == 1 && bits == 16) {
        const size_t n = sz / 2;
        audio.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
          const int16_t q =
              int16_t(detail::get_u16(raw.data() + body + 2 * i));
          audio.samples[i] = float(q) / 32768.0f;
        }
      } else if (format_tag == 3 && bits == 32) {
        const size_t n = sz / 4;
        audio.samples.resize(n);
        std::memcpy(audio.samples.data(), raw.data() + body, n * 4);
      } else {
        throw IoError("read_wav: unsupported format (tag=" +
                      std::to_string(format_tag) + ", bits=" +
                      std::to_string(bits) + ") in " + path);
      }
      return audio;
    }
    pos = body + sz + (sz & 1);  // chunks are word-aligned
  }
  throw IoError("read_wav: no data chunk in " + path);
}

}  // namespace mcse
