#pragma once

#include <cstring>
#include <fstream>

#include "mcse/config.hpp"

namespace mcse {

// Checkpoint container: an 8-byte little-endian header length, a JSON header
// {format_version, config, tensors[{name, shape, dtype, offset}]}, then the
// raw float32 tensor bytes (offsets are relative to the payload start).
// Round trips are bit-exact.
inline constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const Generator<float>& model,
                            const std::string& path) {
  const auto& ps = model.params();
  Json tensors = Json::array();
  int64_t offset = 0;
  for (size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps.at(i);
    tensors.push_back(Json{{"name", p.name},
                           {"shape", p.value.shape()},
                           {"dtype", "f32"},
                           {"offset", offset}});
    offset += p.numel() * int64_t(sizeof(float));
  }
  const Json header = {{"format_version", kCheckpointVersion},
                       {"config", cfgio::to_json(model.config())},
                       {"tensors", tensors}};
  const std::string htext = header.dump();

  std::ofstream f(path, std::ios::binary);
  MCSE_CHECK(f.good(), IoError, "save_checkpoint: cannot open " + path);
  const uint64_t hlen = htext.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = char((hlen >> (8 * i)) & 0xff);
  f.write(lenbuf, 8);
  f.write(htext.data(), std::streamsize(htext.size()));
  for (size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps.at(i);
    f.write(reinterpret_cast<const char*>(p.value.data()),
            std::streamsize(p.numel() * int64_t(sizeof(float))));
  }
  MCSE_CHECK(f.good(), IoError, "save_checkpoint: write failed for " + path);
}

namespace detail {

struct CheckpointFile {
  Json header;
  std::string payload;
};

inline CheckpointFile read_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  MCSE_CHECK(f.good(), IoError, "load_checkpoint: cannot open " + path);
  char lenbuf[8];
  f.read(lenbuf, 8);
  MCSE_CHECK(f.gcount() == 8, IoError,
             "load_checkpoint: truncated file " + path);
  uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i)
    hlen |= uint64_t(uint8_t(lenbuf[i])) << (8 * i);
  MCSE_CHECK(hlen > 0 && hlen < (64u << 20), IoError,
             "load_checkpoint: implausible header length in " + path);
  std::string htext(hlen, '\0');
  f.read(htext.data(), std::streamsize(hlen));
  MCSE_CHECK(uint64_t(f.gcount()) == hlen, IoError,
             "load_checkpoint: truncated header in " + path);

  CheckpointFile out;
  try {
    out.header = Json::parse(htext);
  } catch (const std::exception& e) {
    throw IoError("load_checkpoint: header parse error in " + path + ": " +
                  e.what());
  }
  const int version = cfgio::get_or(out.header, "format_version", -1);
  MCSE_CHECK(version == kCheckpointVersion, IoError,
             "load_checkpoint: unsupported format version " +
                 std::to_string(version) + " in " + path);
  out.payload.assign(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
  return out;
}

inline void fill_params_from(const CheckpointFile& ck,
                             Generator<float>& model,
                             const std::string& path) {
  auto& ps = model.params();
  const Json& tensors = ck.header.at("tensors");
  MCSE_CHECK(tensors.size() == ps.size(), ConfigError,
             "load_checkpoint: tensor count mismatch (" +
                 std::to_string(tensors.size()) + " in file, " +
                 std::to_string(ps.size()) + " in model)");
  for (const Json& t : tensors) {
    const std::string name = t.at("name").get<std::string>();
    auto* p = ps.find(name);
    MCSE_CHECK(p != nullptr, ConfigError,
               "load_checkpoint: unknown tensor \"" + name + "\" in " + path);
    const Shape shape = t.at("shape").get<Shape>();
    MCSE_CHECK(shape == p->value.shape(), ShapeError,
               "load_checkpoint: tensor \"" + name + "\" has shape " +
                   shape_str(shape) + " but the model expects " +
                   shape_str(p->value.shape()));
    MCSE_CHECK(t.at("dtype").get<std::string>() == "f32", IoError,
               "load_checkpoint: unsupported dtype for \"" + name + "\"");
    const int64_t off = t.at("offset").get<int64_t>();
    const int64_t bytes = p->numel() * int64_t(sizeof(float));
    MCSE_CHECK(off >= 0 && off + bytes <= int64_t(ck.payload.size()), IoError,
               "load_checkpoint: truncated payload for \"" + name + "\"");
    std::memcpy(p->value.data(), ck.payload.data() + off, size_t(bytes));
  }
}

}  // namespace detail

// Rebuilds the model from the embedded config snapshot.
inline Generator<float> load_checkpoint(const std::string& path) {
  const auto ck = detail::read_checkpoint_file(path);
  const ModelConfig cfg = cfgio::model_from_json(ck.header.at("config"));
  Generator<float> model(cfg, 0);
  detail::fill_params_from(ck, model, path);
  return model;
}

// Loads weights into an existing model; every tensor must match by name and
// shape. The first mismatch is reported by tensor name.
inline void load_checkpoint_into(Generator<float>& model,
                                 const std::string& path) {
  const auto ck = detail::read_checkpoint_file(path);
  detail::fill_params_from(ck, model, path);
}

}  // namespace mcse
