#pragma once

#include <fstream>

#include <json.hpp>

#include "mcse/common.hpp"

namespace mcse {

struct ManifestItem {
  std::string noisy_path;
  std::string clean_path;
  double snr_db = 0;
  uint64_t seed = 0;
};

// Dataset index: item list plus seeded train/val/test assignment. Serialized
// as JSON; re-building with the same inputs is byte-identical.
struct Manifest {
  std::vector<ManifestItem> items;
  std::vector<int> train, val, test;
  nlohmann::ordered_json meta;

  const std::vector<int>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("Manifest: unknown split " + name);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json items_j = nlohmann::ordered_json::array();
    for (const auto& it : items)
      items_j.push_back({{"noisy_path", it.noisy_path},
                         {"clean_path", it.clean_path},
                         {"snr_db", it.snr_db},
                         {"seed", it.seed}});
    return {{"items", items_j},
            {"splits", {{"train", train}, {"val", val}, {"test", test}}},
            {"meta", meta}};
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    MCSE_CHECK(f.good(), IoError, "Manifest: cannot open " + path);
    f << to_json().dump(2) << "\n";
    MCSE_CHECK(f.good(), IoError, "Manifest: write failed for " + path);
  }

  static Manifest load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    MCSE_CHECK(f.good(), IoError, "Manifest: cannot open " + path);
    nlohmann::ordered_json j;
    try {
      f >> j;
    } catch (const std::exception& e) {
      throw IoError("Manifest: parse error in " + path + ": " + e.what());
    }
    Manifest m;
    for (const auto& it : j.at("items"))
      m.items.push_back({it.at("noisy_path").get<std::string>(),
                         it.at("clean_path").get<std::string>(),
                         it.at("snr_db").get<double>(),
                         it.at("seed").get<uint64_t>()});
    m.train = j.at("splits").at("train").get<std::vector<int>>();
    m.val = j.at("splits").at("val").get<std::vector<int>>();
    m.test = j.at("splits").at("test").get<std::vector<int>>();
    if (j.contains("meta")) m.meta = j.at("meta");
    return m;
  }
};

}  // namespace mcse
