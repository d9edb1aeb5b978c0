#pragma once

#include <array>
#include <filesystem>

#include "mcse/config.hpp"
#include "mcse/manifest.hpp"
#include "mcse/rng.hpp"
#include "mcse/wav.hpp"

namespace mcse {
namespace sim {

struct ArrayGeometry {
  std::vector<std::array<double, 3>> mic_positions;  // meters
  int reference_index = 0;
  std::string id = "custom";

  int mics() const { return int(mic_positions.size()); }

  void validate() const {
    MCSE_CHECK(!mic_positions.empty(), ConfigError, "geometry: no microphones");
    MCSE_CHECK(reference_index >= 0 && reference_index < mics(), ConfigError,
               "geometry: reference index out of range");
    for (size_t i = 0; i < mic_positions.size(); ++i)
      for (size_t j = i + 1; j < mic_positions.size(); ++j) {
        const auto &a = mic_positions[i], &b = mic_positions[j];
        const double d2 = (a[0] - b[0]) * (a[0] - b[0]) +
                          (a[1] - b[1]) * (a[1] - b[1]) +
                          (a[2] - b[2]) * (a[2] - b[2]);
        MCSE_CHECK(d2 > 0, ConfigError, "geometry: duplicate mic positions");
      }
  }

  // Six microphones on a 0.20 m x 0.10 m rectangle (3 x 2 grid) in the z = 0
  // plane; the reference is index 4, the bottom-center position. This is a
  // stand-in geometry, flagged as such in manifest metadata.
  static ArrayGeometry rect6() {
    ArrayGeometry g;
    g.id = "rect6";
    for (double y : {0.05, -0.05})
      for (double x : {-0.10, 0.0, 0.10})
        g.mic_positions.push_back({x, y, 0.0});
    g.reference_index = 4;
    return g;
  }

  static ArrayGeometry from_json(const Json& j) {
    ArrayGeometry g;
    g.id = cfgio::get_or<std::string>(j, "id", "custom");
    for (const auto& p : j.at("mic_positions"))
      g.mic_positions.push_back(
          {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    g.reference_index = cfgio::get_or(j, "reference_index", 0);
    g.validate();
    return g;
  }

  Json to_json() const {
    Json mics_j = Json::array();
    for (const auto& p : mic_positions) mics_j.push_back({p[0], p[1], p[2]});
    return {{"id", id},
            {"mic_positions", mics_j},
            {"reference_index", reference_index}};
  }
};

inline ArrayGeometry geometry_preset(const std::string& name) {
  if (name == "rect6") return ArrayGeometry::rect6();
  if (name == "single") {
    ArrayGeometry g;
    g.id = "single";
    g.mic_positions.push_back({0.0, 0.0, 0.0});
    g.reference_index = 0;
    return g;
  }
  // otherwise treat as a path to a JSON geometry file
  std::ifstream f(name);
  MCSE_CHECK(f.good(), ConfigError,
             "geometry: unknown preset and unreadable file: " + name);
  Json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("geometry: parse error in " + name + ": " + e.what());
  }
  return ArrayGeometry::from_json(j);
}

enum class SourceKind { harmonic_am, filtered_noise_burst, wav_file };

inline const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::harmonic_am: return "harmonic_am";
    case SourceKind::filtered_noise_burst: return "filtered_noise_burst";
    case SourceKind::wav_file: return "wav_file";
  }
  return "?";
}

struct SourceParams {
  double f0 = 0;              // harmonic_am fundamental; 0 = draw from seed
  std::string wav_path;       // for wav_file
};

// Deterministic test sources, peak-normalized to 0.5.
inline std::vector<float> gen_source(SourceKind kind, double duration_s,
                                     int fs, uint64_t seed,
                                     const SourceParams& sp = {}) {
  MCSE_CHECK(duration_s > 0, ContractError, "gen_source: duration must be > 0");
  const int64_t n = int64_t(std::llround(duration_s * fs));
  std::vector<float> x(size_t(n), 0.0f);
  Rng rng(seed ^ 0x736f7572ULL);

  if (kind == SourceKind::harmonic_am) {
    const double f0 = sp.f0 > 0 ? sp.f0 : rng.uniform(150.0, 280.0);
    const double fam = rng.uniform(2.0, 6.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const int harmonics = 10;
    std::vector<double> hphase(harmonics);
    for (auto& p : hphase) p = rng.uniform(0.0, 2.0 * kPi);
    for (int64_t i = 0; i < n; ++i) {
      const double t = double(i) / fs;
      double s = 0;
      for (int h = 1; h <= harmonics; ++h)
        s += std::sin(2.0 * kPi * f0 * h * t + hphase[size_t(h - 1)]) / h;
      const double env = 0.55 + 0.45 * std::sin(2.0 * kPi * fam * t + phi);
      x[size_t(i)] = float(s * env);
    }
  } else if (kind == SourceKind::filtered_noise_burst) {
    // white noise through a biquad bandpass, gated by smooth bursts
    const double fc = rng.uniform(400.0, 2000.0);
    const double q = 1.0;
    const double w0 = 2.0 * kPi * fc / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double b0 = alpha, b1 = 0.0, b2 = -alpha;
    const double a0 = 1 + alpha, a1 = -2 * std::cos(w0), a2 = 1 - alpha;
    double z1 = 0, z2 = 0, y1 = 0, y2 = 0;
    const double burst_hz = rng.uniform(1.5, 4.0);
    const double duty = rng.uniform(0.45, 0.7);
    const double bphi = rng.uniform(0.0, 1.0);
    for (int64_t i = 0; i < n; ++i) {
      const double w = rng.normal();
      const double y =
          (b0 * w + b1 * z1 + b2 * z2 - a1 * y1 - a2 * y2) / a0;
      z2 = z1;
      z1 = w;
      y2 = y1;
      y1 = y;
      const double ph = std::fmod(double(i) / fs * burst_hz + bphi, 1.0);
      double env = 0.0;
      if (ph < duty) {
        const double u = ph / duty;  // raised-cosine on/off inside the burst
        env = 0.5 - 0.5 * std::cos(2.0 * kPi * std::min(u, 1.0));
      }
      x[size_t(i)] = float(y * env);
    }
  } else {
    MCSE_CHECK(!sp.wav_path.empty(), ContractError,
               "gen_source: wav_file kind needs a path");
    const Audio a = read_wav(sp.wav_path);
    MCSE_CHECK(a.frames() >= n, DomainError,
               "gen_source: wav too short: " + sp.wav_path);
    const auto ch = a.channel(0);
    std::copy_n(ch.begin(), n, x.begin());
  }

  float peak = 0;
  for (float v : x) peak = std::max(peak, std::abs(v));
  MCSE_CHECK(peak > 0, DomainError, "gen_source: silent source");
  const float g = 0.5f / peak;
  for (float& v : x) v *= g;
  return x;
}

// Windowed-sinc fractional delay with 1/distance gain; delay in samples.
inline std::vector<float> fractional_delay(const std::vector<float>& x,
                                           double delay, double gain) {
  constexpr int kHalfWidth = 32;
  const int64_t n = int64_t(x.size());
  std::vector<float> y(size_t(n), 0.0f);
  for (int64_t i = 0; i < n; ++i) {
    const double pos = double(i) - delay;
    const int64_t k0 = std::max<int64_t>(0, int64_t(std::ceil(pos)) - kHalfWidth);
    const int64_t k1 =
        std::min<int64_t>(n - 1, int64_t(std::floor(pos)) + kHalfWidth);
    double acc = 0;
    for (int64_t k = k0; k <= k1; ++k) {
      const double t = pos - double(k);
      const double st = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
      const double w = 0.5 + 0.5 * std::cos(kPi * t / kHalfWidth);
      acc += double(x[size_t(k)]) * st * w;
    }
    y[size_t(i)] = float(acc * gain);
  }
  return y;
}

enum class NoiseKind { white, pink, babble };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::babble: return "babble";
  }
  return "?";
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::white;
  double snr_db = 5.0;
};

struct MixtureItem {
  Audio noisy;                    // M channels
  std::vector<float> clean_ref;   // reference channel, noise-free
  double snr_db = 0;
  Json meta;
};

namespace detail {

inline std::vector<float> make_noise(NoiseKind kind, int64_t n, Rng& rng,
                                     const std::vector<float>* common_env) {
  std::vector<float> v(size_t(n), 0.0f);
  if (kind == NoiseKind::white) {
    for (auto& s : v) s = float(rng.normal());
  } else if (kind == NoiseKind::pink) {
    // Kellet's -3 dB/oct IIR approximation
    double b0 = 0, b1 = 0, b2 = 0;
    for (auto& s : v) {
      const double w = rng.normal();
      b0 = 0.99765 * b0 + w * 0.0990460;
      b1 = 0.96300 * b1 + w * 0.2965164;
      b2 = 0.57000 * b2 + w * 1.0526913;
      s = float(b0 + b1 + b2 + w * 0.1848);
    }
  } else {
    // speech-shaped: white noise through a gentle lowpass, modulated by the
    // shared envelope so channels stay decorrelated but co-modulated
    double y1 = 0;
    for (int64_t i = 0; i < n; ++i) {
      const double w = rng.normal();
      y1 = 0.88 * y1 + 0.12 * w;
      v[size_t(i)] = float(y1 * 8.0);
    }
    if (common_env)
      for (int64_t i = 0; i < n; ++i) v[size_t(i)] *= (*common_env)[size_t(i)];
  }
  return v;
}

}  // namespace detail

// Free-field fractional-delay mixing, no reverberation. The clean reference
// channel is the delayed/attenuated source at the reference microphone; noise
// is decorrelated across channels and scaled so the reference channel meets
// snr_db exactly.
inline MixtureItem simulate_array(const std::vector<float>& src,
                                  const ArrayGeometry& geom,
                                  const std::array<double, 3>& src_pos,
                                  const NoiseSpec& noise, int fs,
                                  uint64_t seed) {
  geom.validate();
  const int M = geom.mics();
  const int64_t n = int64_t(src.size());

  // "outside the array plane": the presets are coplanar in z, so measure the
  // z offset; for non-coplanar custom geometries fall back to mic distance
  double zmin = geom.mic_positions[0][2], zmax = zmin;
  for (const auto& p : geom.mic_positions) {
    zmin = std::min(zmin, p[2]);
    zmax = std::max(zmax, p[2]);
  }
  if (zmax - zmin < 1e-9) {
    MCSE_CHECK(std::abs(src_pos[2] - zmin) >= 0.1, ContractError,
               "simulate_array: source must sit >= 0.1 m off the array plane");
  }

  double src_energy = 0;
  for (float s : src) src_energy += double(s) * double(s);
  MCSE_CHECK(src_energy > 0, DomainError,
             "simulate_array: cannot calibrate SNR for a zero-energy source");

  std::vector<std::vector<float>> clean(size_t(M), std::vector<float>{});
  for (int m = 0; m < M; ++m) {
    const auto& p = geom.mic_positions[size_t(m)];
    const double dx = src_pos[0] - p[0], dy = src_pos[1] - p[1],
                 dz = src_pos[2] - p[2];
    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
    MCSE_CHECK(dist >= 0.1, ContractError,
               "simulate_array: source too close to microphone " +
                   std::to_string(m));
    const double delay = dist / kSpeedOfSound * fs;
    clean[size_t(m)] = fractional_delay(src, delay, 1.0 / dist);
  }

  Rng rng(seed ^ 0x6e6f6973ULL);
  std::vector<float> env;
  if (noise.kind == NoiseKind::babble) {
    // shared 4 Hz random envelope, cosine-interpolated
    Rng erng = rng.fork(0xe17);
    const int64_t seg = fs / 4;
    env.resize(size_t(n));
    double prev = erng.uniform(0.2, 1.0), next = erng.uniform(0.2, 1.0);
    for (int64_t i = 0; i < n; ++i) {
      const int64_t k = i % seg;
      if (k == 0 && i > 0) {
        prev = next;
        next = erng.uniform(0.2, 1.0);
      }
      const double u = 0.5 - 0.5 * std::cos(kPi * double(k) / double(seg));
      env[size_t(i)] = float(prev + (next - prev) * u);
    }
  }
  std::vector<std::vector<float>> noise_ch(size_t(M), std::vector<float>{});
  for (int m = 0; m < M; ++m) {
    Rng cr = rng.fork(uint64_t(m) + 1);
    noise_ch[size_t(m)] =
        detail::make_noise(noise.kind, n, cr, env.empty() ? nullptr : &env);
  }

  const auto& ref_clean = clean[size_t(geom.reference_index)];
  const auto& ref_noise = noise_ch[size_t(geom.reference_index)];
  double ec = 0, en = 0;
  for (int64_t i = 0; i < n; ++i) {
    ec += double(ref_clean[size_t(i)]) * double(ref_clean[size_t(i)]);
    en += double(ref_noise[size_t(i)]) * double(ref_noise[size_t(i)]);
  }
  MCSE_CHECK(en > 0, NumericError, "simulate_array: zero-energy noise");
  const double scale =
      std::sqrt(ec / (en * std::pow(10.0, noise.snr_db / 10.0)));

  std::vector<std::vector<float>> noisy(size_t(M), std::vector<float>{});
  for (int m = 0; m < M; ++m) {
    noisy[size_t(m)].resize(size_t(n));
    for (int64_t i = 0; i < n; ++i)
      noisy[size_t(m)][size_t(i)] =
          clean[size_t(m)][size_t(i)] +
          float(scale) * noise_ch[size_t(m)][size_t(i)];
  }

  MixtureItem item;
  item.noisy = Audio::from_channels(noisy, fs);
  item.clean_ref = ref_clean;
  item.snr_db = noise.snr_db;
  item.meta = Json{{"seed", seed},
                   {"noise", to_string(noise.kind)},
                   {"geometry", geom.id},
                   {"src_pos", {src_pos[0], src_pos[1], src_pos[2]}}};
  return item;
}

// Scans a directory of generated items (item_XXXX.json + the wav pair each
// entry names) and writes a manifest with a seeded split assignment. Fails
// without writing anything if any referenced file is missing or unreadable.
inline Manifest build_manifest(const std::string& dir, double train_frac,
                               double val_frac, double test_frac,
                               uint64_t seed) {
  namespace fs = std::filesystem;
  MCSE_CHECK(std::abs(train_frac + val_frac + test_frac - 1.0) < 1e-9,
             ConfigError, "build_manifest: split fractions must sum to 1");
  std::vector<fs::path> metas;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename().string().rfind("item_", 0) == 0 &&
        e.path().extension() == ".json")
      metas.push_back(e.path());
  std::sort(metas.begin(), metas.end());
  MCSE_CHECK(!metas.empty(), IoError,
             "build_manifest: no items found in " + dir);

  Manifest m;
  std::vector<std::string> problems;
  for (const auto& p : metas) {
    try {
      std::ifstream f(p);
      Json j;
      f >> j;
      ManifestItem it;
      it.noisy_path = j.at("noisy_path").get<std::string>();
      it.clean_path = j.at("clean_path").get<std::string>();
      it.snr_db = j.at("snr_db").get<double>();
      it.seed = j.at("seed").get<uint64_t>();
      for (const std::string& rel : {it.noisy_path, it.clean_path}) {
        const fs::path wav = fs::path(dir) / rel;
        if (!fs::exists(wav)) {
          problems.push_back("missing " + wav.string());
        } else {
          read_wav(wav.string());  // corrupt files throw
        }
      }
      if (j.contains("geometry") && m.meta.is_null())
        m.meta = Json{{"geometry", j.at("geometry")},
                      {"note", "synthetic free-field stand-in array"}};
      m.items.push_back(it);
    } catch (const Error& e) {
      problems.push_back(p.filename().string() + ": " + e.what());
    } catch (const std::exception& e) {
      problems.push_back(p.filename().string() + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "build_manifest: " + std::to_string(problems.size()) +
                      " bad item(s):";
    for (const auto& s : problems) msg += "\n  " + s;
    throw IoError(msg);
  }

  std::vector<int> order(m.items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  Rng rng(seed ^ 0x73706c69ULL);
  shuffle(order, rng);
  const int nn = int(order.size());
  const int n_train = int(std::llround(train_frac * nn));
  const int n_val = int(std::llround((train_frac + val_frac) * nn)) - n_train;
  for (int i = 0; i < nn; ++i) {
    if (i < n_train)
      m.train.push_back(order[size_t(i)]);
    else if (i < n_train + n_val)
      m.val.push_back(order[size_t(i)]);
    else
      m.test.push_back(order[size_t(i)]);
  }
  return m;
}

// End-to-end dataset generation for the `simulate` command: writes
// noisy_XXXX.wav (M channels), clean_XXXX.wav, item_XXXX.json per item,
// then a manifest.json with splits.
inline Manifest simulate_dataset(const SimulateConfig& cfg,
                                 const ArrayGeometry& geom,
                                 const std::string& out_dir, int fs = 16000) {
  namespace fs_ = std::filesystem;
  geom.validate();
  MCSE_CHECK(cfg.n_items >= 1, ConfigError, "simulate: need at least one item");
  fs_::create_directories(out_dir);
  Rng master(cfg.seed ^ 0x73696dULL);

  for (int i = 0; i < cfg.n_items; ++i) {
    Rng rng = master.fork(uint64_t(i) + 1);
    const SourceKind kind = i % 2 == 0 ? SourceKind::harmonic_am
                                       : SourceKind::filtered_noise_burst;
    const uint64_t src_seed = rng.next_u64();
    const auto src = gen_source(kind, cfg.duration_s, fs, src_seed);

    const double az = rng.uniform(0.0, 2.0 * kPi);
    const double r = rng.uniform(0.5, 2.0);
    const std::array<double, 3> pos = {r * std::cos(az), r * std::sin(az),
                                       rng.uniform(0.3, 1.2)};
    NoiseSpec ns;
    const NoiseKind kinds[3] = {NoiseKind::white, NoiseKind::pink,
                                NoiseKind::babble};
    ns.kind = kinds[i % 3];
    ns.snr_db = cfg.snr_grid[size_t(i) % cfg.snr_grid.size()];
    const uint64_t mix_seed = rng.next_u64();
    MixtureItem item = simulate_array(src, geom, pos, ns, fs, mix_seed);

    char tag[16];
    std::snprintf(tag, sizeof(tag), "%04d", i);
    const std::string noisy_rel = std::string("noisy_") + tag + ".wav";
    const std::string clean_rel = std::string("clean_") + tag + ".wav";
    write_wav((fs_::path(out_dir) / noisy_rel).string(), item.noisy);
    Audio clean;
    clean.sample_rate = fs;
    clean.channels = 1;
    clean.samples = item.clean_ref;
    write_wav((fs_::path(out_dir) / clean_rel).string(), clean);

    Json meta = item.meta;
    meta["noisy_path"] = noisy_rel;
    meta["clean_path"] = clean_rel;
    meta["snr_db"] = item.snr_db;
    meta["source"] = to_string(kind);
    std::ofstream mf(fs_::path(out_dir) / (std::string("item_") + tag + ".json"));
    mf << meta.dump(2) << "\n";
  }

  Manifest m = build_manifest(out_dir, cfg.train_frac, cfg.val_frac,
                              cfg.test_frac, cfg.seed);
  m.meta["geometry_def"] = geom.to_json();
  m.save((fs_::path(out_dir) / "manifest.json").string());
  return m;
}

}  // namespace sim
}  // namespace mcse
