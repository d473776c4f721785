#pragma once

/**
 * CLI run configuration and manifests.
 *
 * Configs are versioned JSON documents parsed strictly: unknown keys are
 * rejected by name, defaults are filled in, and the effective config is
 * echoed into the run manifest together with the seed, the wall-clock
 * duration, and a checksum per written artifact.
 */

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "candi/denoiser.hpp"
#include "candi/sampler.hpp"
#include "candi/types.hpp"

namespace candi {

struct RunConfig {
  int version = 1;
  KernelConfig kernel;
  TrainConfig train;
  SamplerConfig sampler;
  std::string distribution;  // builtin name or JSON path
  std::string checkpoint;    // optional parameter checkpoint path

  nlohmann::json to_json() const {
    return {{"version", version},
            {"kernel",
             {{"rank_min", kernel.rank_min},
              {"rank_max", kernel.rank_max},
              {"vocab", kernel.vocab},
              {"seq_len", kernel.seq_len}}},
            {"train",
             {{"learning_rate", train.learning_rate},
              {"steps", train.steps},
              {"batch_size", train.batch_size},
              {"seed", train.seed},
              {"lambda", train.lambda},
              {"embed_dim", train.embed_dim},
              {"hidden_dim", train.hidden_dim}}},
            {"sampler",
             {{"mode", to_string(sampler.mode)},
              {"nfe", sampler.nfe},
              {"temperature", sampler.temperature},
              {"guidance_weight", sampler.guidance_weight},
              {"seed", sampler.seed}}},
            {"paths",
             {{"distribution", distribution}, {"checkpoint", checkpoint}}}};
  }
};

namespace detail {

inline void require_keys(const nlohmann::json& obj,
                         const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const auto& key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& doc) {
  detail::require_keys(doc, {"version", "kernel", "train", "sampler", "paths"},
                       "document root");
  RunConfig cfg;
  if (!doc.contains("version")) {
    throw std::invalid_argument("config: missing required key 'version'");
  }
  cfg.version = doc.at("version").get<int>();
  if (cfg.version != 1) throw std::invalid_argument("config: version must be 1");

  if (doc.contains("kernel")) {
    const auto& k = doc.at("kernel");
    detail::require_keys(k, {"rank_min", "rank_max", "vocab", "seq_len"}, "kernel");
    detail::read_if(k, "rank_min", cfg.kernel.rank_min);
    detail::read_if(k, "rank_max", cfg.kernel.rank_max);
    detail::read_if(k, "vocab", cfg.kernel.vocab);
    detail::read_if(k, "seq_len", cfg.kernel.seq_len);
    if (!(cfg.kernel.rank_min > 0.0 && cfg.kernel.rank_min < cfg.kernel.rank_max &&
          cfg.kernel.rank_max < 0.5)) {
      throw std::invalid_argument(
          "config: invariant violated: rank_min and rank_max must satisfy "
          "0 < rank_min < rank_max < 0.5");
    }
  }
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    detail::require_keys(t,
                         {"learning_rate", "steps", "batch_size", "seed", "lambda",
                          "embed_dim", "hidden_dim"},
                         "train");
    detail::read_if(t, "learning_rate", cfg.train.learning_rate);
    detail::read_if(t, "steps", cfg.train.steps);
    detail::read_if(t, "batch_size", cfg.train.batch_size);
    detail::read_if(t, "seed", cfg.train.seed);
    detail::read_if(t, "lambda", cfg.train.lambda);
    detail::read_if(t, "embed_dim", cfg.train.embed_dim);
    detail::read_if(t, "hidden_dim", cfg.train.hidden_dim);
    cfg.train.validate();
  }
  if (doc.contains("sampler")) {
    const auto& s = doc.at("sampler");
    detail::require_keys(
        s, {"mode", "nfe", "temperature", "guidance_weight", "seed"}, "sampler");
    if (s.contains("mode")) {
      cfg.sampler.mode = sampler_mode_from_string(s.at("mode").get<std::string>());
    }
    detail::read_if(s, "nfe", cfg.sampler.nfe);
    detail::read_if(s, "temperature", cfg.sampler.temperature);
    detail::read_if(s, "guidance_weight", cfg.sampler.guidance_weight);
    detail::read_if(s, "seed", cfg.sampler.seed);
    if (cfg.sampler.nfe < 1) throw std::invalid_argument("config: nfe must be >= 1");
    if (!(cfg.sampler.temperature > 0.0)) {
      throw std::invalid_argument("config: temperature must be positive");
    }
  }
  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    detail::require_keys(p, {"distribution", "checkpoint"}, "paths");
    detail::read_if(p, "distribution", cfg.distribution);
    detail::read_if(p, "checkpoint", cfg.checkpoint);
  }
  return cfg;
}

/// Strict load with parse diagnostics; invariants checked on every field.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config: parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(doc);
}

// ============================================================================
// Manifests
// ============================================================================

/// FNV-1a 64-bit checksum of a file's bytes, as fixed-width hex.
inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checksum: cannot open " + path);
  uint64_t hash = 0xCBF29CE484222325ull;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      hash ^= static_cast<unsigned char>(buffer[k]);
      hash *= 0x100000001B3ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

struct RunManifest {
  nlohmann::json config_echo;
  uint64_t seed = 0;
  double duration_seconds = 0.0;
  std::map<std::string, std::string> artifact_checksums;

  nlohmann::json to_json() const {
    nlohmann::json artifacts = nlohmann::json::object();
    for (const auto& [path, checksum] : artifact_checksums) {
      artifacts[path] = checksum;
    }
    return {{"config", config_echo},
            {"seed", seed},
            {"duration_seconds", duration_seconds},
            {"artifacts", artifacts}};
  }
};

/// Wall-clock scope that assembles and writes the manifest on demand.
class ManifestRecorder {
 public:
  ManifestRecorder(nlohmann::json config_echo, uint64_t seed)
      : start_(std::chrono::steady_clock::now()) {
    manifest_.config_echo = std::move(config_echo);
    manifest_.seed = seed;
  }

  void add_artifact(const std::string& path) {
    manifest_.artifact_checksums[path] = file_checksum(path);
  }

  void write(std::ostream& out) {
    finish();
    out << manifest_.to_json().dump(2) << "\n";
  }

  void write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot write " + path);
    write(out);
  }

 private:
  void finish() {
    manifest_.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
  }

  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace candi
