#pragma once

/**
 * Explicit finite distributions over token sequences.
 *
 * A ToyDistribution enumerates its whole support, which makes exact Bayes
 * denoising, exact sampling, and distributional acceptance tests possible.
 * The named builders below are the reference distributions used by the test
 * suites and the CLI demos.
 */

#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "candi/rng.hpp"
#include "candi/types.hpp"

namespace candi {

struct ToyDistribution {
  int vocab = 0;
  int len = 0;
  std::vector<TokenSequence> sequences;
  std::vector<double> probs;

  int support_size() const { return static_cast<int>(sequences.size()); }

  void validate() const {
    if (vocab < 2) throw std::invalid_argument("ToyDistribution: vocab must be >= 2");
    if (len < 1) throw std::invalid_argument("ToyDistribution: len must be >= 1");
    if (sequences.empty() || sequences.size() != probs.size()) {
      throw std::invalid_argument("ToyDistribution: empty or mismatched support");
    }
    double total = 0.0;
    for (size_t s = 0; s < sequences.size(); ++s) {
      if (static_cast<int>(sequences[s].size()) != len) {
        throw std::invalid_argument("ToyDistribution: sequence length mismatch");
      }
      for (int token : sequences[s]) {
        if (token < 0 || token >= vocab) {
          throw std::invalid_argument("ToyDistribution: token out of range");
        }
      }
      if (!(probs[s] > 0.0)) throw std::invalid_argument("ToyDistribution: non-positive prob");
      total += probs[s];
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("ToyDistribution: probabilities must sum to 1");
    }
  }

  /// Probability of an exact sequence; zero off support.
  double prob_of(const TokenSequence& tokens) const {
    build_index();
    auto it = index_.find(key_of(tokens));
    return it == index_.end() ? 0.0 : probs[it->second];
  }

  /// Per-position marginal distributions, one row per position.
  Matrix marginals() const {
    Matrix m(len, vocab);
    for (size_t s = 0; s < sequences.size(); ++s) {
      for (int i = 0; i < len; ++i) m(i, sequences[s][i]) += probs[s];
    }
    return m;
  }

  TokenSequence sample(Rng& rng) const {
    double u = rng.next_double();
    double acc = 0.0;
    for (size_t s = 0; s < sequences.size(); ++s) {
      acc += probs[s];
      if (u < acc) return sequences[s];
    }
    return sequences.back();
  }

  nlohmann::json to_json() const {
    nlohmann::json support = nlohmann::json::array();
    for (size_t s = 0; s < sequences.size(); ++s) {
      support.push_back({{"tokens", sequences[s]}, {"prob", probs[s]}});
    }
    return {{"vocab", vocab}, {"len", len}, {"support", support}};
  }

  static ToyDistribution from_json(const nlohmann::json& doc) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      if (it.key() != "vocab" && it.key() != "len" && it.key() != "support") {
        throw std::invalid_argument("ToyDistribution: unknown key '" + it.key() + "'");
      }
    }
    ToyDistribution dist;
    dist.vocab = doc.at("vocab").get<int>();
    dist.len = doc.at("len").get<int>();
    for (const auto& entry : doc.at("support")) {
      dist.sequences.push_back(entry.at("tokens").get<TokenSequence>());
      dist.probs.push_back(entry.at("prob").get<double>());
    }
    dist.validate();
    return dist;
  }

  static ToyDistribution load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ToyDistribution: cannot open " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    return from_json(doc);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("ToyDistribution: cannot write " + path);
    out << to_json().dump(2) << "\n";
  }

 private:
  static std::string key_of(const TokenSequence& tokens) {
    std::string key;
    key.reserve(tokens.size() * 3);
    for (int token : tokens) {
      key += std::to_string(token);
      key += ',';
    }
    return key;
  }

  void build_index() const {
    if (index_.size() == sequences.size()) return;
    index_.clear();
    for (size_t s = 0; s < sequences.size(); ++s) index_[key_of(sequences[s])] = s;
  }

  mutable std::unordered_map<std::string, size_t> index_;
};

// ============================================================================
// Reference distributions
// ============================================================================

namespace toy {

/// 5-sequence reference distribution (v = 3, L = 2).
inline ToyDistribution reference_5seq() {
  ToyDistribution dist;
  dist.vocab = 3;
  dist.len = 2;
  dist.sequences = {{0, 1}, {1, 2}, {2, 0}, {0, 2}, {1, 0}};
  dist.probs = {0.35, 0.25, 0.20, 0.12, 0.08};
  dist.validate();
  return dist;
}

/// Strong pairwise dependence with full support: 0.9 diagonal + 0.1 uniform.
inline ToyDistribution dependent_pair(int vocab = 8) {
  ToyDistribution dist;
  dist.vocab = vocab;
  dist.len = 2;
  const double base = 0.1 / (vocab * vocab);
  const double diag = 0.9 / vocab;
  for (int a = 0; a < vocab; ++a) {
    for (int b = 0; b < vocab; ++b) {
      dist.sequences.push_back({a, b});
      dist.probs.push_back(base + (a == b ? diag : 0.0));
    }
  }
  dist.validate();
  return dist;
}

/**
 * 8-sequence training distribution (v = 8, L = 4): constant sequences with
 * non-uniform mass. Every position carries the same token, so one clean
 * anchor pins the whole sequence and noisy rows vote additively; the Bayes
 * posterior is position-exchangeable and sits inside what the shared-head
 * denoiser can represent.
 */
inline ToyDistribution training_8seq() {
  ToyDistribution dist;
  dist.vocab = 8;
  dist.len = 4;
  for (int k = 0; k < 8; ++k) dist.sequences.push_back({k, k, k, k});
  dist.probs = {0.20, 0.15, 0.15, 0.125, 0.125, 0.10, 0.10, 0.05};
  dist.validate();
  return dist;
}

/// Degenerate single-sequence distribution.
inline ToyDistribution single_sequence(TokenSequence tokens, int vocab) {
  ToyDistribution dist;
  dist.vocab = vocab;
  dist.len = static_cast<int>(tokens.size());
  dist.sequences = {std::move(tokens)};
  dist.probs = {1.0};
  dist.validate();
  return dist;
}

/**
 * Two-class distribution for guidance demos (v = 4, L = 3): class A sequences
 * use tokens {0, 1}, class B uses {2, 3}, plus a thin uniform component so
 * every token combination has positive probability.
 */
inline ToyDistribution two_class() {
  ToyDistribution dist;
  dist.vocab = 4;
  dist.len = 3;
  const int total = 4 * 4 * 4;
  const double base = 0.10 / total;
  const double class_mass = 0.90 / 16.0;  // 8 sequences per class
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 4; ++c) {
        bool class_a = a < 2 && b < 2 && c < 2;
        bool class_b = a >= 2 && b >= 2 && c >= 2;
        dist.sequences.push_back({a, b, c});
        dist.probs.push_back(base + ((class_a || class_b) ? class_mass : 0.0));
      }
    }
  }
  dist.validate();
  return dist;
}

/// True iff every token falls in the lower half of the vocabulary.
inline bool all_lower_half(const TokenSequence& tokens, int vocab) {
  for (int token : tokens) {
    if (token >= vocab / 2) return false;
  }
  return true;
}

/// Small-vocabulary continuous-baseline toy (v = 4, L = 2).
inline ToyDistribution small_ode_toy() {
  ToyDistribution dist;
  dist.vocab = 4;
  dist.len = 2;
  dist.sequences = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}, {1, 3}};
  dist.probs = {0.30, 0.25, 0.20, 0.15, 0.06, 0.04};
  dist.validate();
  return dist;
}

/// Large-vocabulary toy on widely spaced token pairs (v = 512, L = 2).
inline ToyDistribution corner_toy(int vocab = 512) {
  ToyDistribution dist;
  dist.vocab = vocab;
  dist.len = 2;
  const int k_pairs = 16;
  const int stride = vocab / k_pairs;
  double norm = k_pairs * (k_pairs + 1) / 2.0;
  for (int k = 0; k < k_pairs; ++k) {
    dist.sequences.push_back({k * stride, k * stride + stride / 2});
    dist.probs.push_back((k + 1) / norm);
  }
  dist.validate();
  return dist;
}

/// Lookup of the named reference distributions; throws on unknown names.
inline ToyDistribution by_name(const std::string& name) {
  if (name == "reference5") return reference_5seq();
  if (name == "dependent-pair") return dependent_pair();
  if (name == "training8") return training_8seq();
  if (name == "two-class") return two_class();
  if (name == "small-ode") return small_ode_toy();
  if (name == "corner512") return corner_toy();
  throw std::invalid_argument("unknown built-in distribution '" + name + "'");
}

}  // namespace toy

/// Resolve a distribution argument: builtin name or a JSON file path.
inline ToyDistribution resolve_distribution(const std::string& spec) {
  if (spec.find('.') == std::string::npos && spec.find('/') == std::string::npos) {
    return toy::by_name(spec);
  }
  return ToyDistribution::load(spec);
}

}  // namespace candi
