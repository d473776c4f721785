#pragma once

/**
 * Diversity-coherence frontier analysis.
 *
 * Diversity is pooled unigram entropy (nats); coherence is mean oracle
 * negative log-likelihood under the toy distribution (lower is better).
 * A frontier is the curve traced by sweeping the sampling temperature, and
 * methods are compared by frontier dominance over the shared diversity range
 * rather than at any single operating point.
 */

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "candi/sampler.hpp"
#include "candi/toy_distribution.hpp"
#include "candi/types.hpp"

namespace candi {

struct SampleSet {
  std::vector<TokenSequence> samples;
  SamplerConfig config;
};

struct FrontierPoint {
  double temperature = 0.0;
  double diversity = 0.0;  // pooled unigram entropy, nats
  double coherence = 0.0;  // mean oracle NLL, nats
  double tv = 0.0;         // total variation to the oracle distribution
};

struct Frontier {
  std::vector<FrontierPoint> points;  // ordered by temperature
};

inline constexpr double kCoherenceFloor = 1e-12;

/// Shannon entropy of the pooled token frequencies across samples/positions.
inline double unigram_entropy(const std::vector<TokenSequence>& samples) {
  if (samples.empty()) throw std::invalid_argument("unigram_entropy: empty sample set");
  std::map<int, int64_t> counts;
  int64_t total = 0;
  for (const auto& seq : samples) {
    for (int token : seq) {
      ++counts[token];
      ++total;
    }
  }
  double entropy = 0.0;
  for (const auto& [token, count] : counts) {
    const double p = static_cast<double>(count) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  return entropy;
}

/// Mean negative log-likelihood under the oracle; off-support mass is floored.
inline double oracle_coherence(const std::vector<TokenSequence>& samples,
                               const ToyDistribution& dist) {
  if (samples.empty()) throw std::invalid_argument("oracle_coherence: empty sample set");
  double total = 0.0;
  for (const auto& seq : samples) {
    total -= std::log(std::max(dist.prob_of(seq), kCoherenceFloor));
  }
  return total / static_cast<double>(samples.size());
}

/// Total variation between the empirical sequence distribution and the oracle.
inline double tv_distance(const std::vector<TokenSequence>& samples,
                          const ToyDistribution& dist) {
  if (samples.empty()) throw std::invalid_argument("tv_distance: empty sample set");
  auto key_of = [](const TokenSequence& seq) {
    std::string key;
    for (int token : seq) {
      key += std::to_string(token);
      key += ',';
    }
    return key;
  };
  std::map<std::string, double> freq;
  const double unit = 1.0 / static_cast<double>(samples.size());
  for (const auto& seq : samples) freq[key_of(seq)] += unit;

  std::map<std::string, double> truth;
  for (int s = 0; s < dist.support_size(); ++s) {
    truth[key_of(dist.sequences[s])] = dist.probs[s];
  }

  double tv = 0.0;
  for (const auto& [key, f] : freq) {
    auto it = truth.find(key);
    tv += std::fabs(f - (it == truth.end() ? 0.0 : it->second));
  }
  for (const auto& [key, p] : truth) {
    if (freq.find(key) == freq.end()) tv += p;
  }
  return 0.5 * tv;
}

/**
 * One frontier point per temperature, each from num_samples fresh draws with
 * a split seed. Temperatures must be positive and strictly increasing.
 */
inline Frontier sweep(const Denoiser& denoiser, const SamplerConfig& base,
                      const std::vector<double>& temperatures, int num_samples,
                      const ToyDistribution& dist, uint64_t seed) {
  if (temperatures.empty()) throw std::invalid_argument("sweep: no temperatures");
  for (size_t k = 0; k < temperatures.size(); ++k) {
    if (!(temperatures[k] > 0.0) ||
        (k > 0 && !(temperatures[k] > temperatures[k - 1]))) {
      throw std::invalid_argument(
          "sweep: temperatures must be positive and strictly increasing");
    }
  }
  Frontier frontier;
  for (size_t k = 0; k < temperatures.size(); ++k) {
    SamplerConfig cfg = base;
    cfg.temperature = temperatures[k];
    cfg.seed = Rng::split(seed, 0xf0 + k).next_u64();
    const auto samples = sample_batch(denoiser, cfg, num_samples);
    FrontierPoint point;
    point.temperature = temperatures[k];
    point.diversity = unigram_entropy(samples);
    point.coherence = oracle_coherence(samples, dist);
    point.tv = tv_distance(samples, dist);
    frontier.points.push_back(point);
  }
  return frontier;
}

// ============================================================================
// Dominance
// ============================================================================

enum class Dominance { kTrue, kFalse, kIncomparable };

inline const char* to_string(Dominance d) {
  switch (d) {
    case Dominance::kTrue: return "true";
    case Dominance::kFalse: return "false";
    case Dominance::kIncomparable: return "incomparable";
  }
  return "?";
}

namespace detail {

/// Points sorted by diversity for piecewise-linear evaluation.
inline std::vector<std::pair<double, double>> frontier_curve(const Frontier& f) {
  if (f.points.size() < 2) {
    throw std::invalid_argument("dominates: frontiers need at least 2 points");
  }
  std::vector<std::pair<double, double>> curve;
  for (const auto& p : f.points) curve.emplace_back(p.diversity, p.coherence);
  std::sort(curve.begin(), curve.end());
  if (!(curve.back().first > curve.front().first)) {
    throw std::invalid_argument("dominates: frontier has zero diversity range");
  }
  return curve;
}

inline double interp_curve(const std::vector<std::pair<double, double>>& curve,
                           double x) {
  if (x <= curve.front().first) return curve.front().second;
  if (x >= curve.back().first) return curve.back().second;
  for (size_t k = 1; k < curve.size(); ++k) {
    if (x <= curve[k].first) {
      const auto& [x0, y0] = curve[k - 1];
      const auto& [x1, y1] = curve[k];
      if (x1 == x0) return y0;
      const double w = (x - x0) / (x1 - x0);
      return y0 + w * (y1 - y0);
    }
  }
  return curve.back().second;
}

}  // namespace detail

/**
 * Frontier dominance on the overlap of the diversity ranges. kTrue when a's
 * coherence is everywhere <= b's and strictly better somewhere; kFalse for
 * the mirror image; kIncomparable for ties, crossings, or empty overlap.
 */
inline Dominance dominates(const Frontier& a, const Frontier& b) {
  const auto curve_a = detail::frontier_curve(a);
  const auto curve_b = detail::frontier_curve(b);
  const double lo = std::max(curve_a.front().first, curve_b.front().first);
  const double hi = std::min(curve_a.back().first, curve_b.back().first);
  if (lo > hi) return Dominance::kIncomparable;

  // Evaluating at the union of knots decides the sign pattern exactly:
  // both curves are linear between consecutive knots.
  std::vector<double> knots{lo, hi};
  for (const auto& [x, y] : curve_a) {
    if (x > lo && x < hi) knots.push_back(x);
  }
  for (const auto& [x, y] : curve_b) {
    if (x > lo && x < hi) knots.push_back(x);
  }
  std::sort(knots.begin(), knots.end());

  const double tie_eps = 1e-12;
  bool a_better_somewhere = false;
  bool b_better_somewhere = false;
  for (double x : knots) {
    const double diff = detail::interp_curve(curve_a, x) - detail::interp_curve(curve_b, x);
    if (diff < -tie_eps) a_better_somewhere = true;
    if (diff > tie_eps) b_better_somewhere = true;
  }
  if (a_better_somewhere && !b_better_somewhere) return Dominance::kTrue;
  if (b_better_somewhere && !a_better_somewhere) return Dominance::kFalse;
  return Dominance::kIncomparable;
}

// ============================================================================
// CSV interchange
// ============================================================================

inline constexpr const char* kFrontierCsvHeader = "temperature,diversity,coherence,tv";

inline void write_frontier_csv(std::ostream& out, const Frontier& frontier) {
  out << kFrontierCsvHeader << "\n";
  out.precision(17);
  for (const auto& p : frontier.points) {
    out << p.temperature << "," << p.diversity << "," << p.coherence << ","
        << p.tv << "\n";
  }
}

inline Frontier read_frontier_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_frontier_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kFrontierCsvHeader) {
    throw std::runtime_error("read_frontier_csv: bad header in " + path);
  }
  Frontier frontier;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    FrontierPoint p;
    char comma;
    if (!(row >> p.temperature >> comma >> p.diversity >> comma >> p.coherence >>
          comma >> p.tv)) {
      throw std::runtime_error("read_frontier_csv: bad row in " + path);
    }
    frontier.points.push_back(p);
  }
  return frontier;
}

}  // namespace candi
