#pragma once

/**
 * Corruption analytics for Gaussian noise on categorical one-hot lattices.
 *
 * Two closed-form axes of signal loss:
 *   - identity corruption rho(sigma, v): probability the argmax of the noisy
 *     one-hot row is no longer the correct token (grows with vocabulary);
 *   - rank degradation r(sigma) = Phi(-1/(sigma*sqrt(2))): expected fraction
 *     of incorrect coordinates exceeding the correct one (vocabulary-free).
 *
 * Each analytic quantity here has a Monte Carlo companion so the formulas
 * can be validated empirically on a grid; the MC estimators are deterministic
 * given their seed.
 */

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "candi/rng.hpp"
#include "candi/special_math.hpp"

namespace candi {

/// Monte Carlo estimate with its standard error and provenance.
struct McEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  int64_t n_samples = 0;
  uint64_t seed = 0;
};

/// One point of the corruption landscape: both closed-form rates at (sigma, v).
struct CorruptionPoint {
  double sigma = 0.0;
  int vocab = 0;
  double rho = 0.0;   // identity corruption, in [0, 1 - 1/v]
  double rank = 0.0;  // rank degradation, in [0, 0.5)
};

namespace detail {

inline void require_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::domain_error("sigma must be positive and finite");
  }
}

inline void require_vocab(int vocab) {
  if (vocab < 2) throw std::domain_error("vocab must be >= 2");
}

inline McEstimate finish_estimate(double sum, double sumsq, int64_t n, uint64_t seed) {
  McEstimate e;
  e.mean = sum / static_cast<double>(n);
  double var = (sumsq - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1);
  if (var < 0.0) var = 0.0;
  e.std_err = std::sqrt(var / static_cast<double>(n));
  e.n_samples = n;
  e.seed = seed;
  return e;
}

}  // namespace detail

/// Expected fraction of incorrect coordinates exceeding the correct one.
inline double rank_degradation(double sigma) {
  detail::require_sigma(sigma);
  return std_normal_cdf(-1.0 / (sigma * kSqrt2));
}

/// Noise level producing a given rank degradation; inverse of the above.
inline double sigma_for_rank(double rank) {
  if (!(rank > 0.0 && rank < 0.5)) {
    throw std::domain_error("sigma_for_rank: rank must lie in (0, 0.5)");
  }
  return -1.0 / (std_normal_quantile(rank) * kSqrt2);
}

/**
 * Probability that the argmax of N(one-hot, sigma^2 I) is not the correct
 * token, for a vocabulary of v categories.
 *
 * Evaluated as the integral of (1 - Phi(u + 1/sigma)^(v-1)) phi(u) du over
 * u in [-12, 12] (the standardized correct coordinate); the power goes
 * through exp((v-1) log Phi) so vocabularies of 50k do not underflow.
 */
inline double identity_corruption(double sigma, int vocab) {
  detail::require_sigma(sigma);
  detail::require_vocab(vocab);
  const double inv_sigma = 1.0 / sigma;
  const double vm1 = static_cast<double>(vocab - 1);
  auto integrand = [&](double u) {
    double log_keep = vm1 * log_std_normal_cdf(u + inv_sigma);
    return (1.0 - std::exp(log_keep)) * std_normal_pdf(u);
  };
  return integrate(integrand, -12.0, 12.0, 1e-8);
}

/**
 * State-dependent identity corruption for an arbitrary lattice row: the
 * probability that re-noising the row with sigma flips its argmax away from
 * `correct_index`. Reduces to identity_corruption when the row is the exact
 * one-hot of the correct index.
 */
inline double identity_corruption_state(const std::vector<double>& lattice_row,
                                        int correct_index, double sigma) {
  detail::require_sigma(sigma);
  const int v = static_cast<int>(lattice_row.size());
  detail::require_vocab(v);
  if (correct_index < 0 || correct_index >= v) {
    throw std::domain_error("identity_corruption_state: index out of range");
  }
  for (double x : lattice_row) {
    if (!std::isfinite(x)) {
      throw std::domain_error("identity_corruption_state: non-finite row entry");
    }
  }
  // Standardize around the correct coordinate: offsets[j] = (x_i - x_j)/sigma.
  std::vector<double> offsets;
  offsets.reserve(v - 1);
  for (int j = 0; j < v; ++j) {
    if (j == correct_index) continue;
    offsets.push_back((lattice_row[correct_index] - lattice_row[j]) / sigma);
  }
  auto integrand = [&](double u) {
    double log_keep = 0.0;
    for (double off : offsets) log_keep += log_std_normal_cdf(u + off);
    return (1.0 - std::exp(log_keep)) * std_normal_pdf(u);
  };
  return integrate(integrand, -12.0, 12.0, 1e-8);
}

/**
 * Monte Carlo companion of the closed forms: draws n lattices from
 * N(one-hot, sigma^2 I) and returns the empirical argmax-flip frequency and
 * the empirical mean exceed-fraction, each with a standard error.
 */
inline std::pair<McEstimate, McEstimate> mc_corruption(double sigma, int vocab,
                                                       int64_t n_samples,
                                                       uint64_t seed) {
  detail::require_sigma(sigma);
  detail::require_vocab(vocab);
  if (n_samples < 100) throw std::domain_error("mc_corruption: n_samples must be >= 100");

  Rng rng = Rng::split(seed, 0);
  double flip_sum = 0.0, flip_sumsq = 0.0;
  double rank_sum = 0.0, rank_sumsq = 0.0;
  const double inv_competitors = 1.0 / static_cast<double>(vocab - 1);
  for (int64_t s = 0; s < n_samples; ++s) {
    const double correct = 1.0 + sigma * rng.next_normal();
    int exceed = 0;
    for (int j = 1; j < vocab; ++j) {
      if (sigma * rng.next_normal() > correct) ++exceed;
    }
    const double flipped = exceed > 0 ? 1.0 : 0.0;
    const double frac = exceed * inv_competitors;
    flip_sum += flipped;
    flip_sumsq += flipped;
    rank_sum += frac;
    rank_sumsq += frac * frac;
  }
  return {detail::finish_estimate(flip_sum, flip_sumsq, n_samples, seed),
          detail::finish_estimate(rank_sum, rank_sumsq, n_samples, seed)};
}

/// Evaluates both corruption axes at (sigma, vocab) and checks their ranges.
inline CorruptionPoint corruption_point(double sigma, int vocab) {
  CorruptionPoint point;
  point.sigma = sigma;
  point.vocab = vocab;
  point.rho = identity_corruption(sigma, vocab);
  point.rank = rank_degradation(sigma);
  const double rho_cap = 1.0 - 1.0 / vocab;
  if (!(point.rho >= 0.0 && point.rho <= rho_cap + 1e-9) ||
      !(point.rank >= 0.0 && point.rank < 0.5)) {
    throw std::runtime_error("corruption_point: rates escaped their ranges");
  }
  return point;
}

// ============================================================================
// Embedding-space analogues
// ============================================================================

enum class EmbedMetric { kDot, kL2 };

/// Embedding table: v vectors of common dimension d.
struct EmbeddingTable {
  std::vector<std::vector<double>> vectors;

  int size() const { return static_cast<int>(vectors.size()); }
  int dim() const { return vectors.empty() ? 0 : static_cast<int>(vectors[0].size()); }

  void validate() const {
    if (size() < 2) throw std::invalid_argument("EmbeddingTable: need >= 2 vectors");
    for (const auto& vec : vectors) {
      if (static_cast<int>(vec.size()) != dim()) {
        throw std::invalid_argument("EmbeddingTable: inconsistent dimensions");
      }
      for (double x : vec) {
        if (!std::isfinite(x)) throw std::invalid_argument("EmbeddingTable: non-finite entry");
      }
    }
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }

  static double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
      double d = a[k] - b[k];
      s += d * d;
    }
    return s;
  }
};

/**
 * Probability that the noisy embedding of token i is still judged closer to
 * e_i than to e_j under the given similarity metric.
 *
 * dot:  Phi((||e_i||^2 - e_i.e_j) / (sigma ||e_j - e_i||))
 * l2:   Phi(||e_j - e_i|| / (2 sigma))
 */
inline double embed_win_rate(const EmbeddingTable& table, int i, int j,
                             double sigma, EmbedMetric metric) {
  detail::require_sigma(sigma);
  if (i == j || i < 0 || j < 0 || i >= table.size() || j >= table.size()) {
    throw std::domain_error("embed_win_rate: invalid index pair");
  }
  const auto& ei = table.vectors[i];
  const auto& ej = table.vectors[j];
  const double gap2 = EmbeddingTable::dist2(ei, ej);
  if (gap2 == 0.0) throw std::domain_error("embed_win_rate: identical embeddings");
  const double gap = std::sqrt(gap2);
  if (metric == EmbedMetric::kL2) {
    return std_normal_cdf(gap / (2.0 * sigma));
  }
  const double margin = EmbeddingTable::dot(ei, ei) - EmbeddingTable::dot(ei, ej);
  return std_normal_cdf(margin / (sigma * gap));
}

/// Mean probability over incorrect tokens of losing to them: 1 - mean win rate.
inline double embed_rank_degradation(const EmbeddingTable& table, int i,
                                     double sigma, EmbedMetric metric) {
  double win_sum = 0.0;
  for (int j = 0; j < table.size(); ++j) {
    if (j == i) continue;
    win_sum += embed_win_rate(table, i, j, sigma, metric);
  }
  return 1.0 - win_sum / static_cast<double>(table.size() - 1);
}

/**
 * Monte Carlo frequency with which the nearest / most-similar embedding to
 * e_i + sigma * eps is some token other than i.
 */
inline McEstimate embed_identity_corruption_mc(const EmbeddingTable& table,
                                               int i, double sigma,
                                               EmbedMetric metric,
                                               int64_t n_samples, uint64_t seed) {
  detail::require_sigma(sigma);
  if (i < 0 || i >= table.size()) throw std::domain_error("embed corruption: bad index");
  if (n_samples < 100) throw std::domain_error("embed corruption: n_samples must be >= 100");

  const int v = table.size();
  const int d = table.dim();
  Rng rng = Rng::split(seed, 0);
  std::vector<double> noisy(d);
  double sum = 0.0;
  for (int64_t s = 0; s < n_samples; ++s) {
    for (int k = 0; k < d; ++k) noisy[k] = table.vectors[i][k] + sigma * rng.next_normal();
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < v; ++j) {
      double score = metric == EmbedMetric::kDot
                         ? EmbeddingTable::dot(noisy, table.vectors[j])
                         : -EmbeddingTable::dist2(noisy, table.vectors[j]);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best != i) sum += 1.0;
  }
  return detail::finish_estimate(sum, sum, n_samples, seed);
}

}  // namespace candi
