#pragma once

/**
 * Exact Bayes posterior over an explicit toy distribution.
 *
 * With an enumerable support, P(x0 | state) is computed exactly: clean
 * positions contribute hard evidence, noisy positions contribute Gaussian
 * likelihoods. The Gaussian terms share the per-row norm across candidates,
 * so the log weight of a support sequence reduces to sum of row[token]/sigma^2
 * over noisy positions, up to a normalization that cancels.
 */

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "candi/denoiser.hpp"
#include "candi/kernel.hpp"
#include "candi/schedule.hpp"
#include "candi/toy_distribution.hpp"
#include "candi/types.hpp"

namespace candi {

namespace detail {

/// Posterior weights over the support sequences; throws on impossible evidence.
inline std::vector<double> support_weights(const ToyDistribution& dist,
                                           const HybridState& state,
                                           double sigma) {
  const int support = dist.support_size();
  const double inv_var = 1.0 / (sigma * sigma);
  std::vector<double> logw(support);
  double max_logw = -std::numeric_limits<double>::infinity();

  for (int s = 0; s < support; ++s) {
    double lw = std::log(dist.probs[s]);
    for (int i = 0; i < dist.len && std::isfinite(lw); ++i) {
      const int candidate = dist.sequences[s][i];
      if (state.mask[i] == 1) {
        if (state.lattice(i, candidate) != 1.0) {
          lw = -std::numeric_limits<double>::infinity();
        }
      } else {
        lw += state.lattice(i, candidate) * inv_var;
      }
    }
    logw[s] = lw;
    if (lw > max_logw) max_logw = lw;
  }
  if (!std::isfinite(max_logw)) {
    throw std::runtime_error(
        "exact_bayes_posterior: clean evidence contradicts every support sequence");
  }
  double norm = 0.0;
  for (double& lw : logw) {
    lw = std::exp(lw - max_logw);
    norm += lw;
  }
  for (double& w : logw) w /= norm;
  return logw;
}

inline PosteriorGrid posterior_from_weights(const ToyDistribution& dist,
                                            const std::vector<double>& weights) {
  PosteriorGrid grid(dist.len, dist.vocab);
  for (int s = 0; s < dist.support_size(); ++s) {
    if (weights[s] == 0.0) continue;
    for (int i = 0; i < dist.len; ++i) grid(i, dist.sequences[s][i]) += weights[s];
  }
  return grid;
}

}  // namespace detail

/**
 * Per-position posterior P(X0[i] | state) under the hybrid forward kernel,
 * exact up to floating point.
 */
inline PosteriorGrid exact_bayes_posterior(const ToyDistribution& dist,
                                           const HybridState& state,
                                           const KernelConfig& cfg) {
  if (state.seq_len() != dist.len || state.vocab() != dist.vocab) {
    throw std::invalid_argument("exact_bayes_posterior: dimension mismatch");
  }
  const double sigma = sigma_of_t(state.t, cfg);
  return detail::posterior_from_weights(
      dist, detail::support_weights(dist, state, sigma));
}

/// Posterior weights over the support given masked-baseline evidence.
inline std::vector<double> masked_support_weights(const ToyDistribution& dist,
                                                  const TokenSequence& observed) {
  const int support = dist.support_size();
  std::vector<double> weights(support);
  double norm = 0.0;
  for (int s = 0; s < support; ++s) {
    double w = dist.probs[s];
    for (int i = 0; i < dist.len; ++i) {
      if (observed[i] != mask_symbol(dist.vocab) &&
          observed[i] != dist.sequences[s][i]) {
        w = 0.0;
        break;
      }
    }
    weights[s] = w;
    norm += w;
  }
  if (norm == 0.0) {
    throw std::runtime_error(
        "masked posterior: observed tokens contradict every support sequence");
  }
  for (double& w : weights) w /= norm;
  return weights;
}

/// Enumeration oracle packaged behind the Denoiser interface.
class ExactBayesDenoiser final : public Denoiser {
 public:
  explicit ExactBayesDenoiser(ToyDistribution dist) : dist_(std::move(dist)) {
    dist_.validate();
    identity_ = Matrix(dist_.vocab, dist_.vocab);
    for (int j = 0; j < dist_.vocab; ++j) identity_(j, j) = 1.0;
  }

  PosteriorGrid posterior(const HybridState& state,
                          const KernelConfig& cfg) const override {
    return exact_bayes_posterior(dist_, state, cfg);
  }

  PosteriorGrid posterior_masked(const TokenSequence& observed, double /*t*/,
                                 const KernelConfig& /*cfg*/) const override {
    return detail::posterior_from_weights(dist_,
                                          masked_support_weights(dist_, observed));
  }

  PosteriorGrid posterior_embedded(const Matrix& embeddings, const MaskVector& mask,
                                   double t, const KernelConfig& cfg) const override {
    // The oracle's embedding table is the identity, so cached embeddings are
    // lattice rows and the hybrid-state path applies unchanged.
    HybridState state{embeddings, mask, t};
    return posterior(state, cfg);
  }

  const Matrix& embedding_table() const override { return identity_; }

  const ToyDistribution& distribution() const { return dist_; }

 private:
  ToyDistribution dist_;
  Matrix identity_;
};

}  // namespace candi
