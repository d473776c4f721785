#pragma once

/**
 * Forward corruption kernels.
 *
 * The hybrid kernel keeps each position clean with probability alpha(t) and
 * otherwise replaces its one-hot row with a Gaussian perturbation at noise
 * level sigma(t); the mask vector records which happened. The masked baseline
 * kernel instead swaps tokens for a reserved mask symbol (vocabulary index v).
 */

#include <stdexcept>

#include "candi/rng.hpp"
#include "candi/schedule.hpp"
#include "candi/types.hpp"

namespace candi {

/// Reserved mask symbol of the masked baseline kernel.
inline int mask_symbol(int vocab) { return vocab; }

/// Exact one-hot encoding of a token sequence.
inline Lattice one_hot_lattice(const TokenSequence& tokens, int vocab) {
  Lattice lattice(static_cast<int>(tokens.size()), vocab);
  for (int i = 0; i < lattice.rows(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= vocab) {
      throw std::invalid_argument("one_hot_lattice: token out of range");
    }
    lattice(i, tokens[i]) = 1.0;
  }
  return lattice;
}

/**
 * Sample the hybrid forward marginal at time t: position i is kept clean
 * with probability alpha(t) (row stays the exact one-hot) or corrupted
 * (row ~ N(one-hot, sigma(t)^2 I)). Deterministic given the seed.
 */
inline HybridState forward_corrupt(const TokenSequence& x0, double t,
                                   const KernelConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (static_cast<int>(x0.size()) != cfg.seq_len) {
    throw std::invalid_argument("forward_corrupt: sequence length mismatch");
  }
  const double keep = alpha(t);
  const double sigma = sigma_of_t(t, cfg);

  HybridState state;
  state.t = t;
  state.mask.assign(cfg.seq_len, 0);
  state.lattice = one_hot_lattice(x0, cfg.vocab);

  Rng rng = Rng::split(seed, 0);
  for (int i = 0; i < cfg.seq_len; ++i) {
    if (rng.next_bernoulli(keep)) {
      state.mask[i] = 1;
    } else {
      auto row = state.lattice.row(i);
      for (int j = 0; j < cfg.vocab; ++j) row[j] += sigma * rng.next_normal();
    }
  }
  return state;
}

/**
 * Forward mask transition s -> t (s < t): corrupted positions stay corrupted;
 * clean positions survive with probability alpha(t)/alpha(s).
 */
inline MaskVector forward_mask_transition(const MaskVector& m_s, double s,
                                          double t, uint64_t seed) {
  if (!(s < t)) throw std::domain_error("forward_mask_transition: requires s < t");
  const double a_s = alpha(s);
  const double a_t = alpha(t);
  if (a_s == 0.0) throw std::domain_error("forward_mask_transition: alpha(s) = 0");

  const double survive = a_t / a_s;
  MaskVector m_t(m_s.size(), 0);
  Rng rng = Rng::split(seed, 0);
  for (size_t i = 0; i < m_s.size(); ++i) {
    if (m_s[i] == 1 && rng.next_bernoulli(survive)) m_t[i] = 1;
  }
  return m_t;
}

/**
 * Masked-diffusion baseline kernel: each token is independently replaced by
 * the mask symbol with probability 1 - alpha(t).
 */
inline TokenSequence masked_forward_corrupt(const TokenSequence& x0, int vocab,
                                            double t, uint64_t seed) {
  const double keep = alpha(t);
  TokenSequence out = x0;
  Rng rng = Rng::split(seed, 0);
  for (auto& token : out) {
    if (token < 0 || token >= vocab) {
      throw std::invalid_argument("masked_forward_corrupt: token out of range");
    }
    if (!rng.next_bernoulli(keep)) token = mask_symbol(vocab);
  }
  return out;
}

}  // namespace candi
