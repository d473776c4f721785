#pragma once

/**
 * Reverse-process samplers.
 *
 * All modes share one reverse time grid and one denoiser interface:
 *   - hybrid_exact: joint inference on the full lattice; each step unmasks a
 *     Bernoulli subset of noisy positions (sampling their tokens from the
 *     tempered posterior) and moves the rest along the probability-flow ODE;
 *   - hybrid_approx: the same dynamics carried in embedding space, with a
 *     single posterior sample standing in for the posterior mean;
 *   - masked: ancestral masked-diffusion baseline, no continuous component;
 *   - gaussian_ode: pure continuous baseline, no unmasking.
 *
 * The ODE step contracts toward the posterior mean (the probability-flow
 * direction); `literal_paper_ode` flips the sign for comparison runs against
 * the diverging form. Temperature applies to token sampling only, never to
 * the score.
 */

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "candi/bayes.hpp"
#include "candi/denoiser.hpp"
#include "candi/kernel.hpp"
#include "candi/rng.hpp"
#include "candi/schedule.hpp"
#include "candi/types.hpp"

namespace candi {

enum class SamplerMode { kHybridExact, kHybridApprox, kMasked, kGaussianOde };

inline const char* to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::kHybridExact: return "hybrid_exact";
    case SamplerMode::kHybridApprox: return "hybrid_approx";
    case SamplerMode::kMasked: return "masked";
    case SamplerMode::kGaussianOde: return "gaussian_ode";
  }
  return "?";
}

inline SamplerMode sampler_mode_from_string(const std::string& name) {
  if (name == "hybrid_exact") return SamplerMode::kHybridExact;
  if (name == "hybrid_approx") return SamplerMode::kHybridApprox;
  if (name == "masked") return SamplerMode::kMasked;
  if (name == "gaussian_ode") return SamplerMode::kGaussianOde;
  throw std::invalid_argument("unknown sampler mode '" + name + "'");
}

struct SamplerConfig {
  SamplerMode mode = SamplerMode::kHybridExact;
  int nfe = 64;
  double temperature = 1.0;
  double guidance_weight = 0.0;
  uint64_t seed = 0;
  KernelConfig kernel;
  double time_eps = kTimeEpsilon;
  bool literal_paper_ode = false;

  void validate() const {
    if (nfe < 1) throw std::invalid_argument("SamplerConfig: nfe must be >= 1");
    if (!(temperature > 0.0)) {
      throw std::invalid_argument("SamplerConfig: temperature must be positive");
    }
    kernel.validate();
  }
};

/// Differentiable scalar log-score over lattices, with its exact gradient.
struct Classifier {
  std::function<double(const Lattice&)> log_score;
  std::function<Lattice(const Lattice&)> gradient;
};

/// f(x) = sum of coeffs * x; the gradient is the coefficient lattice itself.
inline Classifier linear_classifier(Matrix coeffs) {
  auto shared = std::make_shared<Matrix>(std::move(coeffs));
  Classifier clf;
  clf.log_score = [shared](const Lattice& x) {
    double acc = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) acc += (*shared)(i, j) * x(i, j);
    }
    return acc;
  };
  clf.gradient = [shared](const Lattice&) { return *shared; };
  return clf;
}

/// Ordered (t, state) snapshots of one reverse trajectory.
struct Trajectory {
  std::vector<std::pair<double, HybridState>> snapshots;
};

// ============================================================================
// Step primitives
// ============================================================================

/**
 * Row-wise posterior tempering: row proportional to row^(1/tau). tau = 1 is
 * the exact identity; tau -> 0 sharpens toward the argmax.
 */
inline PosteriorGrid temper(const PosteriorGrid& posterior, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("temper: tau must be positive");
  if (tau == 1.0) return posterior;
  PosteriorGrid out(posterior.rows(), posterior.cols());
  for (int i = 0; i < posterior.rows(); ++i) {
    auto in = posterior.row(i);
    auto dst = out.row(i);
    double max_p = 0.0;
    for (double p : in) max_p = std::max(max_p, p);
    if (max_p <= 0.0) throw std::domain_error("temper: zero posterior row");
    double norm = 0.0;
    for (int j = 0; j < posterior.cols(); ++j) {
      dst[j] = in[j] > 0.0 ? std::exp(std::log(in[j] / max_p) / tau) : 0.0;
      norm += dst[j];
    }
    for (int j = 0; j < posterior.cols(); ++j) dst[j] /= norm;
  }
  return out;
}

namespace detail {

/// Euler step of the reverse probability flow on the rows selected by mask=0.
inline Lattice apply_ode_update(const Lattice& lattice, const MaskVector& mask,
                                const Lattice& score, double sigma_t,
                                double sigma_s, bool literal_paper_ode) {
  Lattice out = lattice;
  const double half_delta = 0.5 * (sigma_t * sigma_t - sigma_s * sigma_s);
  const double step = literal_paper_ode ? -half_delta : half_delta;
  for (int i = 0; i < out.rows(); ++i) {
    if (mask[i] == 1) continue;
    auto row = out.row(i);
    auto g = score.row(i);
    for (int j = 0; j < out.cols(); ++j) row[j] += step * g[j];
  }
  return out;
}

inline int sample_categorical(std::span<const double> probs, Rng& rng) {
  double u = rng.next_double();
  double acc = 0.0;
  for (int j = 0; j < static_cast<int>(probs.size()); ++j) {
    acc += probs[j];
    if (u < acc) return j;
  }
  return static_cast<int>(probs.size()) - 1;
}

inline Lattice discretized_lattice(const Lattice& lattice) {
  Lattice out(lattice.rows(), lattice.cols());
  for (int i = 0; i < lattice.rows(); ++i) out(i, argmax_row(lattice.row(i))) = 1.0;
  return out;
}

inline bool all_clean(const MaskVector& mask) {
  return std::all_of(mask.begin(), mask.end(), [](uint8_t b) { return b == 1; });
}

}  // namespace detail

/// ODE refinement of the noisy rows from time t to s < t.
inline Lattice ode_step(const HybridState& state, double s, double t,
                        const Lattice& score, const SamplerConfig& cfg) {
  if (!(s < t)) throw std::domain_error("ode_step: requires s < t");
  return detail::apply_ode_update(state.lattice, state.mask, score,
                                  sigma_of_t(t, cfg.kernel),
                                  sigma_of_t(s, cfg.kernel),
                                  cfg.literal_paper_ode);
}

/**
 * Guided ODE step: the classifier gradient, evaluated at the discretized
 * (one-hot of argmax) lattice, is scaled by w and added to the score on
 * noisy rows before the Euler update.
 */
inline Lattice guided_ode_step(const HybridState& state, double s, double t,
                               const Lattice& score, const Classifier& classifier,
                               double w, const SamplerConfig& cfg) {
  if (w == 0.0) return ode_step(state, s, t, score, cfg);
  const Lattice grad = classifier.gradient(detail::discretized_lattice(state.lattice));
  Lattice combined = score;
  for (int i = 0; i < combined.rows(); ++i) {
    if (state.mask[i] == 1) continue;
    auto row = combined.row(i);
    auto g = grad.row(i);
    for (int j = 0; j < combined.cols(); ++j) row[j] += w * g[j];
  }
  return ode_step(state, s, t, combined, cfg);
}

/**
 * Assemble the next hybrid state: previously clean rows carry over, newly
 * clean rows become exact one-hots of their sampled tokens, and the rest take
 * the ODE-updated values. The mask is the OR of old and new.
 */
inline HybridState combine_update(const HybridState& prev,
                                  const TokenSequence& new_tokens,
                                  const Lattice& ode_lattice,
                                  const MaskVector& m_new) {
  if (!prev.lattice.same_shape(ode_lattice) ||
      m_new.size() != prev.mask.size() ||
      new_tokens.size() != prev.mask.size()) {
    throw std::invalid_argument("combine_update: shape mismatch");
  }
  HybridState next;
  next.t = prev.t;
  next.mask = prev.mask;
  next.lattice = Lattice(prev.lattice.rows(), prev.lattice.cols());
  for (int i = 0; i < next.lattice.rows(); ++i) {
    auto dst = next.lattice.row(i);
    if (prev.mask[i] == 1) {
      auto src = prev.lattice.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
    } else if (m_new[i] == 1) {
      dst[new_tokens[i]] = 1.0;
      next.mask[i] = 1;
    } else {
      auto src = ode_lattice.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  return next;
}

// ============================================================================
// Sampling algorithms
// ============================================================================

/**
 * Exact joint inference: the full lattice is carried through every step.
 * Returns the final token sequence; optionally records the trajectory.
 */
inline TokenSequence sample_hybrid_exact(const Denoiser& denoiser,
                                         const SamplerConfig& cfg,
                                         const Classifier* classifier = nullptr,
                                         Trajectory* trajectory = nullptr) {
  cfg.validate();
  const KernelConfig& kernel = cfg.kernel;
  const auto grid = time_grid(cfg.nfe, cfg.time_eps);
  Rng rng = Rng::split(cfg.seed, 0);

  HybridState state;
  state.t = 1.0;
  state.mask.assign(kernel.seq_len, 0);
  state.lattice = Lattice(kernel.seq_len, kernel.vocab);
  const double sigma_prior = sigma_of_t(1.0, kernel);
  for (double& x : state.lattice.data()) x = sigma_prior * rng.next_normal();
  if (trajectory) trajectory->snapshots.emplace_back(state.t, state);

  TokenSequence new_tokens(kernel.seq_len, 0);
  for (int k = 0; k < cfg.nfe && !detail::all_clean(state.mask); ++k) {
    const double t = grid[k];
    const double s = grid[k + 1];
    const PosteriorGrid posterior = denoiser.posterior(state, kernel);
    const PosteriorGrid tempered = temper(posterior, cfg.temperature);
    const double p_unmask = unmask_probability(s, t);

    MaskVector m_new(kernel.seq_len, 0);
    for (int i = 0; i < kernel.seq_len; ++i) {
      if (state.mask[i] == 1) continue;
      if (rng.next_bernoulli(p_unmask)) {
        m_new[i] = 1;
        new_tokens[i] = detail::sample_categorical(tempered.row(i), rng);
      }
    }

    const Lattice score =
        score_from_posterior(state, posterior, sigma_of_t(t, kernel));
    const Lattice refined =
        (classifier != nullptr && cfg.guidance_weight != 0.0)
            ? guided_ode_step(state, s, t, score, *classifier,
                              cfg.guidance_weight, cfg)
            : ode_step(state, s, t, score, cfg);

    state = combine_update(state, new_tokens, refined, m_new);
    state.t = s;
    if (trajectory) trajectory->snapshots.emplace_back(state.t, state);
  }

  TokenSequence out(kernel.seq_len);
  for (int i = 0; i < kernel.seq_len; ++i) out[i] = argmax_row(state.lattice.row(i));
  return out;
}

/**
 * Pure continuous baseline: same prior and ODE refinement, never unmasks;
 * the final lattice is discretized by argmax. Deterministic apart from the
 * prior draw.
 */
inline TokenSequence sample_gaussian_ode(const Denoiser& denoiser,
                                         const SamplerConfig& cfg,
                                         const Classifier* classifier = nullptr) {
  cfg.validate();
  const KernelConfig& kernel = cfg.kernel;
  const auto grid = time_grid(cfg.nfe, cfg.time_eps);
  Rng rng = Rng::split(cfg.seed, 0);

  HybridState state;
  state.t = 1.0;
  state.mask.assign(kernel.seq_len, 0);
  state.lattice = Lattice(kernel.seq_len, kernel.vocab);
  const double sigma_prior = sigma_of_t(1.0, kernel);
  for (double& x : state.lattice.data()) x = sigma_prior * rng.next_normal();

  for (int k = 0; k < cfg.nfe; ++k) {
    const double t = grid[k];
    const double s = grid[k + 1];
    const PosteriorGrid posterior = denoiser.posterior(state, kernel);
    const Lattice score =
        score_from_posterior(state, posterior, sigma_of_t(t, kernel));
    state.lattice = (classifier != nullptr && cfg.guidance_weight != 0.0)
                        ? guided_ode_step(state, s, t, score, *classifier,
                                          cfg.guidance_weight, cfg)
                        : ode_step(state, s, t, score, cfg);
    state.t = s;
  }

  TokenSequence out(kernel.seq_len);
  for (int i = 0; i < kernel.seq_len; ++i) out[i] = argmax_row(state.lattice.row(i));
  return out;
}

/**
 * Masked-diffusion baseline: ancestral unmasking with frozen tokens and no
 * continuous state. Straggler positions left masked at the end of the grid
 * are resolved by the argmax of a final posterior call.
 */
inline TokenSequence sample_masked(const Denoiser& denoiser,
                                   const SamplerConfig& cfg) {
  cfg.validate();
  const KernelConfig& kernel = cfg.kernel;
  const auto grid = time_grid(cfg.nfe, cfg.time_eps);
  Rng rng = Rng::split(cfg.seed, 0);
  const int msym = mask_symbol(kernel.vocab);

  TokenSequence observed(kernel.seq_len, msym);
  auto any_masked = [&] {
    return std::any_of(observed.begin(), observed.end(),
                       [&](int token) { return token == msym; });
  };

  for (int k = 0; k < cfg.nfe && any_masked(); ++k) {
    const double t = grid[k];
    const double s = grid[k + 1];
    const PosteriorGrid tempered =
        temper(denoiser.posterior_masked(observed, t, kernel), cfg.temperature);
    const double p_unmask = unmask_probability(s, t);
    for (int i = 0; i < kernel.seq_len; ++i) {
      if (observed[i] != msym) continue;
      if (rng.next_bernoulli(p_unmask)) {
        observed[i] = detail::sample_categorical(tempered.row(i), rng);
      }
    }
  }
  if (any_masked()) {
    const PosteriorGrid tempered = temper(
        denoiser.posterior_masked(observed, grid.back(), kernel), cfg.temperature);
    for (int i = 0; i < kernel.seq_len; ++i) {
      if (observed[i] == msym) observed[i] = argmax_row(tempered.row(i));
    }
  }
  return observed;
}

/**
 * Approximate joint inference: after the prior draw the noisy lattice is
 * never materialized again; the ODE runs on cached embeddings, with a single
 * untempered posterior sample approximating the posterior mean.
 */
inline TokenSequence sample_hybrid_approx(const Denoiser& denoiser,
                                          const SamplerConfig& cfg) {
  cfg.validate();
  const KernelConfig& kernel = cfg.kernel;
  const Matrix& table = denoiser.embedding_table();
  const int embed_dim = table.cols();
  const auto grid = time_grid(cfg.nfe, cfg.time_eps);
  Rng rng = Rng::split(cfg.seed, 0);

  // Prior draw is the only place the full lattice exists.
  Lattice prior(kernel.seq_len, kernel.vocab);
  const double sigma_prior = sigma_of_t(1.0, kernel);
  for (double& x : prior.data()) x = sigma_prior * rng.next_normal();

  Matrix y_cache(kernel.seq_len, embed_dim);
  for (int i = 0; i < kernel.seq_len; ++i) {
    auto x = prior.row(i);
    auto y = y_cache.row(i);
    for (int v = 0; v < kernel.vocab; ++v) {
      if (x[v] == 0.0) continue;
      for (int d = 0; d < embed_dim; ++d) y[d] += x[v] * table(v, d);
    }
  }

  MaskVector mask(kernel.seq_len, 0);
  TokenSequence tokens(kernel.seq_len, 0);

  for (int k = 0; k < cfg.nfe && !detail::all_clean(mask); ++k) {
    const double t = grid[k];
    const double s = grid[k + 1];

    Matrix y_t(kernel.seq_len, embed_dim);
    for (int i = 0; i < kernel.seq_len; ++i) {
      auto dst = y_t.row(i);
      if (mask[i] == 1) {
        for (int d = 0; d < embed_dim; ++d) dst[d] = table(tokens[i], d);
      } else {
        auto src = y_cache.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
      }
    }

    const PosteriorGrid posterior = denoiser.posterior_embedded(y_t, mask, t, kernel);
    const PosteriorGrid tempered = temper(posterior, cfg.temperature);
    const double p_unmask = unmask_probability(s, t);
    const double sigma_t = sigma_of_t(t, kernel);
    const double sigma_s = sigma_of_t(s, kernel);
    double half_delta = 0.5 * (sigma_t * sigma_t - sigma_s * sigma_s);
    if (cfg.literal_paper_ode) half_delta = -half_delta;
    const double contraction = half_delta / (sigma_t * sigma_t);

    for (int i = 0; i < kernel.seq_len; ++i) {
      if (mask[i] == 1) continue;
      if (rng.next_bernoulli(p_unmask)) {
        mask[i] = 1;
        tokens[i] = detail::sample_categorical(tempered.row(i), rng);
        continue;
      }
      // Single-sample Monte Carlo stand-in for E[Y0 | Y_t], untempered.
      const int draw = detail::sample_categorical(posterior.row(i), rng);
      auto y = y_cache.row(i);
      auto y_now = y_t.row(i);
      for (int d = 0; d < embed_dim; ++d) {
        y[d] = y_now[d] - contraction * (y_now[d] - table(draw, d));
      }
    }
    if (k == cfg.nfe - 1) {
      // Stragglers at the end of the grid: discretize from the last posterior.
      for (int i = 0; i < kernel.seq_len; ++i) {
        if (mask[i] == 0) tokens[i] = argmax_row(tempered.row(i));
      }
    }
  }
  return tokens;
}

/// Dispatch on the configured mode.
inline TokenSequence sample_one(const Denoiser& denoiser, const SamplerConfig& cfg,
                                const Classifier* classifier = nullptr) {
  switch (cfg.mode) {
    case SamplerMode::kHybridExact:
      return sample_hybrid_exact(denoiser, cfg, classifier);
    case SamplerMode::kHybridApprox:
      if (classifier != nullptr && cfg.guidance_weight != 0.0) {
        throw std::invalid_argument("guidance is not supported in hybrid_approx mode");
      }
      return sample_hybrid_approx(denoiser, cfg);
    case SamplerMode::kMasked:
      if (classifier != nullptr && cfg.guidance_weight != 0.0) {
        throw std::invalid_argument("guidance is not supported in masked mode");
      }
      return sample_masked(denoiser, cfg);
    case SamplerMode::kGaussianOde:
      return sample_gaussian_ode(denoiser, cfg, classifier);
  }
  throw std::logic_error("sample_one: unreachable");
}

// ============================================================================
// Batch generation
// ============================================================================

/// Parallelism cap from CANDI_LAB_THREADS; defaults to sequential.
inline int thread_cap() {
  const char* env = std::getenv("CANDI_LAB_THREADS");
  if (env == nullptr) return 1;
  int n = std::atoi(env);
  if (n < 1) return 1;
  return std::min<int>(n, std::max(1u, std::thread::hardware_concurrency()));
}

/**
 * num_samples independent draws with per-index seed substreams. The result is
 * identical for every thread count.
 */
inline std::vector<TokenSequence> sample_batch(const Denoiser& denoiser,
                                               const SamplerConfig& cfg,
                                               int num_samples,
                                               const Classifier* classifier = nullptr) {
  if (num_samples < 1) throw std::invalid_argument("sample_batch: need >= 1 samples");
  std::vector<TokenSequence> out(num_samples);
  auto worker = [&](int begin, int end) {
    SamplerConfig local = cfg;
    for (int i = begin; i < end; ++i) {
      local.seed = Rng::split(cfg.seed, static_cast<uint64_t>(i)).next_u64();
      out[i] = sample_one(denoiser, local, classifier);
    }
  };
  const int threads = std::min(thread_cap(), num_samples);
  if (threads <= 1) {
    worker(0, num_samples);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (num_samples + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(num_samples, begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace candi
