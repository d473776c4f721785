#pragma once

/**
 * Denoisers: everything that produces per-position posteriors P(X0 | state).
 *
 * The trainable denoiser is a deliberately small hand-differentiated network:
 * embedding lookup, a corruption-bias mix for noisy rows, magnitude
 * preconditioning, a shared per-position feed-forward block, one linear
 * position-mixing layer, and a softmax head. Training minimizes the
 * mask-weighted cross entropy with plain gradient descent so the parameter
 * trajectory is bitwise reproducible from the seed.
 */

#include <cmath>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "candi/kernel.hpp"
#include "candi/rng.hpp"
#include "candi/schedule.hpp"
#include "candi/toy_distribution.hpp"
#include "candi/types.hpp"

namespace candi {

// ============================================================================
// Denoiser interface
// ============================================================================

/// Produces per-position posteriors over clean tokens from corrupted inputs.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// Posterior grid for a hybrid (lattice, mask, t) state.
  virtual PosteriorGrid posterior(const HybridState& state,
                                  const KernelConfig& cfg) const = 0;

  /// Posterior grid for a masked-baseline sequence (mask symbol = vocab).
  virtual PosteriorGrid posterior_masked(const TokenSequence& observed, double t,
                                         const KernelConfig& cfg) const = 0;

  /// Posterior grid from cached embeddings, for the approximate sampler.
  virtual PosteriorGrid posterior_embedded(const Matrix& embeddings,
                                           const MaskVector& mask, double t,
                                           const KernelConfig& cfg) const = 0;

  /// Embedding table (vocab x d). Identity for the exact-Bayes oracle.
  virtual const Matrix& embedding_table() const = 0;
};

// ============================================================================
// Shared posterior utilities
// ============================================================================

/**
 * Score of the noisy lattice rows implied by a posterior grid:
 * -(row - posterior_row) / sigma^2, with clean rows zeroed.
 */
inline Lattice score_from_posterior(const HybridState& state,
                                    const PosteriorGrid& posterior, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("score_from_posterior: sigma <= 0");
  if (!state.lattice.same_shape(posterior)) {
    throw std::invalid_argument("score_from_posterior: shape mismatch");
  }
  const double inv_var = 1.0 / (sigma * sigma);
  Lattice score(state.lattice.rows(), state.lattice.cols());
  for (int i = 0; i < score.rows(); ++i) {
    if (state.mask[i] == 1) continue;
    auto x = state.lattice.row(i);
    auto mu = posterior.row(i);
    auto out = score.row(i);
    for (int j = 0; j < score.cols(); ++j) out[j] = -(x[j] - mu[j]) * inv_var;
  }
  return score;
}

/**
 * Magnitude preconditioning of embedded inputs: noisy rows are scaled by
 * 1/sqrt(sigma^2 + 1); clean rows pass through untouched.
 */
inline Matrix precondition(const Matrix& embeddings, const MaskVector& mask,
                           double sigma) {
  if (static_cast<int>(mask.size()) != embeddings.rows()) {
    throw std::invalid_argument("precondition: mask length mismatch");
  }
  Matrix out = embeddings;
  const double scale = 1.0 / std::sqrt(sigma * sigma + 1.0);
  for (int i = 0; i < out.rows(); ++i) {
    if (mask[i] == 1) continue;
    auto row = out.row(i);
    for (int j = 0; j < out.cols(); ++j) row[j] *= scale;
  }
  return out;
}

// ============================================================================
// Trainable denoiser
// ============================================================================

struct DenoiserShape {
  int vocab = 0;
  int embed_dim = 16;
  int hidden_dim = 32;
  int seq_len = 0;
};

struct DenoiserParams {
  DenoiserShape shape;
  double lambda = 0.5;  // corruption-bias mix; fixed, not trained

  Matrix embedding;                   // vocab x d
  std::vector<double> corruption_bias;  // d
  Matrix w1;                          // d x h
  std::vector<double> b1;             // h
  Matrix position_mix;                // L x L
  Matrix w2;                          // h x v
  std::vector<double> b2;             // v

  static DenoiserParams zeros_like(const DenoiserParams& other) {
    DenoiserParams g;
    g.shape = other.shape;
    g.lambda = other.lambda;
    g.embedding = Matrix(other.embedding.rows(), other.embedding.cols());
    g.corruption_bias.assign(other.corruption_bias.size(), 0.0);
    g.w1 = Matrix(other.w1.rows(), other.w1.cols());
    g.b1.assign(other.b1.size(), 0.0);
    g.position_mix = Matrix(other.position_mix.rows(), other.position_mix.cols());
    g.w2 = Matrix(other.w2.rows(), other.w2.cols());
    g.b2.assign(other.b2.size(), 0.0);
    return g;
  }
};

/// Pointers to every trainable scalar, in a fixed order.
inline std::vector<double*> parameter_view(DenoiserParams& params) {
  std::vector<double*> view;
  auto add_matrix = [&](Matrix& m) {
    for (double& x : m.data()) view.push_back(&x);
  };
  auto add_vector = [&](std::vector<double>& vec) {
    for (double& x : vec) view.push_back(&x);
  };
  add_matrix(params.embedding);
  add_vector(params.corruption_bias);
  add_matrix(params.w1);
  add_vector(params.b1);
  add_matrix(params.position_mix);
  add_matrix(params.w2);
  add_vector(params.b2);
  return view;
}

/// Deterministic initialization: Xavier-ish scales, identity-leaning mixer.
inline DenoiserParams init_denoiser(const DenoiserShape& shape, double lambda,
                                    uint64_t seed) {
  if (shape.vocab < 2 || shape.embed_dim < 1 || shape.hidden_dim < 1 ||
      shape.seq_len < 1) {
    throw std::invalid_argument("init_denoiser: bad shape");
  }
  DenoiserParams params;
  params.shape = shape;
  params.lambda = lambda;
  Rng rng = Rng::split(seed, 0x9d);

  auto fill = [&](Matrix& m, int rows, int cols, double scale) {
    m = Matrix(rows, cols);
    for (double& x : m.data()) x = scale * rng.next_normal();
  };
  fill(params.embedding, shape.vocab, shape.embed_dim,
       std::sqrt(1.0 / shape.embed_dim));
  params.corruption_bias.resize(shape.embed_dim);
  for (double& x : params.corruption_bias) x = 0.1 * rng.next_normal();
  fill(params.w1, shape.embed_dim, shape.hidden_dim,
       std::sqrt(2.0 / (shape.embed_dim + shape.hidden_dim)));
  params.b1.assign(shape.hidden_dim, 0.0);
  fill(params.position_mix, shape.seq_len, shape.seq_len, 0.1 / shape.seq_len);
  for (int i = 0; i < shape.seq_len; ++i) params.position_mix(i, i) += 1.0;
  fill(params.w2, shape.hidden_dim, shape.vocab,
       std::sqrt(2.0 / (shape.hidden_dim + shape.vocab)));
  params.b2.assign(shape.vocab, 0.0);
  return params;
}

namespace detail {

/// Intermediate activations kept for backpropagation.
struct ForwardTrace {
  Matrix inputs;    // L x d, preconditioned embeddings
  Matrix hidden;    // L x h, tanh activations
  Matrix mixed;     // L x h
  PosteriorGrid posterior;  // L x v
  double sigma = 0.0;
  double precondition_scale = 1.0;
};

inline ForwardTrace forward_from_embeddings(const DenoiserParams& params,
                                            const Matrix& raw_embed,
                                            const MaskVector& mask, double t,
                                            const KernelConfig& cfg) {
  const auto& shape = params.shape;
  if (raw_embed.rows() != shape.seq_len || raw_embed.cols() != shape.embed_dim) {
    throw std::invalid_argument("denoiser_forward: embedding shape mismatch");
  }
  if (static_cast<int>(mask.size()) != shape.seq_len) {
    throw std::invalid_argument("denoiser_forward: mask length mismatch");
  }
  ForwardTrace trace;
  trace.sigma = sigma_of_t(t, cfg);
  trace.precondition_scale = 1.0 / std::sqrt(trace.sigma * trace.sigma + 1.0);

  // Corruption-bias mix on noisy rows, then preconditioning.
  Matrix mixed_embed = raw_embed;
  for (int i = 0; i < shape.seq_len; ++i) {
    if (mask[i] == 1) continue;
    auto row = mixed_embed.row(i);
    for (int k = 0; k < shape.embed_dim; ++k) {
      row[k] = (1.0 - params.lambda) * row[k] +
               params.lambda * params.corruption_bias[k];
    }
  }
  trace.inputs = precondition(mixed_embed, mask, trace.sigma);

  trace.hidden = Matrix(shape.seq_len, shape.hidden_dim);
  for (int i = 0; i < shape.seq_len; ++i) {
    auto in = trace.inputs.row(i);
    auto out = trace.hidden.row(i);
    for (int hcol = 0; hcol < shape.hidden_dim; ++hcol) {
      double acc = params.b1[hcol];
      for (int k = 0; k < shape.embed_dim; ++k) acc += in[k] * params.w1(k, hcol);
      out[hcol] = std::tanh(acc);
    }
  }

  trace.mixed = Matrix(shape.seq_len, shape.hidden_dim);
  for (int i = 0; i < shape.seq_len; ++i) {
    auto out = trace.mixed.row(i);
    for (int j = 0; j < shape.seq_len; ++j) {
      const double weight = params.position_mix(i, j);
      auto h = trace.hidden.row(j);
      for (int hcol = 0; hcol < shape.hidden_dim; ++hcol) out[hcol] += weight * h[hcol];
    }
  }

  trace.posterior = PosteriorGrid(shape.seq_len, shape.vocab);
  for (int i = 0; i < shape.seq_len; ++i) {
    auto m = trace.mixed.row(i);
    auto q = trace.posterior.row(i);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < shape.vocab; ++j) {
      double acc = params.b2[j];
      for (int hcol = 0; hcol < shape.hidden_dim; ++hcol) acc += m[hcol] * params.w2(hcol, j);
      q[j] = acc;
      if (acc > max_logit) max_logit = acc;
    }
    double norm = 0.0;
    for (int j = 0; j < shape.vocab; ++j) {
      q[j] = std::exp(q[j] - max_logit);
      norm += q[j];
    }
    for (int j = 0; j < shape.vocab; ++j) q[j] /= norm;
  }
  return trace;
}

inline Matrix embed_lattice(const DenoiserParams& params, const Lattice& lattice) {
  const auto& shape = params.shape;
  if (lattice.rows() != shape.seq_len || lattice.cols() != shape.vocab) {
    throw std::invalid_argument("denoiser_forward: lattice shape mismatch");
  }
  Matrix embed(shape.seq_len, shape.embed_dim);
  for (int i = 0; i < shape.seq_len; ++i) {
    auto x = lattice.row(i);
    auto y = embed.row(i);
    for (int k = 0; k < shape.vocab; ++k) {
      const double weight = x[k];
      if (weight == 0.0) continue;
      for (int dcol = 0; dcol < shape.embed_dim; ++dcol) {
        y[dcol] += weight * params.embedding(k, dcol);
      }
    }
  }
  return embed;
}

inline ForwardTrace forward_trace(const DenoiserParams& params,
                                  const HybridState& state,
                                  const KernelConfig& cfg) {
  return forward_from_embeddings(params, embed_lattice(params, state.lattice),
                                 state.mask, state.t, cfg);
}

}  // namespace detail

/// Posterior grid of the trainable denoiser for a hybrid state.
inline PosteriorGrid denoiser_forward(const DenoiserParams& params,
                                      const HybridState& state,
                                      const KernelConfig& cfg) {
  return detail::forward_trace(params, state, cfg).posterior;
}

// ============================================================================
// Loss and gradients
// ============================================================================

struct TrainExample {
  TokenSequence x0;
  HybridState state;
};

inline constexpr double kLogFloor = 1e-30;

/**
 * Mask-weighted cross entropy: mean over the batch of
 * 1/(1 - alpha(t)) * sum over noisy positions of -log q[pos][x0[pos]].
 * Clean positions are excluded; posteriors are floored before the log.
 */
template <typename PosteriorFn>
double weighted_cross_entropy(PosteriorFn&& posterior_of,
                              const std::vector<TrainExample>& batch) {
  if (batch.empty()) throw std::invalid_argument("weighted_cross_entropy: empty batch");
  double total = 0.0;
  for (const auto& example : batch) {
    const double corrupted = 1.0 - alpha(example.state.t);
    if (corrupted <= 0.0) continue;  // t = 0: nothing is noisy
    const PosteriorGrid q = posterior_of(example);
    double example_loss = 0.0;
    for (int i = 0; i < q.rows(); ++i) {
      if (example.state.mask[i] == 1) continue;
      example_loss -= std::log(std::max(q(i, example.x0[i]), kLogFloor));
    }
    total += example_loss / corrupted;
  }
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean)) throw std::runtime_error("weighted_cross_entropy: non-finite loss");
  return mean;
}

/// Eq-13 style loss of the trainable denoiser on a batch of corrupted states.
inline double loss(const DenoiserParams& params,
                   const std::vector<TrainExample>& batch,
                   const KernelConfig& cfg) {
  return weighted_cross_entropy(
      [&](const TrainExample& example) {
        return denoiser_forward(params, example.state, cfg);
      },
      batch);
}

struct LossAndGradient {
  double loss = 0.0;
  DenoiserParams grads;
};

/// Exact gradient of `loss` with respect to every trainable tensor.
inline LossAndGradient loss_gradient(const DenoiserParams& params,
                                     const std::vector<TrainExample>& batch,
                                     const KernelConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("loss_gradient: empty batch");
  const auto& shape = params.shape;
  LossAndGradient result;
  result.grads = DenoiserParams::zeros_like(params);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const auto& example : batch) {
    const double corrupted = 1.0 - alpha(example.state.t);
    if (corrupted <= 0.0) continue;
    const double weight = inv_batch / corrupted;
    const auto trace = detail::forward_trace(params, example.state, cfg);

    double example_loss = 0.0;
    Matrix dlogits(shape.seq_len, shape.vocab);
    for (int i = 0; i < shape.seq_len; ++i) {
      if (example.state.mask[i] == 1) continue;
      const int truth = example.x0[i];
      example_loss -= std::log(std::max(trace.posterior(i, truth), kLogFloor));
      for (int j = 0; j < shape.vocab; ++j) {
        dlogits(i, j) = weight * trace.posterior(i, j);
      }
      dlogits(i, truth) -= weight;
    }
    result.loss += example_loss * weight;

    // Head: logits = mixed * w2 + b2.
    Matrix dmixed(shape.seq_len, shape.hidden_dim);
    for (int i = 0; i < shape.seq_len; ++i) {
      auto dz = dlogits.row(i);
      auto m = trace.mixed.row(i);
      for (int j = 0; j < shape.vocab; ++j) {
        const double g = dz[j];
        if (g == 0.0) continue;
        result.grads.b2[j] += g;
        for (int hcol = 0; hcol < shape.hidden_dim; ++hcol) {
          result.grads.w2(hcol, j) += m[hcol] * g;
          dmixed(i, hcol) += params.w2(hcol, j) * g;
        }
      }
    }

    // Position mixing: mixed_i = sum_j P(i, j) hidden_j.
    Matrix dhidden(shape.seq_len, shape.hidden_dim);
    for (int i = 0; i < shape.seq_len; ++i) {
      auto dm = dmixed.row(i);
      for (int j = 0; j < shape.seq_len; ++j) {
        auto h = trace.hidden.row(j);
        auto dh = dhidden.row(j);
        double dot = 0.0;
        const double weight_ij = params.position_mix(i, j);
        for (int hcol = 0; hcol < shape.hidden_dim; ++hcol) {
          dot += dm[hcol] * h[hcol];
          dh[hcol] += weight_ij * dm[hcol];
        }
        result.grads.position_mix(i, j) += dot;
      }
    }

    // Feed-forward block and the embedding path.
    const double lam = params.lambda;
    for (int i = 0; i < shape.seq_len; ++i) {
      auto h = trace.hidden.row(i);
      auto dh = dhidden.row(i);
      auto input = trace.inputs.row(i);
      std::vector<double> dinput(shape.embed_dim, 0.0);
      for (int hcol = 0; hcol < shape.hidden_dim; ++hcol) {
        const double da = dh[hcol] * (1.0 - h[hcol] * h[hcol]);
        if (da == 0.0) continue;
        result.grads.b1[hcol] += da;
        for (int k = 0; k < shape.embed_dim; ++k) {
          result.grads.w1(k, hcol) += input[k] * da;
          dinput[k] += params.w1(k, hcol) * da;
        }
      }

      const bool clean = example.state.mask[i] == 1;
      const double pre_scale = clean ? 1.0 : trace.precondition_scale;
      const double embed_scale = clean ? 1.0 : (1.0 - lam);
      auto x = example.state.lattice.row(i);
      for (int k = 0; k < shape.embed_dim; ++k) {
        const double de = dinput[k] * pre_scale;
        if (!clean) result.grads.corruption_bias[k] += lam * de;
        const double dy = embed_scale * de;
        if (dy == 0.0) continue;
        for (int vv = 0; vv < shape.vocab; ++vv) {
          if (x[vv] != 0.0) result.grads.embedding(vv, k) += x[vv] * dy;
        }
      }
    }
  }
  if (!std::isfinite(result.loss)) {
    throw std::runtime_error("loss_gradient: non-finite loss");
  }
  return result;
}

// ============================================================================
// Training
// ============================================================================

// Defaults recorded from pilot runs: the smallest budget that holds the
// trained loss within 20% of the exact-Bayes loss on the reference
// distribution.
struct TrainConfig {
  double learning_rate = 0.1;
  int steps = 30000;
  int batch_size = 64;
  uint64_t seed = 7;
  double lambda = 0.5;
  int embed_dim = 32;
  int hidden_dim = 64;
  // Training times are drawn uniformly on [t_floor, 1]; the floor keeps the
  // 1/(1 - alpha(t)) weight bounded, mirroring the sampler grid epsilon.
  double t_floor = kTimeEpsilon;

  void validate() const {
    if (!(learning_rate > 0.0) || steps < 1 || batch_size < 1) {
      throw std::invalid_argument("TrainConfig: rates and counts must be positive");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw std::invalid_argument("TrainConfig: lambda must lie in [0, 1]");
    }
  }
};

/// Draw a batch of (x0, corrupted state) pairs from the data distribution.
inline std::vector<TrainExample> sample_batch(const ToyDistribution& dist,
                                              const KernelConfig& cfg, int size,
                                              double t_floor, uint64_t seed) {
  std::vector<TrainExample> batch(size);
  for (int b = 0; b < size; ++b) {
    Rng rng = Rng::split(seed, static_cast<uint64_t>(b));
    TrainExample& example = batch[b];
    example.x0 = dist.sample(rng);
    const double t = t_floor + (1.0 - t_floor) * rng.next_double();
    example.state = forward_corrupt(example.x0, t, cfg, rng.next_u64());
  }
  return batch;
}

/**
 * Plain gradient-descent training loop. Deterministic given cfg.seed; throws
 * if the loss leaves the finite range.
 */
inline DenoiserParams train(const ToyDistribution& dist, const TrainConfig& cfg,
                            const KernelConfig& kernel_cfg) {
  cfg.validate();
  kernel_cfg.validate();
  dist.validate();

  DenoiserShape shape{kernel_cfg.vocab, cfg.embed_dim, cfg.hidden_dim,
                      kernel_cfg.seq_len};
  DenoiserParams params = init_denoiser(shape, cfg.lambda, cfg.seed);

  for (int step = 0; step < cfg.steps; ++step) {
    const uint64_t batch_seed = Rng::split(cfg.seed, 0xb001 + step).next_u64();
    const auto batch =
        sample_batch(dist, kernel_cfg, cfg.batch_size, cfg.t_floor, batch_seed);
    auto [step_loss, grads] = loss_gradient(params, batch, kernel_cfg);
    if (!std::isfinite(step_loss)) throw std::runtime_error("train: loss diverged");

    auto view = parameter_view(params);
    auto gview = parameter_view(grads);
    for (size_t k = 0; k < view.size(); ++k) {
      *view[k] -= cfg.learning_rate * *gview[k];
    }
  }
  return params;
}

// ============================================================================
// Checkpoint format
// ============================================================================

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows, int want_rows,
                               int want_cols, const char* name) {
  if (static_cast<int>(rows.size()) != want_rows) {
    throw std::invalid_argument(std::string("checkpoint: bad row count for ") + name);
  }
  Matrix m(want_rows, want_cols);
  for (int r = 0; r < want_rows; ++r) {
    if (static_cast<int>(rows[r].size()) != want_cols) {
      throw std::invalid_argument(std::string("checkpoint: bad column count for ") + name);
    }
    for (int c = 0; c < want_cols; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const DenoiserParams& params) {
  return {{"version", 1},
          {"shape",
           {{"v", params.shape.vocab},
            {"d", params.shape.embed_dim},
            {"h", params.shape.hidden_dim},
            {"L", params.shape.seq_len}}},
          {"lambda", params.lambda},
          {"embedding", detail::matrix_to_json(params.embedding)},
          {"corruption_bias", params.corruption_bias},
          {"w1", detail::matrix_to_json(params.w1)},
          {"b1", params.b1},
          {"position_mix", detail::matrix_to_json(params.position_mix)},
          {"w2", detail::matrix_to_json(params.w2)},
          {"b2", params.b2}};
}

inline DenoiserParams checkpoint_from_json(const nlohmann::json& doc) {
  if (doc.at("version").get<int>() != 1) {
    throw std::invalid_argument("checkpoint: unsupported version");
  }
  DenoiserParams params;
  const auto& shape = doc.at("shape");
  params.shape.vocab = shape.at("v").get<int>();
  params.shape.embed_dim = shape.at("d").get<int>();
  params.shape.hidden_dim = shape.at("h").get<int>();
  params.shape.seq_len = shape.at("L").get<int>();
  params.lambda = doc.at("lambda").get<double>();
  params.embedding = detail::matrix_from_json(
      doc.at("embedding"), params.shape.vocab, params.shape.embed_dim, "embedding");
  params.corruption_bias = doc.at("corruption_bias").get<std::vector<double>>();
  if (static_cast<int>(params.corruption_bias.size()) != params.shape.embed_dim) {
    throw std::invalid_argument("checkpoint: bad corruption_bias size");
  }
  params.w1 = detail::matrix_from_json(doc.at("w1"), params.shape.embed_dim,
                                       params.shape.hidden_dim, "w1");
  params.b1 = doc.at("b1").get<std::vector<double>>();
  if (static_cast<int>(params.b1.size()) != params.shape.hidden_dim) {
    throw std::invalid_argument("checkpoint: bad b1 size");
  }
  params.position_mix = detail::matrix_from_json(
      doc.at("position_mix"), params.shape.seq_len, params.shape.seq_len,
      "position_mix");
  params.w2 = detail::matrix_from_json(doc.at("w2"), params.shape.hidden_dim,
                                       params.shape.vocab, "w2");
  params.b2 = doc.at("b2").get<std::vector<double>>();
  if (static_cast<int>(params.b2.size()) != params.shape.vocab) {
    throw std::invalid_argument("checkpoint: bad b2 size");
  }
  return params;
}

inline void save_checkpoint(const DenoiserParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out << checkpoint_to_json(params).dump(2) << "\n";
}

inline DenoiserParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return checkpoint_from_json(nlohmann::json::parse(in));
}

// ============================================================================
// Denoiser adapter for the trained network
// ============================================================================

class TrainedDenoiser final : public Denoiser {
 public:
  explicit TrainedDenoiser(DenoiserParams params) : params_(std::move(params)) {}

  PosteriorGrid posterior(const HybridState& state,
                          const KernelConfig& cfg) const override {
    return denoiser_forward(params_, state, cfg);
  }

  PosteriorGrid posterior_masked(const TokenSequence& observed, double t,
                                 const KernelConfig& cfg) const override {
    // Masked positions carry no lattice value; a zero row leaves only the
    // corruption-bias embedding, the masked-diffusion limit of the mixer.
    HybridState state;
    state.t = t;
    state.mask.assign(observed.size(), 0);
    state.lattice = Lattice(static_cast<int>(observed.size()), params_.shape.vocab);
    for (size_t i = 0; i < observed.size(); ++i) {
      if (observed[i] != mask_symbol(params_.shape.vocab)) {
        state.mask[i] = 1;
        state.lattice(static_cast<int>(i), observed[i]) = 1.0;
      }
    }
    return denoiser_forward(params_, state, cfg);
  }

  PosteriorGrid posterior_embedded(const Matrix& embeddings, const MaskVector& mask,
                                   double t, const KernelConfig& cfg) const override {
    return detail::forward_from_embeddings(params_, embeddings, mask, t, cfg)
        .posterior;
  }

  const Matrix& embedding_table() const override { return params_.embedding; }

  const DenoiserParams& params() const { return params_; }

 private:
  DenoiserParams params_;
};

}  // namespace candi
