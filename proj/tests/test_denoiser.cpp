#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "candi/bayes.hpp"
#include "candi/denoiser.hpp"
#include "candi/kernel.hpp"
#include "candi/toy_distribution.hpp"

using namespace candi;

namespace {

const KernelConfig kCfg3{0.01, 0.49, 3, 2};

ToyDistribution tiny3() {
  ToyDistribution dist;
  dist.vocab = 3;
  dist.len = 2;
  dist.sequences = {{0, 1}, {1, 2}, {2, 1}};
  dist.probs = {0.5, 0.3, 0.2};
  dist.validate();
  return dist;
}

// Independent enumeration oracle: full Gaussian densities, no shared-norm
// shortcut, straight product over positions.
PosteriorGrid brute_force_posterior(const ToyDistribution& dist,
                                    const HybridState& state,
                                    const KernelConfig& cfg) {
  const double sigma = sigma_of_t(state.t, cfg);
  std::vector<double> weights(dist.support_size());
  double norm = 0.0;
  for (int s = 0; s < dist.support_size(); ++s) {
    double w = dist.probs[s];
    for (int i = 0; i < dist.len; ++i) {
      const int token = dist.sequences[s][i];
      if (state.mask[i] == 1) {
        if (state.lattice(i, token) != 1.0) w = 0.0;
      } else {
        double sq = 0.0;
        for (int j = 0; j < dist.vocab; ++j) {
          const double diff = state.lattice(i, j) - (j == token ? 1.0 : 0.0);
          sq += diff * diff;
        }
        w *= std::exp(-sq / (2.0 * sigma * sigma));
      }
    }
    weights[s] = w;
    norm += w;
  }
  PosteriorGrid grid(dist.len, dist.vocab);
  for (int s = 0; s < dist.support_size(); ++s) {
    for (int i = 0; i < dist.len; ++i) {
      grid(i, dist.sequences[s][i]) += weights[s] / norm;
    }
  }
  return grid;
}

HybridState make_state(const Lattice& lattice, MaskVector mask, double t) {
  return HybridState{lattice, std::move(mask), t};
}

}  // namespace

TEST_CASE("exact bayes posterior at t = 0 returns the observation") {
  auto dist = tiny3();
  TokenSequence x0{1, 2};
  HybridState state = forward_corrupt(x0, 0.0, kCfg3, 9);
  PosteriorGrid post = exact_bayes_posterior(dist, state, kCfg3);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(post(i, j) == doctest::Approx(j == x0[i] ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant likelihood recovers the data marginals") {
  auto dist = tiny3();
  // All-noisy state with zero lattice rows: every Gaussian term is equal, so
  // the posterior must reduce to the prior marginals exactly.
  HybridState state = make_state(Lattice(2, 3), MaskVector{0, 0}, 0.7);
  PosteriorGrid post = exact_bayes_posterior(dist, state, kCfg3);
  Matrix marginals = dist.marginals();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(post(i, j) == doctest::Approx(marginals(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact bayes posterior matches the brute-force oracle") {
  auto dist = tiny3();
  Rng rng = Rng::split(555, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = 0.2 + 0.6 * rng.next_double();
    Lattice lattice(2, 3);
    for (double& x : lattice.data()) x = 1.5 * rng.next_normal();
    MaskVector mask{0, 0};
    if (trial % 3 == 0) {
      // One clean position consistent with the support.
      mask[0] = 1;
      for (int j = 0; j < 3; ++j) lattice(0, j) = 0.0;
      lattice(0, trial % 2 == 0 ? 0 : 1) = 1.0;
    }
    HybridState state = make_state(lattice, mask, t);
    PosteriorGrid expect = brute_force_posterior(dist, state, kCfg3);
    PosteriorGrid got = exact_bayes_posterior(dist, state, kCfg3);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(got(i, j) == doctest::Approx(expect(i, j)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("impossible clean evidence is reported") {
  ToyDistribution dist;
  dist.vocab = 3;
  dist.len = 2;
  dist.sequences = {{0, 1}, {1, 2}};
  dist.probs = {0.6, 0.4};
  dist.validate();

  Lattice lattice(2, 3);
  lattice(0, 2) = 1.0;  // clean token 2 at position 0: no support sequence has it
  HybridState state = make_state(lattice, MaskVector{1, 0}, 0.5);
  CHECK_THROWS_AS(exact_bayes_posterior(dist, state, kCfg3), std::runtime_error);
}

TEST_CASE("posterior averaged over the forward kernel recovers the marginals") {
  auto dist = tiny3();
  const double t = 0.55;
  const int draws = 10000;
  Matrix accum(2, 3);
  Rng seq_rng = Rng::split(808, 0);
  for (int d = 0; d < draws; ++d) {
    TokenSequence x0 = dist.sample(seq_rng);
    HybridState state = forward_corrupt(x0, t, kCfg3, 3000 + d);
    PosteriorGrid post = exact_bayes_posterior(dist, state, kCfg3);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 3; ++j) accum(i, j) += post(i, j);
    }
  }
  Matrix marginals = dist.marginals();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double mean = accum(i, j) / draws;
      const double se = std::sqrt(marginals(i, j) * (1 - marginals(i, j)) / draws);
      CHECK(std::fabs(mean - marginals(i, j)) < 3.0 * se + 1e-4);
    }
  }
}

TEST_CASE("score_from_posterior zeroes and fixed points") {
  Lattice lattice(2, 3);
  lattice(0, 0) = 1.0;
  lattice(1, 2) = 1.0;
  PosteriorGrid post = lattice;
  HybridState state = make_state(lattice, MaskVector{0, 0}, 0.4);
  Lattice score = score_from_posterior(state, post, 0.9);
  for (double x : score.data()) CHECK(x == 0.0);

  // Clean rows are zero regardless of the posterior.
  PosteriorGrid other(2, 3, 1.0 / 3.0);
  HybridState half = make_state(lattice, MaskVector{1, 0}, 0.4);
  Lattice score2 = score_from_posterior(half, other, 0.9);
  for (int j = 0; j < 3; ++j) CHECK(score2(0, j) == 0.0);
  CHECK(score2(1, 0) != 0.0);

  CHECK_THROWS_AS(score_from_posterior(state, post, 0.0), std::domain_error);
}

TEST_CASE("score matches finite differences of the mixture log density") {
  auto dist = tiny3();
  const double t = 0.5;
  const double sigma = sigma_of_t(t, kCfg3);
  Rng rng = Rng::split(771, 3);
  Lattice lattice(2, 3);
  for (double& x : lattice.data()) x = rng.next_normal();
  HybridState state = make_state(lattice, MaskVector{0, 0}, t);

  // Explicit mixture density over both noisy rows.
  auto log_density = [&](const Lattice& rows) {
    double total = 0.0;
    for (int s = 0; s < dist.support_size(); ++s) {
      double w = dist.probs[s];
      for (int i = 0; i < 2; ++i) {
        double sq = 0.0;
        for (int j = 0; j < 3; ++j) {
          const double diff = rows(i, j) - (j == dist.sequences[s][i] ? 1.0 : 0.0);
          sq += diff * diff;
        }
        w *= std::exp(-sq / (2.0 * sigma * sigma));
      }
      total += w;
    }
    return std::log(total);
  };

  PosteriorGrid post = exact_bayes_posterior(dist, state, kCfg3);
  Lattice score = score_from_posterior(state, post, sigma);

  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      Lattice up = lattice, down = lattice;
      up(i, j) += h;
      down(i, j) -= h;
      const double fd = (log_density(up) - log_density(down)) / (2.0 * h);
      CHECK(std::fabs(fd - score(i, j)) <
            1e-4 * std::max(1.0, std::fabs(score(i, j))));
    }
  }
}

TEST_CASE("precondition scales only noisy rows") {
  Matrix embed(3, 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) embed(i, j) = i + 0.5 * j;
  }
  MaskVector mask{1, 0, 0};

  Matrix same = precondition(embed, MaskVector{1, 1, 1}, 2.0);
  for (size_t k = 0; k < same.data().size(); ++k) {
    CHECK(same.data()[k] == embed.data()[k]);
  }

  Matrix zero_sigma = precondition(embed, mask, 0.0);
  for (size_t k = 0; k < zero_sigma.data().size(); ++k) {
    CHECK(zero_sigma.data()[k] == embed.data()[k]);
  }

  Matrix halved = precondition(embed, mask, std::sqrt(3.0));
  for (int j = 0; j < 4; ++j) {
    CHECK(halved(0, j) == embed(0, j));
    CHECK(halved(1, j) == doctest::Approx(embed(1, j) / 2.0).epsilon(1e-15));
    CHECK(halved(2, j) == doctest::Approx(embed(2, j) / 2.0).epsilon(1e-15));
  }
}

TEST_CASE("denoiser_forward rows are distributions") {
  const KernelConfig cfg{0.01, 0.49, 5, 3};
  DenoiserShape shape{5, 8, 12, 3};
  DenoiserParams params = init_denoiser(shape, 0.5, 21);
  Rng rng = Rng::split(22, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Lattice lattice(3, 5);
    for (double& x : lattice.data()) x = rng.next_normal();
    MaskVector mask{0, 1, 0};
    lattice(1, 2) = 1.0;
    for (int j = 0; j < 5; ++j) {
      if (j != 2) lattice(1, j) = 0.0;
    }
    HybridState state = make_state(lattice, mask, 0.25 + 0.5 * rng.next_double());
    PosteriorGrid post = denoiser_forward(params, state, cfg);
    for (int i = 0; i < 3; ++i) CHECK(is_distribution_row(post.row(i)));
  }
}

TEST_CASE("denoiser_forward golden snapshot") {
  // Frozen output of the initial implementation for fixed seeds; guards the
  // numeric path (embedding, bias mix, preconditioning, mixer, head) against
  // silent drift.
  const KernelConfig cfg{0.01, 0.49, 4, 3};
  DenoiserParams params = init_denoiser({4, 5, 6, 3}, 0.5, 2718);
  Rng rng = Rng::split(314159, 0);
  Lattice lattice(3, 4);
  for (double& x : lattice.data()) x = rng.next_normal();
  for (int j = 0; j < 4; ++j) lattice(1, j) = j == 2 ? 1.0 : 0.0;
  HybridState state{lattice, MaskVector{0, 1, 0}, 0.6};
  PosteriorGrid post = denoiser_forward(params, state, cfg);

  const double golden[3][4] = {
      {0.22609431867945412, 0.27467369948290804, 0.28681824197217215,
       0.21241373986546569},
      {0.25344017736075847, 0.17889628770912203, 0.18008337886279691,
       0.38758015606732266},
      {0.19895550328903347, 0.29527711447796823, 0.27409612167454267,
       0.23167126055845563}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(post(i, j) == doctest::Approx(golden[i][j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("mask decides treatment regardless of noisy-row contents") {
  // With the position mixer off, a clean row's posterior depends only on its
  // own one-hot; rewriting every noisy row must not disturb it, and the mask
  // itself never depends on lattice values.
  const KernelConfig cfg{0.01, 0.49, 4, 3};
  DenoiserParams params = init_denoiser({4, 6, 10, 3}, 0.5, 91);
  params.position_mix = Matrix(3, 3);
  for (int i = 0; i < 3; ++i) params.position_mix(i, i) = 1.0;

  Rng rng = Rng::split(92, 0);
  Lattice lattice(3, 4);
  for (double& x : lattice.data()) x = rng.next_normal();
  for (int j = 0; j < 4; ++j) lattice(1, j) = j == 3 ? 1.0 : 0.0;
  HybridState state{lattice, MaskVector{0, 1, 0}, 0.45};
  PosteriorGrid before = denoiser_forward(params, state, cfg);

  // Swap the two noisy rows and rescale them.
  for (int j = 0; j < 4; ++j) {
    std::swap(state.lattice(0, j), state.lattice(2, j));
    state.lattice(0, j) *= -1.7;
  }
  PosteriorGrid after = denoiser_forward(params, state, cfg);
  for (int j = 0; j < 4; ++j) {
    CHECK(after(1, j) == before(1, j));
  }
}

TEST_CASE("lambda = 1 collapses noisy rows to the corruption bias") {
  const KernelConfig cfg{0.01, 0.49, 4, 3};
  DenoiserShape shape{4, 6, 10, 3};
  DenoiserParams params = init_denoiser(shape, 1.0, 33);
  // Exclude position mixing so identical inputs map to identical outputs.
  params.position_mix = Matrix(3, 3);
  for (int i = 0; i < 3; ++i) params.position_mix(i, i) = 1.0;

  Rng rng = Rng::split(34, 0);
  Lattice lattice(3, 4);
  for (double& x : lattice.data()) x = rng.next_normal();
  HybridState state = make_state(lattice, MaskVector{0, 0, 0}, 0.6);
  PosteriorGrid post = denoiser_forward(params, state, cfg);
  for (int i = 1; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(post(i, j) == doctest::Approx(post(0, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("weighted cross entropy closed forms") {
  TokenSequence x0{1, 3};

  // One noisy position at t = 0.5 with a uniform posterior: 2 log v.
  HybridState state;
  state.t = 0.5;
  state.mask = {1, 0};
  state.lattice = one_hot_lattice(x0, 4);
  std::vector<TrainExample> batch{{x0, state}};

  double uniform_loss = weighted_cross_entropy(
      [&](const TrainExample&) { return PosteriorGrid(2, 4, 0.25); }, batch);
  CHECK(uniform_loss == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));

  // Exact one-hot posterior at the truth: zero loss.
  double perfect_loss = weighted_cross_entropy(
      [&](const TrainExample& e) {
        PosteriorGrid q(2, 4);
        q(0, e.x0[0]) = 1.0;
        q(1, e.x0[1]) = 1.0;
        return q;
      },
      batch);
  CHECK(perfect_loss == 0.0);

  // Scalar recomputation on a random instance.
  auto dist = tiny3();
  DenoiserParams params = init_denoiser({3, 4, 6, 2}, 0.5, 77);
  auto rnd_batch = sample_batch(dist, kCfg3, 6, 1e-3, 99);
  double lib = loss(params, rnd_batch, kCfg3);
  double manual = 0.0;
  for (const auto& e : rnd_batch) {
    PosteriorGrid q = denoiser_forward(params, e.state, kCfg3);
    double acc = 0.0;
    for (int i = 0; i < 2; ++i) {
      if (e.state.mask[i] == 0) acc += -std::log(q(i, e.x0[i]));
    }
    manual += acc / e.state.t;
  }
  manual /= rnd_batch.size();
  CHECK(lib == doctest::Approx(manual).epsilon(1e-12));

  // Batch order invariance.
  auto reversed = rnd_batch;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(loss(params, reversed, kCfg3) == doctest::Approx(lib).epsilon(1e-12));
}

TEST_CASE("loss gradient matches central finite differences") {
  auto dist = tiny3();
  DenoiserParams params = init_denoiser({3, 5, 7, 2}, 0.5, 101);
  auto batch = sample_batch(dist, kCfg3, 5, 1e-3, 2024);

  auto [loss0, grads] = loss_gradient(params, batch, kCfg3);
  CHECK(loss0 == doctest::Approx(loss(params, batch, kCfg3)).epsilon(1e-12));

  auto view = parameter_view(params);
  auto gview = parameter_view(grads);
  Rng rng = Rng::split(4141, 0);
  const double h = 1e-5;
  for (int probe = 0; probe < 25; ++probe) {
    const size_t k = rng.next_below(view.size());
    const double saved = *view[k];
    *view[k] = saved + h;
    const double up = loss(params, batch, kCfg3);
    *view[k] = saved - h;
    const double down = loss(params, batch, kCfg3);
    *view[k] = saved;
    const double fd = (up - down) / (2.0 * h);
    CHECK(std::fabs(fd - *gview[k]) < 1e-4 * std::max(1.0, std::fabs(fd)));
  }
}

TEST_CASE("dead paths and clean batches have zero gradient") {
  auto dist = tiny3();

  // lambda = 1 with every position noisy: the embedding table is unreachable.
  DenoiserParams params = init_denoiser({3, 5, 7, 2}, 1.0, 11);
  std::vector<TrainExample> batch;
  Rng rng = Rng::split(77, 0);
  for (int b = 0; b < 4; ++b) {
    TrainExample e;
    e.x0 = dist.sample(rng);
    e.state.t = 0.6;
    e.state.mask = {0, 0};
    e.state.lattice = Lattice(2, 3);
    for (double& x : e.state.lattice.data()) x = rng.next_normal();
    batch.push_back(e);
  }
  auto [l1, grads] = loss_gradient(params, batch, kCfg3);
  CHECK(l1 > 0.0);
  for (double x : grads.embedding.data()) CHECK(x == 0.0);
  // The corruption bias is live in the same configuration.
  double bias_norm = 0.0;
  for (double x : grads.corruption_bias) bias_norm += std::fabs(x);
  CHECK(bias_norm > 0.0);

  // All-clean batch: no noisy positions, zero loss, zero gradient.
  std::vector<TrainExample> clean_batch;
  TrainExample e;
  e.x0 = {0, 1};
  e.state = forward_corrupt(e.x0, 0.0, kCfg3, 5);
  clean_batch.push_back(e);
  auto [l2, zero_grads] = loss_gradient(params, clean_batch, kCfg3);
  CHECK(l2 == 0.0);
  for (double* p : parameter_view(zero_grads)) CHECK(*p == 0.0);
}

TEST_CASE("training is reproducible and learns a point mass") {
  const KernelConfig cfg{0.01, 0.49, 4, 3};
  auto dist = toy::single_sequence({2, 0, 3}, 4);
  TrainConfig tcfg;
  tcfg.steps = 400;
  tcfg.batch_size = 8;
  tcfg.learning_rate = 0.1;
  tcfg.seed = 31;
  tcfg.embed_dim = 6;
  tcfg.hidden_dim = 10;

  DenoiserParams run1 = train(dist, tcfg, cfg);
  DenoiserParams run2 = train(dist, tcfg, cfg);
  auto v1 = parameter_view(run1);
  auto v2 = parameter_view(run2);
  for (size_t k = 0; k < v1.size(); ++k) CHECK(*v1[k] == *v2[k]);

  // Posterior argmax must recover the single sequence from any state.
  Rng rng = Rng::split(606, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = 0.05 + 0.9 * rng.next_double();
    HybridState state = forward_corrupt({2, 0, 3}, t, cfg, 900 + trial);
    PosteriorGrid post = denoiser_forward(run1, state, cfg);
    CHECK(argmax_row(post.row(0)) == 2);
    CHECK(argmax_row(post.row(1)) == 0);
    CHECK(argmax_row(post.row(2)) == 3);
  }

  // Held-out loss improved over the initialization.
  DenoiserParams fresh = init_denoiser(run1.shape, tcfg.lambda, tcfg.seed);
  auto eval = sample_batch(dist, cfg, 64, 1e-3, 777);
  CHECK(loss(run1, eval, cfg) < loss(fresh, eval, cfg));
}

TEST_CASE("checkpoint roundtrip is exact and strict") {
  DenoiserParams params = init_denoiser({4, 5, 6, 3}, 0.25, 404);
  save_checkpoint(params, "checkpoint_test.json");
  DenoiserParams loaded = load_checkpoint("checkpoint_test.json");
  CHECK(loaded.lambda == params.lambda);
  auto a = parameter_view(params);
  auto b = parameter_view(loaded);
  REQUIRE(a.size() == b.size());
  for (size_t k = 0; k < a.size(); ++k) CHECK(*a[k] == *b[k]);

  nlohmann::json bad = checkpoint_to_json(params);
  bad["version"] = 2;
  CHECK_THROWS_AS(checkpoint_from_json(bad), std::invalid_argument);

  nlohmann::json short_bias = checkpoint_to_json(params);
  short_bias["corruption_bias"] = std::vector<double>{1.0};
  CHECK_THROWS_AS(checkpoint_from_json(short_bias), std::invalid_argument);
}

TEST_CASE("toy distribution file roundtrip is exact and strict") {
  auto dist = toy::reference_5seq();
  dist.save("dist_roundtrip.json");
  ToyDistribution back = ToyDistribution::load("dist_roundtrip.json");
  CHECK(back.vocab == dist.vocab);
  CHECK(back.len == dist.len);
  REQUIRE(back.support_size() == dist.support_size());
  for (int s = 0; s < dist.support_size(); ++s) {
    CHECK(back.sequences[s] == dist.sequences[s]);
    CHECK(back.probs[s] == dist.probs[s]);
  }

  nlohmann::json doc = dist.to_json();
  doc["extra"] = 1;
  CHECK_THROWS_WITH_AS(ToyDistribution::from_json(doc),
                       doctest::Contains("extra"), std::invalid_argument);

  nlohmann::json bad_prob = dist.to_json();
  bad_prob["support"][0]["prob"] = 0.9;  // no longer sums to one
  CHECK_THROWS_AS(ToyDistribution::from_json(bad_prob), std::invalid_argument);

  nlohmann::json bad_token = dist.to_json();
  bad_token["support"][0]["tokens"][0] = 99;
  CHECK_THROWS_AS(ToyDistribution::from_json(bad_token), std::invalid_argument);
}

TEST_CASE("trained denoiser adapter handles masked inputs") {
  DenoiserParams params = init_denoiser({3, 4, 6, 2}, 0.5, 55);
  TrainedDenoiser denoiser(params);

  TokenSequence observed{mask_symbol(3), 1};
  PosteriorGrid post = denoiser.posterior_masked(observed, 0.5, kCfg3);
  for (int i = 0; i < 2; ++i) CHECK(is_distribution_row(post.row(i)));

  // Equivalent explicit state: zero lattice row for the masked position.
  HybridState state;
  state.t = 0.5;
  state.mask = {0, 1};
  state.lattice = Lattice(2, 3);
  state.lattice(1, 1) = 1.0;
  PosteriorGrid direct = denoiser.posterior(state, kCfg3);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(post(i, j) == doctest::Approx(direct(i, j)).epsilon(1e-14));
    }
  }
}
