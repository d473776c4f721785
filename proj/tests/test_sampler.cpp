#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "candi/bayes.hpp"
#include "candi/frontier.hpp"
#include "candi/sampler.hpp"
#include "candi/toy_distribution.hpp"

using namespace candi;

namespace {

SamplerConfig base_config(const ToyDistribution& dist, SamplerMode mode, int nfe,
                          uint64_t seed) {
  SamplerConfig cfg;
  cfg.mode = mode;
  cfg.nfe = nfe;
  cfg.seed = seed;
  cfg.kernel = KernelConfig{0.01, 0.49, dist.vocab, dist.len};
  return cfg;
}

ToyDistribution permuted(const ToyDistribution& dist,
                         const std::vector<int>& perm) {
  ToyDistribution out = dist;
  for (auto& seq : out.sequences) {
    for (int& token : seq) token = perm[token];
  }
  return out;
}

}  // namespace

TEST_CASE("temper behaviour") {
  PosteriorGrid rows(2, 4);
  rows(0, 0) = 0.1; rows(0, 1) = 0.2; rows(0, 2) = 0.3; rows(0, 3) = 0.4;
  for (int j = 0; j < 4; ++j) rows(1, j) = 0.25;

  // tau = 1 is the exact identity.
  PosteriorGrid same = temper(rows, 1.0);
  for (size_t k = 0; k < rows.data().size(); ++k) {
    CHECK(same.data()[k] == rows.data()[k]);
  }

  // tau -> 0 sharpens to the argmax; uniform rows stay uniform.
  PosteriorGrid sharp = temper(rows, 1e-3);
  CHECK(sharp(0, 3) == doctest::Approx(1.0).epsilon(1e-9));
  for (int j = 0; j < 4; ++j) {
    CHECK(sharp(1, j) == doctest::Approx(0.25).epsilon(1e-12));
  }

  // Argmax never moves, at any temperature.
  for (double tau : {0.2, 0.7, 1.3, 5.0}) {
    PosteriorGrid warped = temper(rows, tau);
    CHECK(argmax_row(warped.row(0)) == argmax_row(rows.row(0)));
    CHECK(is_distribution_row(warped.row(0)));
  }

  PosteriorGrid zero(1, 3);
  CHECK_THROWS_AS(temper(zero, 0.5), std::domain_error);
  CHECK_THROWS_AS(temper(rows, 0.0), std::domain_error);
}

TEST_CASE("ode_step algebra") {
  const KernelConfig kernel{0.01, 0.49, 3, 2};
  SamplerConfig cfg;
  cfg.kernel = kernel;

  Lattice lattice(2, 3);
  lattice(0, 0) = 0.7; lattice(0, 1) = -0.4; lattice(0, 2) = 0.1;
  lattice(1, 2) = 1.0;
  HybridState state{lattice, MaskVector{0, 1}, 0.8};

  // Zero score: unchanged.
  Lattice zero_score(2, 3);
  Lattice unchanged = ode_step(state, 0.3, 0.8, zero_score, cfg);
  for (size_t k = 0; k < lattice.data().size(); ++k) {
    CHECK(unchanged.data()[k] == lattice.data()[k]);
  }

  // Equal noise levels: unchanged for any score.
  Lattice some_score(2, 3, 0.37);
  Lattice still = detail::apply_ode_update(lattice, state.mask, some_score, 1.3,
                                           1.3, false);
  for (size_t k = 0; k < lattice.data().size(); ++k) {
    CHECK(still.data()[k] == lattice.data()[k]);
  }

  // One-hot posterior mean mu, full step to sigma_s = 0: row -> (row + mu)/2.
  const double sigma_t = 0.9;
  PosteriorGrid mu(2, 3);
  mu(0, 1) = 1.0;
  mu(1, 2) = 1.0;
  Lattice score = score_from_posterior(state, mu, sigma_t);
  Lattice halfway =
      detail::apply_ode_update(lattice, state.mask, score, sigma_t, 0.0, false);
  for (int j = 0; j < 3; ++j) {
    CHECK(halfway(0, j) ==
          doctest::Approx((lattice(0, j) + mu(0, j)) / 2.0).epsilon(1e-12));
    CHECK(halfway(1, j) == lattice(1, j));  // clean row untouched
  }

  // The literal-paper sign diverges away from the mean.
  Lattice away =
      detail::apply_ode_update(lattice, state.mask, score, sigma_t, 0.0, true);
  CHECK(std::fabs(away(0, 1) - mu(0, 1)) > std::fabs(lattice(0, 1) - mu(0, 1)));

  CHECK_THROWS_AS(ode_step(state, 0.8, 0.8, zero_score, cfg), std::domain_error);
}

TEST_CASE("guided ode step") {
  const KernelConfig kernel{0.01, 0.49, 3, 2};
  SamplerConfig cfg;
  cfg.kernel = kernel;

  Lattice lattice(2, 3);
  lattice(0, 0) = 0.6; lattice(0, 2) = -0.2;
  lattice(1, 1) = 1.0;
  HybridState state{lattice, MaskVector{0, 1}, 0.7};
  PosteriorGrid posterior(2, 3, 1.0 / 3.0);
  const double sigma_t = sigma_of_t(0.7, kernel);
  const double sigma_s = sigma_of_t(0.3, kernel);
  Lattice score = score_from_posterior(state, posterior, sigma_t);

  Matrix coeffs(2, 3);
  coeffs(0, 1) = 2.0;
  coeffs(1, 0) = -1.0;
  Classifier clf = linear_classifier(coeffs);

  // w = 0 reduces to the plain step.
  Lattice plain = ode_step(state, 0.3, 0.7, score, cfg);
  Lattice guided0 = guided_ode_step(state, 0.3, 0.7, score, clf, 0.0, cfg);
  for (size_t k = 0; k < plain.data().size(); ++k) {
    CHECK(guided0.data()[k] == plain.data()[k]);
  }

  // Linear classifier: constant-gradient shift on noisy rows only.
  const double w = 1.7;
  Lattice guided = guided_ode_step(state, 0.3, 0.7, score, clf, w, cfg);
  const double shift = 0.5 * (sigma_t * sigma_t - sigma_s * sigma_s) * w;
  for (int j = 0; j < 3; ++j) {
    CHECK(guided(0, j) ==
          doctest::Approx(plain(0, j) + shift * coeffs(0, j)).epsilon(1e-10));
    CHECK(guided(1, j) == plain(1, j));
  }

  // Classifier gradient consistency with finite differences.
  Rng rng = Rng::split(5150, 0);
  Lattice probe(2, 3);
  for (double& x : probe.data()) x = rng.next_normal();
  Lattice grad = clf.gradient(probe);
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      Lattice up = probe, down = probe;
      up(i, j) += h;
      down(i, j) -= h;
      const double fd = (clf.log_score(up) - clf.log_score(down)) / (2.0 * h);
      CHECK(std::fabs(fd - grad(i, j)) < 1e-4 * std::max(1.0, std::fabs(fd)));
    }
  }
}

TEST_CASE("combine_update branch semantics") {
  Lattice lattice(3, 2);
  lattice(0, 0) = 1.0;
  lattice(1, 0) = 0.3; lattice(1, 1) = -0.6;
  lattice(2, 1) = 0.9;
  HybridState prev{lattice, MaskVector{1, 0, 0}, 0.5};

  Lattice refined(3, 2);
  refined(1, 0) = 7.0;
  refined(2, 0) = -7.0;
  TokenSequence tokens{0, 1, 0};

  // No new clean rows: pure ODE refinement.
  HybridState ode_only = combine_update(prev, tokens, refined, MaskVector{0, 0, 0});
  CHECK(ode_only.lattice(0, 0) == 1.0);  // carried over
  CHECK(ode_only.lattice(1, 0) == 7.0);
  CHECK(ode_only.mask == MaskVector{1, 0, 0});

  // All noisy rows discretized.
  HybridState all_clean = combine_update(prev, tokens, refined, MaskVector{0, 1, 1});
  CHECK(all_clean.mask == MaskVector{1, 1, 1});
  CHECK(all_clean.lattice(1, 1) == 1.0);
  CHECK(all_clean.lattice(1, 0) == 0.0);
  CHECK(all_clean.lattice(2, 0) == 1.0);

  // Fully clean previous state never changes.
  HybridState frozen{lattice, MaskVector{1, 1, 1}, 0.5};
  HybridState same = combine_update(frozen, tokens, refined, MaskVector{1, 1, 1});
  for (size_t k = 0; k < lattice.data().size(); ++k) {
    CHECK(same.lattice.data()[k] == lattice.data()[k]);
  }
}

TEST_CASE("hybrid exact sampler: determinism and trajectory invariants") {
  auto dist = toy::reference_5seq();
  ExactBayesDenoiser denoiser(dist);
  SamplerConfig cfg = base_config(dist, SamplerMode::kHybridExact, 16, 42);

  TokenSequence a = sample_hybrid_exact(denoiser, cfg);
  TokenSequence b = sample_hybrid_exact(denoiser, cfg);
  CHECK(a == b);

  for (int run = 0; run < 10; ++run) {
    cfg.seed = 1000 + run;
    Trajectory traj;
    TokenSequence tokens = sample_hybrid_exact(denoiser, cfg, nullptr, &traj);
    REQUIRE(!traj.snapshots.empty());
    // Times strictly decreasing, mask bits only ever flip 0 -> 1.
    for (size_t k = 1; k < traj.snapshots.size(); ++k) {
      CHECK(traj.snapshots[k].first < traj.snapshots[k - 1].first);
      const auto& prev_mask = traj.snapshots[k - 1].second.mask;
      const auto& cur_mask = traj.snapshots[k].second.mask;
      for (size_t i = 0; i < cur_mask.size(); ++i) CHECK(cur_mask[i] >= prev_mask[i]);
    }
    // Output totality: valid token indices.
    for (int token : tokens) {
      CHECK(token >= 0);
      CHECK(token < dist.vocab);
    }
  }
}

TEST_CASE("hybrid exact TV shrinks with nfe on a dependent distribution") {
  auto dist = toy::dependent_pair();
  ExactBayesDenoiser denoiser(dist);
  const int n = 20000;

  auto tv_at = [&](int nfe) {
    SamplerConfig cfg = base_config(dist, SamplerMode::kHybridExact, nfe, 7);
    return tv_distance(sample_batch(denoiser, cfg, n), dist);
  };
  const double tv1 = tv_at(1);
  const double tv16 = tv_at(16);
  const double tv64 = tv_at(64);
  CHECK(tv16 < tv1);
  CHECK(tv64 < tv1);
  CHECK(tv64 < 0.08);
}

TEST_CASE("masked baseline: one-shot independence hurts, more steps help") {
  auto dist = toy::dependent_pair();
  ExactBayesDenoiser denoiser(dist);
  const int n = 20000;

  SamplerConfig one = base_config(dist, SamplerMode::kMasked, 1, 11);
  SamplerConfig many = base_config(dist, SamplerMode::kMasked, 64, 12);
  const double tv_one = tv_distance(sample_batch(denoiser, one, n), dist);
  const double tv_many = tv_distance(sample_batch(denoiser, many, n), dist);
  CHECK(tv_one > tv_many);
  CHECK(tv_many < 0.08);

  // At nfe = 1 hybrid and masked are both one-shot samplers; their TVs agree
  // up to the weakly-informative lattice evidence and Monte Carlo noise.
  SamplerConfig hybrid_one = base_config(dist, SamplerMode::kHybridExact, 1, 13);
  const double tv_hybrid_one =
      tv_distance(sample_batch(denoiser, hybrid_one, n), dist);
  CHECK(std::fabs(tv_hybrid_one - tv_one) < 0.05);
}

TEST_CASE("approx sampler tracks the exact sampler") {
  auto dist = toy::reference_5seq();
  ExactBayesDenoiser denoiser(dist);
  const int n = 20000;

  SamplerConfig exact = base_config(dist, SamplerMode::kHybridExact, 64, 21);
  SamplerConfig approx = base_config(dist, SamplerMode::kHybridApprox, 64, 22);
  const double tv_exact = tv_distance(sample_batch(denoiser, exact, n), dist);
  const double tv_approx = tv_distance(sample_batch(denoiser, approx, n), dist);
  CHECK(tv_exact < 0.07);
  CHECK(tv_approx < 0.07);
  CHECK(std::fabs(tv_exact - tv_approx) < 0.03);

  // Degenerate one-hot posterior: the posterior sample always equals the
  // posterior mean, so both samplers must emit the target sequence.
  auto point = toy::single_sequence({1, 0, 2}, 3);
  ExactBayesDenoiser point_oracle(point);
  SamplerConfig pe = base_config(point, SamplerMode::kHybridExact, 8, 5);
  SamplerConfig pa = base_config(point, SamplerMode::kHybridApprox, 8, 5);
  for (int run = 0; run < 20; ++run) {
    pe.seed = pa.seed = 40 + run;
    CHECK(sample_hybrid_exact(point_oracle, pe) == point.sequences[0]);
    CHECK(sample_hybrid_approx(point_oracle, pa) == point.sequences[0]);
  }
}

TEST_CASE("gaussian ode sampler is deterministic and works at small vocab") {
  auto dist = toy::small_ode_toy();
  ExactBayesDenoiser denoiser(dist);
  SamplerConfig cfg = base_config(dist, SamplerMode::kGaussianOde, 64, 3);

  CHECK(sample_gaussian_ode(denoiser, cfg) == sample_gaussian_ode(denoiser, cfg));

  const double tv = tv_distance(sample_batch(denoiser, cfg, 4000), dist);
  CHECK(tv < 0.12);
}

TEST_CASE("label exchangeability across all sampler modes") {
  auto dist = toy::small_ode_toy();
  std::vector<int> perm{2, 0, 3, 1};
  auto moved = permuted(dist, perm);
  ExactBayesDenoiser oracle(dist);
  ExactBayesDenoiser moved_oracle(moved);

  const int n = 5000;
  for (SamplerMode mode : {SamplerMode::kHybridExact, SamplerMode::kHybridApprox,
                           SamplerMode::kMasked, SamplerMode::kGaussianOde}) {
    SamplerConfig cfg = base_config(dist, mode, 8, 77);
    auto samples = sample_batch(oracle, cfg, n);
    for (auto& seq : samples) {
      for (int& token : seq) token = perm[token];
    }
    // Relabelled samples must follow the relabelled distribution.
    const double tv_moved = tv_distance(samples, moved);
    SamplerConfig cfg2 = base_config(moved, mode, 8, 78);
    const double tv_direct = tv_distance(sample_batch(moved_oracle, cfg2, n), moved);
    CHECK(std::fabs(tv_moved - tv_direct) < 0.05);
  }
}

TEST_CASE("guidance weight shifts mass toward the favored class") {
  auto dist = toy::two_class();
  ExactBayesDenoiser denoiser(dist);

  Matrix coeffs(dist.len, dist.vocab);
  for (int i = 0; i < dist.len; ++i) {
    coeffs(i, 0) = 1.0;
    coeffs(i, 1) = 1.0;
  }
  Classifier clf = linear_classifier(coeffs);

  const int n = 4000;
  double prev_fraction = -1.0;
  for (double w : {0.0, 4.0}) {
    SamplerConfig cfg = base_config(dist, SamplerMode::kHybridExact, 8, 99);
    cfg.guidance_weight = w;
    auto samples = sample_batch(denoiser, cfg, n, &clf);
    int hits = 0;
    for (const auto& seq : samples) {
      if (toy::all_lower_half(seq, dist.vocab)) ++hits;
    }
    const double fraction = static_cast<double>(hits) / n;
    CHECK(fraction > prev_fraction);
    prev_fraction = fraction;
  }
  CHECK(prev_fraction > 0.55);  // strong guidance clearly dominates
}

TEST_CASE("guidance is rejected in modes without a continuous update") {
  auto dist = toy::two_class();
  ExactBayesDenoiser denoiser(dist);
  Matrix coeffs(dist.len, dist.vocab);
  Classifier clf = linear_classifier(coeffs);

  SamplerConfig cfg = base_config(dist, SamplerMode::kMasked, 4, 1);
  cfg.guidance_weight = 1.0;
  CHECK_THROWS_AS(sample_one(denoiser, cfg, &clf), std::invalid_argument);
}

TEST_CASE("batch sampling splits seeds per index") {
  auto dist = toy::reference_5seq();
  ExactBayesDenoiser denoiser(dist);
  SamplerConfig cfg = base_config(dist, SamplerMode::kHybridExact, 4, 31);

  auto batch1 = sample_batch(denoiser, cfg, 50);
  auto batch2 = sample_batch(denoiser, cfg, 50);
  CHECK(batch1 == batch2);

  // The thread cap changes scheduling, never results.
  setenv("CANDI_LAB_THREADS", "2", 1);
  auto threaded = sample_batch(denoiser, cfg, 50);
  unsetenv("CANDI_LAB_THREADS");
  CHECK(threaded == batch1);

  // Distinct indices explore distinct streams.
  bool varied = false;
  for (size_t k = 1; k < batch1.size(); ++k) {
    if (batch1[k] != batch1[0]) varied = true;
  }
  CHECK(varied);
}
