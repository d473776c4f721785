// candi: hybrid continuous-discrete diffusion lab CLI.
//
// Subcommands: validate-formulas, corrupt-demo, train, sample, frontier,
// compare, guide-demo, dissonance-demo. Every subcommand is deterministic
// given its seed and config, writes its primary output to --out (stdout by
// default), and emits a run manifest (config echo, seed, duration, artifact
// checksums) to --manifest or stderr.
//
// Exit codes: 0 success, 1 runtime error (JSON diagnostic on stderr),
// 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "candi/bayes.hpp"
#include "candi/corruption.hpp"
#include "candi/denoiser.hpp"
#include "candi/frontier.hpp"
#include "candi/kernel.hpp"
#include "candi/run_config.hpp"
#include "candi/sampler.hpp"
#include "candi/toy_distribution.hpp"

namespace {

using nlohmann::json;

struct OutputTarget {
  std::string out_path;       // "-" means stdout
  std::string manifest_path;  // empty: derive from out or fall back to stderr

  bool to_stdout() const { return out_path.empty() || out_path == "-"; }
};

void add_output_flags(CLI::App* cmd, OutputTarget* target) {
  cmd->add_option("--out", target->out_path, "output path ('-' for stdout)");
  cmd->add_option("--manifest", target->manifest_path,
                  "manifest path (default: <out>.manifest.json, or stderr)");
}

/// Writes the primary payload, then the manifest with artifact checksums.
void emit(const OutputTarget& target, const std::string& payload,
          candi::ManifestRecorder& recorder) {
  if (target.to_stdout()) {
    std::cout << payload;
    std::cout.flush();
  } else {
    std::ofstream out(target.out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + target.out_path);
    out << payload;
    out.close();
    recorder.add_artifact(target.out_path);
  }
  if (!target.manifest_path.empty()) {
    recorder.write(target.manifest_path);
  } else if (!target.to_stdout()) {
    recorder.write(target.out_path + ".manifest.json");
  } else {
    recorder.write(std::cerr);
  }
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

/// Denoiser factory: trained checkpoint when given, exact Bayes otherwise.
struct DenoiserBundle {
  std::unique_ptr<candi::Denoiser> denoiser;
  candi::ToyDistribution dist;
  candi::KernelConfig kernel;
};

DenoiserBundle make_denoiser(const candi::RunConfig& cfg) {
  if (cfg.distribution.empty()) {
    throw std::runtime_error("a --distribution (builtin name or JSON file) is required");
  }
  DenoiserBundle bundle;
  bundle.dist = candi::resolve_distribution(cfg.distribution);
  bundle.kernel = cfg.kernel;
  bundle.kernel.vocab = bundle.dist.vocab;
  bundle.kernel.seq_len = bundle.dist.len;
  if (!cfg.checkpoint.empty()) {
    candi::DenoiserParams params = candi::load_checkpoint(cfg.checkpoint);
    if (params.shape.vocab != bundle.dist.vocab ||
        params.shape.seq_len != bundle.dist.len) {
      throw std::runtime_error("checkpoint shape does not match the distribution");
    }
    bundle.denoiser = std::make_unique<candi::TrainedDenoiser>(std::move(params));
  } else {
    bundle.denoiser = std::make_unique<candi::ExactBayesDenoiser>(bundle.dist);
  }
  return bundle;
}

/// Linear classifier favoring the lower half of the vocabulary everywhere.
candi::Classifier lower_half_classifier(int seq_len, int vocab) {
  candi::Matrix coeffs(seq_len, vocab);
  for (int i = 0; i < seq_len; ++i) {
    for (int j = 0; j < vocab / 2; ++j) coeffs(i, j) = 1.0;
  }
  return candi::linear_classifier(coeffs);
}

// ----------------------------------------------------------------------------
// Subcommand payload builders
// ----------------------------------------------------------------------------

std::string run_validate_formulas(const std::vector<int>& vocab_list,
                                  double sigma_min, double sigma_max,
                                  int grid_points, int64_t samples,
                                  uint64_t seed) {
  if (!(sigma_min > 0.0 && sigma_max > sigma_min)) {
    throw std::runtime_error("requires 0 < sigma-min < sigma-max");
  }
  if (grid_points < 1) throw std::runtime_error("grid-points must be >= 1");
  std::ostringstream out;
  out << "vocab,sigma,rho_analytic,rho_mc,rho_se,rank_analytic,rank_mc,rank_se\n";
  const double log_lo = std::log(sigma_min);
  const double log_hi = std::log(sigma_max);
  for (size_t vi = 0; vi < vocab_list.size(); ++vi) {
    const int vocab = vocab_list[vi];
    for (int g = 0; g < grid_points; ++g) {
      const double frac = grid_points == 1 ? 0.0
                                           : static_cast<double>(g) / (grid_points - 1);
      const double sigma = std::exp(log_lo + (log_hi - log_lo) * frac);
      const candi::CorruptionPoint point = candi::corruption_point(sigma, vocab);
      const uint64_t cell_seed =
          candi::Rng::split(seed, vi * 1000 + static_cast<uint64_t>(g)).next_u64();
      auto [rho_mc, rank_mc] = candi::mc_corruption(sigma, vocab, samples, cell_seed);
      out << vocab << "," << format_double(sigma) << ","
          << format_double(point.rho) << "," << format_double(rho_mc.mean) << ","
          << format_double(rho_mc.std_err) << "," << format_double(point.rank)
          << "," << format_double(rank_mc.mean) << ","
          << format_double(rank_mc.std_err) << "\n";
    }
  }
  return out.str();
}

std::string run_corrupt_demo(const candi::KernelConfig& kernel, int grid_points,
                             int samples, uint64_t seed) {
  kernel.validate();
  if (grid_points < 2) throw std::runtime_error("grid-points must be >= 2");
  if (samples < 1) throw std::runtime_error("samples must be >= 1");

  candi::TokenSequence x0(kernel.seq_len);
  for (int i = 0; i < kernel.seq_len; ++i) x0[i] = i % kernel.vocab;

  std::ostringstream out;
  for (int g = 0; g < grid_points; ++g) {
    const double t = static_cast<double>(g) / (grid_points - 1);
    int64_t kept = 0, total = 0, noisy = 0;
    double exceed_sum = 0.0;
    for (int d = 0; d < samples; ++d) {
      const uint64_t draw_seed =
          candi::Rng::split(seed, g * 100000 + static_cast<uint64_t>(d)).next_u64();
      candi::HybridState state = candi::forward_corrupt(x0, t, kernel, draw_seed);
      for (int i = 0; i < kernel.seq_len; ++i) {
        ++total;
        if (state.mask[i] == 1) {
          ++kept;
          continue;
        }
        ++noisy;
        int exceed = 0;
        for (int j = 0; j < kernel.vocab; ++j) {
          if (j != x0[i] && state.lattice(i, j) > state.lattice(i, x0[i])) ++exceed;
        }
        exceed_sum += static_cast<double>(exceed) / (kernel.vocab - 1);
      }
    }
    json record = {
        {"t", t},
        {"alpha", candi::alpha(t)},
        {"sigma", candi::sigma_of_t(t, kernel)},
        {"empirical_keep_fraction", static_cast<double>(kept) / total},
        {"empirical_rank", noisy > 0 ? exceed_sum / noisy : 0.0}};
    out << record.dump() << "\n";
  }
  return out.str();
}

std::string run_guide_demo(const DenoiserBundle& bundle,
                           const candi::SamplerConfig& sampler,
                           const std::vector<double>& weights, int num_samples,
                           uint64_t seed) {
  candi::Classifier clf =
      lower_half_classifier(bundle.kernel.seq_len, bundle.kernel.vocab);
  std::ostringstream out;
  for (size_t wi = 0; wi < weights.size(); ++wi) {
    candi::SamplerConfig cfg = sampler;
    cfg.kernel = bundle.kernel;
    cfg.guidance_weight = weights[wi];
    cfg.seed = candi::Rng::split(seed, 0x90 + wi).next_u64();
    auto samples = candi::sample_batch(*bundle.denoiser, cfg, num_samples, &clf);
    int hits = 0;
    for (const auto& seq : samples) {
      if (candi::toy::all_lower_half(seq, bundle.kernel.vocab)) ++hits;
    }
    const double fraction = static_cast<double>(hits) / num_samples;
    json record = {{"w", weights[wi]},
                   {"target_fraction", fraction},
                   {"std_err", std::sqrt(fraction * (1.0 - fraction) / num_samples)},
                   {"num_samples", num_samples}};
    out << record.dump() << "\n";
  }
  return out.str();
}

std::string run_dissonance_demo(int nfe, int num_samples, uint64_t seed) {
  std::ostringstream out;
  auto run_case = [&](const candi::ToyDistribution& dist, candi::SamplerMode mode,
                      uint64_t stream) {
    candi::ExactBayesDenoiser oracle(dist);
    candi::SamplerConfig cfg;
    cfg.mode = mode;
    cfg.nfe = nfe;
    cfg.kernel = candi::KernelConfig{0.01, 0.49, dist.vocab, dist.len};
    cfg.seed = candi::Rng::split(seed, stream).next_u64();
    const double tv =
        candi::tv_distance(candi::sample_batch(oracle, cfg, num_samples), dist);
    json record = {{"vocab", dist.vocab},
                   {"mode", candi::to_string(mode)},
                   {"nfe", nfe},
                   {"num_samples", num_samples},
                   {"tv", tv}};
    out << record.dump() << "\n";
    return tv;
  };

  const auto small = candi::toy::small_ode_toy();
  const auto large = candi::toy::corner_toy();
  run_case(small, candi::SamplerMode::kGaussianOde, 1);
  const double tv_large_ode = run_case(large, candi::SamplerMode::kGaussianOde, 2);
  const double tv_large_hybrid =
      run_case(large, candi::SamplerMode::kHybridExact, 3);
  json summary = {{"vocab", large.vocab},
                  {"tv_ratio_gaussian_over_hybrid",
                   tv_large_hybrid > 0.0 ? tv_large_ode / tv_large_hybrid
                                         : std::numeric_limits<double>::infinity()}};
  out << summary.dump() << "\n";
  return out.str();
}

// ----------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
  CLI::App app{"hybrid continuous-discrete diffusion lab"};
  app.require_subcommand(1);

  // Shared state filled by flags; each subcommand overlays its own values on
  // top of an optional --config document.
  std::string config_path;
  candi::RunConfig base;

  auto load_base = [&](const std::string& path) {
    base = candi::load_config(path);
  };

  // --- validate-formulas ---
  auto* validate = app.add_subcommand(
      "validate-formulas", "analytic corruption rates vs Monte Carlo, as CSV");
  OutputTarget validate_out;
  std::vector<int> vocab_list{5, 50, 500};
  double sigma_min = std::sqrt(0.1);
  double sigma_max = std::sqrt(10.0);
  int grid_points = 8;
  int64_t mc_samples = 5000;
  uint64_t formulas_seed = 1;
  validate->add_option("--vocab-list", vocab_list, "vocabulary sizes")
      ->delimiter(',');
  validate->add_option("--sigma-min", sigma_min, "smallest noise level");
  validate->add_option("--sigma-max", sigma_max, "largest noise level");
  validate->add_option("--grid-points", grid_points, "log-spaced sigma count");
  validate->add_option("--samples", mc_samples, "Monte Carlo draws per point");
  validate->add_option("--seed", formulas_seed, "root seed");
  add_output_flags(validate, &validate_out);
  validate->callback([&] {
    candi::ManifestRecorder recorder(
        json{{"subcommand", "validate-formulas"},
             {"vocab_list", vocab_list},
             {"sigma_min", sigma_min},
             {"sigma_max", sigma_max},
             {"grid_points", grid_points},
             {"samples", mc_samples},
             {"seed", formulas_seed}},
        formulas_seed);
    emit(validate_out,
         run_validate_formulas(vocab_list, sigma_min, sigma_max, grid_points,
                               mc_samples, formulas_seed),
         recorder);
  });

  // --- corrupt-demo ---
  auto* corrupt = app.add_subcommand(
      "corrupt-demo", "hybrid kernel statistics along the time grid, as JSON lines");
  OutputTarget corrupt_out;
  int corrupt_vocab = 8;
  int corrupt_len = 16;
  int corrupt_grid = 11;
  int corrupt_samples = 200;
  uint64_t corrupt_seed = 1;
  corrupt->add_option("--config", config_path, "RunConfig JSON path");
  corrupt->add_option("--vocab", corrupt_vocab, "vocabulary size");
  corrupt->add_option("--seq-len", corrupt_len, "sequence length");
  corrupt->add_option("--grid-points", corrupt_grid, "time grid size");
  corrupt->add_option("--samples", corrupt_samples, "corruption draws per t");
  corrupt->add_option("--seed", corrupt_seed, "root seed");
  add_output_flags(corrupt, &corrupt_out);
  corrupt->callback([&] {
    if (!config_path.empty()) load_base(config_path);
    candi::KernelConfig kernel = base.kernel;
    if (corrupt->count("--vocab") || kernel.vocab == 0) kernel.vocab = corrupt_vocab;
    if (corrupt->count("--seq-len") || kernel.seq_len == 0) {
      kernel.seq_len = corrupt_len;
    }
    candi::ManifestRecorder recorder(json{{"subcommand", "corrupt-demo"},
                                          {"vocab", kernel.vocab},
                                          {"seq_len", kernel.seq_len},
                                          {"rank_min", kernel.rank_min},
                                          {"rank_max", kernel.rank_max},
                                          {"grid_points", corrupt_grid},
                                          {"samples", corrupt_samples},
                                          {"seed", corrupt_seed}},
                                     corrupt_seed);
    emit(corrupt_out,
         run_corrupt_demo(kernel, corrupt_grid, corrupt_samples, corrupt_seed),
         recorder);
  });

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "train the tiny denoiser");
  OutputTarget train_out;
  std::string train_dist;
  train_cmd->add_option("--config", config_path, "RunConfig JSON path");
  train_cmd->add_option("--distribution", train_dist,
                        "builtin name or distribution JSON path");
  double train_lr = 0.0;
  int train_steps = 0, train_batch = 0;
  uint64_t train_seed_flag = 0;
  double train_lambda = -1.0;
  train_cmd->add_option("--learning-rate", train_lr, "gradient step size");
  train_cmd->add_option("--steps", train_steps, "gradient steps");
  train_cmd->add_option("--batch-size", train_batch, "examples per step");
  train_cmd->add_option("--seed", train_seed_flag, "training seed");
  train_cmd->add_option("--lambda", train_lambda, "corruption-bias mix in [0,1]");
  add_output_flags(train_cmd, &train_out);
  train_cmd->callback([&] {
    if (!config_path.empty()) load_base(config_path);
    if (train_cmd->count("--distribution")) base.distribution = train_dist;
    if (train_cmd->count("--learning-rate")) base.train.learning_rate = train_lr;
    if (train_cmd->count("--steps")) base.train.steps = train_steps;
    if (train_cmd->count("--batch-size")) base.train.batch_size = train_batch;
    if (train_cmd->count("--seed")) base.train.seed = train_seed_flag;
    if (train_cmd->count("--lambda")) base.train.lambda = train_lambda;
    if (base.distribution.empty()) {
      throw std::runtime_error("train requires --distribution");
    }
    candi::ToyDistribution dist = candi::resolve_distribution(base.distribution);
    candi::KernelConfig kernel = base.kernel;
    kernel.vocab = dist.vocab;
    kernel.seq_len = dist.len;

    candi::RunConfig echo = base;
    echo.kernel = kernel;
    candi::ManifestRecorder recorder(echo.to_json(), base.train.seed);
    candi::DenoiserParams params = candi::train(dist, base.train, kernel);
    emit(train_out, candi::checkpoint_to_json(params).dump(2) + "\n", recorder);
  });

  // --- sample ---
  auto* sample_cmd = app.add_subcommand(
      "sample", "draw sequences from a reverse sampler, as JSON lines");
  OutputTarget sample_out;
  std::string sample_mode;
  std::string sample_dist;
  std::string sample_checkpoint;
  int sample_nfe = 0;
  double sample_temp = 0.0;
  double sample_w = 0.0;
  int num_samples = 16;
  uint64_t sample_seed_flag = 0;
  sample_cmd->add_option("--config", config_path, "RunConfig JSON path");
  sample_cmd->add_option("--mode", sample_mode,
                         "hybrid_exact | hybrid_approx | masked | gaussian_ode");
  sample_cmd->add_option("--nfe", sample_nfe, "denoiser calls per sequence");
  sample_cmd->add_option("--temperature", sample_temp, "posterior temperature");
  sample_cmd->add_option("--guidance-weight", sample_w, "classifier weight");
  sample_cmd->add_option("--num-samples", num_samples, "sequences to draw");
  sample_cmd->add_option("--seed", sample_seed_flag, "root seed");
  sample_cmd->add_option("--checkpoint", sample_checkpoint, "trained denoiser");
  sample_cmd->add_option("--distribution", sample_dist,
                         "builtin name or distribution JSON path");
  add_output_flags(sample_cmd, &sample_out);
  sample_cmd->callback([&] {
    if (!config_path.empty()) load_base(config_path);
    if (sample_cmd->count("--mode")) {
      base.sampler.mode = candi::sampler_mode_from_string(sample_mode);
    }
    if (sample_cmd->count("--nfe")) base.sampler.nfe = sample_nfe;
    if (sample_cmd->count("--temperature")) base.sampler.temperature = sample_temp;
    if (sample_cmd->count("--guidance-weight")) {
      base.sampler.guidance_weight = sample_w;
    }
    if (sample_cmd->count("--seed")) base.sampler.seed = sample_seed_flag;
    if (sample_cmd->count("--distribution")) base.distribution = sample_dist;
    if (sample_cmd->count("--checkpoint")) base.checkpoint = sample_checkpoint;

    DenoiserBundle bundle = make_denoiser(base);
    candi::SamplerConfig cfg = base.sampler;
    cfg.kernel = bundle.kernel;

    std::optional<candi::Classifier> clf;
    if (cfg.guidance_weight != 0.0) {
      clf = lower_half_classifier(cfg.kernel.seq_len, cfg.kernel.vocab);
    }

    candi::RunConfig echo = base;
    echo.kernel = cfg.kernel;
    candi::ManifestRecorder recorder(echo.to_json(), cfg.seed);
    auto samples = candi::sample_batch(*bundle.denoiser, cfg, num_samples,
                                       clf ? &*clf : nullptr);
    std::ostringstream payload;
    for (const auto& tokens : samples) {
      json record = {{"tokens", tokens},
                     {"mode", candi::to_string(cfg.mode)},
                     {"nfe", cfg.nfe},
                     {"temperature", cfg.temperature},
                     {"seed", cfg.seed}};
      payload << record.dump() << "\n";
    }
    emit(sample_out, payload.str(), recorder);
  });

  // --- frontier ---
  auto* frontier_cmd = app.add_subcommand(
      "frontier", "temperature sweep of diversity/coherence/tv, as CSV");
  OutputTarget frontier_out;
  std::string frontier_mode = "hybrid_exact";
  std::string frontier_dist;
  std::string frontier_checkpoint;
  std::vector<double> temps{0.25, 0.5, 0.75, 1.0};
  int frontier_nfe = 16;
  int frontier_samples = 2000;
  uint64_t frontier_seed = 1;
  frontier_cmd->add_option("--mode", frontier_mode, "sampler mode");
  frontier_cmd->add_option("--nfe", frontier_nfe, "denoiser calls per sequence");
  frontier_cmd->add_option("--temps", temps, "comma list of temperatures")
      ->delimiter(',');
  frontier_cmd->add_option("--num-samples", frontier_samples,
                           "sequences per temperature");
  frontier_cmd->add_option("--distribution", frontier_dist,
                           "builtin name or distribution JSON path");
  frontier_cmd->add_option("--checkpoint", frontier_checkpoint, "trained denoiser");
  frontier_cmd->add_option("--seed", frontier_seed, "root seed");
  add_output_flags(frontier_cmd, &frontier_out);
  frontier_cmd->callback([&] {
    base.distribution = frontier_dist;
    base.checkpoint = frontier_checkpoint;
    DenoiserBundle bundle = make_denoiser(base);
    candi::SamplerConfig cfg;
    cfg.mode = candi::sampler_mode_from_string(frontier_mode);
    cfg.nfe = frontier_nfe;
    cfg.kernel = bundle.kernel;
    candi::ManifestRecorder recorder(json{{"subcommand", "frontier"},
                                          {"mode", frontier_mode},
                                          {"nfe", frontier_nfe},
                                          {"temps", temps},
                                          {"num_samples", frontier_samples},
                                          {"distribution", frontier_dist},
                                          {"seed", frontier_seed}},
                                     frontier_seed);
    candi::Frontier frontier = candi::sweep(*bundle.denoiser, cfg, temps,
                                            frontier_samples, bundle.dist,
                                            frontier_seed);
    std::ostringstream payload;
    candi::write_frontier_csv(payload, frontier);
    emit(frontier_out, payload.str(), recorder);
  });

  // --- compare ---
  auto* compare_cmd =
      app.add_subcommand("compare", "frontier dominance verdict for two CSVs");
  OutputTarget compare_out;
  std::string csv_a, csv_b;
  compare_cmd->add_option("a", csv_a, "first frontier CSV")->required();
  compare_cmd->add_option("b", csv_b, "second frontier CSV")->required();
  add_output_flags(compare_cmd, &compare_out);
  compare_cmd->callback([&] {
    candi::Frontier a = candi::read_frontier_csv(csv_a);
    candi::Frontier b = candi::read_frontier_csv(csv_b);
    candi::ManifestRecorder recorder(
        json{{"subcommand", "compare"}, {"a", csv_a}, {"b", csv_b}}, 0);
    candi::Dominance verdict = candi::dominates(a, b);
    std::string line = "dominates: ";
    switch (verdict) {
      case candi::Dominance::kTrue: line += "a"; break;
      case candi::Dominance::kFalse: line += "b"; break;
      case candi::Dominance::kIncomparable: line += "incomparable"; break;
    }
    emit(compare_out, line + "\n", recorder);
  });

  // --- guide-demo ---
  auto* guide_cmd = app.add_subcommand(
      "guide-demo", "classifier-guided sampling sweep over guidance weights");
  OutputTarget guide_out;
  std::string guide_dist = "two-class";
  std::vector<double> guide_weights{0.0, 1.0, 2.0, 4.0};
  int guide_nfe = 8;
  int guide_samples = 2000;
  uint64_t guide_seed = 1;
  guide_cmd->add_option("--distribution", guide_dist, "two-class style toy");
  guide_cmd->add_option("--weights", guide_weights, "comma list of guidance weights")
      ->delimiter(',');
  guide_cmd->add_option("--nfe", guide_nfe, "denoiser calls per sequence");
  guide_cmd->add_option("--num-samples", guide_samples, "sequences per weight");
  guide_cmd->add_option("--seed", guide_seed, "root seed");
  add_output_flags(guide_cmd, &guide_out);
  guide_cmd->callback([&] {
    base.distribution = guide_dist;
    DenoiserBundle bundle = make_denoiser(base);
    candi::SamplerConfig sampler;
    sampler.mode = candi::SamplerMode::kHybridExact;
    sampler.nfe = guide_nfe;
    candi::ManifestRecorder recorder(json{{"subcommand", "guide-demo"},
                                          {"distribution", guide_dist},
                                          {"weights", guide_weights},
                                          {"nfe", guide_nfe},
                                          {"num_samples", guide_samples},
                                          {"seed", guide_seed}},
                                     guide_seed);
    emit(guide_out,
         run_guide_demo(bundle, sampler, guide_weights, guide_samples, guide_seed),
         recorder);
  });

  // --- dissonance-demo ---
  auto* dissonance_cmd = app.add_subcommand(
      "dissonance-demo",
      "small vs large vocabulary behavior of the pure Gaussian ODE sampler");
  OutputTarget dissonance_out;
  int dissonance_nfe = 64;
  int dissonance_samples = 2000;
  uint64_t dissonance_seed = 1;
  dissonance_cmd->add_option("--nfe", dissonance_nfe, "denoiser calls per sequence");
  dissonance_cmd->add_option("--num-samples", dissonance_samples,
                             "sequences per setting");
  dissonance_cmd->add_option("--seed", dissonance_seed, "root seed");
  add_output_flags(dissonance_cmd, &dissonance_out);
  dissonance_cmd->callback([&] {
    candi::ManifestRecorder recorder(json{{"subcommand", "dissonance-demo"},
                                          {"nfe", dissonance_nfe},
                                          {"num_samples", dissonance_samples},
                                          {"seed", dissonance_seed}},
                                     dissonance_seed);
    emit(dissonance_out,
         run_dissonance_demo(dissonance_nfe, dissonance_samples, dissonance_seed),
         recorder);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    nlohmann::json diagnostic = {{"error", e.what()}};
    std::cerr << diagnostic.dump() << std::endl;
    return 1;
  }
}
