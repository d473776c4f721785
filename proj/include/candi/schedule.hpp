#pragma once

/**
 * Corruption schedules of the hybrid kernel.
 *
 * Both corruption axes are linear in time by construction: the keep rate
 * alpha(t) = 1 - t drives Bernoulli masking, and the target rank degradation
 * r*(t) interpolates [rank_min, rank_max] and is inverted into the Gaussian
 * noise level sigma(t). Bounding r* away from 0 and 0.5 keeps sigma finite
 * on the whole interval.
 */

#include <stdexcept>
#include <vector>

#include "candi/corruption.hpp"
#include "candi/types.hpp"

namespace candi {

namespace detail {
inline void require_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("time must lie in [0, 1]");
}
}  // namespace detail

/// Keep rate of the masking process.
inline double alpha(double t) {
  detail::require_time(t);
  return 1.0 - t;
}

/// Target rank degradation r*(t), linear between the configured bounds.
inline double target_rank(double t, const KernelConfig& cfg) {
  detail::require_time(t);
  return cfg.rank_min + (cfg.rank_max - cfg.rank_min) * t;
}

/// Noise level realizing the target rank degradation at time t.
inline double sigma_of_t(double t, const KernelConfig& cfg) {
  return sigma_for_rank(target_rank(t, cfg));
}

/// Probability that a corrupted position becomes clean when stepping t -> s.
inline double unmask_probability(double s, double t) {
  detail::require_time(s);
  detail::require_time(t);
  if (!(s < t)) throw std::domain_error("unmask_probability: requires s < t");
  if (t == 0.0) throw std::domain_error("unmask_probability: t must be positive");
  return (alpha(s) - alpha(t)) / (1.0 - alpha(t));
}

struct BranchProbabilities {
  double p_unmask = 0.0;
  double p_stay_noisy = 0.0;
};

/// Reverse-transition branch split for a corrupted position; sums to one.
inline BranchProbabilities reverse_branch_probabilities(double s, double t) {
  double p_unmask = unmask_probability(s, t);
  return {p_unmask, (1.0 - alpha(s)) / (1.0 - alpha(t))};
}

/// Default lower end of the sampling time grid.
inline constexpr double kTimeEpsilon = 1e-3;

/// Uniform reverse-time grid: nfe + 1 points from 1 down to eps.
inline std::vector<double> time_grid(int nfe, double eps = kTimeEpsilon) {
  if (nfe < 1) throw std::domain_error("time_grid: nfe must be >= 1");
  std::vector<double> grid(nfe + 1);
  for (int k = 0; k <= nfe; ++k) {
    grid[k] = 1.0 + (eps - 1.0) * static_cast<double>(k) / nfe;
  }
  grid.front() = 1.0;
  grid.back() = eps;
  return grid;
}

}  // namespace candi
