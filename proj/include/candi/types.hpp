#pragma once

/**
 * Core value types shared across the library: the sequence lattice, the
 * clean/corrupted mask, per-position posterior grids, and the kernel
 * configuration that ties the masking and noise schedules together.
 */

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace candi {

/// Dense row-major matrix of doubles; rows index sequence positions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) {
    return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// 1 = clean/kept, 0 = corrupted.
using MaskVector = std::vector<uint8_t>;

/// Token indices in [0, v); the masked baseline additionally uses index v.
using TokenSequence = std::vector<int>;

/// L x v lattice of real-valued one-hot relaxations.
using Lattice = Matrix;

/// L x v matrix whose rows are categorical distributions over the vocabulary.
using PosteriorGrid = Matrix;

/**
 * Joint latent of the hybrid process: lattice values, the clean-position
 * mask, and the process time. Rows with mask = 1 are exact one-hot rows.
 */
struct HybridState {
  Lattice lattice;
  MaskVector mask;
  double t = 0.0;

  int seq_len() const { return lattice.rows(); }
  int vocab() const { return lattice.cols(); }
};

/// Schedule bounds and sequence shape for the hybrid kernel.
struct KernelConfig {
  double rank_min = 0.01;
  double rank_max = 0.49;
  int vocab = 0;
  int seq_len = 0;

  void validate() const {
    if (!(rank_min > 0.0 && rank_min < rank_max && rank_max < 0.5)) {
      throw std::invalid_argument(
          "KernelConfig: requires 0 < rank_min < rank_max < 0.5");
    }
    if (vocab < 2) throw std::invalid_argument("KernelConfig: vocab must be >= 2");
    if (seq_len < 1) throw std::invalid_argument("KernelConfig: seq_len must be >= 1");
  }
};

inline int argmax_row(std::span<const double> row) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(row.size()); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

/// Row sums to one within tol and has no negative entries.
inline bool is_distribution_row(std::span<const double> row, double tol = 1e-9) {
  double sum = 0.0;
  for (double x : row) {
    if (x < 0.0 || !std::isfinite(x)) return false;
    sum += x;
  }
  return std::fabs(sum - 1.0) <= tol;
}

}  // namespace candi
