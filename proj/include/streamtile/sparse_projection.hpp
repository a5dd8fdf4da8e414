#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <random>

#include "streamtile/core.hpp"

namespace streamtile {

enum class DensityMode {
  achlioptas,   // +-sqrt(3/n) with prob 1/6 each, 0 with prob 2/3
  very_sparse,  // nonzero prob 1/sqrt(d), scale sqrt(sqrt(d)/n)
};

// Fixed random sign matrix for the first reduction stage (d -> n). Entries
// are a deterministic function of (d, n, seed, mode), so the same transform
// can be rebuilt anywhere from four scalars.
class SparseProjection {
 public:
  SparseProjection(Index d, Index n, std::uint64_t seed, DensityMode mode)
      : d_(d), n_(n), seed_(seed), mode_(mode), p_(d, n) {
    require(n > 0, "SparseProjection: n must be positive");
    require(n <= d, "SparseProjection: n must not exceed d");

    double nonzero_prob, scale;
    if (mode == DensityMode::achlioptas) {
      nonzero_prob = 1.0 / 3.0;
      scale = std::sqrt(3.0 / static_cast<double>(n));
    } else {
      const double sqrt_d = std::sqrt(static_cast<double>(d));
      nonzero_prob = 1.0 / sqrt_d;
      scale = std::sqrt(sqrt_d / static_cast<double>(n));
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(nonzero_prob * d * n * 1.1) + 16);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < d; ++i) {
        const double u = unif(rng);
        if (u < 0.5 * nonzero_prob) {
          entries.emplace_back(i, j, scale);
        } else if (u < nonzero_prob) {
          entries.emplace_back(i, j, -scale);
        }
      }
    }
    p_.setFromTriplets(entries.begin(), entries.end());
    p_.makeCompressed();
  }

  Index input_dim() const { return d_; }
  Index output_dim() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  DensityMode mode() const { return mode_; }

  // P^T X for a d x b block of samples. Pure; safe for concurrent callers.
  template <class Derived>
  Matrix apply(const Eigen::MatrixBase<Derived>& x) const {
    require_shape(x.rows() == d_, "SparseProjection::apply: row count mismatch");
    return p_.transpose() * x;
  }

  Vector apply(const Vector& x) const {
    require_shape(x.size() == d_, "SparseProjection::apply: dimension mismatch");
    return p_.transpose() * x;
  }

  const Eigen::SparseMatrix<double>& matrix() const { return p_; }
  Index nonzeros() const { return p_.nonZeros(); }

 private:
  Index d_, n_;
  std::uint64_t seed_;
  DensityMode mode_;
  Eigen::SparseMatrix<double> p_;
};

}  // namespace streamtile
