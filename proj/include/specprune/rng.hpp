#pragma once

// Deterministic random primitives. Every stochastic step in the library
// (synthetic weights, random-feature projections, probe sampling, random
// pruning scores, random rotations) draws from this generator, so a single
// seed fixes all outputs byte-for-byte.
//
// Pinned construction:
//   substream seed  : splitmix64(seed XOR stream * 0x9E3779B97F4A7C15)
//   core generator  : std::mt19937_64
//   uniform (0,1]   : ((x >> 11) + 1) * 2^-53
//   gaussian        : Box-Muller on two uniforms (pair cached)
//   R-ball point    : gaussian direction, radius R * u^(1/dim)

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace specprune {

// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in (0,1], 53 mantissa bits. Never 0, so log() is safe.
  double uniform01() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

  Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gaussian();
    return m;
  }

  // Uniform point in the closed L2 ball of the given radius.
  Eigen::VectorXd ball_point(Eigen::Index dim, double radius) {
    Eigen::VectorXd dir = gaussian_vector(dim);
    double n = dir.norm();
    if (n == 0.0) {
      dir.setZero();
      dir[0] = 1.0;
      n = 1.0;
    }
    const double r = radius * std::pow(uniform01(), 1.0 / static_cast<double>(dim));
    return dir * (r / n);
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace specprune
