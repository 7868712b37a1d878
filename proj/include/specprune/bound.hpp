#pragma once

// Empirical check of the spectral deviation bound, pair by pair: compute the
// theoretical bound from the two spectra, sample the actual output deviation
// over the R-ball, and report both. A report with empirical > theoretical is
// a result, not an error — spectra are invariant under orthogonal transforms
// of the weights while the function they compute is not, and the
// counterexample suite demonstrates exactly that blind spot.
//
// Sampling always includes the 2*d_in axis-aligned extreme points +-R*e_i so
// the permutation counterexample is found deterministically.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "json.hpp"

#include "specprune/errors.hpp"
#include "specprune/model_io.hpp"
#include "specprune/rng.hpp"
#include "specprune/spectral.hpp"

namespace specprune {

struct BoundReport {
  std::string op_a;
  std::string op_b;
  ActivationSpec activation;
  double radius_R = 1.0;
  double fs = 0.0;
  double w2 = 0.0;
  double theoretical_bound = 0.0;
  double empirical_max_deviation = 0.0;
  int n_samples = 0;  // total points evaluated, axis extremes included
  bool violated = false;
  bool input_padded = false;   // operators had different d_in
  bool output_padded = false;  // outputs compared in the larger space
};

inline constexpr double kViolationSlack = 1e-9;

namespace detail {

struct AffineOp {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

// Zero-pads the input space (extra zero columns) to d_in and the output
// space (extra zero rows and bias entries) to d_out.
inline AffineOp pad_operator(Eigen::MatrixXd w, Eigen::VectorXd b, Eigen::Index d_in,
                             Eigen::Index d_out) {
  AffineOp out;
  out.w = Eigen::MatrixXd::Zero(d_out, d_in);
  out.w.topLeftCorner(w.rows(), w.cols()) = w;
  out.b = Eigen::VectorXd::Zero(d_out);
  out.b.head(b.size()) = b;
  return out;
}

}  // namespace detail

inline BoundReport verify_pair_matrices(const std::string& name_a, const Eigen::MatrixXd& w_a,
                                        const Eigen::VectorXd& b_a, const std::string& name_b,
                                        const Eigen::MatrixXd& w_b, const Eigen::VectorXd& b_b,
                                        const ActivationSpec& act, double radius_R,
                                        int n_samples, std::uint64_t seed,
                                        double norm_eq_tolerance = 1e-9) {
  if (radius_R <= 0.0) throw ParameterError("verify_pair: radius_R must be positive");
  if (n_samples < 0) throw ParameterError("verify_pair: n_samples must be non-negative");

  BoundReport r;
  r.op_a = name_a;
  r.op_b = name_b;
  r.activation = act;
  r.radius_R = radius_R;
  r.input_padded = w_a.cols() != w_b.cols();
  r.output_padded = w_a.rows() != w_b.rows();

  const SpectralSignature sig_a = svd_spectrum(augment(w_a, b_a), name_a);
  const SpectralSignature sig_b = svd_spectrum(augment(w_b, b_b), name_b);
  r.fs = fs_distance(sig_a, sig_b);
  r.w2 = w2_distance(sig_a, sig_b);
  r.theoretical_bound = equivalence_bound(sig_a, sig_b, act, radius_R, norm_eq_tolerance);

  const Eigen::Index d_in = std::max(w_a.cols(), w_b.cols());
  const Eigen::Index d_out = std::max(w_a.rows(), w_b.rows());
  const detail::AffineOp a = detail::pad_operator(w_a, b_a, d_in, d_out);
  const detail::AffineOp b = detail::pad_operator(w_b, b_b, d_in, d_out);

  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(n_samples) + 2 * static_cast<std::size_t>(d_in));
  for (Eigen::Index i = 0; i < d_in; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d_in);
    e[i] = radius_R;
    points.push_back(e);
    points.push_back(-e);
  }
  Rng rng(seed);
  for (int s = 0; s < n_samples; ++s) points.push_back(rng.ball_point(d_in, radius_R));

  double max_dev = 0.0;
  for (const auto& x : points) {
    const double dev = (act.apply(a.w * x + a.b) - act.apply(b.w * x + b.b)).norm();
    max_dev = std::max(max_dev, dev);
  }
  r.empirical_max_deviation = max_dev;
  r.n_samples = static_cast<int>(points.size());
  r.violated = r.empirical_max_deviation > r.theoretical_bound + kViolationSlack;
  return r;
}

inline BoundReport verify_pair(const OperatorDescriptor& a, const OperatorDescriptor& b,
                               const TensorStore& store, const ActivationSpec& act,
                               double radius_R, int n_samples, std::uint64_t seed,
                               double norm_eq_tolerance = 1e-9) {
  auto [w_a, b_a] = reshape_for_augment(a, store);
  auto [w_b, b_b] = reshape_for_augment(b, store);
  return verify_pair_matrices(a.name, w_a, b_a, b.name, w_b, b_b, act, radius_R, n_samples,
                              seed, norm_eq_tolerance);
}

// Random orthogonal matrix: Householder QR of a seeded gaussian matrix, with
// the sign convention that R's diagonal is non-negative.
inline Eigen::MatrixXd random_orthogonal(Eigen::Index dim, Rng& rng) {
  const Eigen::MatrixXd gauss = rng.gaussian_matrix(dim, dim);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < dim; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

// Pairs (W, QW) share singular values, so every report in this suite has
// fs = w2 = 0 and a zero bound; any nonzero deviation is a violation. The
// first two reports are canonical: Q = identity (never violated) and
// Q = swap of the first two coordinates with W = I (always violated, maximum
// deviation sqrt(2)*R at an axis point).
inline std::vector<BoundReport> counterexample_suite(int dim, int n_rotations,
                                                     std::uint64_t seed, double radius_R = 1.0,
                                                     int n_samples = 64) {
  if (dim < 2)
    throw ParameterError("counterexample_suite: dim must be >= 2, got " + std::to_string(dim));
  const auto relu = ActivationSpec::of(ActivationSpec::Kind::relu);
  const Eigen::VectorXd zero_bias = Eigen::VectorXd::Zero(dim);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);

  std::vector<BoundReport> reports;
  reports.push_back(verify_pair_matrices("identity", identity, zero_bias, "identity_rotated",
                                         identity, zero_bias, relu, radius_R, n_samples,
                                         mix_seed(seed, 0)));

  Eigen::MatrixXd swap = identity;
  swap(0, 0) = 0.0;
  swap(1, 1) = 0.0;
  swap(0, 1) = 1.0;
  swap(1, 0) = 1.0;
  reports.push_back(verify_pair_matrices("identity", identity, zero_bias, "identity_swapped",
                                         swap, zero_bias, relu, radius_R, n_samples,
                                         mix_seed(seed, 1)));

  for (int k = 0; k < n_rotations; ++k) {
    Rng rng(mix_seed(seed, 100 + static_cast<std::uint64_t>(k)));
    const Eigen::MatrixXd w = rng.gaussian_matrix(dim, dim);
    const Eigen::MatrixXd q = random_orthogonal(dim, rng);
    reports.push_back(verify_pair_matrices(
        "random_" + std::to_string(k), w, zero_bias, "random_" + std::to_string(k) + "_rotated",
        q * w, zero_bias, relu, radius_R, n_samples, mix_seed(seed, 200 + static_cast<std::uint64_t>(k))));
  }
  return reports;
}

inline nlohmann::json bound_report_to_json(const BoundReport& r) {
  return {{"op_a", r.op_a},
          {"op_b", r.op_b},
          {"activation", r.activation.name()},
          {"radius_r", r.radius_R},
          {"fs", r.fs},
          {"w2", r.w2},
          {"theoretical_bound", r.theoretical_bound},
          {"empirical_max_deviation", r.empirical_max_deviation},
          {"n_samples", r.n_samples},
          {"violated", r.violated},
          {"input_padded", r.input_padded},
          {"output_padded", r.output_padded}};
}

}  // namespace specprune
