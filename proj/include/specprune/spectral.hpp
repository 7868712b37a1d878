#pragma once

// Spectral representation of affine operators.
//
// An operator y = act(Wx + b) is folded into one homogeneous matrix
//
//     M = [ W  b ]
//         [ 0  1 ]
//
// of shape (d_out+1) x (d_in+1). Its singular values, unit-normalized, form
// the operator's state vector; distances between operators are angles between
// states (fs_distance) or optimal-transport distances between the induced
// discrete measures (w2_distance). equivalence_bound turns a W2 distance into
// a bound on worst-case output deviation over a ball; rank_select and
// low_rank_truncate implement spectral-mass-budgeted compression.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "specprune/errors.hpp"

namespace specprune {

inline constexpr double kHalfPi = 1.5707963267948966;

// Distances whose states differ by no more than this (L2) are reported as 0.
inline constexpr double kStateEqualTol = 1e-12;

struct AugmentedMatrix {
  // (d_out+1) x (d_in+1); bottom row (0,...,0,1) when built via augment().
  Eigen::MatrixXd entries;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

struct SpectralSignature {
  Eigen::VectorXd singular_values;  // descending, non-negative
  double frobenius_norm = 0.0;      // L2 norm of singular_values
  Eigen::VectorXd state;            // singular_values / frobenius_norm
  std::string source_name;

  Eigen::Index size() const { return singular_values.size(); }
  bool degenerate() const { return frobenius_norm == 0.0; }
};

struct MajorizationProfile {
  Eigen::VectorXd grid;    // t_k = k/m, k = 0..m
  Eigen::VectorXd values;  // F(t_k) = (1/frob) * sum_{j<=k} sigma_j
};

struct ActivationSpec {
  enum class Kind { relu, tanh, sigmoid, identity };

  Kind kind = Kind::relu;
  double lipschitz_L = 1.0;
  double origin_bound_M = 0.0;  // |act(0)|

  static ActivationSpec of(Kind k) {
    switch (k) {
      case Kind::relu:
        return {Kind::relu, 1.0, 0.0};
      case Kind::tanh:
        return {Kind::tanh, 1.0, 0.0};
      case Kind::sigmoid:
        return {Kind::sigmoid, 0.25, 0.5};
      case Kind::identity:
        return {Kind::identity, 1.0, 0.0};
    }
    throw ParameterError("unknown activation kind");
  }

  static ActivationSpec parse(const std::string& name) {
    if (name == "relu") return of(Kind::relu);
    if (name == "tanh") return of(Kind::tanh);
    if (name == "sigmoid") return of(Kind::sigmoid);
    if (name == "identity") return of(Kind::identity);
    throw ConfigError("unknown activation '" + name +
                      "' (expected relu|tanh|sigmoid|identity)");
  }

  std::string name() const {
    switch (kind) {
      case Kind::relu:
        return "relu";
      case Kind::tanh:
        return "tanh";
      case Kind::sigmoid:
        return "sigmoid";
      case Kind::identity:
        return "identity";
    }
    return "?";
  }

  double apply_scalar(double z) const {
    switch (kind) {
      case Kind::relu:
        return z > 0.0 ? z : 0.0;
      case Kind::tanh:
        return std::tanh(z);
      case Kind::sigmoid:
        return 1.0 / (1.0 + std::exp(-z));
      case Kind::identity:
        return z;
    }
    return z;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = apply_scalar(z[i]);
    return out;
  }
};

namespace detail {

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

inline void require_nondegenerate(const SpectralSignature& s, const char* op) {
  if (s.degenerate())
    throw DegenerateSignatureError(std::string(op) +
                                   ": zero spectrum has no state vector" +
                                   (s.source_name.empty() ? "" : " (operator '" + s.source_name + "')"));
}

}  // namespace detail

// Builds a signature from an already-descending non-negative value vector.
inline SpectralSignature make_signature(Eigen::VectorXd values,
                                        std::string source_name = "") {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0)
      throw NumericError("make_signature: singular values must be finite and non-negative");
    if (i > 0 && values[i] > values[i - 1])
      throw ParameterError("make_signature: singular values must be descending");
  }
  SpectralSignature sig;
  sig.frobenius_norm = values.norm();
  sig.state = sig.frobenius_norm > 0.0
                  ? Eigen::VectorXd(values / sig.frobenius_norm)
                  : Eigen::VectorXd::Zero(values.size());
  sig.singular_values = std::move(values);
  sig.source_name = std::move(source_name);
  return sig;
}

inline AugmentedMatrix augment(const Eigen::MatrixXd& weights,
                               const std::optional<Eigen::VectorXd>& bias = std::nullopt) {
  const Eigen::Index d_out = weights.rows();
  const Eigen::Index d_in = weights.cols();
  if (bias && bias->size() != d_out)
    throw ShapeError("augment: weights " + detail::shape_str(d_out, d_in) +
                     " incompatible with bias " + detail::shape_str(bias->size(), 1));
  AugmentedMatrix m;
  m.entries = Eigen::MatrixXd::Zero(d_out + 1, d_in + 1);
  m.entries.topLeftCorner(d_out, d_in) = weights;
  if (bias) m.entries.topRightCorner(d_out, 1) = *bias;
  m.entries(d_out, d_in) = 1.0;
  return m;
}

// Splits an augment()-shaped matrix back into (weights, bias).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> deaugment(const AugmentedMatrix& m) {
  if (m.rows() < 2 || m.cols() < 2)
    throw ShapeError("deaugment: matrix " + detail::shape_str(m.rows(), m.cols()) +
                     " too small to carry a weight block");
  return {m.entries.topLeftCorner(m.rows() - 1, m.cols() - 1),
          m.entries.topRightCorner(m.rows() - 1, 1).col(0)};
}

inline SpectralSignature svd_spectrum(const AugmentedMatrix& m,
                                      std::string source_name = "") {
  if (!m.entries.allFinite())
    throw NumericError("svd_spectrum: matrix has non-finite entries" +
                       (source_name.empty() ? "" : " (operator '" + source_name + "')"));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m.entries);
  Eigen::VectorXd values = svd.singularValues();
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] < 0.0) values[i] = 0.0;  // clamp rounding below zero
  return make_signature(std::move(values), std::move(source_name));
}

// Zero-extends the shorter spectrum so both have length max(len(a), len(b)).
// Zero singular values are genuine (an embedded operator); states, norms and
// all distances are unchanged by padding.
inline std::pair<SpectralSignature, SpectralSignature> pad_pair(
    const SpectralSignature& a, const SpectralSignature& b) {
  const Eigen::Index m = std::max(a.size(), b.size());
  auto extend = [m](const SpectralSignature& s) {
    if (s.size() == m) return s;
    SpectralSignature out;
    out.singular_values = Eigen::VectorXd::Zero(m);
    out.singular_values.head(s.size()) = s.singular_values;
    out.frobenius_norm = s.frobenius_norm;
    out.state = Eigen::VectorXd::Zero(m);
    out.state.head(s.size()) = s.state;
    out.source_name = s.source_name;
    return out;
  };
  return {extend(a), extend(b)};
}

// Angle between two unit state vectors: arccos|<a,b>|, in [0, pi/2].
// States within kStateEqualTol of each other give exactly 0.
inline double fs_distance_states(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ShapeError("fs_distance: state lengths differ (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  if ((a - b).norm() <= kStateEqualTol) return 0.0;
  const double dot = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  const double d = std::acos(dot);
  return d < kStateEqualTol ? 0.0 : d;
}

inline double fs_distance(const SpectralSignature& a, const SpectralSignature& b) {
  detail::require_nondegenerate(a, "fs_distance");
  detail::require_nondegenerate(b, "fs_distance");
  auto [pa, pb] = pad_pair(a, b);
  return fs_distance_states(pa.state, pb.state);
}

inline MajorizationProfile majorization_profile(const SpectralSignature& s) {
  detail::require_nondegenerate(s, "majorization_profile");
  const Eigen::Index m = s.size();
  MajorizationProfile p;
  p.grid.resize(m + 1);
  p.values.resize(m + 1);
  p.grid[0] = 0.0;
  p.values[0] = 0.0;
  double acc = 0.0;
  for (Eigen::Index k = 1; k <= m; ++k) {
    acc += s.singular_values[k - 1];
    p.grid[k] = static_cast<double>(k) / static_cast<double>(m);
    p.values[k] = acc / s.frobenius_norm;
  }
  return p;
}

// W2 between the discrete measures putting mass 1/m on each state entry.
// Both spectra are descending, so index-matched pairing is the optimal 1-D
// coupling and W2 = ||state_a - state_b||_2 / sqrt(m).
inline double w2_distance(const SpectralSignature& a, const SpectralSignature& b) {
  detail::require_nondegenerate(a, "w2_distance");
  detail::require_nondegenerate(b, "w2_distance");
  auto [pa, pb] = pad_pair(a, b);
  const double m = static_cast<double>(pa.size());
  return (pa.state - pb.state).norm() / std::sqrt(m);
}

// Worst-case output deviation bound over the radius-R ball:
//   L * (R+1) * (frob_a + frob_b) * W2(a,b)  +  2M * [norms differ]
// The norm-equality indicator uses a relative tolerance; exact float equality
// would be meaningless.
inline double equivalence_bound(const SpectralSignature& a, const SpectralSignature& b,
                                const ActivationSpec& act, double radius_R,
                                double norm_eq_tolerance = 1e-9) {
  detail::require_nondegenerate(a, "equivalence_bound");
  detail::require_nondegenerate(b, "equivalence_bound");
  if (!(radius_R > 0.0))
    throw ParameterError("equivalence_bound: radius_R must be positive, got " +
                         std::to_string(radius_R));
  if (!(norm_eq_tolerance > 0.0))
    throw ParameterError("equivalence_bound: norm_eq_tolerance must be positive");
  const double w2 = w2_distance(a, b);
  const double max_norm = std::max(a.frobenius_norm, b.frobenius_norm);
  const bool norms_differ =
      std::abs(a.frobenius_norm - b.frobenius_norm) > norm_eq_tolerance * max_norm;
  return act.lipschitz_L * (radius_R + 1.0) * (a.frobenius_norm + b.frobenius_norm) * w2 +
         (norms_differ ? 2.0 * act.origin_bound_M : 0.0);
}

// Smallest rank q whose spectral probability mass sum_{j<=q} sigma_j^2 / sum
// reaches exp(-delta); equivalently the relative entropy of the truncated
// renormalized spectrum stays <= delta. Capped at the nonzero count.
inline int rank_select(const SpectralSignature& s, double delta) {
  detail::require_nondegenerate(s, "rank_select");
  if (delta < 0.0)
    throw ParameterError("rank_select: delta must be non-negative, got " +
                         std::to_string(delta));
  int nonzero = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (s.singular_values[j] > 0.0) ++nonzero;
  const double total = s.singular_values.squaredNorm();
  const double threshold = std::exp(-delta) * total;
  double partial = 0.0;
  for (int q = 1; q <= nonzero; ++q) {
    const double v = s.singular_values[q - 1];
    partial += v * v;
    if (partial >= threshold) return q;
  }
  return nonzero;  // rounding kept the sum a hair under the full-mass threshold
}

// Rank-q SVD reconstruction of the augmented matrix. The homogeneous bottom
// row is structural, not data, so it is re-imposed exactly afterwards.
inline AugmentedMatrix low_rank_truncate(const AugmentedMatrix& m, int q) {
  const Eigen::Index full = std::min(m.rows(), m.cols());
  if (q < 1 || q > full)
    throw ParameterError("low_rank_truncate: rank " + std::to_string(q) +
                         " out of range [1, " + std::to_string(full) + "]");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m.entries, Eigen::ComputeThinU | Eigen::ComputeThinV);
  AugmentedMatrix out;
  out.entries = svd.matrixU().leftCols(q) *
                svd.singularValues().head(q).asDiagonal() *
                svd.matrixV().leftCols(q).transpose();
  out.entries.row(m.rows() - 1).setZero();
  out.entries(m.rows() - 1, m.cols() - 1) = 1.0;
  return out;
}

using CostMap = std::map<std::string, double>;

// Hardware-weighted combination of per-group distances:
//   sqrt( sum_m cost[tag_m] * d_m^2 )
inline double weighted_fs_distance_values(
    const std::vector<std::pair<double, std::string>>& distances_with_tags,
    const CostMap& costs) {
  double acc = 0.0;
  for (const auto& [d, tag] : distances_with_tags) {
    auto it = costs.find(tag);
    if (it == costs.end())
      throw ConfigError("weighted_fs_distance: no cost entry for op_type '" + tag + "'");
    acc += it->second * d * d;
  }
  return std::sqrt(acc);
}

struct SignatureGroup {
  SpectralSignature a;
  SpectralSignature b;
  std::string op_type;
};

inline double weighted_fs_distance(const std::vector<SignatureGroup>& groups,
                                   const CostMap& costs) {
  std::vector<std::pair<double, std::string>> ds;
  ds.reserve(groups.size());
  for (const auto& g : groups) ds.emplace_back(fs_distance(g.a, g.b), g.op_type);
  return weighted_fs_distance_values(ds, costs);
}

struct StateGroup {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  std::string op_type;
};

inline double weighted_fs_distance(const std::vector<StateGroup>& groups,
                                   const CostMap& costs) {
  std::vector<std::pair<double, std::string>> ds;
  ds.reserve(groups.size());
  for (const auto& g : groups) ds.emplace_back(fs_distance_states(g.a, g.b), g.op_type);
  return weighted_fs_distance_values(ds, costs);
}

}  // namespace specprune
