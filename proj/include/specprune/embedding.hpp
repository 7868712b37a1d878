#pragma once

// Two ways to place every operator in one comparison space:
//
//   spectral        - reshape -> augment -> svd_spectrum; the state is the
//                     normalized singular-value vector (length varies, pad_pair
//                     aligns pairs).
//   random_feature  - flatten weights row-major, accumulate into bucket_dim
//                     slots by index modulo bucket_dim, L2-normalize, project
//                     with a seeded Gaussian matrix (entries N(0, 1/target_dim),
//                     generator pinned in rng.hpp), L2-normalize again. All
//                     operators land in the same target_dim-sphere.
//
// The bucket step exists because layers flatten to different lengths; modulo
// summation keeps it deterministic and order-stable.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specprune/errors.hpp"
#include "specprune/model_io.hpp"
#include "specprune/rng.hpp"
#include "specprune/spectral.hpp"

namespace specprune {

struct EmbeddingConfig {
  enum class Method { spectral, random_feature };

  Method method = Method::spectral;
  int bucket_dim = 4096;
  int target_dim = 256;
  std::uint64_t seed = 0;

  static Method parse_method(const std::string& s) {
    if (s == "spectral") return Method::spectral;
    if (s == "random_feature") return Method::random_feature;
    throw ConfigError("unknown embedding method '" + s +
                      "' (expected spectral|random_feature)");
  }
  std::string method_name() const {
    return method == Method::spectral ? "spectral" : "random_feature";
  }
  void validate() const {
    if (bucket_dim < 1 || target_dim < 1)
      throw ConfigError("embedding dims must be positive");
    if (target_dim > bucket_dim)
      throw ConfigError("embedding target_dim " + std::to_string(target_dim) +
                        " exceeds bucket_dim " + std::to_string(bucket_dim));
  }
};

inline SpectralSignature embed_spectral(const OperatorDescriptor& op,
                                        const TensorStore& store) {
  auto [weights, bias] = reshape_for_augment(op, store);
  return svd_spectrum(augment(weights, bias), op.name);
}

// Precomputed Gaussian projection; reuse across operators of one run.
class RandomFeatureMap {
 public:
  static RandomFeatureMap create(const EmbeddingConfig& cfg) {
    cfg.validate();
    RandomFeatureMap m;
    m.cfg_ = cfg;
    Rng rng(mix_seed(cfg.seed, kProjectionStream));
    const double stddev = 1.0 / std::sqrt(static_cast<double>(cfg.target_dim));
    m.projection_.resize(cfg.target_dim, cfg.bucket_dim);
    for (int i = 0; i < cfg.target_dim; ++i)
      for (int j = 0; j < cfg.bucket_dim; ++j) m.projection_(i, j) = stddev * rng.gaussian();
    return m;
  }

  Eigen::VectorXd embed(const Tensor& weight, const std::string& op_name) const {
    Eigen::VectorXd buckets = Eigen::VectorXd::Zero(cfg_.bucket_dim);
    for (std::size_t i = 0; i < weight.data.size(); ++i)
      buckets[static_cast<Eigen::Index>(i % static_cast<std::size_t>(cfg_.bucket_dim))] +=
          weight.data[i];
    const double n = buckets.norm();
    if (n == 0.0)
      throw DegenerateEmbeddingError("operator '" + op_name +
                                     "': all-zero weight tensor cannot be embedded");
    Eigen::VectorXd projected = projection_ * (buckets / n);
    const double pn = projected.norm();
    if (pn == 0.0)
      throw DegenerateEmbeddingError("operator '" + op_name +
                                     "': projection collapsed to zero");
    return projected / pn;
  }

  const EmbeddingConfig& config() const { return cfg_; }

 private:
  static constexpr std::uint64_t kProjectionStream = 0x52464d; // "RFM"
  EmbeddingConfig cfg_;
  Eigen::MatrixXd projection_;
};

inline Eigen::VectorXd embed_random_feature(const OperatorDescriptor& op,
                                            const TensorStore& store,
                                            const EmbeddingConfig& cfg) {
  auto it = store.find(op.weight_key);
  if (it == store.end())
    throw LookupError("operator '" + op.name + "': weight_key '" + op.weight_key +
                      "' not found in container");
  return RandomFeatureMap::create(cfg).embed(it->second, op.name);
}

struct NamedState {
  std::string name;
  Eigen::VectorXd state;
};

// Embeds every manifest operator, in manifest order, under cfg.method.
inline std::vector<NamedState> embed_all(const Manifest& manifest, const TensorStore& store,
                                         const EmbeddingConfig& cfg) {
  std::vector<NamedState> out;
  out.reserve(manifest.operators.size());
  if (cfg.method == EmbeddingConfig::Method::spectral) {
    // States of unequal length; pad to the common maximum so they live in one
    // space (padding leaves distances unchanged).
    std::vector<SpectralSignature> sigs;
    Eigen::Index max_len = 0;
    for (const auto& op : manifest.operators) {
      sigs.push_back(embed_spectral(op, store));
      max_len = std::max(max_len, sigs.back().size());
    }
    for (std::size_t i = 0; i < sigs.size(); ++i) {
      detail::require_nondegenerate(sigs[i], "embed_all");
      Eigen::VectorXd state = Eigen::VectorXd::Zero(max_len);
      state.head(sigs[i].size()) = sigs[i].state;
      out.push_back({manifest.operators[i].name, std::move(state)});
    }
  } else {
    const RandomFeatureMap map = RandomFeatureMap::create(cfg);
    for (const auto& op : manifest.operators) {
      auto it = store.find(op.weight_key);
      if (it == store.end())
        throw LookupError("operator '" + op.name + "': weight_key '" + op.weight_key +
                          "' not found in container");
      out.push_back({op.name, map.embed(it->second, op.name)});
    }
  }
  return out;
}

}  // namespace specprune
