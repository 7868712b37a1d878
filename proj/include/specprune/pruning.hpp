#pragma once

// One-shot structured pruning. Whole operators are the pruning unit; plans
// are deterministic functions of (inputs, strategy, sparsity, seed).
//
// Scoring (lower score = pruned earlier, ties by manifest index):
//   magnitude  L1 norm of the weight tensor
//   random     seeded uniform draw per operator
//   qmfrg      L1 * (min distance to any other node) / (pi/2); an operator
//              with a near-duplicate scores near zero and goes first
//
// Under qmfrg a drop is skipped when it would empty the operator's manifest
// stage, or when the operator is its cluster's medoid representative while
// another member still survives (the representative is what a redundant
// cluster keeps).

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "specprune/errors.hpp"
#include "specprune/graph.hpp"
#include "specprune/model_io.hpp"
#include "specprune/rng.hpp"
#include "specprune/spectral.hpp"
#include "specprune/version.hpp"

namespace specprune {

enum class Strategy { qmfrg, magnitude, random };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "qmfrg") return Strategy::qmfrg;
  if (s == "magnitude") return Strategy::magnitude;
  if (s == "random") return Strategy::random;
  throw ConfigError("unknown strategy '" + s + "' (expected qmfrg|magnitude|random)");
}

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::qmfrg: return "qmfrg";
    case Strategy::magnitude: return "magnitude";
    case Strategy::random: return "random";
  }
  return "?";
}

struct PruneAction {
  enum class Kind { drop, truncate };
  std::string op;
  Kind kind = Kind::drop;
  int rank = 0;  // truncate only
};

struct PruningPlan {
  Strategy strategy = Strategy::magnitude;
  std::uint64_t seed = 0;
  double sparsity_target = 0.0;
  std::vector<PruneAction> actions;
  double achieved_sparsity = 0.0;
  double deviation_bound = 0.0;
};

using SignatureMap = std::map<std::string, SpectralSignature>;

namespace detail {

inline double weight_l1(const OperatorDescriptor& op, const TensorStore& store) {
  auto it = store.find(op.weight_key);
  if (it == store.end())
    throw LookupError("operator '" + op.name + "': weight_key '" + op.weight_key +
                      "' not found in container");
  double acc = 0.0;
  for (double v : it->second.data) acc += std::abs(v);
  return acc;
}

inline std::int64_t op_param_count(const OperatorDescriptor& op, const TensorStore& store) {
  std::int64_t n = store.at(op.weight_key).numel();
  if (op.bias_key) {
    auto it = store.find(*op.bias_key);
    if (it != store.end()) n += it->second.numel();
  }
  return n;
}

inline void require_graph_matches(const RedundancyGraph& g, const Manifest& manifest) {
  if (g.node_names.size() != manifest.operators.size())
    throw IntegrityError("graph has " + std::to_string(g.node_names.size()) +
                         " nodes but manifest has " +
                         std::to_string(manifest.operators.size()) + " operators");
  for (std::size_t i = 0; i < g.node_names.size(); ++i)
    if (g.node_names[i] != manifest.operators[i].name)
      throw IntegrityError("graph node " + std::to_string(i) + " is '" + g.node_names[i] +
                           "' but manifest operator is '" + manifest.operators[i].name + "'");
}

}  // namespace detail

// Scores in manifest order.
inline std::vector<std::pair<std::string, double>> score_operators(
    const RedundancyGraph& g, const Manifest& manifest, const TensorStore& store,
    Strategy strategy, std::uint64_t seed) {
  detail::require_graph_matches(g, manifest);
  const Eigen::Index n = g.size();
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(manifest.operators.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& op = manifest.operators[static_cast<std::size_t>(i)];
    double score = 0.0;
    switch (strategy) {
      case Strategy::magnitude:
        score = detail::weight_l1(op, store);
        break;
      case Strategy::random:
        score = Rng(mix_seed(seed, static_cast<std::uint64_t>(i))).uniform01();
        break;
      case Strategy::qmfrg: {
        double min_d = kHalfPi;  // a lone operator has no redundancy partner
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) min_d = std::min(min_d, g.distances(i, j));
        score = detail::weight_l1(op, store) * (min_d / kHalfPi);
        break;
      }
    }
    scores.emplace_back(op.name, score);
  }
  return scores;
}

inline PruningPlan plan(const RedundancyGraph& g, const ClusterAssignment& clusters,
                        const Manifest& manifest, const TensorStore& store, Strategy strategy,
                        double sparsity_target, std::uint64_t seed,
                        const SignatureMap& signatures, double radius_R = 1.0,
                        double norm_eq_tolerance = 1e-9) {
  if (!(sparsity_target >= 0.0) || sparsity_target >= 1.0)
    throw ParameterError("plan: sparsity_target must lie in [0, 1), got " +
                         std::to_string(sparsity_target));
  detail::require_graph_matches(g, manifest);
  const int n = static_cast<int>(manifest.operators.size());

  const auto scores = score_operators(g, manifest, store, strategy, seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)].second != scores[static_cast<std::size_t>(b)].second)
      return scores[static_cast<std::size_t>(a)].second < scores[static_cast<std::size_t>(b)].second;
    return a < b;
  });

  std::vector<std::int64_t> params(static_cast<std::size_t>(n));
  std::int64_t total_params = 0;
  for (int i = 0; i < n; ++i) {
    params[static_cast<std::size_t>(i)] =
        detail::op_param_count(manifest.operators[static_cast<std::size_t>(i)], store);
    total_params += params[static_cast<std::size_t>(i)];
  }

  // Representatives (full-graph medoids) and per-stage survivor counts for
  // the qmfrg protection rules.
  std::vector<bool> is_representative(static_cast<std::size_t>(n), false);
  for (int c = 0; c < clusters.cluster_count(); ++c)
    is_representative[static_cast<std::size_t>(cluster_representative_index(g, clusters, c))] =
        true;
  std::map<std::string, int> stage_survivors;
  for (const auto& op : manifest.operators) ++stage_survivors[op.stage];
  std::vector<int> cluster_survivors(static_cast<std::size_t>(clusters.cluster_count()), 0);
  for (int l : clusters.labels) ++cluster_survivors[static_cast<std::size_t>(l)];

  PruningPlan p;
  p.strategy = strategy;
  p.seed = seed;
  p.sparsity_target = sparsity_target;

  std::int64_t removed = 0;
  for (int idx : order) {
    if (static_cast<double>(removed) >= sparsity_target * static_cast<double>(total_params))
      break;
    const auto& op = manifest.operators[static_cast<std::size_t>(idx)];
    if (strategy == Strategy::qmfrg) {
      if (stage_survivors[op.stage] <= 1) continue;  // never empty a stage
      const int c = clusters.labels[static_cast<std::size_t>(idx)];
      if (is_representative[static_cast<std::size_t>(idx)] &&
          cluster_survivors[static_cast<std::size_t>(c)] > 1)
        continue;  // keep the representative while siblings survive
    }
    p.actions.push_back({op.name, PruneAction::Kind::drop, 0});
    removed += params[static_cast<std::size_t>(idx)];
    --stage_survivors[op.stage];
    --cluster_survivors[static_cast<std::size_t>(clusters.labels[static_cast<std::size_t>(idx)])];
  }

  p.achieved_sparsity =
      total_params > 0 ? static_cast<double>(removed) / static_cast<double>(total_params) : 0.0;

  // Bound on the functional cost of the drops: each dropped operator priced
  // against its cluster's representative.
  double bound = 0.0;
  for (const auto& a : p.actions) {
    const Eigen::Index idx = g.index_of(a.op);
    const int c = clusters.labels[static_cast<std::size_t>(idx)];
    const std::string rep = cluster_representative(g, clusters, c);
    if (rep == a.op) continue;  // dropped a lone representative: no partner to price against
    auto sit = signatures.find(a.op);
    auto rit = signatures.find(rep);
    if (sit == signatures.end() || rit == signatures.end())
      throw LookupError("plan: no spectral signature for '" +
                        (sit == signatures.end() ? a.op : rep) + "'");
    const auto act = ActivationSpec::of(manifest.find(a.op).activation);
    bound += equivalence_bound(sit->second, rit->second, act, radius_R, norm_eq_tolerance);
  }
  p.deviation_bound = bound;
  return p;
}

struct TruncateDecision {
  PruneAction action;
  double predicted_mass_loss = 0.0;  // 1 - cumulative spectral probability at rank
};

inline TruncateDecision compress_cluster(const RedundancyGraph& g,
                                         const ClusterAssignment& clusters, int cluster_id,
                                         const SignatureMap& signatures, double delta) {
  if (delta < 0.0)
    throw ParameterError("compress_cluster: delta must be non-negative");
  const std::string rep = cluster_representative(g, clusters, cluster_id);
  auto it = signatures.find(rep);
  if (it == signatures.end())
    throw LookupError("compress_cluster: no spectral signature for '" + rep + "'");
  const SpectralSignature& sig = it->second;
  const int q = rank_select(sig, delta);
  const double total = sig.singular_values.squaredNorm();
  double kept = 0.0;
  for (int j = 0; j < q; ++j) kept += sig.singular_values[j] * sig.singular_values[j];
  return {{rep, PruneAction::Kind::truncate, q}, 1.0 - kept / total};
}

// Applies a plan all-or-nothing: the inputs are untouched and the outputs are
// only produced once every action has validated.
inline std::pair<TensorStore, Manifest> apply(const PruningPlan& plan_, const TensorStore& store,
                                              const Manifest& manifest) {
  std::set<std::string> seen;
  for (const auto& a : plan_.actions) {
    if (!seen.insert(a.op).second)
      throw IntegrityError("plan references operator '" + a.op + "' more than once");
    const OperatorDescriptor& op = manifest.find(a.op);  // throws LookupError if missing
    if (store.find(op.weight_key) == store.end())
      throw IntegrityError("plan action on '" + a.op + "' but tensor '" + op.weight_key +
                           "' is missing from the store");
    if (a.kind == PruneAction::Kind::truncate) {
      auto [w, b] = reshape_for_augment(op, store);
      const int full = static_cast<int>(std::min(w.rows(), w.cols()) + 1);
      if (a.rank < 1 || a.rank > full)
        throw ParameterError("truncate rank " + std::to_string(a.rank) + " for '" + a.op +
                             "' out of range [1, " + std::to_string(full) + "]");
    }
  }

  TensorStore out_store = store;
  Manifest out_manifest;
  out_manifest.model_name = manifest.model_name;

  std::map<std::string, const PruneAction*> by_op;
  for (const auto& a : plan_.actions) by_op[a.op] = &a;

  for (const auto& op : manifest.operators) {
    auto it = by_op.find(op.name);
    if (it == by_op.end()) {
      out_manifest.operators.push_back(op);
      continue;
    }
    const PruneAction& a = *it->second;
    if (a.kind == PruneAction::Kind::drop) {
      out_store.erase(op.weight_key);
      if (op.bias_key) out_store.erase(*op.bias_key);
      continue;
    }
    // truncate: rebuild (W, b) from the rank-limited augmented matrix
    auto [w, b] = reshape_for_augment(op, store);
    const AugmentedMatrix reduced = low_rank_truncate(augment(w, b), a.rank);
    auto [w2, b2] = deaugment(reduced);

    Tensor& wt = out_store[op.weight_key];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        wt.data.data(), w2.rows(), w2.cols()) = w2;

    OperatorDescriptor new_op = op;
    // The reconstruction mixes the homogeneous column into the bias, so the
    // operator needs a bias slot even if it had none.
    std::string bias_key = op.bias_key ? *op.bias_key : op.weight_key + ".bias";
    Tensor bt;
    bt.dtype = out_store[op.weight_key].dtype;
    bt.shape = {b2.size()};
    bt.data.assign(b2.data(), b2.data() + b2.size());
    // Keep f32 payloads exactly representable.
    if (bt.dtype == Dtype::f32) {
      for (auto& v : bt.data) v = static_cast<double>(static_cast<float>(v));
      auto& wd = out_store[op.weight_key].data;
      for (auto& v : wd) v = static_cast<double>(static_cast<float>(v));
    }
    out_store[bias_key] = std::move(bt);
    new_op.bias_key = bias_key;
    out_manifest.operators.push_back(std::move(new_op));
  }
  return {std::move(out_store), std::move(out_manifest)};
}

// ---------------------------------------------------------------------------
// Functional deviation: sampled output difference between two stores

struct ProbeSpec {
  double radius_R = 1.0;
  int n_samples = 64;
  std::uint64_t seed = 0;
};

struct DeviationStats {
  double mean = 0.0;
  double max = 0.0;
  std::int64_t samples = 0;
  int operators = 0;
};

// Compares every operator present in both manifests (by name) on sampled
// inputs from the R-ball. Identical stores give exactly zero.
inline DeviationStats functional_deviation(const TensorStore& original_store,
                                           const Manifest& original_manifest,
                                           const TensorStore& pruned_store,
                                           const Manifest& pruned_manifest,
                                           const ProbeSpec& probe) {
  if (probe.radius_R <= 0.0) throw ParameterError("functional_deviation: radius_R must be positive");
  if (probe.n_samples < 1) throw ParameterError("functional_deviation: n_samples must be positive");

  std::map<std::string, const OperatorDescriptor*> pruned_ops;
  for (const auto& op : pruned_manifest.operators) pruned_ops[op.name] = &op;

  DeviationStats stats;
  double sum = 0.0;
  for (std::size_t i = 0; i < original_manifest.operators.size(); ++i) {
    const auto& op = original_manifest.operators[i];
    auto it = pruned_ops.find(op.name);
    if (it == pruned_ops.end()) continue;
    auto [w1, b1] = reshape_for_augment(op, original_store);
    auto [w2, b2] = reshape_for_augment(*it->second, pruned_store);
    if (w1.cols() != w2.cols() || w1.rows() != w2.rows())
      throw ShapeError("functional_deviation: operator '" + op.name + "' is " +
                       detail::shape_str(w1.rows(), w1.cols()) + " in the original store but " +
                       detail::shape_str(w2.rows(), w2.cols()) + " in the pruned store");
    const auto act = ActivationSpec::of(op.activation);
    Rng rng(mix_seed(probe.seed, static_cast<std::uint64_t>(i)));
    for (int s = 0; s < probe.n_samples; ++s) {
      const Eigen::VectorXd x = rng.ball_point(w1.cols(), probe.radius_R);
      const double dev = (act.apply(w1 * x + b1) - act.apply(w2 * x + b2)).norm();
      sum += dev;
      stats.max = std::max(stats.max, dev);
      ++stats.samples;
    }
    ++stats.operators;
  }
  stats.mean = stats.samples > 0 ? sum / static_cast<double>(stats.samples) : 0.0;
  return stats;
}

// ---------------------------------------------------------------------------
// Plan document (field names are part of the format; byte-stable output)

inline nlohmann::json plan_to_json(const PruningPlan& p) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : p.actions) {
    if (a.kind == PruneAction::Kind::drop)
      actions.push_back({{"op", a.op}, {"action", "drop"}});
    else
      actions.push_back({{"op", a.op}, {"action", "truncate"}, {"rank", a.rank}});
  }
  return {{"strategy", strategy_name(p.strategy)},
          {"seed", p.seed},
          {"sparsity_target", p.sparsity_target},
          {"achieved_sparsity", p.achieved_sparsity},
          {"deviation_bound", p.deviation_bound},
          {"actions", std::move(actions)},
          {"version", kVersion}};
}

inline PruningPlan plan_from_json(const nlohmann::json& j) {
  PruningPlan p;
  p.strategy = parse_strategy(j.at("strategy").get<std::string>());
  p.seed = j.at("seed").get<std::uint64_t>();
  p.sparsity_target = j.at("sparsity_target").get<double>();
  p.achieved_sparsity = j.at("achieved_sparsity").get<double>();
  p.deviation_bound = j.at("deviation_bound").get<double>();
  for (const auto& ja : j.at("actions")) {
    PruneAction a;
    a.op = ja.at("op").get<std::string>();
    const std::string kind = ja.at("action").get<std::string>();
    if (kind == "drop") {
      a.kind = PruneAction::Kind::drop;
    } else if (kind == "truncate") {
      a.kind = PruneAction::Kind::truncate;
      a.rank = ja.at("rank").get<int>();
    } else {
      throw ParseError("plan document: unknown action '" + kind + "'");
    }
    p.actions.push_back(std::move(a));
  }
  return p;
}

}  // namespace specprune
