#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "otm/label_tree.hpp"
#include "otm/rng.hpp"

namespace otm {

/// How a node score g(x, n) maps to p(z_n = 1 | x).
///  - Direct: sigma(g) is the node's marginal relevance (TDM / OTM).
///  - Hierarchical: sigma(g) is conditional on the parent being relevant and
///    the marginal is the product along the path (PLT).
enum class ProbabilityModel { Direct, Hierarchical };

std::string_view to_string(ProbabilityModel model);
ProbabilityModel parse_probability_model(std::string_view name);

// Link functions. All are overflow-safe for any finite input.
double sigmoid(double g);
double log_sigmoid(double g);
double softplus(double g);

/// Per-node linear scorer g(x, n) = theta_n . x + b_n, stored densely by node id.
/// The root row exists but is never trained or queried.
class LinearScorerParams {
 public:
  LinearScorerParams() = default;
  LinearScorerParams(std::size_t num_nodes, std::size_t feature_dim);

  /// Weights and biases drawn i.i.d. from N(0, stddev^2) on the "init" stream
  /// of seed. The root row stays zero.
  static LinearScorerParams initialized(const Tree& tree, std::size_t feature_dim, Seed seed,
                                        double stddev = 0.01);

  std::size_t num_nodes() const { return biases_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }

  std::span<double> weights(NodeId n) { return {weights_.data() + n * feature_dim_, feature_dim_}; }
  std::span<const double> weights(NodeId n) const {
    return {weights_.data() + n * feature_dim_, feature_dim_};
  }
  double& bias(NodeId n) { return biases_[n]; }
  double bias(NodeId n) const { return biases_[n]; }

  std::span<double> all_weights() { return weights_; }
  std::span<const double> all_weights() const { return weights_; }
  std::span<double> all_biases() { return biases_; }
  std::span<const double> all_biases() const { return biases_; }

  friend bool operator==(const LinearScorerParams&, const LinearScorerParams&) = default;

 private:
  std::size_t feature_dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> biases_;
};

/// g(x, n). Throws std::invalid_argument on a dimension mismatch or unknown node.
double score(const LinearScorerParams& params, std::span<const double> x, NodeId n);

/// sigma(g) for a finite score.
double node_prob_direct(double g);

/// prod over Path(n) of sigma(g(x, n')), accumulated in log space. 1 at the root.
double node_prob_hierarchical(const LinearScorerParams& params, const Tree& tree,
                              std::span<const double> x, NodeId n);

/// Dispatches on the model: sigma(g) under Direct, the path product under Hierarchical.
double node_relevance_prob(const LinearScorerParams& params, ProbabilityModel model,
                           const Tree& tree, std::span<const double> x, NodeId n);

/// Counts scorer invocations. Not thread-safe; give each thread its own.
struct QueryCounter {
  std::size_t queries = 0;
};

/// A scorer bound to a tree and a probability model, with optional
/// instrumentation of how many node scores are evaluated.
class NodeScorer {
 public:
  NodeScorer(const Tree& tree, const LinearScorerParams& params, ProbabilityModel model,
             QueryCounter* counter = nullptr);

  const Tree& tree() const { return *tree_; }
  const LinearScorerParams& params() const { return *params_; }
  ProbabilityModel model() const { return model_; }

  double score(std::span<const double> x, NodeId n) const;

  /// sigma(g(x, n)): the marginal under Direct, the conditional given the
  /// parent under Hierarchical.
  double local_prob(std::span<const double> x, NodeId n) const;

  /// p(z_n = 1 | x) under the bound model.
  double relevance_prob(std::span<const double> x, NodeId n) const;

 private:
  const Tree* tree_;
  const LinearScorerParams* params_;
  ProbabilityModel model_;
  QueryCounter* counter_;
};

/// Checkpoint: {feature_dim, model_tag, nodes: [{weights, bias}, ...]} indexed by node id.
nlohmann::json checkpoint_to_json(const LinearScorerParams& params, ProbabilityModel model);

struct Checkpoint {
  LinearScorerParams params;
  ProbabilityModel model = ProbabilityModel::Direct;
};
Checkpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace otm
