#include "otm/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace otm {

std::string_view to_string(ProbabilityModel model) {
  return model == ProbabilityModel::Direct ? "Direct" : "Hierarchical";
}

ProbabilityModel parse_probability_model(std::string_view name) {
  if (name == "Direct") return ProbabilityModel::Direct;
  if (name == "Hierarchical") return ProbabilityModel::Hierarchical;
  throw std::invalid_argument("unknown probability model '" + std::string(name) + "'");
}

double sigmoid(double g) {
  if (g >= 0.0) return 1.0 / (1.0 + std::exp(-g));
  const double e = std::exp(g);
  return e / (1.0 + e);
}

double softplus(double g) {
  // log(1 + e^g) = max(g, 0) + log1p(e^{-|g|})
  return std::max(g, 0.0) + std::log1p(std::exp(-std::abs(g)));
}

double log_sigmoid(double g) { return -softplus(-g); }

LinearScorerParams::LinearScorerParams(std::size_t num_nodes, std::size_t feature_dim)
    : feature_dim_(feature_dim), weights_(num_nodes * feature_dim, 0.0), biases_(num_nodes, 0.0) {
  if (feature_dim == 0) throw std::invalid_argument("feature dimension must be positive");
}

LinearScorerParams LinearScorerParams::initialized(const Tree& tree, std::size_t feature_dim,
                                                   Seed seed, double stddev) {
  LinearScorerParams params(tree.num_nodes(), feature_dim);
  Rng rng(derive_seed(seed, "init"));
  for (NodeId n = 1; n < tree.num_nodes(); ++n) {
    for (double& w : params.weights(n)) w = stddev * rng.normal();
    params.bias(n) = stddev * rng.normal();
  }
  return params;
}

double score(const LinearScorerParams& params, std::span<const double> x, NodeId n) {
  if (x.size() != params.feature_dim()) {
    throw std::invalid_argument("feature vector has dimension " + std::to_string(x.size()) +
                                ", scorer expects " + std::to_string(params.feature_dim()));
  }
  if (n >= params.num_nodes()) {
    throw std::invalid_argument("scorer has no entry for node " + std::to_string(n));
  }
  const auto w = params.weights(n);
  double g = params.bias(n);
  for (std::size_t i = 0; i < w.size(); ++i) g += w[i] * x[i];
  return g;
}

double node_prob_direct(double g) {
  if (!std::isfinite(g)) throw std::invalid_argument("non-finite score");
  return sigmoid(g);
}

double node_prob_hierarchical(const LinearScorerParams& params, const Tree& tree,
                              std::span<const double> x, NodeId n) {
  double log_p = 0.0;
  for (const NodeId step : tree.path_to_root(n)) {
    const double g = score(params, x, step);
    if (!std::isfinite(g)) throw std::invalid_argument("non-finite score");
    log_p += log_sigmoid(g);
  }
  return std::exp(log_p);
}

double node_relevance_prob(const LinearScorerParams& params, ProbabilityModel model,
                           const Tree& tree, std::span<const double> x, NodeId n) {
  if (model == ProbabilityModel::Hierarchical) return node_prob_hierarchical(params, tree, x, n);
  if (n == Tree::root()) return 1.0;
  return node_prob_direct(score(params, x, n));
}

NodeScorer::NodeScorer(const Tree& tree, const LinearScorerParams& params,
                       ProbabilityModel model, QueryCounter* counter)
    : tree_(&tree), params_(&params), model_(model), counter_(counter) {
  if (params.num_nodes() != tree.num_nodes()) {
    throw std::invalid_argument("scorer has " + std::to_string(params.num_nodes()) +
                                " nodes but the tree has " + std::to_string(tree.num_nodes()));
  }
}

double NodeScorer::score(std::span<const double> x, NodeId n) const {
  if (counter_ != nullptr) ++counter_->queries;
  return otm::score(*params_, x, n);
}

double NodeScorer::local_prob(std::span<const double> x, NodeId n) const {
  return node_prob_direct(score(x, n));
}

double NodeScorer::relevance_prob(std::span<const double> x, NodeId n) const {
  if (n == Tree::root()) return 1.0;
  if (model_ == ProbabilityModel::Direct) return local_prob(x, n);
  double log_p = 0.0;
  for (const NodeId step : tree_->path_to_root(n)) log_p += log_sigmoid(score(x, step));
  return std::exp(log_p);
}

nlohmann::json checkpoint_to_json(const LinearScorerParams& params, ProbabilityModel model) {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId n = 0; n < params.num_nodes(); ++n) {
    const auto w = params.weights(n);
    nodes.push_back({{"weights", std::vector<double>(w.begin(), w.end())}, {"bias", params.bias(n)}});
  }
  return {{"feature_dim", params.feature_dim()},
          {"model_tag", std::string(to_string(model))},
          {"nodes", std::move(nodes)}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    Checkpoint ckpt;
    ckpt.model = parse_probability_model(j.at("model_tag").get<std::string>());
    const auto d = j.at("feature_dim").get<std::size_t>();
    const auto& nodes = j.at("nodes");
    ckpt.params = LinearScorerParams(nodes.size(), d);
    for (NodeId n = 0; n < nodes.size(); ++n) {
      const auto w = nodes[n].at("weights").get<std::vector<double>>();
      if (w.size() != d) throw std::invalid_argument("checkpoint node weight length mismatch");
      std::copy(w.begin(), w.end(), ckpt.params.weights(n).begin());
      ckpt.params.bias(n) = nodes[n].at("bias").get<double>();
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed checkpoint JSON: ") + e.what());
  }
}

}  // namespace otm
