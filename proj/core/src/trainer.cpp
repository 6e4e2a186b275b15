#include "otm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "otm/beam_search.hpp"
#include "otm/error.hpp"

namespace otm {

std::string_view to_string(TrainMethod method) {
  switch (method) {
    case TrainMethod::PLT: return "PLT";
    case TrainMethod::TDM: return "TDM";
    case TrainMethod::OTM: return "OTM";
    case TrainMethod::OTM_minus_BS: return "OTM(-BS)";
    case TrainMethod::OTM_minus_OptEst: return "OTM(-OptEst)";
  }
  return "?";
}

TrainMethod parse_train_method(std::string_view name) {
  if (name == "PLT") return TrainMethod::PLT;
  if (name == "TDM") return TrainMethod::TDM;
  if (name == "OTM") return TrainMethod::OTM;
  if (name == "OTM(-BS)" || name == "OTM_minus_BS") return TrainMethod::OTM_minus_BS;
  if (name == "OTM(-OptEst)" || name == "OTM_minus_OptEst") return TrainMethod::OTM_minus_OptEst;
  throw std::invalid_argument("unknown training method '" + std::string(name) + "'");
}

ProbabilityModel required_model(TrainMethod method) {
  return method == TrainMethod::PLT ? ProbabilityModel::Hierarchical : ProbabilityModel::Direct;
}

void TrainConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam_size must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must be in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must be in (0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(init_stddev >= 0.0) || !std::isfinite(init_stddev)) {
    throw ConfigError("init_stddev must be non-negative");
  }
}

double bce_loss(bool z, double g) {
  if (!std::isfinite(g)) throw std::invalid_argument("non-finite score");
  return softplus(z ? -g : g);
}

double bce_grad(bool z, double g) {
  if (!std::isfinite(g)) throw std::invalid_argument("non-finite score");
  return sigmoid(g) - (z ? 1.0 : 0.0);
}

LevelSets subsample_plt(const Tree& tree, const NodeLabelAssignment& z) {
  if (z.kind() != LabelKind::GroundTruth) {
    throw std::invalid_argument("PLT subsampling needs ground-truth labels");
  }
  LevelSets sets(tree.height());
  for (const NodeId n : z.positives()) {
    const std::size_t h = tree.level(n);
    if (h == tree.height()) continue;
    for (const NodeId c : tree.children(n)) sets[h].push_back(c);
  }
  return sets;
}

LevelSets subsample_tdm(const Tree& tree, const NodeLabelAssignment& z,
                        std::size_t negatives_per_level, Rng& rng) {
  if (z.kind() != LabelKind::GroundTruth) {
    throw std::invalid_argument("TDM subsampling needs ground-truth labels");
  }
  LevelSets sets(tree.height());
  const auto& positives = z.positives();
  auto pos_it = positives.begin();
  for (std::size_t h = 1; h <= tree.height(); ++h) {
    const NodeRange level = tree.level_nodes(h);
    const NodeId first = *level.begin();
    const std::size_t width = level.size();
    auto& set = sets[h - 1];
    while (pos_it != positives.end() && *pos_it < first) ++pos_it;
    const auto level_pos_begin = pos_it;
    while (pos_it != positives.end() && *pos_it < first + width) set.push_back(*pos_it++);
    auto is_positive = [&](NodeId n) { return std::binary_search(level_pos_begin, pos_it, n); };

    const std::size_t available = width - set.size();
    const std::size_t count = std::min(negatives_per_level, available);
    if (count == 0) continue;
    std::vector<NodeId> negatives;
    if (2 * count >= available) {
      // Dense case: partial shuffle of the full negative pool.
      for (const NodeId n : level) {
        if (!is_positive(n)) negatives.push_back(n);
      }
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.below(negatives.size() - i);
        std::swap(negatives[i], negatives[j]);
      }
      negatives.resize(count);
    } else {
      while (negatives.size() < count) {
        const NodeId n = first + static_cast<NodeId>(rng.below(width));
        if (is_positive(n) || std::find(negatives.begin(), negatives.end(), n) != negatives.end()) {
          continue;
        }
        negatives.push_back(n);
      }
    }
    set.insert(set.end(), negatives.begin(), negatives.end());
    std::sort(set.begin(), set.end());
  }
  return sets;
}

LevelSets subsample_beam(const NodeScorer& snapshot, std::span<const double> x, std::size_t k) {
  return beam_search_trace(snapshot, x, k).candidates;
}

namespace {

// Memoizes snapshot scores for one instance so no node is scored twice.
class ScoreCache {
 public:
  void reset(std::size_t num_nodes) {
    if (stamp_.size() != num_nodes) {
      stamp_.assign(num_nodes, 0);
      values_.assign(num_nodes, 0.0);
      generation_ = 0;
    }
    if (++generation_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      generation_ = 1;
    }
  }

  double get(const NodeScorer& scorer, std::span<const double> x, NodeId n) {
    if (stamp_[n] != generation_) {
      const double g = scorer.score(x, n);
      if (!std::isfinite(g)) throw TrainingDiverged("non-finite node score during training");
      values_[n] = g;
      stamp_[n] = generation_;
    }
    return values_[n];
  }

 private:
  std::vector<std::uint32_t> stamp_;
  std::vector<double> values_;
  std::uint32_t generation_ = 0;
};

bool uses_estimated_labels(TrainMethod m) {
  return m == TrainMethod::OTM || m == TrainMethod::OTM_minus_BS;
}

}  // namespace

std::vector<TrainingPair> instance_loss_nodes(const Instance& instance, const NodeScorer& snapshot,
                                              const TrainConfig& config, Rng& negatives_rng) {
  if (snapshot.model() != required_model(config.method)) {
    throw ConfigError(std::string(to_string(config.method)) + " requires the " +
                      std::string(to_string(required_model(config.method))) +
                      " probability model");
  }
  const Tree& tree = snapshot.tree();
  const std::span<const double> x = instance.features;
  thread_local ScoreCache cache;
  cache.reset(tree.num_nodes());
  auto g = [&](NodeId n) { return cache.get(snapshot, x, n); };

  const NodeLabelAssignment z = ground_truth_z(tree, instance.targets);
  LevelSets sets;
  switch (config.method) {
    case TrainMethod::PLT:
      sets = subsample_plt(tree, z);
      break;
    case TrainMethod::TDM:
    case TrainMethod::OTM_minus_BS:
      sets = subsample_tdm(tree, z, config.negatives_per_level, negatives_rng);
      break;
    case TrainMethod::OTM:
    case TrainMethod::OTM_minus_OptEst:
      sets = beam_search_trace(tree, config.beam_size,
                               [&](NodeId c, double) { return sigmoid(g(c)); })
                 .candidates;
      break;
  }

  std::vector<TrainingPair> pairs;
  if (uses_estimated_labels(config.method)) {
    const NodeLabelAssignment z_hat =
        estimate_z_hat(tree, instance.targets, [&](NodeId c) { return sigmoid(g(c)); });
    for (const auto& level : sets) {
      for (const NodeId n : level) pairs.push_back({n, z_hat[n], g(n)});
    }
  } else {
    for (const auto& level : sets) {
      for (const NodeId n : level) pairs.push_back({n, z[n], g(n)});
    }
  }
  return pairs;
}

SparseGradient::SparseGradient(std::size_t num_nodes, std::size_t feature_dim)
    : feature_dim_(feature_dim), slot_of_(num_nodes, -1) {}

void SparseGradient::add(NodeId n, double dloss_dg, std::span<const double> x) {
  if (x.size() != feature_dim_) throw std::invalid_argument("gradient feature dimension mismatch");
  std::int64_t slot = slot_of_.at(n);
  if (slot < 0) {
    slot = static_cast<std::int64_t>(nodes_.size());
    slot_of_[n] = slot;
    nodes_.push_back(n);
    weight_grads_.resize(weight_grads_.size() + feature_dim_, 0.0);
    bias_grads_.push_back(0.0);
  }
  double* w = weight_grads_.data() + static_cast<std::size_t>(slot) * feature_dim_;
  for (std::size_t i = 0; i < feature_dim_; ++i) w[i] += dloss_dg * x[i];
  bias_grads_[static_cast<std::size_t>(slot)] += dloss_dg;
}

void SparseGradient::clear() {
  for (const NodeId n : nodes_) slot_of_[n] = -1;
  nodes_.clear();
  weight_grads_.clear();
  bias_grads_.clear();
}

AdamState AdamState::for_params(const LinearScorerParams& params) {
  AdamState s;
  s.m_weights.assign(params.all_weights().size(), 0.0);
  s.v_weights.assign(params.all_weights().size(), 0.0);
  s.m_biases.assign(params.all_biases().size(), 0.0);
  s.v_biases.assign(params.all_biases().size(), 0.0);
  return s;
}

void adam_step(LinearScorerParams& params, const SparseGradient& grads, AdamState& state,
               const TrainConfig& config) {
  const std::size_t d = params.feature_dim();
  if (grads.feature_dim() != d || state.m_weights.size() != params.all_weights().size() ||
      state.m_biases.size() != params.all_biases().size()) {
    throw std::invalid_argument("gradient or optimizer state not congruent with parameters");
  }
  for (std::size_t slot = 0; slot < grads.nodes().size(); ++slot) {
    if (grads.nodes()[slot] >= params.num_nodes()) {
      throw std::invalid_argument("gradient for unknown node");
    }
    if (!std::isfinite(grads.bias_grad(slot))) throw TrainingDiverged("non-finite gradient");
    for (const double v : grads.weight_grad(slot)) {
      if (!std::isfinite(v)) throw TrainingDiverged("non-finite gradient");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const double lr = config.learning_rate;
  const double eps = config.adam_epsilon;

  auto update = [&](double& param, double& m, double& v, double grad) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    param -= lr * (m / correction1) / (std::sqrt(v / correction2) + eps);
  };

  for (std::size_t slot = 0; slot < grads.nodes().size(); ++slot) {
    const NodeId n = grads.nodes()[slot];
    const auto gw = grads.weight_grad(slot);
    auto w = params.weights(n);
    for (std::size_t i = 0; i < d; ++i) {
      update(w[i], state.m_weights[n * d + i], state.v_weights[n * d + i], gw[i]);
    }
    update(params.bias(n), state.m_biases[n], state.v_biases[n], grads.bias_grad(slot));
  }
}

TrainResult train(const Dataset& data, const Tree& tree, ProbabilityModel model,
                  const TrainConfig& config) {
  if (data.empty()) throw DataError("training set is empty");
  return train(data, tree, model, config,
               LinearScorerParams::initialized(tree, data.instances.front().features.size(),
                                               config.seed, config.init_stddev));
}

TrainResult train(const Dataset& data, const Tree& tree, ProbabilityModel model,
                  const TrainConfig& config, LinearScorerParams initial) {
  config.validate();
  if (data.empty()) throw DataError("training set is empty");
  if (model != required_model(config.method)) {
    throw ConfigError(std::string(to_string(config.method)) + " requires the " +
                      std::string(to_string(required_model(config.method))) +
                      " probability model");
  }
  if (initial.num_nodes() != tree.num_nodes()) {
    throw std::invalid_argument("initial parameters do not match the tree");
  }
  if (data.header.num_targets != 0 && data.header.num_targets != tree.num_targets()) {
    throw DataError("training set and tree disagree on the number of targets");
  }
  const std::size_t d = initial.feature_dim();
  for (const Instance& inst : data.instances) {
    if (inst.features.size() != d) throw DataError("feature dimension mismatch in training set");
    for (const TargetId t : inst.targets) {
      if (t >= tree.num_targets()) throw DataError("target id outside the tree");
    }
  }

  TrainResult result{std::move(initial), {}};
  LinearScorerParams& params = result.params;
  AdamState state = AdamState::for_params(params);
  SparseGradient grads(tree.num_nodes(), d);
  Rng negatives_rng(derive_seed(config.seed, "negatives"));
  std::vector<std::size_t> order(data.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng(derive_seed(config.seed, "order", epoch));
    order_rng.shuffle(order.begin(), order.end());

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      grads.clear();
      {
        // theta_t: the snapshot is only read until the batch gradient is complete.
        const NodeScorer snapshot(tree, params, model);
        for (std::size_t i = begin; i < end; ++i) {
          const Instance& inst = data.instances[order[i]];
          for (const TrainingPair& p : instance_loss_nodes(inst, snapshot, config, negatives_rng)) {
            epoch_loss += bce_loss(p.label, p.score);
            grads.add(p.node, bce_grad(p.label, p.score), inst.features);
          }
        }
      }
      if (!std::isfinite(epoch_loss)) throw TrainingDiverged("training loss is not finite");
      adam_step(params, grads, state, config);
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back({epoch + 1, epoch_loss / static_cast<double>(data.size()), seconds});
  }
  return result;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,mean_loss,wall_seconds\n";
  for (const EpochLog& e : log) out << e.epoch << ',' << e.mean_loss << ',' << e.wall_seconds << '\n';
  return out.str();
}

}  // namespace otm
