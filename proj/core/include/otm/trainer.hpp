#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otm/label_tree.hpp"
#include "otm/pseudo_targets.hpp"
#include "otm/rng.hpp"
#include "otm/scorer.hpp"
#include "otm/synth_data.hpp"

namespace otm {

/// Training regimes. The two OTM ablations swap one ingredient each:
/// OTM(-BS) trains on TDM-style samples with z-hat labels, OTM(-OptEst)
/// trains on beam candidates with ground-truth z labels.
enum class TrainMethod { PLT, TDM, OTM, OTM_minus_BS, OTM_minus_OptEst };

std::string_view to_string(TrainMethod method);
/// Accepts "PLT", "TDM", "OTM", "OTM(-BS)", "OTM(-OptEst)" and the
/// identifier spellings "OTM_minus_BS", "OTM_minus_OptEst".
TrainMethod parse_train_method(std::string_view name);

/// PLT needs Hierarchical; every other method is Direct.
ProbabilityModel required_model(TrainMethod method);

struct TrainConfig {
  TrainMethod method = TrainMethod::OTM;
  std::size_t beam_size = 50;
  std::size_t negatives_per_level = 30;
  std::size_t epochs = 10;
  std::size_t batch_size = 100;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double init_stddev = 0.01;
  Seed seed = 0;

  void validate() const;
};

/// softplus((1 - 2z) g): the negated log-likelihood of label z under sigma(g).
double bce_loss(bool z, double g);
/// d bce_loss / dg = sigma(g) - z.
double bce_grad(bool z, double g);

/// Per-level node sets; element h - 1 holds level h for h = 1..H.
using LevelSets = std::vector<std::vector<NodeId>>;

/// PLT: every child of a positive node (conditional training set).
LevelSets subsample_plt(const Tree& tree, const NodeLabelAssignment& z);

/// TDM: positives of each level plus up to negatives_per_level distinct
/// non-positive nodes drawn uniformly from the same level.
LevelSets subsample_tdm(const Tree& tree, const NodeLabelAssignment& z,
                        std::size_t negatives_per_level, Rng& rng);

/// OTM: the expanded candidate sets B~_h(x; theta_t) of a beam search run
/// with the snapshot scorer.
LevelSets subsample_beam(const NodeScorer& snapshot, std::span<const double> x, std::size_t k);

/// One term of the per-instance loss, with the snapshot score g(x, n; theta_t).
struct TrainingPair {
  NodeId node = 0;
  bool label = false;
  double score = 0.0;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

/// The exact (node, label) pairs one instance contributes under the
/// configured method, evaluated with the snapshot scorer. Each node score is
/// computed at most once, so an OTM instance costs at most H b k + H b |I_x|
/// scorer queries. Throws ConfigError if the scorer's model does not match
/// the method.
std::vector<TrainingPair> instance_loss_nodes(const Instance& instance, const NodeScorer& snapshot,
                                              const TrainConfig& config, Rng& negatives_rng);

/// Gradient of a minibatch loss, stored only for the nodes it touches.
class SparseGradient {
 public:
  SparseGradient(std::size_t num_nodes, std::size_t feature_dim);

  /// Adds dloss/dg * (x, 1) to node n's (weights, bias) gradient.
  void add(NodeId n, double dloss_dg, std::span<const double> x);
  void clear();

  /// Touched nodes in first-touch order.
  const std::vector<NodeId>& nodes() const { return nodes_; }
  std::span<const double> weight_grad(std::size_t slot) const {
    return {weight_grads_.data() + slot * feature_dim_, feature_dim_};
  }
  double bias_grad(std::size_t slot) const { return bias_grads_[slot]; }
  std::size_t feature_dim() const { return feature_dim_; }

 private:
  std::size_t feature_dim_;
  std::vector<std::int64_t> slot_of_;
  std::vector<NodeId> nodes_;
  std::vector<double> weight_grads_;
  std::vector<double> bias_grads_;
};

/// Adam moments, congruent with LinearScorerParams.
struct AdamState {
  std::vector<double> m_weights;
  std::vector<double> v_weights;
  std::vector<double> m_biases;
  std::vector<double> v_biases;
  std::uint64_t step = 0;

  static AdamState for_params(const LinearScorerParams& params);
};

/// Lazy Adam: the step counter advances once per call, and only the touched
/// nodes' moments and parameters are updated (with global bias correction).
/// Throws TrainingDiverged on a non-finite gradient.
void adam_step(LinearScorerParams& params, const SparseGradient& grads, AdamState& state,
               const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  LinearScorerParams params;
  std::vector<EpochLog> log;
};

/// Minibatch training for a fixed number of epochs. Every minibatch builds
/// its node sets and labels from the parameters at the start of the step
/// (theta_t), then applies one Adam update with the summed gradient.
TrainResult train(const Dataset& data, const Tree& tree, ProbabilityModel model,
                  const TrainConfig& config);
TrainResult train(const Dataset& data, const Tree& tree, ProbabilityModel model,
                  const TrainConfig& config, LinearScorerParams initial);

/// CSV with header "epoch,mean_loss,wall_seconds".
std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace otm
