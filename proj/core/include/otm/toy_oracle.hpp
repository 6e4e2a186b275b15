#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "otm/label_tree.hpp"
#include "otm/rng.hpp"

namespace otm {

// Feature-free laboratory: targets are independent with global relevance
// eta_j ~ U[0, 1], and node probabilities come from closed-form estimators
// instead of a trained scorer.

enum class Estimator { DirEst, HierEst, OptEst };

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);

/// Floating-point type used for the closed-form N = infinity DirEst and
/// HierEst tables. In single precision 1 - prod(1 - eta) rounds to exactly
/// 1 for subtrees of more than roughly 16 leaves (with eta ~ U[0, 1]), so
/// beam search sees ties near the root and falls back to the id order;
/// double precision resolves those levels. OptEst has no product and always
/// uses double.
enum class LimitPrecision { Double, Single };

std::string_view to_string(LimitPrecision p);
/// "float64" or "float32".
LimitPrecision parse_limit_precision(std::string_view name);

/// A finite sample size, or the infinite-data limit evaluated in closed form.
struct SampleSize {
  std::optional<std::size_t> count;

  static SampleSize infinite() { return {}; }
  static SampleSize finite(std::size_t n) { return {n}; }
  bool is_infinite() const { return !count.has_value(); }
  /// "inf" or the decimal count.
  std::string label() const;

  friend bool operator==(const SampleSize&, const SampleSize&) = default;
};

/// p_g(z_n = 1) for every node, indexed by node id.
using NodeProbTable = std::vector<double>;

/// M i.i.d. U[0, 1] relevance probabilities.
std::vector<double> gen_toy(std::size_t num_targets, Seed seed);

/// N binary target vectors, stored as one bitset over instances per target.
class ToySample {
 public:
  ToySample(std::size_t num_targets, std::size_t size);

  std::size_t num_targets() const { return num_targets_; }
  std::size_t size() const { return size_; }
  std::size_t words_per_target() const { return words_; }

  bool get(std::size_t instance, TargetId target) const;
  void set(std::size_t instance, TargetId target);
  std::span<const std::uint64_t> column(TargetId target) const {
    return {bits_.data() + target * words_, words_};
  }
  std::vector<std::uint8_t> row(std::size_t instance) const;

 private:
  std::size_t num_targets_;
  std::size_t size_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

/// Draws y_j ~ Bernoulli(eta_j) independently, instance by instance.
ToySample sample_toy_dataset(std::span<const double> eta, std::size_t n, Rng& rng);

/// Empirical frequency of z_n; in the limit, 1 - prod over L(n) of (1 - eta).
NodeProbTable fit_direst(const Tree& tree, const ToySample& sample);
NodeProbTable fit_direst(const Tree& tree, std::span<const double> eta,
                         LimitPrecision precision = LimitPrecision::Double);

/// Root frequency times the product of empirical conditionals
/// p(z_n = 1 | z_parent = 1) down the path; a conditional with a parent that
/// is never positive is 0. In the limit the product telescopes to DirEst.
NodeProbTable fit_hierest(const Tree& tree, const ToySample& sample);
NodeProbTable fit_hierest(const Tree& tree, std::span<const double> eta,
                          LimitPrecision precision = LimitPrecision::Double);

/// Each node copies the per-instance pseudo target of its most probable
/// child (ties to the lowest id), so its estimate is the frequency of the
/// leaf reached by greedy descent. In the limit this is max over L(n) of eta.
NodeProbTable fit_optest(const Tree& tree, const ToySample& sample);
NodeProbTable fit_optest(const Tree& tree, std::span<const double> eta);

/// Dispatch; `sample` is ignored (and may be null) in the infinite case.
NodeProbTable fit_estimator(Estimator e, const Tree& tree, const ToySample* sample,
                            std::span<const double> eta,
                            LimitPrecision precision = LimitPrecision::Double);

struct ToyConfig {
  std::size_t num_targets = 1000;
  std::size_t arity = 2;
  Estimator estimator = Estimator::DirEst;
  SampleSize sample_size = SampleSize::infinite();
  std::size_t beam_size = 1;
  std::vector<std::size_t> m_values{1};
  std::size_t runs = 100;
  Seed seed = 0;
  LimitPrecision limit_precision = LimitPrecision::Double;

  void validate() const;
};

/// Several estimators, sample sizes and (k, m) cells evaluated on shared
/// runs: each run draws one eta, one tree and one sample per N, so every
/// cell sees the same randomness for a given (seed, run).
struct ToyGrid {
  std::size_t num_targets = 1000;
  std::size_t arity = 2;
  std::vector<Estimator> estimators{Estimator::DirEst};
  std::vector<SampleSize> sample_sizes{SampleSize::infinite()};
  std::vector<std::pair<std::size_t, std::size_t>> cells{{1, 1}};  // (k, m)
  std::size_t runs = 100;
  Seed seed = 0;
  LimitPrecision limit_precision = LimitPrecision::Double;

  void validate() const;
};

/// (k, k) for each k.
std::vector<std::pair<std::size_t, std::size_t>> diagonal_cells(std::span<const std::size_t> ks);
/// (k, m) for each k and each m <= k.
std::vector<std::pair<std::size_t, std::size_t>> triangle_cells(std::span<const std::size_t> ks,
                                                                std::span<const std::size_t> ms);

struct ToyCell {
  Estimator estimator = Estimator::DirEst;
  SampleSize sample_size;
  std::size_t k = 0;
  std::size_t m = 0;
  double mean_regret = 0.0;
  double std_err = 0.0;
  std::size_t runs = 0;
};

/// Cells ordered by estimator, then sample size, then (k, m), following the
/// order given in the grid.
std::vector<ToyCell> run_toy_grid(const ToyGrid& grid);
std::vector<ToyCell> run_toy_experiment(const ToyConfig& config);

/// CSV with header "estimator,N,k,m,mean_regret,std_err,runs".
std::string toy_csv(std::span<const ToyCell> cells);

}  // namespace otm
