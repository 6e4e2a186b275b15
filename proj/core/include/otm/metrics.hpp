#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otm/label_tree.hpp"
#include "otm/scorer.hpp"
#include "otm/synth_data.hpp"

namespace otm {

/// P@m = |retrieved ∩ relevant| / m. `relevant` must be sorted.
double precision_at_m(std::span<const TargetId> retrieved, std::span<const TargetId> relevant,
                      std::size_t m);

/// R@m = |retrieved ∩ relevant| / |relevant|; nullopt when nothing is
/// relevant (the instance is skipped when averaging).
std::optional<double> recall_at_m(std::span<const TargetId> retrieved,
                                  std::span<const TargetId> relevant, std::size_t m);

/// Harmonic mean of p and r, 0 when both are 0.
double f_measure_at_m(double p, double r);

/// (1/m) (sum of the m largest eta - sum of eta over the retrieved targets).
double regret_p_at_m(std::span<const double> eta, std::span<const TargetId> retrieved,
                     std::size_t m);

/// Averages over a test set for one (k, m) pair.
struct EvaluationRow {
  std::size_t k = 0;
  std::size_t m = 0;
  std::size_t instances = 0;
  std::optional<double> regret;  // only when every instance carries eta
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::size_t recall_skipped = 0;
};

/// Per-(k, m) regret estimate, with one row per m for the given beam size.
struct RegretReport {
  std::size_t k = 0;
  std::vector<std::size_t> m_values;
  std::vector<double> mean_regret;
  std::size_t instances = 0;
};

/// Beam search every test instance once with beam size k and score the top m
/// for each m in m_values. Regret is filled in when every instance has eta.
std::vector<EvaluationRow> evaluate(const NodeScorer& scorer, const Dataset& test, std::size_t k,
                                    std::span<const std::size_t> m_values);

/// Mean regret over the test set; throws std::invalid_argument if any
/// instance lacks eta.
RegretReport estimated_regret(const NodeScorer& scorer, const Dataset& test, std::size_t k,
                              std::span<const std::size_t> m_values);

/// Share of training instances with z_n = 1 for each node of level h, sorted
/// descending and normalized to sum to 1. Throws DataError when the dataset
/// is empty or no instance touches the level.
std::vector<double> level_distribution(const Dataset& data, const Tree& tree, std::size_t h);

/// CSV with header "k,m,instances,regret,precision,recall,f_measure,recall_skipped".
std::string evaluation_csv(std::span<const EvaluationRow> rows);

}  // namespace otm
