#include "otm/metrics.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "otm/beam_search.hpp"
#include "otm/error.hpp"
#include "otm/pseudo_targets.hpp"

namespace otm {

namespace {

std::size_t hits(std::span<const TargetId> retrieved, std::span<const TargetId> relevant) {
  std::size_t count = 0;
  for (const TargetId t : retrieved) {
    if (std::binary_search(relevant.begin(), relevant.end(), t)) ++count;
  }
  return count;
}

void check_size(std::span<const TargetId> retrieved, std::size_t m) {
  if (m == 0 || retrieved.size() != m) {
    throw std::invalid_argument("expected " + std::to_string(m) + " retrieved targets, got " +
                                std::to_string(retrieved.size()));
  }
}

}  // namespace

double precision_at_m(std::span<const TargetId> retrieved, std::span<const TargetId> relevant,
                      std::size_t m) {
  check_size(retrieved, m);
  return static_cast<double>(hits(retrieved, relevant)) / static_cast<double>(m);
}

std::optional<double> recall_at_m(std::span<const TargetId> retrieved,
                                  std::span<const TargetId> relevant, std::size_t m) {
  check_size(retrieved, m);
  if (relevant.empty()) return std::nullopt;
  return static_cast<double>(hits(retrieved, relevant)) / static_cast<double>(relevant.size());
}

double f_measure_at_m(double p, double r) {
  if (!(p >= 0.0 && p <= 1.0 && r >= 0.0 && r <= 1.0)) {
    throw std::invalid_argument("precision and recall must lie in [0, 1]");
  }
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double regret_p_at_m(std::span<const double> eta, std::span<const TargetId> retrieved,
                     std::size_t m) {
  if (m == 0 || m > eta.size()) {
    throw std::invalid_argument("m must lie in [1, M]");
  }
  check_size(retrieved, m);
  std::vector<double> sorted(eta.begin(), eta.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m - 1),
                   sorted.end(), std::greater<>{});
  std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m), std::greater<>{});
  double best = 0.0;
  for (std::size_t i = 0; i < m; ++i) best += sorted[i];
  std::vector<double> hit;
  hit.reserve(m);
  for (const TargetId t : retrieved) {
    if (t >= eta.size()) throw std::invalid_argument("retrieved target out of range");
    hit.push_back(eta[t]);
  }
  // Same summation order as `best`, so an optimal retrieval gives exactly 0.
  std::sort(hit.begin(), hit.end(), std::greater<>{});
  double got = 0.0;
  for (const double e : hit) got += e;
  return std::max(0.0, (best - got) / static_cast<double>(m));
}

std::vector<EvaluationRow> evaluate(const NodeScorer& scorer, const Dataset& test, std::size_t k,
                                    std::span<const std::size_t> m_values) {
  const Tree& tree = scorer.tree();
  for (const std::size_t m : m_values) {
    if (m < 1 || m > k || m > tree.num_targets()) {
      throw std::invalid_argument("each m must satisfy 1 <= m <= min(k, M)");
    }
  }
  const bool with_regret =
      !test.empty() && std::all_of(test.instances.begin(), test.instances.end(),
                                   [](const Instance& i) { return i.has_eta(); });
  std::vector<EvaluationRow> rows(m_values.size());
  std::vector<double> regret_sum(m_values.size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].k = k;
    rows[r].m = m_values[r];
    rows[r].instances = test.size();
  }
  for (const Instance& inst : test.instances) {
    const Beam beam = beam_search(scorer, inst.features, k);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t m = m_values[r];
      const auto retrieved = retrieve_topm(beam, m, tree);
      const double p = precision_at_m(retrieved, inst.targets, m);
      const auto rec = recall_at_m(retrieved, inst.targets, m);
      rows[r].precision += p;
      if (rec) {
        rows[r].recall += *rec;
        rows[r].f_measure += f_measure_at_m(p, *rec);
      } else {
        ++rows[r].recall_skipped;
      }
      if (with_regret) regret_sum[r] += regret_p_at_m(inst.eta, retrieved, m);
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& row = rows[r];
    if (row.instances > 0) row.precision /= static_cast<double>(row.instances);
    const std::size_t counted = row.instances - row.recall_skipped;
    if (counted > 0) {
      row.recall /= static_cast<double>(counted);
      row.f_measure /= static_cast<double>(counted);
    }
    if (with_regret) row.regret = regret_sum[r] / static_cast<double>(row.instances);
  }
  return rows;
}

RegretReport estimated_regret(const NodeScorer& scorer, const Dataset& test, std::size_t k,
                              std::span<const std::size_t> m_values) {
  if (test.empty()) throw std::invalid_argument("test set is empty");
  for (const Instance& inst : test.instances) {
    if (!inst.has_eta()) throw std::invalid_argument("regret needs eta on every test instance");
  }
  RegretReport report;
  report.k = k;
  report.m_values.assign(m_values.begin(), m_values.end());
  report.instances = test.size();
  for (const EvaluationRow& row : evaluate(scorer, test, k, m_values)) {
    report.mean_regret.push_back(*row.regret);
  }
  return report;
}

std::vector<double> level_distribution(const Dataset& data, const Tree& tree, std::size_t h) {
  if (h < 1 || h > tree.height()) {
    throw std::invalid_argument("level must lie in [1, " + std::to_string(tree.height()) + "]");
  }
  if (data.empty()) throw DataError("level distribution of an empty dataset");
  const NodeRange level = tree.level_nodes(h);
  const NodeId first = *level.begin();
  std::vector<double> counts(level.size(), 0.0);
  for (const Instance& inst : data.instances) {
    for (const TargetId t : inst.targets) {
      if (t >= tree.num_targets()) throw DataError("target id outside the tree");
    }
    const NodeLabelAssignment z = ground_truth_z(tree, inst.targets);
    for (const NodeId n : z.positives()) {
      if (tree.level(n) == h) counts[n - first] += 1.0;
    }
  }
  double total = 0.0;
  for (const double c : counts) total += c;
  if (total == 0.0) throw DataError("no instance has a relevant node at level " + std::to_string(h));
  std::sort(counts.begin(), counts.end(), std::greater<>{});
  for (double& c : counts) c /= total;
  return counts;
}

std::string evaluation_csv(std::span<const EvaluationRow> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "k,m,instances,regret,precision,recall,f_measure,recall_skipped\n";
  for (const auto& r : rows) {
    out << r.k << ',' << r.m << ',' << r.instances << ',';
    if (r.regret) out << *r.regret;
    out << ',' << r.precision << ',' << r.recall << ',' << r.f_measure << ',' << r.recall_skipped
        << '\n';
  }
  return out.str();
}

}  // namespace otm
