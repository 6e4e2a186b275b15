#include "otm/beam_search.hpp"

#include <algorithm>
#include <string>

namespace otm {

std::vector<NodeId> expand(const Tree& tree, const Beam& beam) {
  if (beam.level >= tree.height()) {
    throw std::invalid_argument("cannot expand a beam at the leaf level");
  }
  std::vector<NodeId> out;
  for (const BeamEntry& e : beam.entries) {
    for (const NodeId c : tree.children(e.node)) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Beam select_topk(std::vector<BeamEntry> candidates, std::size_t k, std::size_t level) {
  if (k < 1) throw std::invalid_argument("beam size must be at least 1");
  if (candidates.size() > k) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), ranks_before);
    candidates.resize(k);
  } else {
    std::sort(candidates.begin(), candidates.end(), ranks_before);
  }
  return Beam{level, std::move(candidates)};
}

BeamTrace beam_search_trace(const NodeScorer& scorer, std::span<const double> x, std::size_t k) {
  if (scorer.model() == ProbabilityModel::Hierarchical) {
    return beam_search_trace(scorer.tree(), k, [&](NodeId child, double parent_prob) {
      return parent_prob * scorer.local_prob(x, child);
    });
  }
  return beam_search_trace(scorer.tree(), k,
                           [&](NodeId child, double) { return scorer.local_prob(x, child); });
}

Beam beam_search(const NodeScorer& scorer, std::span<const double> x, std::size_t k) {
  return beam_search_trace(scorer, x, k).final;
}

Beam beam_search(const Tree& tree, std::span<const double> node_probs, std::size_t k) {
  if (node_probs.size() != tree.num_nodes()) {
    throw std::invalid_argument("probability table has " + std::to_string(node_probs.size()) +
                                " entries for a tree with " + std::to_string(tree.num_nodes()) +
                                " nodes");
  }
  return beam_search_trace(tree, k, [&](NodeId child, double) { return node_probs[child]; }).final;
}

std::vector<TargetId> retrieve_topm(const Beam& beam, std::size_t m, const Tree& tree) {
  if (m < 1 || m > beam.entries.size()) {
    throw std::invalid_argument("retrieval size " + std::to_string(m) + " outside [1, " +
                                std::to_string(beam.entries.size()) + "]");
  }
  std::vector<TargetId> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(tree.target_of_leaf(beam.entries[i].node));
  return out;
}

}  // namespace otm
