#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "otm/label_tree.hpp"
#include "otm/scorer.hpp"

namespace otm {

struct BeamEntry {
  NodeId node = 0;
  double prob = 0.0;

  friend bool operator==(const BeamEntry&, const BeamEntry&) = default;
};

/// Ranking key shared by every top-k selection: probability descending,
/// then node id ascending.
inline bool ranks_before(const BeamEntry& a, const BeamEntry& b) {
  if (a.prob != b.prob) return a.prob > b.prob;
  return a.node < b.node;
}

/// B_h(x): the nodes retained at one level, in rank order.
struct Beam {
  std::size_t level = 0;
  std::vector<BeamEntry> entries;
};

/// B~_h: union of the children of the beam's nodes, ascending by id.
std::vector<NodeId> expand(const Tree& tree, const Beam& beam);

/// The k best candidates under ranks_before (all of them when fewer than k).
Beam select_topk(std::vector<BeamEntry> candidates, std::size_t k, std::size_t level = 0);

/// Beam search output together with the expanded candidate set of every
/// level; candidates[h - 1] is B~_h for h = 1..H.
struct BeamTrace {
  std::vector<std::vector<NodeId>> candidates;
  Beam final;
};

/// Generic level-wise beam search. child_prob(child, parent_prob) returns the
/// ranking probability of a candidate given its parent's beam probability.
template <class ChildProb>
BeamTrace beam_search_trace(const Tree& tree, std::size_t k, ChildProb&& child_prob) {
  if (k < 1) throw std::invalid_argument("beam size must be at least 1");
  BeamTrace trace;
  trace.candidates.reserve(tree.height());
  Beam beam{0, {{Tree::root(), 1.0}}};
  std::vector<BeamEntry> scored;
  for (std::size_t h = 1; h <= tree.height(); ++h) {
    scored.clear();
    std::vector<NodeId> expanded;
    for (const BeamEntry& parent : beam.entries) {
      for (const NodeId child : tree.children(parent.node)) {
        scored.push_back({child, child_prob(child, parent.prob)});
        expanded.push_back(child);
      }
    }
    std::sort(expanded.begin(), expanded.end());
    trace.candidates.push_back(std::move(expanded));
    beam = select_topk(scored, k, h);
  }
  trace.final = std::move(beam);
  return trace;
}

/// Beam search with a trained scorer. Under Hierarchical the candidate
/// probability is the parent's beam probability times sigma(g), so the path
/// product accumulates along the search.
BeamTrace beam_search_trace(const NodeScorer& scorer, std::span<const double> x, std::size_t k);
Beam beam_search(const NodeScorer& scorer, std::span<const double> x, std::size_t k);

/// Beam search over a fixed table of p(z_n = 1), indexed by node id.
Beam beam_search(const Tree& tree, std::span<const double> node_probs, std::size_t k);

/// Targets of the m best beam entries, in rank order.
std::vector<TargetId> retrieve_topm(const Beam& beam, std::size_t m, const Tree& tree);

}  // namespace otm
