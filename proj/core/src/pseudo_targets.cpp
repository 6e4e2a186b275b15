#include "otm/pseudo_targets.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace otm {

NodeLabelAssignment::NodeLabelAssignment(LabelKind kind, std::vector<NodeId> positives)
    : kind_(kind), positives_(std::move(positives)) {
  std::sort(positives_.begin(), positives_.end());
  positives_.erase(std::unique(positives_.begin(), positives_.end()), positives_.end());
}

bool NodeLabelAssignment::operator[](NodeId n) const {
  return std::binary_search(positives_.begin(), positives_.end(), n);
}

namespace {

// Ancestor closure of the relevant leaves, ascending (hence level-ordered).
std::vector<NodeId> relevant_closure(const Tree& tree, std::span<const TargetId> relevant) {
  std::vector<NodeId> nodes;
  nodes.reserve(relevant.size() * (tree.height() + 1));
  for (const TargetId t : relevant) {
    if (t >= tree.num_targets()) {
      throw std::invalid_argument("target " + std::to_string(t) + " out of range");
    }
    NodeId n = tree.leaf_of_target(t);
    nodes.push_back(n);
    while (n != Tree::root()) {
      n = tree.parent(n);
      nodes.push_back(n);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

}  // namespace

NodeLabelAssignment ground_truth_z(const Tree& tree, std::span<const TargetId> relevant) {
  return NodeLabelAssignment(LabelKind::GroundTruth, relevant_closure(tree, relevant));
}

NodeLabelAssignment optimal_z_star(const Tree& tree, std::span<const std::uint8_t> y,
                                   std::span<const double> eta) {
  const std::size_t m = tree.num_targets();
  if (y.size() != m || eta.size() != m) {
    throw std::invalid_argument("y and eta must both have length " + std::to_string(m));
  }
  // best[n] is the leaf with the highest eta below n.
  std::vector<NodeId> best(tree.num_nodes());
  for (const NodeId leaf : tree.level_nodes(tree.height())) best[leaf] = leaf;
  for (std::size_t h = tree.height(); h-- > 0;) {
    for (const NodeId n : tree.level_nodes(h)) {
      NodeId pick = best[*tree.children(n).begin()];
      for (const NodeId c : tree.children(n)) {
        const NodeId cand = best[c];
        if (eta[tree.target_of_leaf(cand)] > eta[tree.target_of_leaf(pick)]) pick = cand;
      }
      best[n] = pick;
    }
  }
  std::vector<NodeId> positives;
  for (NodeId n = 0; n < tree.num_nodes(); ++n) {
    if (y[tree.target_of_leaf(best[n])] != 0) positives.push_back(n);
  }
  return NodeLabelAssignment(LabelKind::OptimalOracle, std::move(positives));
}

NodeLabelAssignment estimate_z_hat(const Tree& tree, std::span<const TargetId> relevant,
                                   const ChildProbFn& child_prob) {
  const std::vector<NodeId> closure = relevant_closure(tree, relevant);
  // Children have larger ids than their parent, so walking the closure in
  // descending order is bottom-up and appends positives in descending order.
  std::vector<NodeId> positives;
  auto is_positive = [&](NodeId n) {
    return std::binary_search(positives.begin(), positives.end(), n, std::greater<>{});
  };
  for (auto it = closure.rbegin(); it != closure.rend(); ++it) {
    const NodeId n = *it;
    if (tree.is_leaf(n)) {
      positives.push_back(n);
      continue;
    }
    NodeId best = 0;
    double best_prob = -1.0;
    for (const NodeId c : tree.children(n)) {
      const double p = child_prob(c);
      if (p > best_prob) {
        best_prob = p;
        best = c;
      }
    }
    if (is_positive(best)) positives.push_back(n);
  }
  return NodeLabelAssignment(LabelKind::EstimatedOptimal, std::move(positives));
}

NodeLabelAssignment estimate_z_hat(const Tree& tree, std::span<const TargetId> relevant,
                                   const NodeScorer& scorer, std::span<const double> x) {
  return estimate_z_hat(tree, relevant, [&](NodeId c) { return scorer.local_prob(x, c); });
}

}  // namespace otm
