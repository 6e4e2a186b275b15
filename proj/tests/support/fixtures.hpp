#pragma once

#include <cmath>
#include <vector>

#include "otm/label_tree.hpp"
#include "otm/scorer.hpp"

namespace otm::testing {

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// A one-feature scorer whose sigma(g(x, n)) at x = (1) equals probs[n].
/// Entries outside (0, 1) leave the node's bias at 0.
inline LinearScorerParams table_params(const Tree& tree, const std::vector<double>& probs) {
  LinearScorerParams params(tree.num_nodes(), 1);
  for (NodeId n = 1; n < tree.num_nodes(); ++n) {
    if (probs[n] > 0.0 && probs[n] < 1.0) params.bias(n) = logit(probs[n]);
  }
  return params;
}

inline const std::vector<double> unit_x{1.0};

/// Seven-node binary tree over four targets with leaf i holding target i - 3.
inline Tree seven_node_tree() { return Tree::from_leaf_order(2, {0, 1, 2, 3}, 0); }

}  // namespace otm::testing
