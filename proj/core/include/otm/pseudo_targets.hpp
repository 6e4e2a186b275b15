#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "otm/label_tree.hpp"
#include "otm/scorer.hpp"

namespace otm {

enum class LabelKind { GroundTruth, OptimalOracle, EstimatedOptimal };

/// Sparse binary node labels: the listed nodes carry 1, every other node 0.
class NodeLabelAssignment {
 public:
  NodeLabelAssignment(LabelKind kind, std::vector<NodeId> positives);

  LabelKind kind() const { return kind_; }
  bool operator[](NodeId n) const;
  /// Ascending ids of nodes labelled 1.
  const std::vector<NodeId>& positives() const { return positives_; }

 private:
  LabelKind kind_;
  std::vector<NodeId> positives_;
};

/// z_n = 1 iff a relevant target sits below n. Walks parent links from each
/// relevant leaf, O(H |I_x|).
NodeLabelAssignment ground_truth_z(const Tree& tree, std::span<const TargetId> relevant);

/// z*_n = y at the highest-eta leaf of n's subtree (ties to the lowest leaf
/// id). Needs the true eta, so it is only available on synthetic data.
NodeLabelAssignment optimal_z_star(const Tree& tree, std::span<const std::uint8_t> y,
                                   std::span<const double> eta);

/// Probability used to pick the argmax child when estimating z-hat.
using ChildProbFn = std::function<double(NodeId)>;

/// z-hat_n: copy of the label of the child with the highest probability, with
/// leaves labelled by y. Only the ancestor closure of the relevant leaves is
/// visited; everything outside it is 0. Each visited node queries all of its
/// children once, so at most H b |I_x| probabilities are requested.
NodeLabelAssignment estimate_z_hat(const Tree& tree, std::span<const TargetId> relevant,
                                   const ChildProbFn& child_prob);

/// As above, ranking children by sigma(g(x, child)). Under Hierarchical the
/// siblings share the parent's path factor, so this matches the argmax of
/// the marginal.
NodeLabelAssignment estimate_z_hat(const Tree& tree, std::span<const TargetId> relevant,
                                   const NodeScorer& scorer, std::span<const double> x);

}  // namespace otm
