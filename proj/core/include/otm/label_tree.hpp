#pragma once

#include <cstddef>
#include <cstdint>
#include <ranges>
#include <vector>

#include <nlohmann/json.hpp>

#include "otm/rng.hpp"

namespace otm {

using NodeId = std::uint32_t;
using TargetId = std::uint32_t;

/// Contiguous, ascending run of node ids.
using NodeRange = std::ranges::iota_view<NodeId, NodeId>;

/// A b-ary label tree with every target on a leaf at level H.
///
/// Shape: level H holds the M leaves, and level h holds ceil(|N_{h+1}| / b)
/// nodes. Nodes are numbered breadth-first from the root (id 0), and each
/// node at level h takes the next b nodes of level h+1 as children, left to
/// right, so only the last node of a level can have fewer than b children.
/// H = ceil(log_b M), except that M = 1 yields a root with one leaf (H = 1).
///
/// Because of the fill order, the children and the subtree leaves of any
/// node are contiguous id ranges. The tree is immutable after construction.
class Tree {
 public:
  /// Balanced shape with a seeded random permutation of targets on the leaves.
  static Tree build_random(std::size_t num_targets, std::size_t arity, Seed seed);

  /// Balanced shape with the given leaf order (leaf_to_target[i] is the
  /// target on the i-th leaf, left to right).
  static Tree from_leaf_order(std::size_t arity, std::vector<TargetId> leaf_to_target,
                              Seed seed = 0);

  std::size_t arity() const { return arity_; }
  std::size_t height() const { return level_offsets_.size() - 2; }
  std::size_t num_targets() const { return leaf_to_target_.size(); }
  std::size_t num_nodes() const { return parent_.size(); }
  Seed seed() const { return seed_; }

  static constexpr NodeId root() { return 0; }

  bool contains(NodeId n) const { return n < num_nodes(); }
  std::size_t level(NodeId n) const;
  bool is_leaf(NodeId n) const { return level(n) == height(); }

  /// Parent of a non-root node.
  NodeId parent(NodeId n) const;
  NodeRange children(NodeId n) const;
  std::size_t num_children(NodeId n) const;

  /// N_h, ascending.
  NodeRange level_nodes(std::size_t h) const;

  /// Path(n): ancestors from level 1 down to n itself; the root is excluded,
  /// so the length equals level(n).
  std::vector<NodeId> path_to_root(NodeId n) const;

  /// L(n): the leaves below n (n itself for a leaf).
  NodeRange subtree_leaves(NodeId n) const;

  /// The ancestor of n at level h (n itself when h == level(n)).
  NodeId ancestor_at_level(NodeId n, std::size_t h) const;

  TargetId target_of_leaf(NodeId leaf) const;
  NodeId leaf_of_target(TargetId target) const;
  const std::vector<TargetId>& leaf_to_target() const { return leaf_to_target_; }

  /// {arity, height, num_targets, leaf_to_target, seed}; the shape is
  /// rebuilt from these on load.
  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);

  friend bool operator==(const Tree& a, const Tree& b) {
    return a.arity_ == b.arity_ && a.leaf_to_target_ == b.leaf_to_target_;
  }

 private:
  Tree(std::size_t arity, std::vector<TargetId> leaf_to_target, Seed seed);
  void check_node(NodeId n) const;

  std::size_t arity_ = 2;
  Seed seed_ = 0;
  std::vector<NodeId> level_offsets_;  // H + 2 entries; level h is [off[h], off[h+1])
  std::vector<std::uint8_t> level_;
  std::vector<NodeId> parent_;
  std::vector<NodeId> first_child_;
  std::vector<NodeId> child_end_;
  std::vector<NodeId> first_leaf_;
  std::vector<NodeId> leaf_end_;
  std::vector<TargetId> leaf_to_target_;
  std::vector<NodeId> target_to_leaf_;
};

}  // namespace otm
