#include "otm/label_tree.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace otm {

namespace {

std::size_t height_for(std::size_t num_targets, std::size_t arity) {
  std::size_t h = 0;
  std::size_t capacity = 1;
  while (capacity < num_targets) {
    capacity *= arity;
    ++h;
  }
  return std::max<std::size_t>(h, 1);
}

}  // namespace

Tree Tree::build_random(std::size_t num_targets, std::size_t arity, Seed seed) {
  if (arity < 2) throw std::invalid_argument("tree arity must be at least 2");
  if (num_targets < 1) throw std::invalid_argument("tree needs at least one target");
  std::vector<TargetId> order(num_targets);
  std::iota(order.begin(), order.end(), TargetId{0});
  Rng rng(derive_seed(seed, "tree"));
  rng.shuffle(order.begin(), order.end());
  return Tree(arity, std::move(order), seed);
}

Tree Tree::from_leaf_order(std::size_t arity, std::vector<TargetId> leaf_to_target, Seed seed) {
  return Tree(arity, std::move(leaf_to_target), seed);
}

Tree::Tree(std::size_t arity, std::vector<TargetId> leaf_to_target, Seed seed)
    : arity_(arity), seed_(seed), leaf_to_target_(std::move(leaf_to_target)) {
  if (arity_ < 2) throw std::invalid_argument("tree arity must be at least 2");
  const std::size_t m = leaf_to_target_.size();
  if (m < 1) throw std::invalid_argument("tree needs at least one target");

  target_to_leaf_.assign(m, 0);
  std::vector<bool> seen(m, false);
  const std::size_t h_max = height_for(m, arity_);

  // Level sizes bottom-up, then offsets top-down.
  std::vector<std::size_t> sizes(h_max + 1);
  sizes[h_max] = m;
  for (std::size_t h = h_max; h-- > 0;) sizes[h] = (sizes[h + 1] + arity_ - 1) / arity_;
  level_offsets_.assign(h_max + 2, 0);
  for (std::size_t h = 0; h <= h_max; ++h) {
    level_offsets_[h + 1] = level_offsets_[h] + static_cast<NodeId>(sizes[h]);
  }
  const std::size_t total = level_offsets_.back();

  level_.assign(total, 0);
  parent_.assign(total, 0);
  first_child_.assign(total, 0);
  child_end_.assign(total, 0);
  first_leaf_.assign(total, 0);
  leaf_end_.assign(total, 0);

  for (std::size_t h = 0; h <= h_max; ++h) {
    for (NodeId n = level_offsets_[h]; n < level_offsets_[h + 1]; ++n) {
      level_[n] = static_cast<std::uint8_t>(h);
      const std::size_t local = n - level_offsets_[h];
      if (h > 0) parent_[n] = level_offsets_[h - 1] + static_cast<NodeId>(local / arity_);
      if (h < h_max) {
        const std::size_t begin = local * arity_;
        const std::size_t end = std::min(begin + arity_, sizes[h + 1]);
        first_child_[n] = level_offsets_[h + 1] + static_cast<NodeId>(begin);
        child_end_[n] = level_offsets_[h + 1] + static_cast<NodeId>(end);
      } else {
        first_child_[n] = child_end_[n] = n;
        first_leaf_[n] = n;
        leaf_end_[n] = n + 1;
      }
    }
  }
  for (std::size_t h = h_max; h-- > 0;) {
    for (NodeId n = level_offsets_[h]; n < level_offsets_[h + 1]; ++n) {
      first_leaf_[n] = first_leaf_[first_child_[n]];
      leaf_end_[n] = leaf_end_[child_end_[n] - 1];
    }
  }

  const NodeId leaf_base = level_offsets_[h_max];
  for (std::size_t i = 0; i < m; ++i) {
    const TargetId t = leaf_to_target_[i];
    if (t >= m || seen[t]) {
      throw std::invalid_argument("leaf_to_target is not a permutation of [0, M)");
    }
    seen[t] = true;
    target_to_leaf_[t] = leaf_base + static_cast<NodeId>(i);
  }
}

void Tree::check_node(NodeId n) const {
  if (!contains(n)) throw std::invalid_argument("unknown node id " + std::to_string(n));
}

std::size_t Tree::level(NodeId n) const {
  check_node(n);
  return level_[n];
}

NodeId Tree::parent(NodeId n) const {
  check_node(n);
  if (n == root()) throw std::invalid_argument("the root has no parent");
  return parent_[n];
}

NodeRange Tree::children(NodeId n) const {
  check_node(n);
  return NodeRange(first_child_[n], child_end_[n]);
}

std::size_t Tree::num_children(NodeId n) const {
  check_node(n);
  return child_end_[n] - first_child_[n];
}

NodeRange Tree::level_nodes(std::size_t h) const {
  if (h > height()) throw std::invalid_argument("level " + std::to_string(h) + " out of range");
  return NodeRange(level_offsets_[h], level_offsets_[h + 1]);
}

std::vector<NodeId> Tree::path_to_root(NodeId n) const {
  check_node(n);
  std::vector<NodeId> path(level_[n]);
  for (std::size_t i = path.size(); i-- > 0;) {
    path[i] = n;
    n = parent_[n];
  }
  return path;
}

NodeRange Tree::subtree_leaves(NodeId n) const {
  check_node(n);
  return NodeRange(first_leaf_[n], leaf_end_[n]);
}

NodeId Tree::ancestor_at_level(NodeId n, std::size_t h) const {
  check_node(n);
  if (h > level_[n]) {
    throw std::invalid_argument("ancestor level " + std::to_string(h) + " is below node " +
                                std::to_string(n));
  }
  for (std::size_t l = level_[n]; l > h; --l) n = parent_[n];
  return n;
}

TargetId Tree::target_of_leaf(NodeId leaf) const {
  check_node(leaf);
  const NodeId base = level_offsets_[height()];
  if (leaf < base) throw std::invalid_argument("node " + std::to_string(leaf) + " is not a leaf");
  return leaf_to_target_[leaf - base];
}

NodeId Tree::leaf_of_target(TargetId target) const {
  if (target >= num_targets()) {
    throw std::invalid_argument("target " + std::to_string(target) + " out of range");
  }
  return target_to_leaf_[target];
}

nlohmann::json Tree::to_json() const {
  return {{"arity", arity_},
          {"height", height()},
          {"num_targets", num_targets()},
          {"leaf_to_target", leaf_to_target_},
          {"seed", seed_}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  try {
    Tree tree(j.at("arity").get<std::size_t>(),
              j.at("leaf_to_target").get<std::vector<TargetId>>(), j.at("seed").get<Seed>());
    if (j.at("num_targets").get<std::size_t>() != tree.num_targets() ||
        j.at("height").get<std::size_t>() != tree.height()) {
      throw std::invalid_argument("tree JSON header disagrees with its leaf order");
    }
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed tree JSON: ") + e.what());
  }
}

}  // namespace otm
