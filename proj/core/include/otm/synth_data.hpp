#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otm/label_tree.hpp"
#include "otm/rng.hpp"

namespace otm {

/// One example: dense features, the sorted ids of relevant targets, and,
/// for synthetic data, the true eta_j(x) = p(y_j = 1 | x) for every target.
struct Instance {
  std::vector<double> features;
  std::vector<TargetId> targets;
  std::vector<double> eta;  // empty when unknown

  bool has_eta() const { return !eta.empty(); }
  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Header line of a dataset file.
struct DatasetHeader {
  std::size_t num_targets = 0;
  std::size_t feature_dim = 0;
  double bias = 0.0;
  Seed seed = 0;
  std::string split;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
};

/// Generator settings. The bias is called c here so it cannot be confused
/// with the tree arity.
struct SyntheticSpec {
  std::size_t num_targets = 1000;
  std::size_t feature_dim = 10;
  double bias = -5.0;
  std::size_t n_train = 10000;
  std::size_t n_test = 1000;
  Seed seed = 0;

  void validate() const;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
  /// Row-major M x d matrix; row j is w_j.
  std::vector<double> weights;
};

/// x ~ N(0, I_d), w_j ~ N(0, I_d), y_j ~ Bernoulli(sigma(w_j . x + c)).
/// W, the training split and the test split use separate derived streams.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// eta_j(x) = sigma(w_j . x + c) for every row of the M x d matrix W.
std::vector<double> eta_of(std::span<const double> weights, double bias, std::span<const double> x);

/// Line-delimited JSON: a header object {M, d, c, seed, split}, then one
/// {"x": [...], "targets": [...], "eta": [...]} object per instance.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace otm
