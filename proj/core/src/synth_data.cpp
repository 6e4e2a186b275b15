#include "otm/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "otm/error.hpp"
#include "otm/scorer.hpp"

namespace otm {

void SyntheticSpec::validate() const {
  if (num_targets < 1) throw ConfigError("M must be at least 1");
  if (feature_dim < 1) throw ConfigError("d must be at least 1");
  if (!std::isfinite(bias)) throw ConfigError("bias c must be finite");
}

std::vector<double> eta_of(std::span<const double> weights, double bias, std::span<const double> x) {
  const std::size_t d = x.size();
  if (d == 0 || weights.size() % d != 0) {
    throw std::invalid_argument("weight matrix size is not a multiple of the feature dimension");
  }
  const std::size_t m = weights.size() / d;
  std::vector<double> eta(m);
  for (std::size_t j = 0; j < m; ++j) {
    double g = bias;
    for (std::size_t i = 0; i < d; ++i) g += weights[j * d + i] * x[i];
    eta[j] = sigmoid(g);
  }
  return eta;
}

namespace {

Dataset sample_split(const SyntheticSpec& spec, std::span<const double> weights, std::size_t n,
                     const char* split) {
  Dataset data;
  data.header = {spec.num_targets, spec.feature_dim, spec.bias, spec.seed, split};
  data.instances.reserve(n);
  Rng rng(derive_seed(spec.seed, split));
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.features.resize(spec.feature_dim);
    for (double& v : inst.features) v = rng.normal();
    inst.eta = eta_of(weights, spec.bias, inst.features);
    for (std::size_t j = 0; j < spec.num_targets; ++j) {
      if (rng.bernoulli(inst.eta[j])) inst.targets.push_back(static_cast<TargetId>(j));
    }
    data.instances.push_back(std::move(inst));
  }
  return data;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  out.weights.resize(spec.num_targets * spec.feature_dim);
  Rng rng(derive_seed(spec.seed, "weights"));
  for (double& w : out.weights) w = rng.normal();
  out.train = sample_split(spec, out.weights, spec.n_train, "train");
  out.test = sample_split(spec, out.weights, spec.n_test, "test");
  return out;
}

void write_dataset(std::ostream& out, const Dataset& data) {
  const nlohmann::json header = {{"M", data.header.num_targets},
                                 {"d", data.header.feature_dim},
                                 {"c", data.header.bias},
                                 {"seed", data.header.seed},
                                 {"split", data.header.split}};
  out << header.dump() << '\n';
  for (const Instance& inst : data.instances) {
    nlohmann::json row = {{"x", inst.features}, {"targets", inst.targets}};
    if (inst.has_eta()) row["eta"] = inst.eta;
    out << row.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  try {
    if (!std::getline(in, line)) throw DataError("dataset is missing its header line");
    ++line_no;
    const auto header = nlohmann::json::parse(line);
    data.header.num_targets = header.at("M").get<std::size_t>();
    data.header.feature_dim = header.at("d").get<std::size_t>();
    data.header.bias = header.at("c").get<double>();
    data.header.seed = header.at("seed").get<Seed>();
    data.header.split = header.at("split").get<std::string>();
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto row = nlohmann::json::parse(line);
      Instance inst;
      inst.features = row.at("x").get<std::vector<double>>();
      inst.targets = row.at("targets").get<std::vector<TargetId>>();
      if (row.contains("eta")) inst.eta = row.at("eta").get<std::vector<double>>();
      if (inst.features.size() != data.header.feature_dim) {
        throw DataError("feature dimension mismatch");
      }
      if (inst.has_eta() && inst.eta.size() != data.header.num_targets) {
        throw DataError("eta length mismatch");
      }
      for (const TargetId t : inst.targets) {
        if (t >= data.header.num_targets) throw DataError("target id out of range");
      }
      std::sort(inst.targets.begin(), inst.targets.end());
      data.instances.push_back(std::move(inst));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
  }
  return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_dataset(out, data);
  if (!out) throw DataError("failed writing " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  return read_dataset(in);
}

}  // namespace otm
