#include "otm/toy_oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "otm/beam_search.hpp"
#include "otm/error.hpp"
#include "otm/metrics.hpp"

namespace otm {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::DirEst: return "DirEst";
    case Estimator::HierEst: return "HierEst";
    case Estimator::OptEst: return "OptEst";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "DirEst") return Estimator::DirEst;
  if (name == "HierEst") return Estimator::HierEst;
  if (name == "OptEst") return Estimator::OptEst;
  throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

std::string_view to_string(LimitPrecision p) {
  return p == LimitPrecision::Single ? "float32" : "float64";
}

LimitPrecision parse_limit_precision(std::string_view name) {
  if (name == "float64") return LimitPrecision::Double;
  if (name == "float32") return LimitPrecision::Single;
  throw std::invalid_argument("unknown limit precision '" + std::string(name) + "'");
}

std::string SampleSize::label() const {
  return count ? std::to_string(*count) : std::string("inf");
}

std::vector<double> gen_toy(std::size_t num_targets, Seed seed) {
  Rng rng(derive_seed(seed, "eta"));
  std::vector<double> eta(num_targets);
  for (double& e : eta) e = rng.uniform();
  return eta;
}

ToySample::ToySample(std::size_t num_targets, std::size_t size)
    : num_targets_(num_targets),
      size_(size),
      words_((size + 63) / 64),
      bits_(num_targets * words_, 0) {}

bool ToySample::get(std::size_t instance, TargetId target) const {
  return (bits_[target * words_ + instance / 64] >> (instance % 64)) & 1U;
}

void ToySample::set(std::size_t instance, TargetId target) {
  bits_[target * words_ + instance / 64] |= std::uint64_t{1} << (instance % 64);
}

std::vector<std::uint8_t> ToySample::row(std::size_t instance) const {
  std::vector<std::uint8_t> y(num_targets_);
  for (TargetId j = 0; j < num_targets_; ++j) y[j] = get(instance, j) ? 1 : 0;
  return y;
}

ToySample sample_toy_dataset(std::span<const double> eta, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("toy sample size must be at least 1");
  ToySample sample(eta.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    for (TargetId j = 0; j < eta.size(); ++j) {
      if (rng.bernoulli(eta[j])) sample.set(i, j);
    }
  }
  return sample;
}

namespace {

void check_eta(const Tree& tree, std::span<const double> eta) {
  if (eta.size() != tree.num_targets()) {
    throw std::invalid_argument("eta has " + std::to_string(eta.size()) + " entries for " +
                                std::to_string(tree.num_targets()) + " targets");
  }
}

void check_sample(const Tree& tree, const ToySample& sample) {
  if (sample.num_targets() != tree.num_targets()) {
    throw std::invalid_argument("toy sample does not match the tree's target count");
  }
}

// z_n over the sample as bitsets, one row of words per node.
std::vector<std::uint64_t> node_indicators(const Tree& tree, const ToySample& sample) {
  const std::size_t w = sample.words_per_target();
  std::vector<std::uint64_t> z(tree.num_nodes() * w, 0);
  for (const NodeId leaf : tree.level_nodes(tree.height())) {
    const auto col = sample.column(tree.target_of_leaf(leaf));
    std::copy(col.begin(), col.end(), z.begin() + static_cast<std::ptrdiff_t>(leaf * w));
  }
  for (std::size_t h = tree.height(); h-- > 0;) {
    for (const NodeId n : tree.level_nodes(h)) {
      std::uint64_t* dst = z.data() + n * w;
      for (const NodeId c : tree.children(n)) {
        const std::uint64_t* src = z.data() + c * w;
        for (std::size_t i = 0; i < w; ++i) dst[i] |= src[i];
      }
    }
  }
  return z;
}

std::size_t popcount(const std::uint64_t* words, std::size_t w) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < w; ++i) total += static_cast<std::size_t>(std::popcount(words[i]));
  return total;
}

// Shared OptEst recursion given leaf probabilities.
NodeProbTable greedy_descent(const Tree& tree, std::span<const double> leaf_prob_by_target) {
  NodeProbTable p(tree.num_nodes(), 0.0);
  for (const NodeId leaf : tree.level_nodes(tree.height())) {
    p[leaf] = leaf_prob_by_target[tree.target_of_leaf(leaf)];
  }
  for (std::size_t h = tree.height(); h-- > 0;) {
    for (const NodeId n : tree.level_nodes(h)) {
      // The copied pseudo target is the argmax child's, so its frequency is
      // the argmax child's estimate.
      NodeId best = *tree.children(n).begin();
      for (const NodeId c : tree.children(n)) {
        if (p[c] > p[best]) best = c;
      }
      p[n] = p[best];
    }
  }
  return p;
}

// 1 - prod over L(n) of (1 - eta), evaluated in Real throughout.
template <class Real>
NodeProbTable direst_limit(const Tree& tree, std::span<const double> eta) {
  std::vector<Real> none(tree.num_nodes(), Real{1});
  for (const NodeId leaf : tree.level_nodes(tree.height())) {
    none[leaf] = Real{1} - static_cast<Real>(eta[tree.target_of_leaf(leaf)]);
  }
  for (std::size_t h = tree.height(); h-- > 0;) {
    for (const NodeId n : tree.level_nodes(h)) {
      Real prod{1};
      for (const NodeId c : tree.children(n)) prod *= none[c];
      none[n] = prod;
    }
  }
  NodeProbTable p(tree.num_nodes());
  for (NodeId n = 0; n < tree.num_nodes(); ++n) p[n] = static_cast<double>(Real{1} - none[n]);
  return p;
}

// Exact conditionals p(z_n) / p(z_parent) (z_n implies z_parent), multiplied
// down from the root marginal.
template <class Real>
NodeProbTable hierest_limit(const Tree& tree, std::span<const double> eta) {
  const NodeProbTable marginal = direst_limit<Real>(tree, eta);
  std::vector<Real> p(tree.num_nodes());
  p[Tree::root()] = static_cast<Real>(marginal[Tree::root()]);
  for (std::size_t h = 1; h <= tree.height(); ++h) {
    for (const NodeId n : tree.level_nodes(h)) {
      const NodeId parent = tree.parent(n);
      const auto parent_marginal = static_cast<Real>(marginal[parent]);
      const Real conditional = parent_marginal == Real{0}
                                   ? Real{0}
                                   : static_cast<Real>(marginal[n]) / parent_marginal;
      p[n] = p[parent] * conditional;
    }
  }
  return NodeProbTable(p.begin(), p.end());
}

}  // namespace

NodeProbTable fit_direst(const Tree& tree, const ToySample& sample) {
  check_sample(tree, sample);
  const std::size_t w = sample.words_per_target();
  const auto z = node_indicators(tree, sample);
  NodeProbTable p(tree.num_nodes());
  const double n = static_cast<double>(sample.size());
  for (NodeId node = 0; node < tree.num_nodes(); ++node) {
    p[node] = static_cast<double>(popcount(z.data() + node * w, w)) / n;
  }
  return p;
}

NodeProbTable fit_direst(const Tree& tree, std::span<const double> eta, LimitPrecision precision) {
  check_eta(tree, eta);
  return precision == LimitPrecision::Single ? direst_limit<float>(tree, eta)
                                             : direst_limit<double>(tree, eta);
}

NodeProbTable fit_hierest(const Tree& tree, const ToySample& sample) {
  check_sample(tree, sample);
  const std::size_t w = sample.words_per_target();
  const auto z = node_indicators(tree, sample);
  NodeProbTable p(tree.num_nodes());
  p[Tree::root()] =
      static_cast<double>(popcount(z.data(), w)) / static_cast<double>(sample.size());
  for (std::size_t h = 1; h <= tree.height(); ++h) {
    for (const NodeId n : tree.level_nodes(h)) {
      const NodeId parent = tree.parent(n);
      const std::uint64_t* zn = z.data() + n * w;
      const std::uint64_t* zp = z.data() + parent * w;
      std::size_t joint = 0;
      for (std::size_t i = 0; i < w; ++i) joint += static_cast<std::size_t>(std::popcount(zn[i] & zp[i]));
      const std::size_t parent_count = popcount(zp, w);
      const double conditional =
          parent_count == 0 ? 0.0
                            : static_cast<double>(joint) / static_cast<double>(parent_count);
      p[n] = p[parent] * conditional;
    }
  }
  return p;
}

NodeProbTable fit_hierest(const Tree& tree, std::span<const double> eta, LimitPrecision precision) {
  check_eta(tree, eta);
  return precision == LimitPrecision::Single ? hierest_limit<float>(tree, eta)
                                             : hierest_limit<double>(tree, eta);
}

NodeProbTable fit_optest(const Tree& tree, const ToySample& sample) {
  check_sample(tree, sample);
  std::vector<double> freq(tree.num_targets());
  const double n = static_cast<double>(sample.size());
  for (TargetId j = 0; j < tree.num_targets(); ++j) {
    const auto col = sample.column(j);
    freq[j] = static_cast<double>(popcount(col.data(), col.size())) / n;
  }
  return greedy_descent(tree, freq);
}

NodeProbTable fit_optest(const Tree& tree, std::span<const double> eta) {
  check_eta(tree, eta);
  return greedy_descent(tree, eta);
}

NodeProbTable fit_estimator(Estimator e, const Tree& tree, const ToySample* sample,
                            std::span<const double> eta, LimitPrecision precision) {
  if (sample == nullptr) {
    switch (e) {
      case Estimator::DirEst: return fit_direst(tree, eta, precision);
      case Estimator::HierEst: return fit_hierest(tree, eta, precision);
      case Estimator::OptEst: return fit_optest(tree, eta);
    }
  } else {
    switch (e) {
      case Estimator::DirEst: return fit_direst(tree, *sample);
      case Estimator::HierEst: return fit_hierest(tree, *sample);
      case Estimator::OptEst: return fit_optest(tree, *sample);
    }
  }
  throw std::invalid_argument("unknown estimator");
}

void ToyConfig::validate() const {
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (arity < 2) throw ConfigError("arity must be at least 2");
  if (beam_size < 1 || beam_size > num_targets) {
    throw ConfigError("beam size must lie in [1, M]");
  }
  if (m_values.empty()) throw ConfigError("at least one m is required");
  for (const std::size_t m : m_values) {
    if (m < 1 || m > beam_size) throw ConfigError("each m must lie in [1, k]");
  }
  if (sample_size.count && *sample_size.count < 1) {
    throw ConfigError("finite sample size must be at least 1");
  }
}

void ToyGrid::validate() const {
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (arity < 2) throw ConfigError("arity must be at least 2");
  if (num_targets < 1) throw ConfigError("M must be at least 1");
  if (estimators.empty() || sample_sizes.empty() || cells.empty()) {
    throw ConfigError("toy grid needs estimators, sample sizes and cells");
  }
  for (const auto& [k, m] : cells) {
    if (k < 1 || k > num_targets || m < 1 || m > k) {
      throw ConfigError("toy cells need 1 <= m <= k <= M");
    }
  }
  for (const auto& n : sample_sizes) {
    if (n.count && *n.count < 1) throw ConfigError("finite sample size must be at least 1");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> diagonal_cells(std::span<const std::size_t> ks) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (const std::size_t k : ks) cells.emplace_back(k, k);
  return cells;
}

std::vector<std::pair<std::size_t, std::size_t>> triangle_cells(std::span<const std::size_t> ks,
                                                                std::span<const std::size_t> ms) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (const std::size_t k : ks) {
    for (const std::size_t m : ms) {
      if (m <= k) cells.emplace_back(k, m);
    }
  }
  return cells;
}

std::vector<ToyCell> run_toy_grid(const ToyGrid& grid) {
  grid.validate();
  const std::size_t num_cells = grid.cells.size();
  const std::size_t total = grid.estimators.size() * grid.sample_sizes.size() * num_cells;
  std::vector<double> sum(total, 0.0);
  std::vector<double> sum_sq(total, 0.0);

  std::vector<std::size_t> ks;
  for (const auto& cell : grid.cells) ks.push_back(cell.first);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  for (std::size_t run = 0; run < grid.runs; ++run) {
    const Seed run_seed = derive_seed(grid.seed, "toy-run", run);
    const std::vector<double> eta = gen_toy(grid.num_targets, run_seed);
    const Tree tree = Tree::build_random(grid.num_targets, grid.arity, run_seed);
    for (std::size_t si = 0; si < grid.sample_sizes.size(); ++si) {
      const SampleSize& n = grid.sample_sizes[si];
      std::optional<ToySample> sample;
      if (n.count) {
        Rng rng(derive_seed(run_seed, "sample", *n.count));
        sample = sample_toy_dataset(eta, *n.count, rng);
      }
      for (std::size_t ei = 0; ei < grid.estimators.size(); ++ei) {
        const NodeProbTable table =
            fit_estimator(grid.estimators[ei], tree, sample ? &*sample : nullptr, eta,
                          grid.limit_precision);
        std::map<std::size_t, Beam> beams;
        for (const std::size_t k : ks) beams.emplace(k, beam_search(tree, table, k));
        for (std::size_t ci = 0; ci < num_cells; ++ci) {
          const auto [k, m] = grid.cells[ci];
          const auto retrieved = retrieve_topm(beams.at(k), m, tree);
          const double r = regret_p_at_m(eta, retrieved, m);
          const std::size_t slot = (ei * grid.sample_sizes.size() + si) * num_cells + ci;
          sum[slot] += r;
          sum_sq[slot] += r * r;
        }
      }
    }
  }

  std::vector<ToyCell> out;
  out.reserve(total);
  const double runs = static_cast<double>(grid.runs);
  for (std::size_t ei = 0; ei < grid.estimators.size(); ++ei) {
    for (std::size_t si = 0; si < grid.sample_sizes.size(); ++si) {
      for (std::size_t ci = 0; ci < num_cells; ++ci) {
        const std::size_t slot = (ei * grid.sample_sizes.size() + si) * num_cells + ci;
        const double mean = sum[slot] / runs;
        double std_err = 0.0;
        if (grid.runs > 1) {
          const double var = std::max(0.0, (sum_sq[slot] - runs * mean * mean) / (runs - 1.0));
          std_err = std::sqrt(var / runs);
        }
        out.push_back({grid.estimators[ei], grid.sample_sizes[si], grid.cells[ci].first,
                       grid.cells[ci].second, mean, std_err, grid.runs});
      }
    }
  }
  return out;
}

std::vector<ToyCell> run_toy_experiment(const ToyConfig& config) {
  config.validate();
  ToyGrid grid;
  grid.num_targets = config.num_targets;
  grid.arity = config.arity;
  grid.estimators = {config.estimator};
  grid.sample_sizes = {config.sample_size};
  grid.cells.clear();
  for (const std::size_t m : config.m_values) grid.cells.emplace_back(config.beam_size, m);
  grid.runs = config.runs;
  grid.seed = config.seed;
  grid.limit_precision = config.limit_precision;
  return run_toy_grid(grid);
}

std::string toy_csv(std::span<const ToyCell> cells) {
  std::ostringstream out;
  out.precision(17);
  out << "estimator,N,k,m,mean_regret,std_err,runs\n";
  for (const ToyCell& c : cells) {
    out << to_string(c.estimator) << ',' << c.sample_size.label() << ',' << c.k << ',' << c.m << ','
        << c.mean_regret << ',' << c.std_err << ',' << c.runs << '\n';
  }
  return out.str();
}

}  // namespace otm
