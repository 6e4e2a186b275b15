#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "otm/error.hpp"
#include "otm/metrics.hpp"
#include "otm/trainer.hpp"

using namespace otm;
using otm::testing::table_params;
using otm::testing::unit_x;

namespace {

Instance feature_free(std::vector<TargetId> targets) { return {{1.0}, std::move(targets), {}}; }

std::set<NodeId> as_set(const std::vector<NodeId>& v) { return {v.begin(), v.end()}; }

TrainConfig config_for(TrainMethod method, std::size_t k) {
  TrainConfig c;
  c.method = method;
  c.beam_size = k;
  return c;
}

}  // namespace

TEST_CASE("binary cross-entropy values") {
  CHECK(bce_loss(true, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(true, 40.0) < 1e-15);
  CHECK(bce_loss(false, -std::log(3.0)) == doctest::Approx(std::log(4.0 / 3.0)));
  CHECK(std::isfinite(bce_loss(false, 700.0)));
  CHECK(bce_grad(true, 0.0) == doctest::Approx(-0.5));
  CHECK(bce_grad(false, 0.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(bce_loss(true, std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
  CHECK_THROWS_AS(bce_grad(true, std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("loss gradient matches finite differences") {
  for (const bool z : {false, true}) {
    for (double g = -8.0; g <= 8.0; g += 0.35) {
      const double fd = otm::testing::central_difference([&](double v) { return bce_loss(z, v); }, g, 1e-5);
      const double an = bce_grad(z, g);
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
    }
  }
  for (const double g : {-2.0, 0.3, 5.0}) {
    const double fd = otm::testing::central_difference([&](double v) { return bce_loss(true, v); }, g, 1e-5);
    CHECK(fd == doctest::Approx(bce_grad(true, g)).epsilon(1e-6));
  }
}

TEST_CASE("PLT subsampling trains the children of positive nodes") {
  const Tree tree = otm::testing::seven_node_tree();
  const std::vector<TargetId> first{0};
  const auto sets = subsample_plt(tree, ground_truth_z(tree, first));
  REQUIRE(sets.size() == 2);
  CHECK(sets[0] == std::vector<NodeId>{1, 2});
  CHECK(sets[1] == std::vector<NodeId>{3, 4});

  for (const auto& level : subsample_plt(tree, ground_truth_z(tree, std::vector<TargetId>{}))) {
    CHECK(level.empty());
  }
  const std::vector<TargetId> all{0, 1, 2, 3};
  const auto full = subsample_plt(tree, ground_truth_z(tree, all));
  CHECK(full[0].size() == 2);
  CHECK(full[1].size() == 4);
}

TEST_CASE("TDM subsampling draws distinct same-level negatives") {
  const Tree tree = otm::testing::seven_node_tree();
  const std::vector<TargetId> first{0};
  const auto z = ground_truth_z(tree, first);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto sets = subsample_tdm(tree, z, 1, rng);
    CHECK(as_set(sets[0]) == std::set<NodeId>{1, 2});
    REQUIRE(sets[1].size() == 2);
    CHECK(as_set(sets[1]).count(3) == 1);
    const NodeId neg = sets[1][0] == 3 ? sets[1][1] : sets[1][0];
    CHECK(neg >= 4);
    CHECK(neg <= 6);
  }
  const auto none = subsample_tdm(tree, z, 0, rng);
  CHECK(none[0] == std::vector<NodeId>{1});
  CHECK(none[1] == std::vector<NodeId>{3});
  const auto clamp = subsample_tdm(tree, z, 10, rng);
  CHECK(as_set(clamp[1]) == std::set<NodeId>{3, 4, 5, 6});
}

TEST_CASE("TDM negatives are uniform and distinct on a wide level") {
  const Tree tree = Tree::build_random(64, 2, 3);
  const std::vector<TargetId> relevant{5, 9};
  const auto z = ground_truth_z(tree, relevant);
  Rng rng(2);
  std::vector<std::size_t> hits(tree.num_nodes(), 0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const auto sets = subsample_tdm(tree, z, 5, rng);
    const auto& leaves = sets.back();
    CHECK(as_set(leaves).size() == leaves.size());
    for (const NodeId n : leaves) {
      if (!z[n]) ++hits[n];
    }
  }
  // 62 candidates, 5 draws each time.
  const double expected = draws * 5.0 / 62.0;
  for (const NodeId n : tree.level_nodes(tree.height())) {
    if (z[n]) continue;
    CHECK(std::abs(double(hits[n]) - expected) < 5.0 * std::sqrt(expected));
  }
}

TEST_CASE("beam subsampling returns the expanded candidate sets") {
  const Tree tree = otm::testing::seven_node_tree();
  const auto params = table_params(tree, {1.0, 0.9, 0.8, 0.1, 0.7, 0.95, 0.2});
  const NodeScorer scorer(tree, params, ProbabilityModel::Direct);
  const auto greedy = subsample_beam(scorer, unit_x, 1);
  CHECK(greedy[0] == std::vector<NodeId>{1, 2});
  CHECK(greedy[1] == std::vector<NodeId>{3, 4});
  const auto full = subsample_beam(scorer, unit_x, 4);
  CHECK(full[1] == std::vector<NodeId>{3, 4, 5, 6});

  const Tree flat = Tree::build_random(3, 4, 0);
  const LinearScorerParams zeros(flat.num_nodes(), 1);
  const auto one_level = subsample_beam(NodeScorer(flat, zeros, ProbabilityModel::Direct), unit_x, 1);
  REQUIRE(one_level.size() == 1);
  CHECK(one_level[0].size() == 3);
}

TEST_CASE("training pairs per method") {
  const Tree tree = otm::testing::seven_node_tree();
  // Best-leaf probabilities for eta = (0.8, 0.7, 0.5, 0.4).
  const auto params = table_params(tree, {1.0, 0.8, 0.5, 0.8, 0.7, 0.5, 0.4});
  const NodeScorer direct(tree, params, ProbabilityModel::Direct);
  Rng rng(3);

  SUBCASE("OTM with no relevant targets labels every candidate 0") {
    const auto pairs = instance_loss_nodes(feature_free({}), direct, config_for(TrainMethod::OTM, 1), rng);
    CHECK(pairs.size() == 4);
    for (const auto& p : pairs) CHECK_FALSE(p.label);
  }

  SUBCASE("OTM(-OptEst) without pruning labels every node with ground truth") {
    const std::vector<TargetId> relevant{1, 3};
    const auto pairs = instance_loss_nodes(feature_free(relevant), direct,
                                           config_for(TrainMethod::OTM_minus_OptEst, 4), rng);
    const auto z = ground_truth_z(tree, relevant);
    REQUIRE(pairs.size() == 6);
    for (const auto& p : pairs) CHECK(p.label == z[p.node]);
  }

  SUBCASE("OTM relabels ancestors whose best leaf is irrelevant") {
    const std::vector<TargetId> relevant{1, 3};
    const auto pairs =
        instance_loss_nodes(feature_free(relevant), direct, config_for(TrainMethod::OTM, 4), rng);
    const auto z = ground_truth_z(tree, relevant);
    std::vector<int> label(tree.num_nodes(), -1);
    for (const auto& p : pairs) {
      label[p.node] = p.label;
      CHECK(p.score == doctest::Approx(score(params, unit_x, p.node)));
    }
    CHECK(label == std::vector<int>{-1, 0, 0, 0, 1, 0, 1});
    CHECK(z[2]);
  }

  SUBCASE("TDM and OTM(-BS) share the sampled nodes and differ in labels") {
    const std::vector<TargetId> relevant{1, 3};
    Rng a(9);
    Rng b(9);
    const auto tdm = instance_loss_nodes(feature_free(relevant), direct, config_for(TrainMethod::TDM, 1), a);
    const auto bs =
        instance_loss_nodes(feature_free(relevant), direct, config_for(TrainMethod::OTM_minus_BS, 1), b);
    REQUIRE(tdm.size() == bs.size());
    const auto z = ground_truth_z(tree, relevant);
    for (std::size_t i = 0; i < tdm.size(); ++i) {
      CHECK(tdm[i].node == bs[i].node);
      CHECK(tdm[i].label == z[tdm[i].node]);
    }
  }

  SUBCASE("PLT pairs always hang below a positive parent") {
    const NodeScorer plt(tree, params, ProbabilityModel::Hierarchical);
    const std::vector<TargetId> relevant{2};
    const auto pairs = instance_loss_nodes(feature_free(relevant), plt, config_for(TrainMethod::PLT, 1), rng);
    const auto z = ground_truth_z(tree, relevant);
    CHECK(pairs.size() == 4);
    for (const auto& p : pairs) {
      CHECK(z[tree.parent(p.node)]);
      CHECK(p.label == z[p.node]);
    }
  }

  SUBCASE("model mismatch") {
    CHECK_THROWS_AS(instance_loss_nodes(feature_free({}), direct, config_for(TrainMethod::PLT, 1), rng),
                    ConfigError);
    const NodeScorer plt(tree, params, ProbabilityModel::Hierarchical);
    CHECK_THROWS_AS(instance_loss_nodes(feature_free({}), plt, config_for(TrainMethod::OTM, 1), rng),
                    ConfigError);
  }
}

TEST_CASE("scorer queries per instance stay within the complexity bound") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng.below(1500);
    const std::size_t b = 2 + rng.below(3);
    const std::size_t k = 1 + rng.below(12);
    const Tree tree = Tree::build_random(m, b, rng.next_u64());
    const auto params = LinearScorerParams::initialized(tree, 3, rng.next_u64(), 1.0);
    std::vector<TargetId> relevant;
    for (TargetId t = 0; t < m; ++t) {
      if (rng.bernoulli(0.02)) relevant.push_back(t);
    }
    const Instance inst{{rng.normal(), rng.normal(), rng.normal()}, relevant, {}};
    const auto z = ground_truth_z(tree, relevant);

    for (const auto method : {TrainMethod::OTM, TrainMethod::OTM_minus_OptEst}) {
      QueryCounter counter;
      const NodeScorer scorer(tree, params, ProbabilityModel::Direct, &counter);
      instance_loss_nodes(inst, scorer, config_for(method, k), rng);
      CHECK(counter.queries <= tree.height() * (b * k + b * relevant.size()));
    }
    QueryCounter counter;
    const NodeScorer scorer(tree, params, ProbabilityModel::Direct, &counter);
    auto config = config_for(TrainMethod::TDM, k);
    const auto pairs = instance_loss_nodes(inst, scorer, config, rng);
    CHECK(pairs.size() <= z.positives().size() - 1 + tree.height() * config.negatives_per_level);
    CHECK(counter.queries <= pairs.size());
  }
}

TEST_CASE("sparse gradient of the training loss matches finite differences") {
  Rng rng(41);
  const Tree tree = Tree::build_random(40, 2, 1);
  auto params = LinearScorerParams::initialized(tree, 4, 2, 0.8);
  const Instance inst{{0.3, -1.2, 0.7, 2.0}, {3, 17, 28}, {}};
  const NodeScorer scorer(tree, params, ProbabilityModel::Direct);
  const auto pairs = instance_loss_nodes(inst, scorer, config_for(TrainMethod::OTM, 4), rng);

  SparseGradient grads(tree.num_nodes(), 4);
  for (const auto& p : pairs) grads.add(p.node, bce_grad(p.label, p.score), inst.features);

  const auto loss = [&](const LinearScorerParams& th) {
    double total = 0.0;
    for (const auto& p : pairs) total += bce_loss(p.label, score(th, inst.features, p.node));
    return total;
  };
  for (std::size_t slot = 0; slot < grads.nodes().size(); ++slot) {
    const NodeId n = grads.nodes()[slot];
    for (std::size_t j = 0; j <= 4; ++j) {
      double& theta = j < 4 ? params.weights(n)[j] : params.bias(n);
      const double saved = theta;
      const double h = 1e-5;
      theta = saved + h;
      const double up = loss(params);
      theta = saved - h;
      const double down = loss(params);
      theta = saved;
      const double fd = (up - down) / (2 * h);
      const double an = j < 4 ? grads.weight_grad(slot)[j] : grads.bias_grad(slot);
      CHECK(std::abs(fd - an) <= 1e-4 * std::max(1e-3, std::abs(an)));
    }
  }
}

TEST_CASE("Adam steps") {
  const Tree tree = otm::testing::seven_node_tree();
  LinearScorerParams params(tree.num_nodes(), 1);
  AdamState state = AdamState::for_params(params);
  TrainConfig config;
  config.learning_rate = 0.05;

  SparseGradient g(tree.num_nodes(), 1);
  g.add(3, 1.0, unit_x);
  adam_step(params, g, state, config);
  CHECK(state.step == 1);
  CHECK(params.weights(3)[0] == doctest::Approx(-0.05).epsilon(1e-6));
  CHECK(params.bias(3) == doctest::Approx(-0.05).epsilon(1e-6));
  for (const NodeId n : {1, 2, 4, 5, 6}) CHECK(params.bias(n) == 0.0);

  const auto before = params;
  SparseGradient zero(tree.num_nodes(), 1);
  zero.add(3, 0.0, unit_x);
  const double m_before = state.m_biases[3];
  adam_step(params, zero, state, config);
  CHECK(state.m_biases[3] == doctest::Approx(0.9 * m_before));

  SparseGradient other(tree.num_nodes(), 1);
  other.add(5, -2.0, unit_x);
  const auto snapshot = params;
  adam_step(params, other, state, config);
  for (NodeId n = 0; n < tree.num_nodes(); ++n) {
    if (n != 5) CHECK(params.bias(n) == snapshot.bias(n));
  }
  CHECK(params.bias(5) > 0.0);

  SparseGradient bad(tree.num_nodes(), 1);
  bad.add(4, std::numeric_limits<double>::quiet_NaN(), unit_x);
  const auto safe = params;
  CHECK_THROWS_AS(adam_step(params, bad, state, config), TrainingDiverged);
  CHECK(params == safe);
}

TEST_CASE("zero epochs return the initialization") {
  const auto data = gen_synthetic({16, 3, -1.0, 50, 10, 1});
  const Tree tree = Tree::build_random(16, 2, 1);
  TrainConfig config;
  config.epochs = 0;
  const auto init = LinearScorerParams::initialized(tree, 3, 5);
  const auto result = train(data.train, tree, ProbabilityModel::Direct, config, init);
  CHECK(result.params == init);
  CHECK(result.log.empty());
}

TEST_CASE("training rejects bad inputs") {
  const Tree tree = Tree::build_random(16, 2, 1);
  TrainConfig config;
  Dataset empty;
  empty.header.num_targets = 16;
  empty.header.feature_dim = 3;
  CHECK_THROWS_AS(train(empty, tree, ProbabilityModel::Direct, config), DataError);
  const auto data = gen_synthetic({16, 3, -1.0, 20, 5, 1});
  CHECK_THROWS_AS(train(data.train, Tree::build_random(8, 2, 1), ProbabilityModel::Direct, config),
                  DataError);
  config.learning_rate = -1.0;
  CHECK_THROWS_AS(train(data.train, tree, ProbabilityModel::Direct, config), ConfigError);
}

TEST_CASE("PLT loss falls every epoch on separable data") {
  Dataset data;
  data.header = {2, 1, 0.0, 0, "train"};
  Rng rng(7);
  for (int i = 0; i < 400; ++i) {
    const double x = rng.bernoulli(0.5) ? 1.0 + 0.2 * rng.normal() : -1.0 + 0.2 * rng.normal();
    data.instances.push_back({{x}, {x > 0 ? TargetId{0} : TargetId{1}}, {}});
  }
  const Tree tree = Tree::build_random(2, 2, 1);
  TrainConfig config;
  config.method = TrainMethod::PLT;
  config.epochs = 15;
  config.batch_size = 20;
  config.learning_rate = 0.05;
  const auto result = train(data, tree, ProbabilityModel::Hierarchical, config);
  REQUIRE(result.log.size() == 15);
  for (std::size_t e = 1; e < result.log.size(); ++e) {
    CHECK(result.log[e].mean_loss < result.log[e - 1].mean_loss);
  }
}

TEST_CASE("training is deterministic and improves regret") {
  const auto data = gen_synthetic({64, 5, -2.0, 1500, 200, 11});
  const Tree tree = Tree::build_random(64, 2, 11);
  TrainConfig config;
  config.method = TrainMethod::OTM;
  config.beam_size = 8;
  config.epochs = 5;
  config.batch_size = 50;
  config.learning_rate = 0.02;
  config.seed = 11;
  const auto a = train(data.train, tree, ProbabilityModel::Direct, config);
  const auto b = train(data.train, tree, ProbabilityModel::Direct, config);
  CHECK(a.params == b.params);
  CHECK(training_log_csv(a.log).substr(0, 30) == training_log_csv(b.log).substr(0, 30));

  const auto init = LinearScorerParams::initialized(tree, 5, config.seed, config.init_stddev);
  const std::vector<std::size_t> ms{1, 8};
  const auto before = estimated_regret(NodeScorer(tree, init, ProbabilityModel::Direct), data.test, 8, ms);
  const auto after = estimated_regret(NodeScorer(tree, a.params, ProbabilityModel::Direct), data.test, 8, ms);
  for (std::size_t i = 0; i < ms.size(); ++i) CHECK(after.mean_regret[i] < before.mean_regret[i]);
}

TEST_CASE("without pruning, OTM converges to nodes that copy their best child") {
  // Feature-free instances: every node sees the same x, so each probability
  // settles on the frequency of its pseudo target.
  const std::size_t m = 8;
  const std::vector<double> eta{0.15, 0.6, 0.35, 0.8, 0.5, 0.25, 0.7, 0.05};
  Dataset data;
  data.header = {m, 1, 0.0, 0, "train"};
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    std::vector<TargetId> relevant;
    for (TargetId t = 0; t < m; ++t) {
      if (rng.bernoulli(eta[t])) relevant.push_back(t);
    }
    data.instances.push_back({{1.0}, relevant, {}});
  }
  const Tree tree = Tree::build_random(m, 2, 5);
  TrainConfig config;
  config.method = TrainMethod::OTM;
  config.beam_size = m;
  config.epochs = 40;
  config.batch_size = 100;
  config.learning_rate = 0.05;
  const auto result = train(data, tree, ProbabilityModel::Direct, config);
  const NodeScorer scorer(tree, result.params, ProbabilityModel::Direct);
  for (NodeId n = 1; n < tree.num_nodes(); ++n) {
    if (tree.is_leaf(n)) continue;
    double best = 0.0;
    for (const NodeId c : tree.children(n)) best = std::max(best, scorer.relevance_prob(unit_x, c));
    CHECK(scorer.relevance_prob(unit_x, n) == doctest::Approx(best).epsilon(0.03));
  }
}

TEST_CASE("method names round-trip") {
  for (const auto m : {TrainMethod::PLT, TrainMethod::TDM, TrainMethod::OTM, TrainMethod::OTM_minus_BS,
                       TrainMethod::OTM_minus_OptEst}) {
    CHECK(parse_train_method(to_string(m)) == m);
  }
  CHECK(parse_train_method("OTM_minus_BS") == TrainMethod::OTM_minus_BS);
  CHECK(to_string(TrainMethod::OTM_minus_OptEst) == "OTM(-OptEst)");
  CHECK_THROWS_AS(parse_train_method("SGD"), std::invalid_argument);
  CHECK(required_model(TrainMethod::PLT) == ProbabilityModel::Hierarchical);
  CHECK(required_model(TrainMethod::OTM_minus_BS) == ProbabilityModel::Direct);
}
