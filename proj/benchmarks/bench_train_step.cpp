#include <benchmark/benchmark.h>

#include "otm/trainer.hpp"

namespace {

// One minibatch worth of training pairs, gradients and an Adam update.
void BM_TrainStep(benchmark::State& state) {
  const auto method = static_cast<otm::TrainMethod>(state.range(0));
  otm::SyntheticSpec spec;
  spec.n_train = 100;
  spec.n_test = 0;
  spec.seed = 4;
  const auto data = otm::gen_synthetic(spec);
  const otm::Tree tree = otm::Tree::build_random(spec.num_targets, 2, 4);
  auto params = otm::LinearScorerParams::initialized(tree, spec.feature_dim, 4);
  otm::TrainConfig config;
  config.method = method;
  auto adam = otm::AdamState::for_params(params);
  otm::SparseGradient grads(tree.num_nodes(), spec.feature_dim);
  otm::Rng rng(5);
  const auto model = otm::required_model(method);
  for (auto _ : state) {
    const otm::NodeScorer snapshot(tree, params, model);
    grads.clear();
    for (const auto& inst : data.train.instances) {
      for (const auto& p : otm::instance_loss_nodes(inst, snapshot, config, rng)) {
        grads.add(p.node, otm::bce_grad(p.label, p.score), inst.features);
      }
    }
    otm::adam_step(params, grads, adam, config);
  }
  state.SetLabel(std::string(otm::to_string(method)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.train.size()));
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
