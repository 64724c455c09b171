#include <benchmark/benchmark.h>

#include <random>

#include "rumorgraph/augment.hpp"
#include "rumorgraph/bigat.hpp"
#include "rumorgraph/features.hpp"
#include "rumorgraph/pipeline.hpp"
#include "rumorgraph/synth.hpp"
#include "rumorgraph/tensor.hpp"

using namespace rumorgraph;

namespace {

static void BM_FeatureHashing(benchmark::State& state) {
  std::string text =
      "breaking reports indicate multiple casualties after the incident downtown "
      "officials have not yet confirmed the numbers circulating on social media";
  for (auto _ : state) {
    benchmark::DoNotOptimize(hash_text_features(text, static_cast<int>(state.range(0)), 0));
  }
}
BENCHMARK(BM_FeatureHashing)->Arg(64)->Arg(256);

static void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Matrix a(n, n), b(n, n);
  for (double& v : a.data) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  for (double& v : b.data) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.value(tape.matmul(tape.leaf(a), tape.leaf(b))).data.data());
  }
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

static void BM_VirtualEdges(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ScoredTree scored;
  std::vector<PostRecord> records{{"root", std::nullopt, "r"}};
  for (int i = 0; i < n; ++i) {
    records.push_back({"c" + std::to_string(i), std::string("root"), "x"});
  }
  scored.tree = build_tree(records, "bench", 1);
  std::mt19937_64 rng(2);
  for (const auto& id : scored.tree.child_ids()) {
    scored.scores[id] = static_cast<double>(rng() % 1000) / 999.0;
  }
  ThresholdConfig config{0.9, 0.3, ThetaMode::Fixed};  // forces the fallback sort
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_virtual_edges(scored, config));
  }
}
BENCHMARK(BM_VirtualEdges)->Arg(100)->Arg(2000);

static void BM_YoudenThreshold(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    scores.push_back(static_cast<double>(rng() % 10000) / 9999.0);
    labels.push_back(static_cast<int>(rng() % 2));
  }
  labels[0] = 1;
  labels[1] = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_threshold_youden(scores, labels));
  }
}
BENCHMARK(BM_YoudenThreshold)->Arg(200)->Arg(2000);

static void BM_BiGatForwardBackward(benchmark::State& state) {
  SynthConfig synth;
  synth.n_trees = 10;
  synth.seed = 5;
  auto dataset = gen_synthetic_dataset(synth);
  BiGatConfig config;
  config.feature_dim = 64;
  config.hidden_dim = 32;
  config.heads_layer1 = 4;
  config.heads_layer2 = 4;
  BiGatModel model(config);
  FeatureConfig features;
  features.dim = config.feature_dim;
  auto instances = build_instances(dataset, 0.5, 0.2, features);
  std::vector<const GraphInstance*> batch;
  for (const auto& inst : instances) batch.push_back(&inst);
  std::vector<double> labels, weights;
  for (const auto& inst : instances) {
    labels.push_back(inst.label);
    weights.push_back(1.0);
  }
  for (auto _ : state) {
    Tape tape(7);
    Var logits = model.forward_batch(tape, batch, true);
    Var loss = tape.weighted_bce_with_logits(logits, labels, weights);
    model.zero_grad();
    tape.backward(loss);
    benchmark::DoNotOptimize(model.parameters()[0]->grad.data.data());
  }
}
BENCHMARK(BM_BiGatForwardBackward);

}  // namespace

BENCHMARK_MAIN();
