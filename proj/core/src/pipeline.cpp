#include "rumorgraph/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"
#include "rumorgraph/hashing.hpp"

namespace rumorgraph {

namespace {

double positive_f1(BiGatModel& model, const std::vector<GraphInstance>& instances) {
  long tp = 0, fp = 0, fn = 0;
  std::vector<double> scores = predict_scores(model, instances);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    bool predicted = scores[i] > 0.5;
    bool actual = instances[i].label == 1;
    if (predicted && actual) ++tp;
    else if (predicted && !actual) ++fp;
    else if (!predicted && actual) ++fn;
  }
  double precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  double recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace

TrainResult train(BiGatModel& model, const std::vector<GraphInstance>& train_set,
                  const std::vector<GraphInstance>& val_set, const TrainConfig& config) {
  if (train_set.empty() || val_set.empty()) {
    throw Error(ErrorCode::EmptySplit, "train and val splits must be non-empty");
  }
  long positives = 0;
  for (const auto& g : train_set) positives += (g.label == 1) ? 1 : 0;
  long negatives = static_cast<long>(train_set.size()) - positives;

  double pos_weight = config.pos_weight;
  if (pos_weight <= 0.0) {
    if (positives == 0 || negatives == 0) {
      throw Error(ErrorCode::DegenerateSplit,
                  "training split has a single class; pos_weight is undefined");
    }
    pos_weight = static_cast<double>(negatives) / static_cast<double>(positives);
  }

  AdamConfig adam;
  adam.lr = config.lr;
  adam.weight_decay = config.weight_decay;
  adam.decoupled_weight_decay = config.decoupled_weight_decay;
  auto params = model.parameters();

  EarlyStopper stopper(config.patience);
  TrainResult result;
  result.pos_weight = pos_weight;
  std::map<std::string, Matrix> best_snapshot = model.snapshot();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::mt19937_64 rng(splitmix64(config.seed ^ fnv1a64("epoch", static_cast<std::uint64_t>(epoch))));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batch_start = 0;
    int batch_index = 0;
    while (batch_start < order.size()) {
      std::size_t batch_end = std::min(batch_start + static_cast<std::size_t>(config.batch_size),
                                       order.size());
      std::vector<const GraphInstance*> batch;
      std::vector<double> labels, weights;
      for (std::size_t i = batch_start; i < batch_end; ++i) {
        const GraphInstance& g = train_set[order[i]];
        batch.push_back(&g);
        labels.push_back(static_cast<double>(g.label));
        weights.push_back(g.label == 1 ? pos_weight : 1.0);
      }

      Tape tape(splitmix64(config.seed ^ fnv1a64("dropout") ^
                           (static_cast<std::uint64_t>(epoch) << 20) ^
                           static_cast<std::uint64_t>(batch_index)));
      Var logits = model.forward_batch(tape, batch, /*training=*/true);
      Var loss = tape.weighted_bce_with_logits(logits, labels, weights);
      loss_sum += tape.value(loss).data[0] * static_cast<double>(batch.size());

      model.zero_grad();
      tape.backward(loss);
      adam_step(params, adam);

      batch_start = batch_end;
      ++batch_index;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.val_f1 = positive_f1(model, val_set);
    result.history.push_back(stats);

    bool stop = stopper.should_stop(stats.val_f1);
    if (stopper.best_epoch() == epoch) {
      best_snapshot = model.snapshot();
    }
    if (stop) break;
  }

  model.restore(best_snapshot);
  result.best_epoch = stopper.best_epoch();
  result.best_val_f1 = stopper.best();
  return result;
}

std::vector<double> predict_scores(BiGatModel& model,
                                   const std::vector<GraphInstance>& instances) {
  std::vector<double> scores;
  scores.reserve(instances.size());
  for (const auto& instance : instances) {
    Tape tape(0);
    Var logit = model.forward_one(tape, instance, /*training=*/false);
    double z = tape.value(logit).data[0];
    scores.push_back(z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                              : std::exp(z) / (1.0 + std::exp(z)));
  }
  return scores;
}

MetricsReport evaluate(BiGatModel& model, const std::vector<GraphInstance>& instances) {
  if (instances.empty()) throw Error(ErrorCode::EmptySplit, "evaluate: empty split");
  std::vector<double> scores = predict_scores(model, instances);
  std::vector<int> labels;
  labels.reserve(instances.size());
  for (const auto& g : instances) labels.push_back(g.label);

  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    bool predicted = scores[i] > 0.5;
    if (predicted && labels[i] == 1) ++tp;
    else if (predicted && labels[i] == 0) ++fp;
    else if (!predicted && labels[i] == 1) ++fn;
    else ++tn;
  }
  return metrics_from_confusion(tp, fp, fn, tn, compute_auc(scores, labels));
}

std::string history_to_csv(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_f1\n";
  for (const auto& row : history) {
    out << row.epoch << ',' << row.train_loss << ',' << row.val_f1 << '\n';
  }
  return out.str();
}

StandaloneOracleMetrics standalone_oracle_metrics(const std::vector<ScoredTree>& dataset,
                                                  double theta,
                                                  const std::vector<std::string>* only_trees) {
  std::set<std::string> filter;
  if (only_trees) filter.insert(only_trees->begin(), only_trees->end());

  StandaloneOracleMetrics m;
  long rumor_hits = 0, nonrumor_hits = 0;
  for (const auto& scored : dataset) {
    if (only_trees && !filter.count(scored.tree.event_id)) continue;
    for (const auto& [node, p] : scored.scores) {
      if (scored.tree.label == 1) {
        ++m.rumor_chains;
        if (p > theta) ++rumor_hits;
      } else {
        ++m.nonrumor_chains;
        if (p <= theta) ++nonrumor_hits;
      }
    }
  }
  m.acc_r = m.rumor_chains == 0
                ? 0.0
                : static_cast<double>(rumor_hits) / static_cast<double>(m.rumor_chains);
  m.acc_n = m.nonrumor_chains == 0
                ? 0.0
                : static_cast<double>(nonrumor_hits) / static_cast<double>(m.nonrumor_chains);
  return m;
}

std::vector<GraphInstance> build_instances(const std::vector<ScoredTree>& dataset, double theta,
                                           double gamma, const FeatureConfig& features,
                                           std::vector<AugmentedGraph>* graphs_out,
                                           int* fallback_count) {
  ThresholdConfig threshold;
  threshold.theta = theta;
  threshold.gamma = gamma;
  std::vector<GraphInstance> instances;
  instances.reserve(dataset.size());
  for (const auto& scored : dataset) {
    VirtualEdgeSelection selection = build_virtual_edges(scored, threshold);
    AugmentedGraph graph = augment_graph(scored.tree, selection.children, selection.fallback_used);
    if (fallback_count && selection.fallback_used) ++(*fallback_count);
    instances.push_back(make_instance(graph, extract_features(scored.tree, features)));
    if (graphs_out) graphs_out->push_back(std::move(graph));
  }
  return instances;
}

ExperimentResult run_experiment(const std::vector<ScoredTree>& dataset,
                                const ExperimentConfig& config,
                                const std::filesystem::path& out_dir,
                                BiGatModel* trained_model_out) {
  std::vector<PropagationTree> trees;
  trees.reserve(dataset.size());
  for (const auto& scored : dataset) trees.push_back(scored.tree);

  ExperimentResult result;
  result.split = split_dataset(trees, config.split_seed);

  result.theta = config.threshold.theta;
  if (config.threshold.theta_mode == ThetaMode::Youden) {
    // Fit on train+val subchains only; the test split stays untouched.
    std::set<std::string> fit_ids(result.split.train.begin(), result.split.train.end());
    fit_ids.insert(result.split.val.begin(), result.split.val.end());
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& scored : dataset) {
      if (!fit_ids.count(scored.tree.event_id)) continue;
      for (const auto& [node, p] : scored.scores) {
        scores.push_back(p);
        labels.push_back(scored.tree.label);
      }
    }
    try {
      result.theta = select_threshold_youden(scores, labels);
      result.youden_used = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingleClass) throw;
      result.theta = config.threshold.theta;  // documented fallback
    }
  }

  FeatureConfig features;
  features.dim = config.model.feature_dim;
  features.extractor_kind = config.extractor_kind;
  features.seed = config.feature_seed;
  features.external_path = config.external_features_path;

  std::vector<AugmentedGraph> graphs;
  std::vector<GraphInstance> instances = build_instances(
      dataset, result.theta, config.threshold.gamma, features, &graphs, &result.fallback_count);

  std::map<std::string, const GraphInstance*> by_id;
  for (const auto& inst : instances) by_id.emplace(inst.tree_id, &inst);
  auto collect = [&](const std::vector<std::string>& ids) {
    std::vector<GraphInstance> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(*by_id.at(id));
    return out;
  };
  std::vector<GraphInstance> train_set = collect(result.split.train);
  std::vector<GraphInstance> val_set = collect(result.split.val);
  std::vector<GraphInstance> test_set = collect(result.split.test);

  BiGatModel model(config.model);
  result.training = train(model, train_set, val_set, config.train);
  result.test_metrics = evaluate(model, test_set);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "splits.json", split_to_json(result.split) + "\n");
    std::ostringstream reports;
    for (const auto& graph : graphs) {
      reports << augmentation_report_json(graph, result.theta, config.threshold.gamma) << '\n';
    }
    write_text_file(out_dir / "augment.jsonl", reports.str());
    write_text_file(out_dir / "history.csv", history_to_csv(result.training.history));
    write_text_file(out_dir / "metrics.json", metrics_to_json(result.test_metrics) + "\n");
    model.save(out_dir / "checkpoint.json");
  }
  if (trained_model_out) *trained_model_out = std::move(model);
  return result;
}

std::vector<GammaSweepRow> sweep_gamma(const std::vector<ScoredTree>& dataset,
                                       const ExperimentConfig& base,
                                       const std::vector<double>& gammas,
                                       const std::filesystem::path& out_dir) {
  std::vector<GammaSweepRow> rows;
  for (double gamma : gammas) {
    ExperimentConfig config = base;
    config.threshold.gamma = gamma;
    std::filesystem::path run_dir;
    if (!out_dir.empty()) {
      std::ostringstream name;
      name << "gamma_" << static_cast<int>(std::lround(gamma * 100));
      run_dir = out_dir / name.str();
    }
    ExperimentResult result = run_experiment(dataset, config, run_dir);
    rows.push_back({gamma, result.theta, result.test_metrics});
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "sweep.json", gamma_sweep_to_json(rows) + "\n");
  }
  return rows;
}

std::string gamma_sweep_to_json(const std::vector<GammaSweepRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    arr.push_back({{"gamma_percent", std::lround(row.gamma * 100)},
                   {"theta", row.theta},
                   {"acc", row.metrics.accuracy},
                   {"rec", row.metrics.recall_r},
                   {"f1", row.metrics.f1_r},
                   {"prec", row.metrics.precision_r},
                   {"auc", row.metrics.auc}});
  }
  nlohmann::json doc = {{"schema_version", 1}, {"rows", arr}};
  return doc.dump();
}

}  // namespace rumorgraph
