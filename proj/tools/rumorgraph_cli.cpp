// rumorgraph: LLM-assisted propagation-graph rumor detection.
// Subcommands compose into the full workflow:
//   ingest -> score -> augment -> train -> eval
// plus `simulate` (synthetic end-to-end bias study) and `sweep-gamma`.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rumorgraph/augment.hpp"
#include "rumorgraph/bigat.hpp"
#include "rumorgraph/dataset.hpp"
#include "rumorgraph/error.hpp"
#include "rumorgraph/metrics.hpp"
#include "rumorgraph/oracle.hpp"
#include "rumorgraph/pipeline.hpp"
#include "rumorgraph/score_cache.hpp"
#include "rumorgraph/synth.hpp"

namespace rg = rumorgraph;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string data;
  std::string out = "out";
  std::string oracle = "mock";
  std::string profile = "oracle-perfect";
  std::string oracle_name;  // overrides the derived cache key
  double theta = 0.5;
  std::string theta_mode = "youden";
  double gamma = 0.2;
  std::uint64_t seed = 0;
  int max_concurrency = 100;
  bool orientation_swap = false;
  int batch_size = 16;
  int epochs = 150;
  int patience = 20;
  // model / feature knobs
  int dim = 64;
  int hidden = 32;
  int heads = 4;
  int heads2 = 4;
  double dropout = 0.3;
  double lr = 5e-5;
  double weight_decay = 1e-3;
  std::uint64_t feature_seed = 0;
  // live oracle
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-4o-mini";
  std::string step1_template, step2_template, rules_file;
  // simulate / sweep
  int trees = 400;
  double balance = 0.5;
  std::string scores_path;
  std::string augment_path;
  std::string checkpoint_path;
  std::string features_file;
  std::string split_name = "test";
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw rg::Error(rg::ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw rg::Error(rg::ErrorCode::MissingArtifact, "cannot read '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

rg::OracleConfig oracle_config(const CommonOpts& opts) {
  rg::OracleConfig config;
  config.kind = (opts.oracle == "live") ? rg::OracleKind::Live : rg::OracleKind::Mock;
  config.endpoint = opts.endpoint;
  config.model = opts.model_name;
  config.max_concurrency = opts.max_concurrency;
  config.profile = rg::make_bias_profile(opts.profile, opts.seed);
  config.step1_template_path = opts.step1_template;
  config.step2_template_path = opts.step2_template;
  config.rules_path = opts.rules_file;
  if (config.kind == rg::OracleKind::Live && !opts.out.empty()) {
    std::filesystem::create_directories(opts.out);
    config.kb_path = (fs::path(opts.out) / "kb.jsonl").string();
  }
  return config;
}

std::string resolved_oracle_name(const CommonOpts& opts) {
  if (!opts.oracle_name.empty()) return opts.oracle_name;
  return rg::make_oracle(oracle_config(opts))->name();
}

std::vector<rg::PropagationTree> load_trees(const CommonOpts& opts) {
  if (opts.data.empty()) {
    throw rg::Error(rg::ErrorCode::ConfigConflict, "--data is required for this command");
  }
  rg::LoadReport report = rg::load_dataset(opts.data);
  if (report.trees.empty()) {
    throw rg::Error(rg::ErrorCode::MissingArtifact, "no usable trees in '" + opts.data + "'");
  }
  return std::move(report.trees);
}

/// Trees joined with their cached scores; every chain must be covered.
std::vector<rg::ScoredTree> load_scored(const CommonOpts& opts,
                                        const std::vector<rg::PropagationTree>& trees) {
  fs::path scores = opts.scores_path.empty() ? fs::path(opts.out) / "scores.jsonl"
                                             : fs::path(opts.scores_path);
  if (!fs::exists(scores)) {
    throw rg::Error(rg::ErrorCode::MissingArtifact,
                    "score file '" + scores.string() + "' not found; run `score` first");
  }
  rg::ScoreCache cache(scores);
  const std::string oracle = resolved_oracle_name(opts);
  std::vector<rg::ScoredTree> out;
  out.reserve(trees.size());
  for (const auto& tree : trees) {
    rg::ScoredTree scored;
    scored.tree = tree;
    for (const auto& chain : rg::enumerate_subchains(tree)) {
      auto p = cache.get({tree.event_id, chain.target_id, oracle});
      if (!p) {
        throw rg::Error(rg::ErrorCode::MissingArtifact,
                        "no score for tree '" + tree.event_id + "' node '" + chain.target_id +
                            "' under oracle '" + oracle + "'; run `score` first");
      }
      scored.scores[chain.target_id] = *p;
    }
    out.push_back(std::move(scored));
  }
  return out;
}

rg::ExperimentConfig experiment_config(const CommonOpts& opts) {
  rg::ExperimentConfig config;
  config.threshold.theta = opts.theta;
  config.threshold.gamma = opts.gamma;
  config.threshold.theta_mode =
      (opts.theta_mode == "fixed") ? rg::ThetaMode::Fixed : rg::ThetaMode::Youden;
  config.train.lr = opts.lr;
  config.train.weight_decay = opts.weight_decay;
  config.train.dropout = opts.dropout;
  config.train.max_epochs = opts.epochs;
  config.train.patience = opts.patience;
  config.train.batch_size = opts.batch_size;
  config.train.seed = opts.seed;
  config.model.feature_dim = opts.dim;
  config.model.hidden_dim = opts.hidden;
  config.model.heads_layer1 = opts.heads;
  config.model.heads_layer2 = opts.heads2;
  config.model.dropout = opts.dropout;
  config.model.orientation_swap = opts.orientation_swap;
  config.model.init_seed = opts.seed;
  config.split_seed = opts.seed;
  config.feature_seed = opts.feature_seed;
  if (!opts.features_file.empty()) {
    config.extractor_kind = rg::ExtractorKind::ExternalFile;
    config.external_features_path = opts.features_file;
  }
  return config;
}

/// theta actually used for augmentation, honoring --theta-mode.
double resolve_theta(const CommonOpts& opts, const std::vector<rg::ScoredTree>& dataset,
                     const rg::DatasetSplit& split, bool* youden_used = nullptr) {
  if (youden_used) *youden_used = false;
  if (opts.theta_mode == "fixed") return opts.theta;
  std::set<std::string> fit_ids(split.train.begin(), split.train.end());
  fit_ids.insert(split.val.begin(), split.val.end());
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
    double theta = rg::select_threshold_youden(scores, labels);
    if (youden_used) *youden_used = true;
    return theta;
  } catch (const rg::Error& e) {
    if (e.code() != rg::ErrorCode::SingleClass) throw;
    return opts.theta;
  }
}

/// Augmentation reports from a prior `augment` run, keyed by tree id.
std::map<std::string, rg::VirtualEdgeSelection> load_augment_reports(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw rg::Error(rg::ErrorCode::MissingArtifact, "cannot read '" + path.string() + "'");
  std::map<std::string, rg::VirtualEdgeSelection> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json doc = json::parse(line);
    rg::VirtualEdgeSelection selection;
    selection.children = doc.at("selected").get<std::vector<std::string>>();
    selection.fallback_used = doc.value("fallback_used", false);
    out[doc.at("tree").get<std::string>()] = std::move(selection);
  }
  return out;
}

std::vector<rg::GraphInstance> instances_from(const CommonOpts& opts,
                                              const std::vector<rg::ScoredTree>& dataset,
                                              double theta, int feature_dim) {
  rg::FeatureConfig features;
  features.dim = feature_dim;
  features.seed = opts.feature_seed;
  if (!opts.features_file.empty()) {
    features.extractor_kind = rg::ExtractorKind::ExternalFile;
    features.external_path = opts.features_file;
  }

  std::vector<rg::GraphInstance> instances;
  instances.reserve(dataset.size());
  if (!opts.augment_path.empty()) {
    auto reports = load_augment_reports(opts.augment_path);
    for (const auto& scored : dataset) {
      auto it = reports.find(scored.tree.event_id);
      if (it == reports.end()) {
        throw rg::Error(rg::ErrorCode::MissingArtifact,
                        "no augmentation report for tree '" + scored.tree.event_id + "'");
      }
      auto graph = rg::augment_graph(scored.tree, it->second.children, it->second.fallback_used);
      instances.push_back(rg::make_instance(graph, rg::extract_features(scored.tree, features)));
    }
    return instances;
  }
  return rg::build_instances(dataset, theta, opts.gamma, features);
}

std::vector<rg::GraphInstance> filter_split(const std::vector<rg::GraphInstance>& instances,
                                            const std::vector<std::string>& ids) {
  std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<rg::GraphInstance> out;
  for (const auto& inst : instances) {
    if (keep.count(inst.tree_id)) out.push_back(inst);
  }
  return out;
}

void print_metrics(const rg::MetricsReport& m) {
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "  acc " << m.accuracy << "  auc " << m.auc << "  balanced_acc "
            << m.balanced_accuracy() << '\n';
  std::cout << "  class R: prec " << m.precision_r << "  rec " << m.recall_r << "  f1 " << m.f1_r
            << '\n';
  std::cout << "  class N: prec " << m.precision_n << "  rec " << m.recall_n << "  f1 " << m.f1_n
            << '\n';
  std::cout << "  confusion [tp fp fn tn]: " << m.tp << ' ' << m.fp << ' ' << m.fn << ' ' << m.tn
            << '\n';
}

// ---------------------------------------------------------------------------

int cmd_ingest(const CommonOpts& opts) {
  rg::LoadReport report = rg::load_dataset(opts.data);
  fs::create_directories(opts.out);
  rg::save_dataset_jsonl(report.trees, fs::path(opts.out) / "dataset.jsonl");

  long rumor = 0;
  for (const auto& tree : report.trees) rumor += tree.label;
  long non_rumor = static_cast<long>(report.trees.size()) - rumor;

  json summary = {{"schema_version", 1},
                  {"non_rumor", non_rumor},
                  {"rumor", rumor},
                  {"total", report.trees.size()},
                  {"removed_no_reply", report.removed_no_reply},
                  {"skipped_malformed", report.skipped_malformed}};
  write_file(fs::path(opts.out) / "ingest_summary.json", summary.dump() + "\n");

  for (const auto& msg : report.messages) std::cerr << msg << '\n';
  std::cout << "non_rumor rumor total\n"
            << non_rumor << ' ' << rumor << ' ' << report.trees.size() << '\n'
            << "removed (no replies): " << report.removed_no_reply << '\n'
            << "skipped (malformed): " << report.skipped_malformed << '\n'
            << "wrote " << (fs::path(opts.out) / "dataset.jsonl").string() << '\n';
  return 0;
}

int cmd_score(const CommonOpts& opts) {
  auto trees = load_trees(opts);
  fs::create_directories(opts.out);
  fs::path cache_path =
      opts.scores_path.empty() ? fs::path(opts.out) / "scores.jsonl" : fs::path(opts.scores_path);
  rg::ScoreCache cache(cache_path);
  for (const auto& warning : cache.warnings()) std::cerr << warning << '\n';

  auto oracle = rg::make_oracle(oracle_config(opts));
  rg::ScoreTreeStats stats;
  for (const auto& tree : trees) {
    rg::score_tree(*oracle, tree, &cache, opts.max_concurrency, &stats);
  }
  std::cout << "oracle " << oracle->name() << ": scored " << trees.size() << " trees, "
            << stats.score_calls << " scoring calls, " << stats.kb_calls << " knowledge-base calls, "
            << stats.cache_hits << " cache hits\n"
            << "scores in " << cache_path.string() << '\n';
  return 0;
}

int cmd_augment(const CommonOpts& opts) {
  auto trees = load_trees(opts);
  auto dataset = load_scored(opts, trees);
  rg::DatasetSplit split = rg::split_dataset(trees, opts.seed);
  bool youden_used = false;
  double theta = resolve_theta(opts, dataset, split, &youden_used);

  fs::create_directories(opts.out);
  std::ostringstream reports;
  int fallback_count = 0;
  rg::ThresholdConfig threshold{theta, opts.gamma, rg::ThetaMode::Fixed};
  for (const auto& scored : dataset) {
    auto selection = rg::build_virtual_edges(scored, threshold);
    auto graph = rg::augment_graph(scored.tree, selection.children, selection.fallback_used);
    if (selection.fallback_used) ++fallback_count;
    reports << rg::augmentation_report_json(graph, theta, opts.gamma) << '\n';
  }
  write_file(fs::path(opts.out) / "augment.jsonl", reports.str());
  write_file(fs::path(opts.out) / "splits.json", rg::split_to_json(split) + "\n");
  json threshold_doc = {{"schema_version", 1},
                        {"theta", theta},
                        {"theta_mode", youden_used ? "youden" : "fixed"},
                        {"gamma", opts.gamma}};
  write_file(fs::path(opts.out) / "threshold.json", threshold_doc.dump() + "\n");

  std::cout << "theta " << theta << (youden_used ? " (youden)" : " (fixed)") << ", gamma "
            << opts.gamma << ", fallback used on " << fallback_count << "/" << dataset.size()
            << " trees\n"
            << "wrote " << (fs::path(opts.out) / "augment.jsonl").string() << '\n';
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  auto trees = load_trees(opts);
  auto dataset = load_scored(opts, trees);
  rg::DatasetSplit split = rg::split_dataset(trees, opts.seed);
  double theta = resolve_theta(opts, dataset, split);

  auto instances = instances_from(opts, dataset, theta, opts.dim);
  auto train_set = filter_split(instances, split.train);
  auto val_set = filter_split(instances, split.val);

  rg::ExperimentConfig config = experiment_config(opts);
  rg::BiGatModel model(config.model);
  rg::TrainResult result = rg::train(model, train_set, val_set, config.train);

  fs::create_directories(opts.out);
  model.save(fs::path(opts.out) / "checkpoint.json");
  write_file(fs::path(opts.out) / "history.csv", rg::history_to_csv(result.history));
  write_file(fs::path(opts.out) / "splits.json", rg::split_to_json(split) + "\n");
  json summary = {{"schema_version", 1},
                  {"theta", theta},
                  {"gamma", opts.gamma},
                  {"best_epoch", result.best_epoch},
                  {"best_val_f1", result.best_val_f1},
                  {"pos_weight", result.pos_weight},
                  {"epochs_run", result.history.size()}};
  write_file(fs::path(opts.out) / "train_summary.json", summary.dump() + "\n");

  std::cout << "trained " << result.history.size() << " epochs, best epoch " << result.best_epoch
            << " (val f1 " << result.best_val_f1 << "), pos_weight " << result.pos_weight << '\n'
            << "checkpoint " << (fs::path(opts.out) / "checkpoint.json").string() << '\n';
  return 0;
}

int cmd_eval(const CommonOpts& opts) {
  auto trees = load_trees(opts);
  auto dataset = load_scored(opts, trees);
  rg::DatasetSplit split = rg::split_dataset(trees, opts.seed);
  double theta = resolve_theta(opts, dataset, split);

  fs::path ckpt = opts.checkpoint_path.empty() ? fs::path(opts.out) / "checkpoint.json"
                                               : fs::path(opts.checkpoint_path);
  rg::BiGatModel model = rg::BiGatModel::load(ckpt);

  auto instances = instances_from(opts, dataset, theta, model.config().feature_dim);
  std::vector<rg::GraphInstance> subset;
  if (opts.split_name == "train") subset = filter_split(instances, split.train);
  else if (opts.split_name == "val") subset = filter_split(instances, split.val);
  else if (opts.split_name == "all") subset = instances;
  else subset = filter_split(instances, split.test);

  rg::MetricsReport metrics = rg::evaluate(model, subset);
  fs::create_directories(opts.out);
  write_file(fs::path(opts.out) / "metrics.json", rg::metrics_to_json(metrics) + "\n");
  std::cout << "split " << opts.split_name << " (" << subset.size() << " trees)\n";
  print_metrics(metrics);
  std::cout << "wrote " << (fs::path(opts.out) / "metrics.json").string() << '\n';
  return 0;
}

int cmd_simulate(const CommonOpts& opts) {
  rg::SynthConfig synth;
  synth.n_trees = opts.trees;
  synth.positive_fraction = opts.balance;
  synth.profile = rg::make_bias_profile(opts.profile, opts.seed);
  synth.seed = opts.seed;
  auto dataset = rg::gen_synthetic_dataset(synth);

  fs::create_directories(opts.out);
  {
    std::vector<rg::PropagationTree> trees;
    for (const auto& s : dataset) trees.push_back(s.tree);
    rg::save_dataset_jsonl(trees, fs::path(opts.out) / "dataset.jsonl");
    rg::ScoreCache cache(fs::path(opts.out) / "scores.jsonl");
    std::string oracle = "mock:" + synth.profile.name;
    for (const auto& s : dataset) {
      for (const auto& [node, p] : s.scores) cache.put({s.tree.event_id, node, oracle}, p);
    }
  }

  rg::ExperimentConfig config = experiment_config(opts);
  rg::ExperimentResult result = rg::run_experiment(dataset, config, opts.out);

  rg::StandaloneOracleMetrics standalone = standalone_oracle_metrics(
      dataset, synth.profile.calibration_theta, &result.split.test);
  double delta = result.test_metrics.balanced_accuracy() - standalone.balanced_accuracy();

  json report = {{"schema_version", 1},
                 {"profile", synth.profile.name},
                 {"trees", opts.trees},
                 {"theta", result.theta},
                 {"gamma", opts.gamma},
                 {"standalone", {{"acc_r", standalone.acc_r},
                                 {"acc_n", standalone.acc_n},
                                 {"balanced_acc", standalone.balanced_accuracy()}}},
                 {"pipeline", {{"balanced_acc", result.test_metrics.balanced_accuracy()},
                               {"metrics", json::parse(rg::metrics_to_json(result.test_metrics))}}},
                 {"delta_balanced_acc", delta}};
  write_file(fs::path(opts.out) / "simulate_report.json", report.dump() + "\n");

  std::cout << std::fixed << std::setprecision(4);
  std::cout << "profile " << synth.profile.name << ", " << opts.trees << " trees, theta "
            << result.theta << '\n';
  std::cout << "standalone oracle (test chains): acc_r " << standalone.acc_r << "  acc_n "
            << standalone.acc_n << "  balanced " << standalone.balanced_accuracy() << '\n';
  std::cout << "pipeline (test trees):\n";
  print_metrics(result.test_metrics);
  std::cout << "balanced-accuracy delta: " << (delta >= 0 ? "+" : "") << delta << '\n';
  return 0;
}

int cmd_sweep_gamma(const CommonOpts& opts) {
  std::vector<rg::ScoredTree> dataset;
  if (!opts.data.empty()) {
    auto trees = load_trees(opts);
    dataset = load_scored(opts, trees);
  } else {
    rg::SynthConfig synth;
    synth.n_trees = opts.trees;
    synth.positive_fraction = opts.balance;
    synth.profile = rg::make_bias_profile(opts.profile, opts.seed);
    synth.seed = opts.seed;
    dataset = rg::gen_synthetic_dataset(synth);
  }

  rg::ExperimentConfig base = experiment_config(opts);
  std::vector<double> gammas = {0.10, 0.15, 0.20, 0.25, 0.30};
  auto rows = rg::sweep_gamma(dataset, base, gammas, opts.out);

  std::cout << std::fixed << std::setprecision(4);
  std::cout << "gamma(%)    Acc.    Rec.      F1   Prec.     AUC\n";
  for (const auto& row : rows) {
    std::cout << std::setw(8) << std::lround(row.gamma * 100) << std::setw(8) << row.metrics.accuracy
              << std::setw(8) << row.metrics.recall_r << std::setw(8) << row.metrics.f1_r
              << std::setw(8) << row.metrics.precision_r << std::setw(8) << row.metrics.auc << '\n';
  }
  std::cout << "wrote " << (fs::path(opts.out) / "sweep.json").string() << '\n';
  return 0;
}

void add_common_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--data", opts.data, "Dataset: directory of tree JSON files or a JSONL file");
  cmd->add_option("--out", opts.out, "Output directory for artifacts");
  cmd->add_option("--oracle", opts.oracle, "Oracle kind")->check(CLI::IsMember({"mock", "live"}));
  cmd->add_option("--profile", opts.profile,
                  "Mock bias profile: conservative, aggressive, oracle-perfect");
  cmd->add_option("--oracle-name", opts.oracle_name, "Score-cache oracle key override");
  cmd->add_option("--theta", opts.theta, "Fixed threshold / fallback when Youden degenerates");
  cmd->add_option("--theta-mode", opts.theta_mode, "Threshold selection")
      ->check(CLI::IsMember({"fixed", "youden"}));
  cmd->add_option("--gamma", opts.gamma, "Minimum virtual-edge fraction")->default_val(0.2);
  cmd->add_option("--seed", opts.seed, "Master seed (splits, init, shuffling, mock oracle)");
  cmd->add_option("--max-concurrency", opts.max_concurrency, "In-flight oracle request bound");
  cmd->add_flag("--orientation-swap", opts.orientation_swap,
                "Swap the edge orientation feeding the two directional stacks");
  cmd->add_option("--batch-size", opts.batch_size, "Training mini-batch size");
  cmd->add_option("--epochs", opts.epochs, "Maximum training epochs");
  cmd->add_option("--patience", opts.patience, "Early-stopping patience");
  cmd->add_option("--dim", opts.dim, "Feature dimension F_in");
  cmd->add_option("--hidden", opts.hidden, "Hidden dimension F'");
  cmd->add_option("--heads", opts.heads, "Layer-1 attention heads H");
  cmd->add_option("--heads2", opts.heads2, "Layer-2 attention heads K");
  cmd->add_option("--dropout", opts.dropout, "Dropout rate");
  cmd->add_option("--lr", opts.lr, "Learning rate");
  cmd->add_option("--weight-decay", opts.weight_decay, "Weight decay");
  cmd->add_option("--feature-seed", opts.feature_seed, "Feature-hashing seed");
  cmd->add_option("--endpoint", opts.endpoint, "Chat-completions endpoint (live)");
  cmd->add_option("--model", opts.model_name, "Model name (live)");
  cmd->add_option("--step1-template", opts.step1_template, "Knowledge-base prompt template file");
  cmd->add_option("--step2-template", opts.step2_template, "Scoring prompt template file");
  cmd->add_option("--rules", opts.rules_file, "Evaluation-rules text file");
  cmd->add_option("--scores", opts.scores_path, "Score cache path (default <out>/scores.jsonl)");
  cmd->add_option("--features-file", opts.features_file,
                  "Use stored node vectors (JSONL) instead of hashed text features");
  cmd->add_option("--augment", opts.augment_path, "Reuse augmentation reports from this file");
  cmd->add_option("--checkpoint", opts.checkpoint_path, "Checkpoint path for eval");
  cmd->add_option("--split", opts.split_name, "Split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  cmd->add_option("--trees", opts.trees, "Synthetic dataset size");
  cmd->add_option("--balance", opts.balance, "Synthetic positive fraction");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-assisted propagation-graph rumor detection"};
  app.require_subcommand(1);
  CommonOpts opts;

  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and write the canonical JSONL");
  auto* score = app.add_subcommand("score", "Score every subchain with the configured oracle");
  auto* augment = app.add_subcommand("augment", "Select theta and emit virtual-edge reports");
  auto* train = app.add_subcommand("train", "Train the Bi-GAT link predictor");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  auto* simulate =
      app.add_subcommand("simulate", "Synthetic end-to-end run: biased oracle vs full pipeline");
  auto* sweep = app.add_subcommand("sweep-gamma", "Run the gamma ablation grid (10..30%)");
  for (CLI::App* cmd : {ingest, score, augment, train, eval, simulate, sweep}) {
    add_common_flags(cmd, opts);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: ConfigConflict: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(opts);
    if (*score) return cmd_score(opts);
    if (*augment) return cmd_augment(opts);
    if (*train) return cmd_train(opts);
    if (*eval) return cmd_eval(opts);
    if (*simulate) return cmd_simulate(opts);
    if (*sweep) return cmd_sweep_gamma(opts);
  } catch (const rg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
