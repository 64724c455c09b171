#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rumorgraph/augment.hpp"
#include "rumorgraph/bigat.hpp"
#include "rumorgraph/dataset.hpp"
#include "rumorgraph/metrics.hpp"

namespace rumorgraph {

struct TrainConfig {
  double lr = 5e-5;
  double weight_decay = 1e-3;
  double dropout = 0.3;
  int max_epochs = 150;
  int patience = 20;
  int batch_size = 16;
  std::uint64_t seed = 0;
  /// 0 means auto: the negative-to-positive ratio of the training split.
  double pos_weight = 0.0;
  bool decoupled_weight_decay = true;
};

/// Strict-improvement early stopping: stop once the metric has failed to
/// exceed the historical best for `patience` consecutive epochs.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  /// One call per epoch, in order. Returns true when training should stop
  /// after this epoch.
  bool should_stop(double metric) {
    ++epoch_;
    if (metric > best_) {
      best_ = metric;
      best_epoch_ = epoch_;
      stall_ = 0;
      return false;
    }
    ++stall_;
    return stall_ >= patience_;
  }

  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_seen() const { return epoch_; }

 private:
  int patience_;
  int epoch_ = 0;
  int stall_ = 0;
  double best_ = -1.0;
  int best_epoch_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  double pos_weight = 1.0;
};

/// Mini-batch Adam training with early stopping on validation F1 of the
/// positive class; the model is left holding the best-epoch weights.
/// Throws DegenerateSplit when the training split has a single class and
/// pos_weight is auto.
TrainResult train(BiGatModel& model, const std::vector<GraphInstance>& train_set,
                  const std::vector<GraphInstance>& val_set, const TrainConfig& config);

/// Confusion-matrix metrics at sigma(logit) > 0.5 plus AUC over the split.
MetricsReport evaluate(BiGatModel& model, const std::vector<GraphInstance>& instances);

/// Per-graph sigmoid scores in instance order, eval mode.
std::vector<double> predict_scores(BiGatModel& model,
                                   const std::vector<GraphInstance>& instances);

std::string history_to_csv(const std::vector<EpochStats>& history);

/// Chain-level judgment quality of raw oracle scores thresholded at theta;
/// the baseline the trained pipeline is compared against.
struct StandaloneOracleMetrics {
  double acc_r = 0.0;  // fraction of rumor-tree chains scored above theta
  double acc_n = 0.0;  // fraction of non-rumor-tree chains at or below theta
  long rumor_chains = 0;
  long nonrumor_chains = 0;
  double balanced_accuracy() const { return 0.5 * (acc_r + acc_n); }
};

StandaloneOracleMetrics standalone_oracle_metrics(
    const std::vector<ScoredTree>& dataset, double theta,
    const std::vector<std::string>* only_trees = nullptr);

struct ExperimentConfig {
  ThresholdConfig threshold;
  TrainConfig train;
  BiGatConfig model;
  std::uint64_t split_seed = 0;
  ExtractorKind extractor_kind = ExtractorKind::HashedBow;
  std::uint64_t feature_seed = 0;
  std::string external_features_path;
};

struct ExperimentResult {
  double theta = 0.5;
  bool youden_used = false;
  int fallback_count = 0;
  DatasetSplit split;
  TrainResult training;
  MetricsReport test_metrics;
};

/// score -> threshold -> augment -> train -> evaluate. Youden's threshold is
/// fit on train+val subchains only; a single-class fit falls back to the
/// fixed theta. Artifacts (splits, augmentation reports, checkpoint,
/// history, metrics) are written when out_dir is non-empty.
ExperimentResult run_experiment(const std::vector<ScoredTree>& dataset,
                                const ExperimentConfig& config,
                                const std::filesystem::path& out_dir = {},
                                BiGatModel* trained_model_out = nullptr);

struct GammaSweepRow {
  double gamma = 0.0;
  double theta = 0.0;
  MetricsReport metrics;
};

/// One experiment per gamma; the default grid is 10..30%.
std::vector<GammaSweepRow> sweep_gamma(const std::vector<ScoredTree>& dataset,
                                       const ExperimentConfig& base,
                                       const std::vector<double>& gammas,
                                       const std::filesystem::path& out_dir = {});

std::string gamma_sweep_to_json(const std::vector<GammaSweepRow>& rows);

/// Instances for every tree: virtual-edge selection at (theta, gamma),
/// augmentation, feature extraction.
std::vector<GraphInstance> build_instances(const std::vector<ScoredTree>& dataset, double theta,
                                           double gamma, const FeatureConfig& features,
                                           std::vector<AugmentedGraph>* graphs_out = nullptr,
                                           int* fallback_count = nullptr);

}  // namespace rumorgraph
