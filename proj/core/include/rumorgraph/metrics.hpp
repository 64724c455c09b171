#pragma once

#include <string>
#include <vector>

namespace rumorgraph {

/// Per-class classification metrics for one dataset split. Class R is the
/// positive (rumor) class, N the negative. Degenerate ratios (0/0) are
/// reported as 0.
struct MetricsReport {
  double accuracy = 0.0;
  double precision_r = 0.0, recall_r = 0.0, f1_r = 0.0;
  double precision_n = 0.0, recall_n = 0.0, f1_n = 0.0;
  double auc = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const { return tp + fp + fn + tn; }
  double balanced_accuracy() const { return 0.5 * (recall_r + recall_n); }
};

MetricsReport metrics_from_confusion(long tp, long fp, long fn, long tn, double auc);

/// Probability that a positive outranks a negative, ties counted half.
/// Throws SingleClass when only one label is present.
double compute_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// {"acc", "prec_r", "prec_n", "rec_r", "rec_n", "f1_r", "f1_n", "auc",
///  "confusion": [TP, FP, FN, TN]}
std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& json_text);

}  // namespace rumorgraph
