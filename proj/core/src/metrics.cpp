#include "rumorgraph/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"

namespace rumorgraph {

namespace {

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1(double precision, double recall) {
  return safe_ratio(2.0 * precision * recall, precision + recall);
}

}  // namespace

MetricsReport metrics_from_confusion(long tp, long fp, long fn, long tn, double auc) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.auc = auc;
  double total = static_cast<double>(tp + fp + fn + tn);
  r.accuracy = safe_ratio(static_cast<double>(tp + tn), total);
  r.precision_r = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  r.recall_r = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  r.f1_r = f1(r.precision_r, r.recall_r);
  r.precision_n = safe_ratio(static_cast<double>(tn), static_cast<double>(tn + fn));
  r.recall_n = safe_ratio(static_cast<double>(tn), static_cast<double>(tn + fp));
  r.f1_n = f1(r.precision_n, r.recall_n);
  return r;
}

double compute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorCode::ConfigConflict, "scores and labels must align and be non-empty");
  }
  long positives = std::count(labels.begin(), labels.end(), 1);
  long negatives = static_cast<long>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::SingleClass, "AUC needs both classes");
  }

  // Rank-sum formulation with average ranks over ties; equals the
  // pairwise P(s_pos > s_neg) + 0.5 P(tie).
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += avg_rank;
    }
    i = j;
  }
  double auc = (positive_rank_sum -
                static_cast<double>(positives) * (static_cast<double>(positives) + 1.0) / 2.0) /
               (static_cast<double>(positives) * static_cast<double>(negatives));
  return auc;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json doc = {{"schema_version", 1},
                        {"acc", r.accuracy},
                        {"prec_r", r.precision_r},
                        {"prec_n", r.precision_n},
                        {"rec_r", r.recall_r},
                        {"rec_n", r.recall_n},
                        {"f1_r", r.f1_r},
                        {"f1_n", r.f1_n},
                        {"auc", r.auc},
                        {"confusion", {r.tp, r.fp, r.fn, r.tn}}};
  return doc.dump();
}

MetricsReport metrics_from_json(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad metrics JSON: ") + e.what());
  }
  auto confusion = doc.at("confusion");
  MetricsReport r = metrics_from_confusion(confusion.at(0).get<long>(), confusion.at(1).get<long>(),
                                           confusion.at(2).get<long>(), confusion.at(3).get<long>(),
                                           doc.at("auc").get<double>());
  return r;
}

}  // namespace rumorgraph
