#include "rumorgraph/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"

namespace rumorgraph {

int min_virtual_edges(double gamma, std::size_t n) {
  if (gamma < 0.0 || gamma > 1.0) {
    throw Error(ErrorCode::ConfigConflict, "gamma must be in [0,1]");
  }
  // 1e-9 absorbs upward IEEE drift of decimal products (0.2*5 -> 1.0000...02);
  // no decimal gamma at desk-scale n lands within 1e-9 above an integer.
  double target = gamma * static_cast<double>(n);
  return static_cast<int>(std::ceil(target - 1e-9));
}

double select_threshold_youden(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorCode::ConfigConflict, "scores and labels must align and be non-empty");
  }
  std::size_t positives = 0;
  for (int y : labels) positives += (y == 1) ? 1u : 0u;
  if (positives == 0 || positives == labels.size()) {
    throw Error(ErrorCode::SingleClass, "Youden threshold needs both classes");
  }

  std::vector<double> unique_scores(scores);
  std::sort(unique_scores.begin(), unique_scores.end());
  unique_scores.erase(std::unique(unique_scores.begin(), unique_scores.end()),
                      unique_scores.end());

  std::vector<double> candidates = {0.0, 1.0};
  for (std::size_t i = 1; i < unique_scores.size(); ++i) {
    candidates.push_back(0.5 * (unique_scores[i - 1] + unique_scores[i]));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // J compared exactly: J = tp/P - fp/N has the same order as tp*N - fp*P.
  const long long pos_count = static_cast<long long>(positives);
  const long long neg_count = static_cast<long long>(labels.size() - positives);
  double best_theta = candidates.front();
  long long best_j_scaled = std::numeric_limits<long long>::min();
  for (double theta : candidates) {
    long long tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] > theta) {
        if (labels[i] == 1) ++tp;
        else ++fp;
      }
    }
    long long j_scaled = tp * neg_count - fp * pos_count;
    if (j_scaled > best_j_scaled) {  // strict, so ties keep the smaller theta
      best_j_scaled = j_scaled;
      best_theta = theta;
    }
  }
  return best_theta;
}

VirtualEdgeSelection build_virtual_edges(const ScoredTree& scored, const ThresholdConfig& config) {
  const auto children = scored.tree.child_ids();
  for (const auto& id : children) {
    if (!scored.scores.count(id)) {
      throw Error(ErrorCode::UnknownNode, "missing score for child '" + id + "'");
    }
  }

  VirtualEdgeSelection result;
  const std::size_t n = children.size();
  if (n == 0) return result;  // virtual node will just be isolated

  const int k = min_virtual_edges(config.gamma, n);
  for (const auto& id : children) {
    if (scored.scores.at(id) > config.theta) result.children.push_back(id);
  }
  if (static_cast<int>(result.children.size()) >= k) {
    return result;  // children are already id-sorted
  }

  // Fallback: top-k by score, ties broken by ascending node id.
  std::vector<std::string> ranked(children);
  std::stable_sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
    double pa = scored.scores.at(a), pb = scored.scores.at(b);
    if (pa != pb) return pa > pb;
    return a < b;
  });
  result.children.assign(ranked.begin(), ranked.begin() + k);
  std::sort(result.children.begin(), result.children.end());
  result.fallback_used = true;
  return result;
}

AugmentedGraph augment_graph(const PropagationTree& tree,
                             const std::vector<std::string>& selected_children,
                             bool fallback_used) {
  const std::vector<std::string> children = tree.child_ids();
  std::set<std::string> child_set(children.begin(), children.end());
  for (const auto& id : selected_children) {
    if (!child_set.count(id)) {
      throw Error(ErrorCode::UnknownChild, "selected node '" + id + "' is not a child of tree '" +
                                               tree.event_id + "'");
    }
  }

  AugmentedGraph graph;
  graph.tree = tree;
  graph.virtual_id = "__virtual__";
  while (tree.find(graph.virtual_id) != nullptr) graph.virtual_id += "_";
  graph.selected_children = selected_children;
  std::sort(graph.selected_children.begin(), graph.selected_children.end());
  graph.fallback_used = fallback_used;
  for (const auto& id : graph.selected_children) {
    graph.extra_edges.emplace_back(id, graph.virtual_id);
    graph.extra_edges.emplace_back(graph.virtual_id, id);
  }
  return graph;
}

std::string augmentation_report_json(const AugmentedGraph& graph, double theta, double gamma) {
  nlohmann::json doc = {{"tree", graph.tree.event_id},
                        {"theta", theta},
                        {"gamma", gamma},
                        {"selected", graph.selected_children},
                        {"fallback_used", graph.fallback_used}};
  return doc.dump();
}

}  // namespace rumorgraph
