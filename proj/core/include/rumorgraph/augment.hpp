#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rumorgraph/tree.hpp"

namespace rumorgraph {

/// A tree plus one oracle probability per non-root node.
struct ScoredTree {
  PropagationTree tree;
  std::map<std::string, double> scores;  // node_id -> p in [0,1]

  std::size_t num_children() const { return scores.size(); }
};

enum class ThetaMode { Fixed, Youden };

struct ThresholdConfig {
  double theta = 0.5;    // in (0,1)
  double gamma = 0.2;    // in [0,1]
  ThetaMode theta_mode = ThetaMode::Fixed;
};

/// Tree plus virtual node and the bidirectional edge set produced by the
/// threshold/fallback rule.
struct AugmentedGraph {
  PropagationTree tree;
  std::string virtual_id;
  std::vector<std::string> selected_children;  // E_v as a child set, id-sorted
  std::vector<std::pair<std::string, std::string>> extra_edges;  // both directions
  bool fallback_used = false;
};

/// Smallest integer >= gamma*n, robust to the usual binary rounding of
/// decimal gammas (0.2*5 must give 1, not 2).
int min_virtual_edges(double gamma, std::size_t n);

/// Maximizer of J(theta) = TPR - FPR with "score > theta" positive
/// semantics. Candidates are midpoints of consecutive sorted unique scores
/// plus sentinels 0 and 1; ties resolve to the smallest theta.
/// Throws SingleClass when labels are all equal.
double select_threshold_youden(const std::vector<double>& scores,
                               const std::vector<int>& labels);

/// The child set E_v: every child with score > theta when that set is large
/// enough, otherwise the top ceil(gamma*n) by score (ties by ascending id).
struct VirtualEdgeSelection {
  std::vector<std::string> children;  // id-sorted
  bool fallback_used = false;
};
VirtualEdgeSelection build_virtual_edges(const ScoredTree& scored, const ThresholdConfig& config);

/// Adds the virtual node and both edge directions for each selected child.
/// Throws UnknownChild when selection mentions a node outside the tree.
AugmentedGraph augment_graph(const PropagationTree& tree,
                             const std::vector<std::string>& selected_children,
                             bool fallback_used = false);

/// Report line for the augmentation artifact:
///   {"tree", "theta", "gamma", "selected", "fallback_used"}
std::string augmentation_report_json(const AugmentedGraph& graph, double theta, double gamma);

}  // namespace rumorgraph
