#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rumorgraph/augment.hpp"
#include "rumorgraph/features.hpp"
#include "rumorgraph/tensor.hpp"

namespace rumorgraph {

struct BiGatConfig {
  int feature_dim = 64;  // F_in
  int hidden_dim = 32;   // F'
  int heads_layer1 = 4;  // H
  int heads_layer2 = 4;  // K
  double dropout = 0.3;
  double leaky_slope = 0.2;
  /// Swaps which edge orientation feeds the top-down vs bottom-up stack.
  bool orientation_swap = false;
  std::uint64_t init_seed = 0;

  std::string to_json() const;
  static BiGatConfig from_json(const std::string& json_text);
};

/// Aggregation edge list: node dst[e] collects a message from src[e].
/// Sorted by dst so attention can softmax over contiguous segments.
struct AggregationEdges {
  std::vector<int> dst;
  std::vector<int> src;
};

/// One augmented graph lowered to dense tensors, ready for the model.
struct GraphInstance {
  std::string tree_id;
  Matrix features;  // n_nodes x F_in, virtual row all-zero
  AggregationEdges out_edges;  // dst aggregates over N_out(dst), self-loops included
  AggregationEdges in_edges;   // dst aggregates over N_in(dst), self-loops included
  int root_index = -1;
  int virtual_index = -1;
  int label = 0;
  int num_nodes() const { return features.rows; }
};

GraphInstance make_instance(const AugmentedGraph& graph, const FeatureMap& features);

struct GatHead {
  Parameter w_query;  // in_dim x out_dim (paper's W^T; row-vector convention)
  Parameter w_key;
  Parameter w_value;
  Parameter attn;  // 2*out_dim x 1
};

enum class HeadCombine { Concat, Mean };

struct GatLayer {
  std::vector<GatHead> heads;
  HeadCombine combine = HeadCombine::Concat;
  int in_dim = 0;
  int out_dim = 0;  // per-head F'
};

/// Attention aggregation over the supplied edge orientation. Scores
/// e_ij = LeakyReLU(a^T [Wq x_i || Wk x_j]) softmax-normalized per
/// destination; heads concatenated (optionally ReLU'd) or averaged.
Var gat_conv(Tape& tape, Var features, const AggregationEdges& edges, GatLayer& layer,
             double leaky_slope, double dropout_rate, bool training, bool relu_after_concat);

/// Two two-layer GAT stacks over opposite edge orientations, root-feature
/// concatenation into the second layer, 4F' fusion, 2-logit edge classifier.
class BiGatModel {
 public:
  explicit BiGatModel(BiGatConfig config);
  BiGatModel(const BiGatModel&) = delete;
  BiGatModel& operator=(const BiGatModel&) = delete;
  // Moves are safe: tapes only borrow Parameter pointers during a pass.
  BiGatModel(BiGatModel&&) = default;
  BiGatModel& operator=(BiGatModel&&) = default;

  const BiGatConfig& config() const { return config_; }
  /// Deterministic order, stable across runs; matches checkpoint layout.
  std::vector<Parameter*> parameters();
  void zero_grad();
  std::map<std::string, Matrix> snapshot() const;
  void restore(const std::map<std::string, Matrix>& values);

  struct DirectionalOutput {
    Var root;          // 1 x F'
    Var virtual_node;  // 1 x F'
  };

  DirectionalOutput td_forward(Tape& tape, const GraphInstance& instance, Var features,
                               bool training);
  DirectionalOutput bu_forward(Tape& tape, const GraphInstance& instance, Var features,
                               bool training);

  struct ClassifierOutput {
    Var logits;          // 1 x 2
    Var positive_logit;  // 1 x 1, index 1 of logits ("edge exists / rumor")
  };
  ClassifierOutput fuse_and_classify(Tape& tape, const DirectionalOutput& td,
                                     const DirectionalOutput& bu);

  /// Positive logit for one graph.
  Var forward_one(Tape& tape, const GraphInstance& instance, bool training);
  /// Column of positive logits, one per graph.
  Var forward_batch(Tape& tape, std::span<const GraphInstance* const> batch, bool training);

  void save(const std::filesystem::path& path) const;
  static BiGatModel load(const std::filesystem::path& path);

  GatLayer td1, td2, bu1, bu2;
  Parameter edge_weight;  // 4F' x 2
  Parameter edge_bias;    // 1 x 2

 private:
  DirectionalOutput directional_forward(Tape& tape, const GraphInstance& instance, Var features,
                                        const AggregationEdges& edges, GatLayer& layer1,
                                        GatLayer& layer2, bool training);

  BiGatConfig config_;
};

}  // namespace rumorgraph
