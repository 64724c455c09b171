#include "rumorgraph/bigat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"
#include "rumorgraph/hashing.hpp"

namespace rumorgraph {

namespace {

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data) {
    v = (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0) * limit;
  }
  return m;
}

GatLayer make_layer(const std::string& name, int num_heads, int in_dim, int out_dim,
                    HeadCombine combine, std::mt19937_64& rng) {
  GatLayer layer;
  layer.combine = combine;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.heads.reserve(static_cast<std::size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    std::string prefix = name + ".h" + std::to_string(h) + ".";
    GatHead head{
        Parameter(prefix + "query", glorot(in_dim, out_dim, rng)),
        Parameter(prefix + "key", glorot(in_dim, out_dim, rng)),
        Parameter(prefix + "value", glorot(in_dim, out_dim, rng)),
        Parameter(prefix + "attn", glorot(2 * out_dim, 1, rng)),
    };
    layer.heads.push_back(std::move(head));
  }
  return layer;
}

void sort_edges(AggregationEdges& edges) {
  std::vector<std::size_t> order(edges.dst.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (edges.dst[a] != edges.dst[b]) return edges.dst[a] < edges.dst[b];
    return edges.src[a] < edges.src[b];
  });
  AggregationEdges sorted;
  sorted.dst.reserve(order.size());
  sorted.src.reserve(order.size());
  for (std::size_t i : order) {
    sorted.dst.push_back(edges.dst[i]);
    sorted.src.push_back(edges.src[i]);
  }
  edges = std::move(sorted);
}

}  // namespace

std::string BiGatConfig::to_json() const {
  nlohmann::json doc = {{"feature_dim", feature_dim},
                        {"hidden_dim", hidden_dim},
                        {"heads_layer1", heads_layer1},
                        {"heads_layer2", heads_layer2},
                        {"dropout", dropout},
                        {"leaky_slope", leaky_slope},
                        {"orientation_swap", orientation_swap},
                        {"init_seed", init_seed}};
  return doc.dump();
}

BiGatConfig BiGatConfig::from_json(const std::string& json_text) {
  nlohmann::json doc = nlohmann::json::parse(json_text);
  BiGatConfig c;
  c.feature_dim = doc.at("feature_dim").get<int>();
  c.hidden_dim = doc.at("hidden_dim").get<int>();
  c.heads_layer1 = doc.at("heads_layer1").get<int>();
  c.heads_layer2 = doc.at("heads_layer2").get<int>();
  c.dropout = doc.value("dropout", 0.3);
  c.leaky_slope = doc.value("leaky_slope", 0.2);
  c.orientation_swap = doc.value("orientation_swap", false);
  c.init_seed = doc.value("init_seed", 0ULL);
  return c;
}

GraphInstance make_instance(const AugmentedGraph& graph, const FeatureMap& features) {
  const PropagationTree& tree = graph.tree;
  if (features.size() != tree.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature map must cover every tree node");
  }
  const int feature_dim = features.empty() ? 0 : static_cast<int>(features.begin()->second.size());

  GraphInstance inst;
  inst.tree_id = tree.event_id;
  inst.label = tree.label;

  std::map<std::string, int> index;
  for (const auto& node : tree.nodes) {
    index.emplace(node.id, static_cast<int>(index.size()));
  }
  inst.virtual_index = static_cast<int>(index.size());
  index.emplace(graph.virtual_id, inst.virtual_index);
  inst.root_index = index.at(tree.root().id);

  const int n = static_cast<int>(index.size());
  inst.features = Matrix(n, feature_dim);
  for (const auto& [id, vec] : features) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCode::UnknownNode, "feature for unknown node '" + id + "'");
    }
    if (static_cast<int>(vec.size()) != feature_dim) {
      throw Error(ErrorCode::ShapeMismatch, "inconsistent feature dims");
    }
    std::copy(vec.begin(), vec.end(),
              inst.features.data.begin() + static_cast<std::size_t>(it->second) * feature_dim);
  }
  // virtual node row stays zero: it starts with no feature information

  std::vector<std::pair<int, int>> directed;
  directed.reserve(tree.edges.size() + graph.extra_edges.size());
  for (const auto& [a, b] : tree.edges) directed.emplace_back(index.at(a), index.at(b));
  for (const auto& [a, b] : graph.extra_edges) directed.emplace_back(index.at(a), index.at(b));

  for (int i = 0; i < n; ++i) {
    inst.out_edges.dst.push_back(i);
    inst.out_edges.src.push_back(i);
    inst.in_edges.dst.push_back(i);
    inst.in_edges.src.push_back(i);
  }
  for (const auto& [a, b] : directed) {
    inst.out_edges.dst.push_back(a);  // a sees its out-neighbor b
    inst.out_edges.src.push_back(b);
    inst.in_edges.dst.push_back(b);  // b sees its in-neighbor a
    inst.in_edges.src.push_back(a);
  }
  sort_edges(inst.out_edges);
  sort_edges(inst.in_edges);
  return inst;
}

Var gat_conv(Tape& tape, Var features, const AggregationEdges& edges, GatLayer& layer,
             double leaky_slope, double dropout_rate, bool training, bool relu_after_concat) {
  const int n = tape.value(features).rows;
  if (tape.value(features).cols != layer.in_dim) {
    throw Error(ErrorCode::ShapeMismatch,
                "gat_conv: input dim " + std::to_string(tape.value(features).cols) +
                    " != layer in_dim " + std::to_string(layer.in_dim));
  }

  Var x = tape.dropout(features, dropout_rate, training);
  std::vector<Var> head_outputs;
  head_outputs.reserve(layer.heads.size());
  for (GatHead& head : layer.heads) {
    Var q = tape.matmul(x, tape.param(head.w_query));
    Var k = tape.matmul(x, tape.param(head.w_key));
    Var v = tape.matmul(x, tape.param(head.w_value));

    Var q_dst = tape.gather_rows(q, edges.dst);
    Var k_src = tape.gather_rows(k, edges.src);
    Var scores = tape.matmul(tape.concat_cols(q_dst, k_src), tape.param(head.attn));
    scores = tape.leaky_relu(scores, leaky_slope);
    Var alpha = tape.segment_softmax(scores, edges.dst);
    alpha = tape.dropout(alpha, dropout_rate, training);

    Var messages = tape.row_scale(tape.gather_rows(v, edges.src), alpha);
    head_outputs.push_back(tape.scatter_add_rows(messages, edges.dst, n));
  }

  if (layer.combine == HeadCombine::Concat) {
    Var combined = tape.concat_cols(head_outputs);
    return relu_after_concat ? tape.relu(combined) : combined;
  }
  Var sum = head_outputs[0];
  for (std::size_t h = 1; h < head_outputs.size(); ++h) sum = tape.add(sum, head_outputs[h]);
  return tape.scale(sum, 1.0 / static_cast<double>(head_outputs.size()));
}

BiGatModel::BiGatModel(BiGatConfig config) : config_(config) {
  std::mt19937_64 rng(splitmix64(config.init_seed) ^ 0xb16a7ULL);
  const int layer2_in = config.heads_layer1 * config.hidden_dim + config.feature_dim;
  td1 = make_layer("td1", config.heads_layer1, config.feature_dim, config.hidden_dim,
                   HeadCombine::Concat, rng);
  td2 = make_layer("td2", config.heads_layer2, layer2_in, config.hidden_dim, HeadCombine::Mean, rng);
  bu1 = make_layer("bu1", config.heads_layer1, config.feature_dim, config.hidden_dim,
                   HeadCombine::Concat, rng);
  bu2 = make_layer("bu2", config.heads_layer2, layer2_in, config.hidden_dim, HeadCombine::Mean, rng);
  // Classifier head starts at zero: logits begin at 0 for every graph, so
  // early decisions follow the learned direction instead of init noise.
  edge_weight = Parameter("edge.weight", Matrix(4 * config.hidden_dim, 2));
  edge_bias = Parameter("edge.bias", Matrix(1, 2));
}

std::vector<Parameter*> BiGatModel::parameters() {
  std::vector<Parameter*> out;
  for (GatLayer* layer : {&td1, &td2, &bu1, &bu2}) {
    for (GatHead& head : layer->heads) {
      out.push_back(&head.w_query);
      out.push_back(&head.w_key);
      out.push_back(&head.w_value);
      out.push_back(&head.attn);
    }
  }
  out.push_back(&edge_weight);
  out.push_back(&edge_bias);
  return out;
}

void BiGatModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::map<std::string, Matrix> BiGatModel::snapshot() const {
  std::map<std::string, Matrix> out;
  for (Parameter* p : const_cast<BiGatModel*>(this)->parameters()) out.emplace(p->name, p->value);
  return out;
}

void BiGatModel::restore(const std::map<std::string, Matrix>& values) {
  for (Parameter* p : parameters()) {
    auto it = values.find(p->name);
    if (it == values.end()) {
      throw Error(ErrorCode::MissingArtifact, "snapshot lacks parameter '" + p->name + "'");
    }
    if (!it->second.same_shape(p->value)) {
      throw Error(ErrorCode::ShapeMismatch, "snapshot shape mismatch for '" + p->name + "'");
    }
    p->value = it->second;
  }
}

BiGatModel::DirectionalOutput BiGatModel::directional_forward(
    Tape& tape, const GraphInstance& instance, Var features, const AggregationEdges& edges,
    GatLayer& layer1, GatLayer& layer2, bool training) {
  Var h1 = gat_conv(tape, features, edges, layer1, config_.leaky_slope, config_.dropout, training,
                    /*relu_after_concat=*/true);

  // Second layer consumes [h_j^(1) || x_r]: broadcast the root's raw feature
  // to every row, including the virtual node's.
  std::vector<int> root_rows(static_cast<std::size_t>(instance.num_nodes()), instance.root_index);
  Var root_broadcast = tape.gather_rows(features, root_rows);
  Var h2_input = tape.concat_cols(h1, root_broadcast);
  Var h2 = gat_conv(tape, h2_input, edges, layer2, config_.leaky_slope, config_.dropout, training,
                    /*relu_after_concat=*/false);

  DirectionalOutput out;
  out.root = tape.gather_rows(h2, {instance.root_index});
  out.virtual_node = tape.gather_rows(h2, {instance.virtual_index});
  return out;
}

BiGatModel::DirectionalOutput BiGatModel::td_forward(Tape& tape, const GraphInstance& instance,
                                                     Var features, bool training) {
  if (instance.virtual_index < 0 || instance.virtual_index >= instance.num_nodes()) {
    throw Error(ErrorCode::MissingVirtualNode, "instance '" + instance.tree_id + "' has no virtual node");
  }
  const AggregationEdges& edges =
      config_.orientation_swap ? instance.in_edges : instance.out_edges;
  return directional_forward(tape, instance, features, edges, td1, td2, training);
}

BiGatModel::DirectionalOutput BiGatModel::bu_forward(Tape& tape, const GraphInstance& instance,
                                                     Var features, bool training) {
  if (instance.virtual_index < 0 || instance.virtual_index >= instance.num_nodes()) {
    throw Error(ErrorCode::MissingVirtualNode, "instance '" + instance.tree_id + "' has no virtual node");
  }
  const AggregationEdges& edges =
      config_.orientation_swap ? instance.out_edges : instance.in_edges;
  return directional_forward(tape, instance, features, edges, bu1, bu2, training);
}

BiGatModel::ClassifierOutput BiGatModel::fuse_and_classify(Tape& tape, const DirectionalOutput& td,
                                                           const DirectionalOutput& bu) {
  std::array<Var, 4> parts{td.root, bu.root, td.virtual_node, bu.virtual_node};
  Var fused = tape.concat_cols(std::span<const Var>(parts));  // 1 x 4F'
  Var logits = tape.add(tape.matmul(fused, tape.param(edge_weight)), tape.param(edge_bias));
  // Positive class is index 1; select it with a constant column picker.
  Var picker = tape.leaf(Matrix::column({0.0, 1.0}));
  ClassifierOutput out;
  out.logits = logits;
  out.positive_logit = tape.matmul(logits, picker);
  return out;
}

Var BiGatModel::forward_one(Tape& tape, const GraphInstance& instance, bool training) {
  if (instance.features.cols != config_.feature_dim) {
    throw Error(ErrorCode::ShapeMismatch,
                "instance feature dim " + std::to_string(instance.features.cols) +
                    " != model feature dim " + std::to_string(config_.feature_dim));
  }
  Var features = tape.leaf(instance.features);
  DirectionalOutput td = td_forward(tape, instance, features, training);
  DirectionalOutput bu = bu_forward(tape, instance, features, training);
  return fuse_and_classify(tape, td, bu).positive_logit;
}

Var BiGatModel::forward_batch(Tape& tape, std::span<const GraphInstance* const> batch,
                              bool training) {
  if (batch.empty()) throw Error(ErrorCode::EmptySplit, "forward_batch: empty batch");
  std::vector<Var> logits;
  logits.reserve(batch.size());
  for (const GraphInstance* instance : batch) {
    logits.push_back(forward_one(tape, *instance, training));
  }
  return tape.concat_rows(logits);
}

void BiGatModel::save(const std::filesystem::path& path) const {
  auto params = const_cast<BiGatModel*>(this)->parameters();
  std::vector<const Parameter*> view(params.begin(), params.end());
  save_checkpoint(path, view, config_.to_json());
}

BiGatModel BiGatModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  BiGatModel model(BiGatConfig::from_json(ckpt.config_json));
  model.restore(ckpt.params);
  return model;
}

}  // namespace rumorgraph
