#include <doctest.h>

#include <cmath>
#include <random>

#include "rumorgraph/bigat.hpp"
#include "rumorgraph/error.hpp"
#include "test_util.hpp"

using namespace rumorgraph;

namespace {

// ---------------------------------------------------------------------------
// Independent straight-line recomputation of the layer equations with plain
// loops — no tape, no shared code with the implementation under test.

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Mat from_matrix(const Matrix& m) {
  Mat out(static_cast<std::size_t>(m.rows), Vec(static_cast<std::size_t>(m.cols)));
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) out[i][j] = m(i, j);
  }
  return out;
}

Vec project(const Vec& x, const Matrix& w) {  // x (in) * w (in x out)
  Vec out(static_cast<std::size_t>(w.cols), 0.0);
  for (int i = 0; i < w.rows; ++i) {
    for (int j = 0; j < w.cols; ++j) out[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i)] * w(i, j);
  }
  return out;
}

double leaky(double v, double slope) { return v > 0.0 ? v : slope * v; }

Mat naive_gat(const Mat& x, const AggregationEdges& edges, const GatLayer& layer, double slope) {
  const std::size_t n = x.size();
  Mat per_head_sum(n, Vec(layer.heads.size() * static_cast<std::size_t>(layer.out_dim), 0.0));
  for (std::size_t h = 0; h < layer.heads.size(); ++h) {
    const GatHead& head = layer.heads[h];
    for (std::size_t i = 0; i < n; ++i) {
      // neighborhood of i under this orientation
      std::vector<int> nbr;
      for (std::size_t e = 0; e < edges.dst.size(); ++e) {
        if (edges.dst[e] == static_cast<int>(i)) nbr.push_back(edges.src[e]);
      }
      Vec qi = project(x[i], head.w_query.value);
      std::vector<double> scores;
      for (int j : nbr) {
        Vec kj = project(x[static_cast<std::size_t>(j)], head.w_key.value);
        double s = 0.0;
        for (int d = 0; d < layer.out_dim; ++d) {
          s += head.attn.value(d, 0) * qi[static_cast<std::size_t>(d)];
          s += head.attn.value(layer.out_dim + d, 0) * kj[static_cast<std::size_t>(d)];
        }
        scores.push_back(leaky(s, slope));
      }
      double denom = 0.0;
      for (double s : scores) denom += std::exp(s);
      for (std::size_t idx = 0; idx < nbr.size(); ++idx) {
        double alpha = std::exp(scores[idx]) / denom;
        Vec vj = project(x[static_cast<std::size_t>(nbr[idx])], head.w_value.value);
        for (int d = 0; d < layer.out_dim; ++d) {
          per_head_sum[i][h * static_cast<std::size_t>(layer.out_dim) + d] +=
              alpha * vj[static_cast<std::size_t>(d)];
        }
      }
    }
  }
  return per_head_sum;  // heads side by side; caller combines
}

Mat naive_stack(const Mat& x, const AggregationEdges& edges, const GatLayer& layer1,
                const GatLayer& layer2, int root, double slope) {
  Mat h1 = naive_gat(x, edges, layer1, slope);
  for (auto& row : h1) {
    for (double& v : row) v = std::max(v, 0.0);  // ReLU after concat
  }
  Mat h2_in(h1.size());
  for (std::size_t i = 0; i < h1.size(); ++i) {
    h2_in[i] = h1[i];
    h2_in[i].insert(h2_in[i].end(), x[static_cast<std::size_t>(root)].begin(),
                    x[static_cast<std::size_t>(root)].end());
  }
  Mat h2_heads = naive_gat(h2_in, edges, layer2, slope);
  // average the K heads
  Mat h2(h2_heads.size(), Vec(static_cast<std::size_t>(layer2.out_dim), 0.0));
  const std::size_t k = layer2.heads.size();
  for (std::size_t i = 0; i < h2_heads.size(); ++i) {
    for (std::size_t h = 0; h < k; ++h) {
      for (int d = 0; d < layer2.out_dim; ++d) {
        h2[i][static_cast<std::size_t>(d)] +=
            h2_heads[i][h * static_cast<std::size_t>(layer2.out_dim) + d] / static_cast<double>(k);
      }
    }
  }
  return h2;
}

double naive_positive_logit(BiGatModel& model, const GraphInstance& inst) {
  Mat x = from_matrix(inst.features);
  Mat td = naive_stack(x, inst.out_edges, model.td1, model.td2, inst.root_index,
                       model.config().leaky_slope);
  Mat bu = naive_stack(x, inst.in_edges, model.bu1, model.bu2, inst.root_index,
                       model.config().leaky_slope);
  Vec fused;
  auto append = [&fused](const Vec& v) { fused.insert(fused.end(), v.begin(), v.end()); };
  append(td[static_cast<std::size_t>(inst.root_index)]);
  append(bu[static_cast<std::size_t>(inst.root_index)]);
  append(td[static_cast<std::size_t>(inst.virtual_index)]);
  append(bu[static_cast<std::size_t>(inst.virtual_index)]);
  Vec z = project(fused, model.edge_weight.value);
  return z[1] + model.edge_bias.value(0, 1);
}

GraphInstance fixture_instance(const BiGatConfig& config, int children, std::uint64_t seed,
                               const std::vector<std::string>& selected) {
  PropagationTree tree = testutil::star_tree(children, "fix", 1);
  AugmentedGraph graph = augment_graph(tree, selected);
  FeatureConfig features;
  features.dim = config.feature_dim;
  features.seed = seed;
  return make_instance(graph, extract_features(tree, features));
}

/// The classifier head starts zeroed; give it random weight so forward
/// comparisons and gradient checks exercise the full chain.
void randomize_head(BiGatModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (double& v : model.edge_weight.value.data) {
    v = 0.4 * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
  }
  for (double& v : model.edge_bias.value.data) {
    v = 0.1 * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
  }
}

BiGatConfig small_config() {
  BiGatConfig config;
  config.feature_dim = 8;
  config.hidden_dim = 4;
  config.heads_layer1 = 2;
  config.heads_layer2 = 2;
  config.dropout = 0.0;
  return config;
}

}  // namespace

TEST_CASE("make_instance: layout, self loops, virtual feature row") {
  PropagationTree tree = testutil::star_tree(3, "t", 1);
  AugmentedGraph graph = augment_graph(tree, {"c1"});
  FeatureConfig fc;
  fc.dim = 4;
  GraphInstance inst = make_instance(graph, extract_features(tree, fc));

  CHECK(inst.num_nodes() == 5);  // root + 3 children + virtual
  CHECK(inst.virtual_index == 4);
  CHECK(inst.label == 1);
  // node order is id-sorted: c0 c1 c2 root, then virtual
  CHECK(inst.root_index == 3);
  for (int j = 0; j < 4; ++j) CHECK(inst.features(inst.virtual_index, j) == 0.0);

  // 5 self loops + 3 tree edges + 2 virtual edges in each orientation
  CHECK(inst.out_edges.dst.size() == 10);
  CHECK(inst.in_edges.dst.size() == 10);
  // out-neighbors of the root are its children plus itself
  int root_out = 0;
  for (std::size_t e = 0; e < inst.out_edges.dst.size(); ++e) {
    if (inst.out_edges.dst[e] == inst.root_index) ++root_out;
  }
  CHECK(root_out == 4);
  // segments arrive sorted for the softmax
  for (std::size_t e = 1; e < inst.out_edges.dst.size(); ++e) {
    CHECK(inst.out_edges.dst[e] >= inst.out_edges.dst[e - 1]);
  }
}

TEST_CASE("gat_conv: isolated node with one head is h = x W_v") {
  std::mt19937_64 rng(5);
  GatLayer layer;
  layer.in_dim = 3;
  layer.out_dim = 2;
  layer.combine = HeadCombine::Concat;
  Matrix wq(3, 2), wk(3, 2), wv(3, 2);
  for (int i = 0; i < 6; ++i) {
    wq.data[i] = 0.1 * i;
    wk.data[i] = 0.2 * i;
    wv.data[i] = 0.3 * i + 0.1;
  }
  layer.heads.push_back({Parameter("q", wq), Parameter("k", wk), Parameter("v", wv),
                         Parameter("a", Matrix::column({0.5, -0.5, 0.25, 0.75}))});

  Tape tape;
  Matrix x = Matrix::row({1.0, 2.0, -1.0});
  AggregationEdges self_only{{0}, {0}};
  Var out = gat_conv(tape, tape.leaf(x), self_only, layer, 0.2, 0.0, false, false);
  // alpha over the singleton neighborhood is 1, so out = x * W_v
  for (int j = 0; j < 2; ++j) {
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) expected += x(0, i) * wv(i, j);
    CHECK(tape.value(out)(0, j) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gat_conv: zero query/key weights give uniform attention") {
  GatLayer layer;
  layer.in_dim = 2;
  layer.out_dim = 2;
  layer.combine = HeadCombine::Concat;
  Matrix wv(2, 2);
  wv(0, 0) = 1.0;
  wv(1, 1) = 1.0;  // identity: messages are raw features
  layer.heads.push_back({Parameter("q", Matrix(2, 2)), Parameter("k", Matrix(2, 2)),
                         Parameter("v", wv), Parameter("a", Matrix(4, 1))});

  // two mutually connected nodes with self loops
  AggregationEdges edges{{0, 0, 1, 1}, {0, 1, 0, 1}};
  Matrix x(2, 2);
  x(0, 0) = 2.0;
  x(1, 1) = 4.0;
  Tape tape;
  Var out = gat_conv(tape, tape.leaf(x), edges, layer, 0.2, 0.0, false, false);
  // uniform alpha = 1/2: h_i = mean(x_0, x_1) for both nodes
  for (int i = 0; i < 2; ++i) {
    CHECK(tape.value(out)(i, 0) == doctest::Approx(1.0));
    CHECK(tape.value(out)(i, 1) == doctest::Approx(2.0));
  }
}

TEST_CASE("gat_conv: attention sums to one over each neighborhood") {
  // identity W_v over one-hot features turns each output row into its own
  // attention row, exposing alpha directly.
  std::mt19937_64 rng(6);
  const int n = 5;
  GatLayer layer;
  layer.in_dim = n;
  layer.out_dim = n;
  layer.combine = HeadCombine::Concat;
  Matrix eye(n, n);
  for (int i = 0; i < n; ++i) eye(i, i) = 1.0;
  Matrix wq(n, n), wk(n, n);
  for (double& v : wq.data) v = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  for (double& v : wk.data) v = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  Matrix attn(2 * n, 1);
  for (double& v : attn.data) v = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  layer.heads.push_back(
      {Parameter("q", wq), Parameter("k", wk), Parameter("v", eye), Parameter("a", attn)});

  PropagationTree tree = testutil::star_tree(3, "alpha", 0);
  AugmentedGraph graph = augment_graph(tree, {"c0", "c2"});
  FeatureConfig fc;
  fc.dim = n;
  GraphInstance inst = make_instance(graph, extract_features(tree, fc));
  Matrix one_hot(n, n);
  for (int i = 0; i < n; ++i) one_hot(i, i) = 1.0;

  for (const AggregationEdges* edges : {&inst.out_edges, &inst.in_edges}) {
    Tape tape;
    Var out = gat_conv(tape, tape.leaf(one_hot), *edges, layer, 0.2, 0.0, false, false);
    const Matrix& alpha = tape.value(out);
    for (int i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        CHECK(alpha(i, j) >= 0.0);
        row_sum += alpha(i, j);
      }
      CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("directional stacks: output dims are (F', F') and layer1 is H*F'") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 6; ++trial) {
    BiGatConfig config;
    config.feature_dim = 2 + static_cast<int>(rng() % 10);
    config.hidden_dim = 1 + static_cast<int>(rng() % 8);
    config.heads_layer1 = 1 + static_cast<int>(rng() % 4);
    config.heads_layer2 = 1 + static_cast<int>(rng() % 4);
    config.dropout = 0.0;
    BiGatModel model(config);
    GraphInstance inst = fixture_instance(config, 4, rng(), {"c1", "c2"});

    Tape tape;
    Var features = tape.leaf(inst.features);
    Var h1 = gat_conv(tape, features, inst.out_edges, model.td1, config.leaky_slope, 0.0, false,
                      true);
    CHECK(tape.value(h1).cols == config.heads_layer1 * config.hidden_dim);

    auto td = model.td_forward(tape, inst, features, false);
    CHECK(tape.value(td.root).rows == 1);
    CHECK(tape.value(td.root).cols == config.hidden_dim);
    CHECK(tape.value(td.virtual_node).cols == config.hidden_dim);
    auto bu = model.bu_forward(tape, inst, features, false);
    CHECK(tape.value(bu.root).cols == config.hidden_dim);

    auto cls = model.fuse_and_classify(tape, td, bu);
    CHECK(tape.value(cls.logits).cols == 2);
    CHECK(tape.value(cls.positive_logit).rows == 1);
    CHECK(tape.value(cls.positive_logit).cols == 1);
  }
}

TEST_CASE("fuse_and_classify: zero inputs and weights leave z = b_edge") {
  BiGatConfig config = small_config();
  BiGatModel model(config);
  model.edge_weight.value = Matrix(4 * config.hidden_dim, 2);
  model.edge_bias.value = Matrix::row({0.25, -1.5});

  Tape tape;
  Var zero = tape.leaf(Matrix(1, config.hidden_dim));
  BiGatModel::DirectionalOutput td{zero, zero}, bu{zero, zero};
  auto cls = model.fuse_and_classify(tape, td, bu);
  CHECK(tape.value(cls.logits)(0, 0) == 0.25);
  CHECK(tape.value(cls.logits)(0, 1) == -1.5);
  CHECK(tape.value(cls.positive_logit)(0, 0) == -1.5);  // index 1 is the positive class
}

TEST_CASE("model forward matches the naive straight-line recomputation") {
  BiGatConfig config = small_config();
  config.init_seed = 99;
  BiGatModel model(config);
  randomize_head(model, 501);
  GraphInstance inst = fixture_instance(config, 4, 7, {"c0", "c3"});

  Tape tape;
  Var logit = model.forward_one(tape, inst, false);
  double expected = naive_positive_logit(model, inst);
  CHECK(tape.value(logit)(0, 0) == doctest::Approx(expected).epsilon(1e-10));

  // and under the swapped orientation
  BiGatConfig swapped = config;
  swapped.orientation_swap = true;
  BiGatModel model2(swapped);
  model2.restore(model.snapshot());
  GraphInstance inst2 = inst;
  std::swap(inst2.out_edges, inst2.in_edges);  // manual swap == flag swap
  Tape tape2;
  Var logit2 = model2.forward_one(tape2, inst, false);
  Tape tape3;
  Var logit3 = model.forward_one(tape3, inst2, false);
  CHECK(tape2.value(logit2)(0, 0) == doctest::Approx(tape3.value(logit3)(0, 0)).epsilon(1e-12));
}

TEST_CASE("bu on reversed edges equals td on the original") {
  BiGatConfig config = small_config();
  BiGatModel model(config);
  GraphInstance inst = fixture_instance(config, 5, 3, {"c1"});

  // feeding td's layers with in_edges reproduces bu with td-weights
  Tape tape;
  Var features = tape.leaf(inst.features);
  Var via_td_weights = gat_conv(tape, features, inst.in_edges, model.td1, config.leaky_slope, 0.0,
                                false, true);
  GraphInstance reversed = inst;
  std::swap(reversed.out_edges, reversed.in_edges);
  Var via_reversed = gat_conv(tape, features, reversed.out_edges, model.td1, config.leaky_slope,
                              0.0, false, true);
  CHECK(tape.value(via_td_weights).data == tape.value(via_reversed).data);
}

TEST_CASE("message nullity: with all-zero value weights, edges cannot move the logit") {
  BiGatConfig config = small_config();
  BiGatModel model(config);
  for (GatLayer* layer : {&model.td1, &model.td2, &model.bu1, &model.bu2}) {
    for (GatHead& head : layer->heads) {
      head.w_value.value = Matrix(head.w_value.value.rows, head.w_value.value.cols);
    }
  }
  GraphInstance bare = fixture_instance(config, 4, 2, {});
  GraphInstance wired = fixture_instance(config, 4, 2, {"c0", "c1", "c2", "c3"});
  Tape tape;
  double a = tape.value(model.forward_one(tape, bare, false))(0, 0);
  double b = tape.value(model.forward_one(tape, wired, false))(0, 0);
  CHECK(a == doctest::Approx(b).epsilon(1e-15));
}

TEST_CASE("permuting node ids leaves the logit unchanged") {
  BiGatConfig config = small_config();
  config.init_seed = 31;
  BiGatModel model(config);
  randomize_head(model, 502);

  // same structure and texts, one tree with ids that sort differently
  auto build = [&](const std::vector<std::string>& ids) {
    std::vector<PostRecord> records;
    records.push_back({ids[0], std::nullopt, "origin text"});
    records.push_back({ids[1], ids[0], "first reply"});
    records.push_back({ids[2], ids[0], "second reply"});
    records.push_back({ids[3], ids[2], "nested reply"});
    PropagationTree tree = build_tree(records, "perm", 1);
    AugmentedGraph graph = augment_graph(tree, {ids[1], ids[3]});
    FeatureConfig fc;
    fc.dim = config.feature_dim;
    return make_instance(graph, extract_features(tree, fc));
  };
  GraphInstance a = build({"r", "a", "b", "c"});
  GraphInstance b = build({"zzz", "m01", "aa", "k9"});

  Tape ta, tb;
  double la = ta.value(model.forward_one(ta, a, false))(0, 0);
  double lb = tb.value(model.forward_one(tb, b, false))(0, 0);
  CHECK(la == doctest::Approx(lb).epsilon(1e-12));
}

TEST_CASE("batch forward: duplicates identical, eval bit-reproducible, loss decomposes") {
  BiGatConfig config = small_config();
  BiGatModel model(config);
  randomize_head(model, 503);
  GraphInstance g1 = fixture_instance(config, 3, 1, {"c0"});
  GraphInstance g2 = fixture_instance(config, 5, 2, {"c1", "c4"});
  g2.label = 0;

  std::vector<const GraphInstance*> batch = {&g1, &g2, &g1};
  Tape tape;
  Var logits = model.forward_batch(tape, batch, false);
  const Matrix& z = tape.value(logits);
  REQUIRE(z.rows == 3);
  CHECK(z(0, 0) == z(2, 0));  // duplicate graph, identical logit

  Tape tape_again;
  Var repeat = model.forward_batch(tape_again, batch, false);
  CHECK(tape_again.value(repeat).data == z.data);  // bit-for-bit in eval mode

  // batch loss equals the hand-computed weighted mean of per-sample losses
  std::vector<double> labels = {1.0, 0.0, 1.0};
  std::vector<double> weights = {3.0, 1.0, 3.0};
  Tape tape_loss;
  Var batch_logits = model.forward_batch(tape_loss, batch, false);
  Var loss = tape_loss.weighted_bce_with_logits(batch_logits, labels, weights);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    double zi = z(i, 0);
    double yi = labels[static_cast<std::size_t>(i)];
    double sig = 1.0 / (1.0 + std::exp(-zi));
    expected += -weights[static_cast<std::size_t>(i)] *
                (yi * std::log(sig) + (1.0 - yi) * std::log(1.0 - sig));
  }
  expected /= 3.0;
  CHECK(tape_loss.value(loss)(0, 0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("end-to-end gradients match finite differences on a small fixture") {
  BiGatConfig config;
  config.feature_dim = 4;
  config.hidden_dim = 2;
  config.heads_layer1 = 2;
  config.heads_layer2 = 2;
  config.dropout = 0.0;
  config.init_seed = 17;
  BiGatModel model(config);
  randomize_head(model, 504);
  GraphInstance inst = fixture_instance(config, 3, 11, {"c0", "c2"});

  auto forward = [&](bool with_backward) {
    Tape tape;
    Var logit = model.forward_one(tape, inst, false);
    Var loss = tape.weighted_bce_with_logits(logit, {1.0}, {2.0});
    if (with_backward) tape.backward(loss);
    return tape.value(loss)(0, 0);
  };

  model.zero_grad();
  forward(true);
  double h = 1e-5;
  double worst = 0.0;
  for (Parameter* p : model.parameters()) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      double saved = p->value.data[i];
      p->value.data[i] = saved + h;
      double up = forward(false);
      p->value.data[i] = saved - h;
      double down = forward(false);
      p->value.data[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double denom = std::max({std::abs(numeric), std::abs(p->grad.data[i]), 1e-6});
      worst = std::max(worst, std::abs(numeric - p->grad.data[i]) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("model save/load reproduces logits exactly") {
  testutil::TempDir dir("bigat_ckpt");
  BiGatConfig config = small_config();
  config.init_seed = 5;
  BiGatModel model(config);
  randomize_head(model, 505);
  GraphInstance inst = fixture_instance(config, 4, 9, {"c2"});

  Tape tape;
  double before = tape.value(model.forward_one(tape, inst, false))(0, 0);
  model.save(dir.path() / "model.json");
  BiGatModel loaded = BiGatModel::load(dir.path() / "model.json");
  CHECK(loaded.config().feature_dim == config.feature_dim);
  Tape tape2;
  double after = tape2.value(loaded.forward_one(tape2, inst, false))(0, 0);
  CHECK(before == after);  // bit-exact round trip
}

TEST_CASE("missing virtual node is rejected") {
  BiGatConfig config = small_config();
  BiGatModel model(config);
  GraphInstance inst = fixture_instance(config, 3, 1, {});
  inst.virtual_index = -1;
  Tape tape;
  CHECK_THROWS_AS(model.forward_one(tape, inst, false), Error);
}
