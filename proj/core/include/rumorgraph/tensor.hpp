#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace rumorgraph {

/// Dense row-major f64 matrix. The only tensor type in the project; desk
/// scale keeps everything comfortably in memory.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  Matrix(int r, int c, std::vector<double> values);

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix constant(int r, int c, double v);
  static Matrix row(std::vector<double> values);
  static Matrix column(std::vector<double> values);

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
  std::size_t size() const { return data.size(); }
};

/// Trainable matrix with gradient and Adam state. Gradients accumulate
/// across backward passes until zero_grad().
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  long step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Matrix init)
      : name(std::move(n)),
        value(std::move(init)),
        grad(value.rows, value.cols),
        adam_m(value.rows, value.cols),
        adam_v(value.rows, value.cols) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Handle to a tape node; only valid for the tape that produced it.
struct Var {
  int id = -1;
};

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  ConcatCols,
  ConcatRows,
  Scale,
  LeakyRelu,
  Relu,
  Sigmoid,
  Dropout,
  GatherRows,
  ScatterAddRows,
  RowScale,
  SegmentSoftmax,
  WeightedBce,
};

struct TapeNode {
  OpKind kind = OpKind::Leaf;
  std::vector<int> inputs;
  Matrix value;
  Matrix grad;
  // op-specific cached state for backward
  std::vector<int> index;      // gather/scatter rows, segment ids, concat splits
  std::vector<double> locals;  // dropout mask, bce labels+weights
  double scalar = 0.0;         // scale factor / leaky slope
  Parameter* param = nullptr;  // bound parameter for leaves
};

/// Single forward recording; append order is topological order. One
/// backward() per tape — record a fresh tape per step. Tapes are
/// single-threaded; run parallel evaluation on separate tapes.
class Tape {
 public:
  explicit Tape(std::uint64_t seed = 0) : rng_(seed) {}

  Var leaf(Matrix value);
  /// Leaf sharing the parameter's current value; backward() adds into
  /// the parameter's grad.
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var concat_cols(std::span<const Var> parts);
  Var concat_cols(Var a, Var b);
  Var concat_rows(std::span<const Var> parts);
  Var scale(Var a, double factor);
  Var leaky_relu(Var a, double negative_slope);
  Var relu(Var a);
  Var sigmoid(Var a);
  /// Keeps units with prob 1-rate scaled by 1/(1-rate) in training mode;
  /// identity (no node recorded) in eval mode.
  Var dropout(Var a, double rate, bool training);
  Var gather_rows(Var a, std::vector<int> rows);
  Var scatter_add_rows(Var a, std::vector<int> dst_rows, int out_rows);
  /// out[i,:] = a[i,:] * scales[i,0]; scales must be (rows x 1).
  Var row_scale(Var a, Var scales);
  /// Softmax within each contiguous segment of a (rows x 1) column.
  /// segments must be nondecreasing, one id per row.
  Var segment_softmax(Var a, std::vector<int> segments);
  /// Mean over samples of w * (max(z,0) - z*y + log(1+exp(-|z|))),
  /// the log-sum-exp-stable form of weighted BCE on logits.
  Var weighted_bce_with_logits(Var logits, std::vector<double> labels,
                               std::vector<double> weights);

  const Matrix& value(Var v) const { return node(v).value; }
  const Matrix& grad(Var v) const { return node(v).grad; }

  /// Reverse sweep from a scalar loss; fills node grads and accumulates
  /// into bound parameters. Throws TapeReuse on a second call.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  const TapeNode& node(Var v) const;
  TapeNode& node(Var v);
  Var push(TapeNode n);
  double uniform();  // [0,1), deterministic per seed

  std::vector<TapeNode> nodes_;
  std::mt19937_64 rng_;
  bool backward_done_ = false;
};

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  /// Decoupled decay (applied to the value before the Adam delta).
  /// false folds the decay into the gradient instead.
  bool decoupled_weight_decay = true;
};

/// Standard bias-corrected Adam update; consumes accumulated grads
/// (call Parameter::zero_grad afterwards).
void adam_step(std::span<Parameter* const> params, const AdamConfig& config);

// Parameter checkpoints: JSON container of named matrices plus an opaque
// model-config string. Doubles round-trip exactly (shortest-round-trip
// serialization).
void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter* const> params,
                     const std::string& config_json);

struct Checkpoint {
  std::map<std::string, Matrix> params;
  std::string config_json;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rumorgraph
