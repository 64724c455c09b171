#include "rumorgraph/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"

namespace rumorgraph {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// C += A * B, all row-major.
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& c) {
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    double* crow = &c.data[static_cast<std::size_t>(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C += A^T * B
void matmul_at_b_accumulate(const Matrix& a, const Matrix& b, Matrix& c) {
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.data[static_cast<std::size_t>(k) * a.cols];
    const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = &c.data[static_cast<std::size_t>(i) * c.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

// C += A * B^T
void matmul_a_bt_accumulate(const Matrix& a, const Matrix& b, Matrix& c) {
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    double* crow = &c.data[static_cast<std::size_t>(i) * c.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.data[static_cast<std::size_t>(j) * b.cols];
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] += acc;
    }
  }
}

}  // namespace

Matrix::Matrix(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  require(data.size() == static_cast<std::size_t>(r) * c, "matrix init size mismatch");
}

Matrix Matrix::constant(int r, int c, double v) {
  Matrix m(r, c);
  std::fill(m.data.begin(), m.data.end(), v);
  return m;
}

Matrix Matrix::row(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return Matrix(1, n, std::move(values));
}

Matrix Matrix::column(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return Matrix(n, 1, std::move(values));
}

const TapeNode& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw Error(ErrorCode::ShapeMismatch, "Var does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

TapeNode& Tape::node(Var v) { return const_cast<TapeNode&>(static_cast<const Tape*>(this)->node(v)); }

Var Tape::push(TapeNode n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

double Tape::uniform() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

Var Tape::leaf(Matrix value) {
  TapeNode n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  TapeNode n;
  n.kind = OpKind::Leaf;
  n.value = p.value;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& ma = node(a).value;
  const Matrix& mb = node(b).value;
  require(ma.cols == mb.rows, "matmul: " + std::to_string(ma.rows) + "x" + std::to_string(ma.cols) +
                                  " * " + std::to_string(mb.rows) + "x" + std::to_string(mb.cols));
  TapeNode n;
  n.kind = OpKind::MatMul;
  n.inputs = {a.id, b.id};
  n.value = Matrix(ma.rows, mb.cols);
  matmul_accumulate(ma, mb, n.value);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Matrix& ma = node(a).value;
  const Matrix& mb = node(b).value;
  require(ma.same_shape(mb), "add: shapes differ");
  TapeNode n;
  n.kind = OpKind::Add;
  n.inputs = {a.id, b.id};
  n.value = ma;
  for (std::size_t i = 0; i < mb.data.size(); ++i) n.value.data[i] += mb.data[i];
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  int rows = node(parts[0]).value.rows;
  int total_cols = 0;
  for (Var v : parts) {
    require(node(v).value.rows == rows, "concat_cols: row mismatch");
    total_cols += node(v).value.cols;
  }
  TapeNode n;
  n.kind = OpKind::ConcatCols;
  n.value = Matrix(rows, total_cols);
  int offset = 0;
  for (Var v : parts) {
    n.inputs.push_back(v.id);
    const Matrix& m = node(v).value;
    for (int r = 0; r < rows; ++r) {
      std::copy_n(&m.data[static_cast<std::size_t>(r) * m.cols], m.cols,
                  &n.value.data[static_cast<std::size_t>(r) * total_cols + offset]);
    }
    n.index.push_back(offset);
    offset += m.cols;
  }
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  std::array<Var, 2> parts{a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var Tape::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  int cols = node(parts[0]).value.cols;
  int total_rows = 0;
  for (Var v : parts) {
    require(node(v).value.cols == cols, "concat_rows: col mismatch");
    total_rows += node(v).value.rows;
  }
  TapeNode n;
  n.kind = OpKind::ConcatRows;
  n.value = Matrix(total_rows, cols);
  int offset = 0;
  for (Var v : parts) {
    n.inputs.push_back(v.id);
    const Matrix& m = node(v).value;
    std::copy(m.data.begin(), m.data.end(),
              &n.value.data[static_cast<std::size_t>(offset) * cols]);
    n.index.push_back(offset);
    offset += m.rows;
  }
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  TapeNode n;
  n.kind = OpKind::Scale;
  n.inputs = {a.id};
  n.scalar = factor;
  n.value = node(a).value;
  for (double& v : n.value.data) v *= factor;
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double negative_slope) {
  TapeNode n;
  n.kind = OpKind::LeakyRelu;
  n.inputs = {a.id};
  n.scalar = negative_slope;
  n.value = node(a).value;
  for (double& v : n.value.data) {
    if (v < 0.0) v *= negative_slope;
  }
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  TapeNode n;
  n.kind = OpKind::Relu;
  n.inputs = {a.id};
  n.value = node(a).value;
  for (double& v : n.value.data) v = std::max(v, 0.0);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  TapeNode n;
  n.kind = OpKind::Sigmoid;
  n.inputs = {a.id};
  n.value = node(a).value;
  for (double& v : n.value.data) v = stable_sigmoid(v);
  return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw Error(ErrorCode::ConfigConflict, "dropout rate must be in [0,1)");
  }
  if (!training || rate == 0.0) return a;  // eval mode is the identity
  const Matrix& ma = node(a).value;
  TapeNode n;
  n.kind = OpKind::Dropout;
  n.inputs = {a.id};
  n.value = Matrix(ma.rows, ma.cols);
  n.locals.resize(ma.data.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < ma.data.size(); ++i) {
    double mask = (uniform() >= rate) ? keep_scale : 0.0;
    n.locals[i] = mask;
    n.value.data[i] = ma.data[i] * mask;
  }
  return push(std::move(n));
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Matrix& ma = node(a).value;
  for (int r : rows) require(r >= 0 && r < ma.rows, "gather_rows: index out of range");
  TapeNode n;
  n.kind = OpKind::GatherRows;
  n.inputs = {a.id};
  n.value = Matrix(static_cast<int>(rows.size()), ma.cols);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    std::copy_n(&ma.data[static_cast<std::size_t>(rows[e]) * ma.cols], ma.cols,
                &n.value.data[e * static_cast<std::size_t>(ma.cols)]);
  }
  n.index = std::move(rows);
  return push(std::move(n));
}

Var Tape::scatter_add_rows(Var a, std::vector<int> dst_rows, int out_rows) {
  const Matrix& ma = node(a).value;
  require(static_cast<int>(dst_rows.size()) == ma.rows, "scatter_add_rows: one dst per row");
  for (int r : dst_rows) require(r >= 0 && r < out_rows, "scatter_add_rows: dst out of range");
  TapeNode n;
  n.kind = OpKind::ScatterAddRows;
  n.inputs = {a.id};
  n.value = Matrix(out_rows, ma.cols);
  for (std::size_t e = 0; e < dst_rows.size(); ++e) {
    const double* src = &ma.data[e * static_cast<std::size_t>(ma.cols)];
    double* dst = &n.value.data[static_cast<std::size_t>(dst_rows[e]) * ma.cols];
    for (int j = 0; j < ma.cols; ++j) dst[j] += src[j];
  }
  n.index = std::move(dst_rows);
  return push(std::move(n));
}

Var Tape::row_scale(Var a, Var scales) {
  const Matrix& ma = node(a).value;
  const Matrix& ms = node(scales).value;
  require(ms.cols == 1 && ms.rows == ma.rows, "row_scale: scales must be rows x 1");
  TapeNode n;
  n.kind = OpKind::RowScale;
  n.inputs = {a.id, scales.id};
  n.value = ma;
  for (int i = 0; i < ma.rows; ++i) {
    double s = ms.data[static_cast<std::size_t>(i)];
    double* row = &n.value.data[static_cast<std::size_t>(i) * ma.cols];
    for (int j = 0; j < ma.cols; ++j) row[j] *= s;
  }
  return push(std::move(n));
}

Var Tape::segment_softmax(Var a, std::vector<int> segments) {
  const Matrix& ma = node(a).value;
  if (ma.rows == 0) throw Error(ErrorCode::EmptyGroup, "segment_softmax: empty input");
  require(ma.cols == 1, "segment_softmax: input must be a column");
  require(static_cast<int>(segments.size()) == ma.rows, "segment_softmax: one segment id per row");
  for (std::size_t i = 1; i < segments.size(); ++i) {
    require(segments[i] >= segments[i - 1], "segment_softmax: segments must be nondecreasing");
  }
  TapeNode n;
  n.kind = OpKind::SegmentSoftmax;
  n.inputs = {a.id};
  n.value = Matrix(ma.rows, 1);
  std::size_t start = 0;
  while (start < segments.size()) {
    std::size_t end = start;
    while (end < segments.size() && segments[end] == segments[start]) ++end;
    double max_v = ma.data[start];
    for (std::size_t i = start; i < end; ++i) max_v = std::max(max_v, ma.data[i]);
    double sum = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      double e = std::exp(ma.data[i] - max_v);
      n.value.data[i] = e;
      sum += e;
    }
    for (std::size_t i = start; i < end; ++i) n.value.data[i] /= sum;
    start = end;
  }
  n.index = std::move(segments);
  return push(std::move(n));
}

Var Tape::weighted_bce_with_logits(Var logits, std::vector<double> labels,
                                   std::vector<double> weights) {
  const Matrix& mz = node(logits).value;
  require(mz.cols == 1, "bce: logits must be a column");
  require(labels.size() == static_cast<std::size_t>(mz.rows) && weights.size() == labels.size(),
          "bce: one label and weight per logit");
  for (double y : labels) require(y == 0.0 || y == 1.0, "bce: labels must be 0 or 1");
  for (double w : weights) require(w > 0.0, "bce: weights must be positive");
  TapeNode n;
  n.kind = OpKind::WeightedBce;
  n.inputs = {logits.id};
  double total = 0.0;
  for (int i = 0; i < mz.rows; ++i) {
    double z = mz.data[static_cast<std::size_t>(i)];
    double y = labels[static_cast<std::size_t>(i)];
    total += weights[static_cast<std::size_t>(i)] *
             (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
  }
  n.value = Matrix(1, 1);
  n.value.data[0] = total / static_cast<double>(mz.rows);
  n.locals = std::move(labels);
  n.locals.insert(n.locals.end(), weights.begin(), weights.end());
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (backward_done_) {
    throw Error(ErrorCode::TapeReuse, "backward called twice on one tape");
  }
  backward_done_ = true;
  TapeNode& top = node(loss);
  require(top.value.rows == 1 && top.value.cols == 1, "backward: loss must be 1x1");

  for (auto& n : nodes_) n.grad = Matrix(n.value.rows, n.value.cols);
  top.grad.data[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    TapeNode& n = nodes_[static_cast<std::size_t>(id)];
    const Matrix& g = n.grad;
    switch (n.kind) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        TapeNode& b = nodes_[static_cast<std::size_t>(n.inputs[1])];
        matmul_a_bt_accumulate(g, b.value, a.grad);
        matmul_at_b_accumulate(a.value, g, b.grad);
        break;
      }
      case OpKind::Add: {
        for (int in : n.inputs) {
          TapeNode& a = nodes_[static_cast<std::size_t>(in)];
          for (std::size_t i = 0; i < g.data.size(); ++i) a.grad.data[i] += g.data[i];
        }
        break;
      }
      case OpKind::ConcatCols: {
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[p])];
          int offset = n.index[p];
          for (int r = 0; r < a.value.rows; ++r) {
            const double* src = &g.data[static_cast<std::size_t>(r) * g.cols + offset];
            double* dst = &a.grad.data[static_cast<std::size_t>(r) * a.value.cols];
            for (int j = 0; j < a.value.cols; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case OpKind::ConcatRows: {
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[p])];
          int offset = n.index[p];
          for (std::size_t i = 0; i < a.value.data.size(); ++i) {
            a.grad.data[i] += g.data[static_cast<std::size_t>(offset) * g.cols + i];
          }
        }
        break;
      }
      case OpKind::Scale: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t i = 0; i < g.data.size(); ++i) a.grad.data[i] += n.scalar * g.data[i];
        break;
      }
      case OpKind::LeakyRelu: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          a.grad.data[i] += g.data[i] * (a.value.data[i] > 0.0 ? 1.0 : n.scalar);
        }
        break;
      }
      case OpKind::Relu: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          if (a.value.data[i] > 0.0) a.grad.data[i] += g.data[i];
        }
        break;
      }
      case OpKind::Sigmoid: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          double y = n.value.data[i];
          a.grad.data[i] += g.data[i] * y * (1.0 - y);
        }
        break;
      }
      case OpKind::Dropout: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t i = 0; i < g.data.size(); ++i) a.grad.data[i] += g.data[i] * n.locals[i];
        break;
      }
      case OpKind::GatherRows: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t e = 0; e < n.index.size(); ++e) {
          const double* src = &g.data[e * static_cast<std::size_t>(g.cols)];
          double* dst = &a.grad.data[static_cast<std::size_t>(n.index[e]) * a.value.cols];
          for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
        }
        break;
      }
      case OpKind::ScatterAddRows: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t e = 0; e < n.index.size(); ++e) {
          const double* src = &g.data[static_cast<std::size_t>(n.index[e]) * g.cols];
          double* dst = &a.grad.data[e * static_cast<std::size_t>(g.cols)];
          for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
        }
        break;
      }
      case OpKind::RowScale: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        TapeNode& s = nodes_[static_cast<std::size_t>(n.inputs[1])];
        for (int i = 0; i < a.value.rows; ++i) {
          double sv = s.value.data[static_cast<std::size_t>(i)];
          const double* grow = &g.data[static_cast<std::size_t>(i) * g.cols];
          const double* arow = &a.value.data[static_cast<std::size_t>(i) * a.value.cols];
          double* adst = &a.grad.data[static_cast<std::size_t>(i) * a.value.cols];
          double acc = 0.0;
          for (int j = 0; j < g.cols; ++j) {
            adst[j] += grow[j] * sv;
            acc += grow[j] * arow[j];
          }
          s.grad.data[static_cast<std::size_t>(i)] += acc;
        }
        break;
      }
      case OpKind::SegmentSoftmax: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        std::size_t start = 0;
        while (start < n.index.size()) {
          std::size_t end = start;
          while (end < n.index.size() && n.index[end] == n.index[start]) ++end;
          double dot = 0.0;
          for (std::size_t i = start; i < end; ++i) dot += g.data[i] * n.value.data[i];
          for (std::size_t i = start; i < end; ++i) {
            a.grad.data[i] += n.value.data[i] * (g.data[i] - dot);
          }
          start = end;
        }
        break;
      }
      case OpKind::WeightedBce: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        std::size_t count = a.value.data.size();
        double upstream = g.data[0];
        for (std::size_t i = 0; i < count; ++i) {
          double y = n.locals[i];
          double w = n.locals[count + i];
          double sig = stable_sigmoid(a.value.data[i]);
          a.grad.data[i] += upstream * w * (sig - y) / static_cast<double>(count);
        }
        break;
      }
    }
  }

  for (auto& n : nodes_) {
    if (n.param != nullptr) {
      for (std::size_t i = 0; i < n.grad.data.size(); ++i) n.param->grad.data[i] += n.grad.data[i];
    }
  }
}

void adam_step(std::span<Parameter* const> params, const AdamConfig& config) {
  for (Parameter* p : params) {
    long t = ++p->step_count;
    double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      double g = p->grad.data[i];
      if (config.weight_decay != 0.0) {
        if (config.decoupled_weight_decay) {
          p->value.data[i] -= config.lr * config.weight_decay * p->value.data[i];
        } else {
          g += config.weight_decay * p->value.data[i];
        }
      }
      double m = config.beta1 * p->adam_m.data[i] + (1.0 - config.beta1) * g;
      double v = config.beta2 * p->adam_v.data[i] + (1.0 - config.beta2) * g * g;
      p->adam_m.data[i] = m;
      p->adam_v.data[i] = v;
      p->value.data[i] -= config.lr * (m / bc1) / (std::sqrt(v / bc2) + config.epsilon);
    }
  }
}

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter* const> params,
                     const std::string& config_json) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "rumorgraph-checkpoint";
  if (!config_json.empty()) {
    doc["config"] = nlohmann::json::parse(config_json);
  } else {
    doc["config"] = nlohmann::json::object();
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const Parameter* p : params) {
    arr.push_back({{"name", p->name}, {"rows", p->value.rows}, {"cols", p->value.cols},
                   {"data", p->value.data}});
  }
  doc["params"] = std::move(arr);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint '" + path.string() + "'");
  out << doc.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "no checkpoint at '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad checkpoint: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.config_json = doc.value("config", nlohmann::json::object()).dump();
  for (const auto& p : doc.at("params")) {
    Matrix m(p.at("rows").get<int>(), p.at("cols").get<int>(),
             p.at("data").get<std::vector<double>>());
    ckpt.params.emplace(p.at("name").get<std::string>(), std::move(m));
  }
  return ckpt;
}

}  // namespace rumorgraph
