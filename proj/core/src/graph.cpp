#include "hicl/graph.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "hicl/errors.hpp"

namespace hicl {
namespace {

const char* op_name(int op);

void ew_check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw NumericsError(std::string(op) + ": shape mismatch " + a.shape_str() +
                        " vs " + b.shape_str());
  }
}

Tensor matmul_nn(const Tensor& a, const Tensor& b) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  Tensor out = Tensor::zeros({r, c});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = pa[i * k + t];
      const double* pbrow = pb + t * c;
      double* porow = po + i * c;
      for (std::size_t j = 0; j < c; ++j) porow[j] += av * pbrow[j];
    }
  }
  return out;
}

// a (r,k) times b^T where b is (c,k)
Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.rows();
  Tensor out = Tensor::zeros({r, c});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      const double* par = pa + i * k;
      const double* pbr = pb + j * k;
      for (std::size_t t = 0; t < k; ++t) s += par[t] * pbr[t];
      po[i * c + j] = s;
    }
  }
  return out;
}

// a^T times b where a is (k,r), b is (k,c)
Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  const std::size_t k = a.rows(), r = a.cols(), c = b.cols();
  Tensor out = Tensor::zeros({r, c});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t t = 0; t < k; ++t) {
    const double* par = pa + t * r;
    const double* pbr = pb + t * c;
    for (std::size_t i = 0; i < r; ++i) {
      const double av = par[i];
      double* porow = po + i * c;
      for (std::size_t j = 0; j < c; ++j) porow[j] += av * pbr[j];
    }
  }
  return out;
}

const char* op_name(int op) {
  static const char* names[] = {
      "leaf", "add", "sub", "mul", "div", "scale", "exp", "log", "log1p",
      "tanh", "matmul", "transpose", "sum_cols", "sum_all", "max_cols",
      "broadcast_to", "reshape", "gather_rows", "slice_cols", "concat_rows"};
  return names[op];
}

}  // namespace

void Graph::check_same_graph(Var v) const {
  if (v.graph != this || v.id < 0 ||
      static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw NumericsError("var does not belong to this graph");
  }
}

Graph::Node& Graph::node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
const Graph::Node& Graph::node(Var v) const {
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::record(Node n, const char* name) {
  if (!n.value.all_finite()) {
    throw NumericsError(std::string("non-finite value produced by op '") +
                        name + "' at node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return record(std::move(n), "leaf");
}

Var Graph::add(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  ew_check_same_shape(ta, tb, "add");
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = ta.at(i) + tb.at(i);
  Node n{Op::kAdd, {a.id, b.id}, std::move(out),
         node(a).requires_grad || node(b).requires_grad};
  return record(std::move(n), "add");
}

Var Graph::sub(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  ew_check_same_shape(ta, tb, "sub");
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = ta.at(i) - tb.at(i);
  Node n{Op::kSub, {a.id, b.id}, std::move(out),
         node(a).requires_grad || node(b).requires_grad};
  return record(std::move(n), "sub");
}

Var Graph::mul(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  ew_check_same_shape(ta, tb, "mul");
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = ta.at(i) * tb.at(i);
  Node n{Op::kMul, {a.id, b.id}, std::move(out),
         node(a).requires_grad || node(b).requires_grad};
  return record(std::move(n), "mul");
}

Var Graph::div(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  ew_check_same_shape(ta, tb, "div");
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = ta.at(i) / tb.at(i);
  Node n{Op::kDiv, {a.id, b.id}, std::move(out),
         node(a).requires_grad || node(b).requires_grad};
  return record(std::move(n), "div");
}

Var Graph::scale(Var a, double factor) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = ta.at(i) * factor;
  Node n{Op::kScale, {a.id}, std::move(out), node(a).requires_grad};
  n.factor = factor;
  return record(std::move(n), "scale");
}

Var Graph::exp(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(ta.at(i));
  Node n{Op::kExp, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "exp");
}

Var Graph::log(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(ta.at(i));
  Node n{Op::kLog, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "log");
}

Var Graph::log1p(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::log1p(ta.at(i));
  Node n{Op::kLog1p, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "log1p");
}

Var Graph::tanh(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::tanh(ta.at(i));
  Node n{Op::kTanh, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "tanh");
}

Var Graph::matmul(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
    throw NumericsError("matmul: incompatible shapes " + ta.shape_str() +
                        " x " + tb.shape_str());
  }
  Node n{Op::kMatMul, {a.id, b.id}, matmul_nn(ta, tb),
         node(a).requires_grad || node(b).requires_grad};
  return record(std::move(n), "matmul");
}

Var Graph::transpose(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2) {
    throw NumericsError("transpose: rank-2 tensor required, got " +
                        ta.shape_str());
  }
  const std::size_t r = ta.rows(), c = ta.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data()[j * r + i] = ta.at(i, j);
  Node n{Op::kTranspose, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "transpose");
}

Var Graph::sum_cols(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2) {
    throw NumericsError("sum_cols: rank-2 tensor required, got " +
                        ta.shape_str());
  }
  const std::size_t r = ta.rows(), c = ta.cols();
  Tensor out({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += ta.at(i, j);
    out.data()[i] = s;
  }
  Node n{Op::kSumCols, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "sum_cols");
}

Var Graph::sum_all(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) s += ta.at(i);
  Node n{Op::kSumAll, {a.id}, Tensor::scalar(s), node(a).requires_grad};
  return record(std::move(n), "sum_all");
}

Var Graph::max_cols(Var a) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2 || ta.cols() == 0) {
    throw NumericsError("max_cols: nonempty rank-2 tensor required, got " +
                        ta.shape_str());
  }
  const std::size_t r = ta.rows(), c = ta.cols();
  Tensor out({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double m = ta.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, ta.at(i, j));
    out.data()[i] = m;
  }
  Node n{Op::kMaxCols, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "max_cols");
}

Var Graph::broadcast_to(Var a, std::size_t rows, std::size_t cols) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  const bool is_scalar = ta.size() == 1;
  const bool is_col = ta.rank() == 2 && ta.cols() == 1 && ta.rows() == rows;
  const bool is_row =
      (ta.rank() == 1 && ta.cols() == cols) ||
      (ta.rank() == 2 && ta.rows() == 1 && ta.cols() == cols);
  if (!is_scalar && !is_col && !is_row) {
    throw NumericsError("broadcast_to: cannot expand " + ta.shape_str() +
                        " to (" + std::to_string(rows) + ", " +
                        std::to_string(cols) + ")");
  }
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double v = is_scalar ? ta.at(0) : (is_col ? ta.at(i) : ta.at(j));
      out.data()[i * cols + j] = v;
    }
  }
  Node n{Op::kBroadcast, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "broadcast_to");
}

Var Graph::reshape(Var a, std::vector<std::size_t> shape) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  Tensor out(std::move(shape));
  if (out.size() != ta.size()) {
    throw NumericsError("reshape: size mismatch " + ta.shape_str() + " -> " +
                        out.shape_str());
  }
  std::memcpy(out.data(), ta.data(), ta.size() * sizeof(double));
  Node n{Op::kReshape, {a.id}, std::move(out), node(a).requires_grad};
  return record(std::move(n), "reshape");
}

Var Graph::gather_rows(Var a, std::vector<std::size_t> indices) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2) {
    throw NumericsError("gather_rows: rank-2 tensor required, got " +
                        ta.shape_str());
  }
  const std::size_t c = ta.cols();
  Tensor out({indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ta.rows()) {
      throw NumericsError("gather_rows: index " + std::to_string(indices[i]) +
                          " out of range for " + ta.shape_str());
    }
    std::memcpy(out.data() + i * c, ta.data() + indices[i] * c,
                c * sizeof(double));
  }
  Node n{Op::kGatherRows, {a.id}, std::move(out), node(a).requires_grad};
  n.indices = std::move(indices);
  return record(std::move(n), "gather_rows");
}

Var Graph::slice_cols(Var a, std::size_t c0, std::size_t c1) {
  check_same_graph(a);
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2 || c0 >= c1 || c1 > ta.cols()) {
    throw NumericsError("slice_cols: invalid range [" + std::to_string(c0) +
                        ", " + std::to_string(c1) + ") for " + ta.shape_str());
  }
  const std::size_t r = ta.rows(), w = c1 - c0;
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i)
    std::memcpy(out.data() + i * w, ta.data() + i * ta.cols() + c0,
                w * sizeof(double));
  Node n{Op::kSliceCols, {a.id}, std::move(out), node(a).requires_grad};
  n.indices = {c0, c1};
  return record(std::move(n), "slice_cols");
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw NumericsError("concat_rows: empty input list");
  std::size_t total_rows = 0;
  std::size_t cols = 0;
  bool needs_grad = false;
  for (const Var& p : parts) {
    check_same_graph(p);
    const Tensor& t = node(p).value;
    if (t.rank() != 2) {
      throw NumericsError("concat_rows: rank-2 parts required, got " +
                          t.shape_str());
    }
    if (cols == 0) cols = t.cols();
    if (t.cols() != cols) {
      throw NumericsError("concat_rows: column mismatch");
    }
    total_rows += t.rows();
    needs_grad = needs_grad || node(p).requires_grad;
  }
  Tensor out({total_rows, cols});
  std::size_t row = 0;
  Node n;
  n.op = Op::kConcatRows;
  for (const Var& p : parts) {
    const Tensor& t = node(p).value;
    std::memcpy(out.data() + row * cols, t.data(),
                t.rows() * cols * sizeof(double));
    row += t.rows();
    n.inputs.push_back(p.id);
  }
  n.value = std::move(out);
  n.requires_grad = needs_grad;
  return record(std::move(n), "concat_rows");
}

// -- composites ---------------------------------------------------------

Var Graph::add_scalar(Var a, double v) {
  const Tensor& ta = node(a).value;
  Tensor c = Tensor::full(ta.shape(), v);
  return add(a, constant(std::move(c)));
}

Var Graph::mean_cols(Var a) {
  const std::size_t c = node(a).value.cols();
  return scale(sum_cols(a), 1.0 / static_cast<double>(c));
}

Var Graph::softmax_cols(Var a) {
  const Tensor& ta = node(a).value;
  const std::size_t r = ta.rows(), c = ta.cols();
  // Detached row max: the shift cancels analytically, so treating it as a
  // constant keeps the gradient exact.
  Tensor mx({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double m = ta.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, ta.at(i, j));
    mx.data()[i] = m;
  }
  Var shifted = sub(a, broadcast_to(constant(std::move(mx)), r, c));
  Var e = exp(shifted);
  Var denom = sum_cols(e);
  return div(e, broadcast_to(denom, r, c));
}

Var Graph::row_normalize(Var a) {
  const Tensor& ta = node(a).value;
  const std::size_t r = ta.rows(), c = ta.cols();
  Var sq = sum_cols(mul(a, a));
  const Tensor& n2 = node(sq).value;
  for (std::size_t i = 0; i < r; ++i) {
    if (n2.at(i) <= 0.0) {
      throw NumericsError("row_normalize: zero-norm row " + std::to_string(i));
    }
  }
  Var inv = exp(scale(log(sq), -0.5));
  return mul(a, broadcast_to(inv, r, c));
}

Var Graph::rowwise_dot(Var a, Var b) { return sum_cols(mul(a, b)); }

Var Graph::cosine_sim(Var u, Var v) {
  const Tensor& tu = node(u).value;
  const Tensor& tv = node(v).value;
  if (tu.size() != tv.size()) {
    throw NumericsError("cosine_sim: size mismatch " + tu.shape_str() +
                        " vs " + tv.shape_str());
  }
  Var uf = reshape(u, {tu.size()});
  Var vf = reshape(v, {tv.size()});
  Var dot = sum_all(mul(uf, vf));
  Var nu = sum_all(mul(uf, uf));
  Var nv = sum_all(mul(vf, vf));
  if (node(nu).value.at(0) <= 0.0 || node(nv).value.at(0) <= 0.0) {
    throw NumericsError("cosine_sim: zero-norm input");
  }
  Var inv = exp(scale(add(log(nu), log(nv)), -0.5));
  return mul(dot, inv);
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& tx = node(x).value;
  const std::size_t r = tx.rows(), c = tx.cols();
  Var mean = mean_cols(x);
  Var centered = sub(x, broadcast_to(mean, r, c));
  Var var = mean_cols(mul(centered, centered));
  Var inv = exp(scale(log(add_scalar(var, eps)), -0.5));
  Var normed = mul(centered, broadcast_to(inv, r, c));
  return add(mul(normed, broadcast_to(gamma, r, c)),
             broadcast_to(beta, r, c));
}

Var Graph::gelu(Var x) {
  // tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  Var cube = mul(mul(x, x), x);
  Var inner = add(scale(x, kSqrt2OverPi), scale(cube, kSqrt2OverPi * 0.044715));
  Var t = tanh(inner);
  return mul(scale(x, 0.5), add_scalar(t, 1.0));
}

// -- execution ------------------------------------------------------------

const Tensor& Graph::value(Var v) const {
  check_same_graph(v);
  return node(v).value;
}

const Tensor* Graph::grad(Var v) const {
  check_same_graph(v);
  const std::size_t i = static_cast<std::size_t>(v.id);
  if (i >= grads_.size() || grads_[i].empty()) return nullptr;
  return &grads_[i];
}

bool Graph::requires_grad(Var v) const {
  check_same_graph(v);
  return node(v).requires_grad;
}

void Graph::accumulate(std::vector<Tensor>& grads, std::int32_t id,
                       const Tensor& contribution) {
  if (!contribution.all_finite()) {
    throw NumericsError(
        std::string("non-finite gradient flowing into op '") +
        op_name(static_cast<int>(nodes_[static_cast<std::size_t>(id)].op)) +
        "' at node " + std::to_string(id));
  }
  Tensor& g = grads[static_cast<std::size_t>(id)];
  if (g.empty()) {
    g = contribution.clone();
  } else {
    for (std::size_t i = 0; i < g.size(); ++i)
      g.data()[i] += contribution.at(i);
  }
}

void Graph::backward(Var root) {
  check_same_graph(root);
  const Node& r = node(root);
  if (r.value.size() != 1) {
    throw NumericsError("backward: root must be scalar, got " +
                        r.value.shape_str());
  }
  grads_.assign(nodes_.size(), Tensor());
  if (!r.requires_grad) return;
  grads_[static_cast<std::size_t>(root.id)] =
      Tensor::full(r.value.shape(), 1.0);

  for (std::int32_t id = root.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty() || !n.requires_grad || n.op == Op::kLeaf) continue;

    auto in = [&](std::size_t k) -> const Node& {
      return nodes_[static_cast<std::size_t>(n.inputs[k])];
    };
    auto wants = [&](std::size_t k) { return in(k).requires_grad; };

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        if (wants(0)) accumulate(grads_, n.inputs[0], g);
        if (wants(1)) accumulate(grads_, n.inputs[1], g);
        break;
      }
      case Op::kSub: {
        if (wants(0)) accumulate(grads_, n.inputs[0], g);
        if (wants(1)) {
          Tensor neg(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i) neg.data()[i] = -g.at(i);
          accumulate(grads_, n.inputs[1], neg);
        }
        break;
      }
      case Op::kMul: {
        if (wants(0)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) * in(1).value.at(i);
          accumulate(grads_, n.inputs[0], d);
        }
        if (wants(1)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) * in(0).value.at(i);
          accumulate(grads_, n.inputs[1], d);
        }
        break;
      }
      case Op::kDiv: {
        const Tensor& bv = in(1).value;
        if (wants(0)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) / bv.at(i);
          accumulate(grads_, n.inputs[0], d);
        }
        if (wants(1)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = -g.at(i) * n.value.at(i) / bv.at(i);
          accumulate(grads_, n.inputs[1], d);
        }
        break;
      }
      case Op::kScale: {
        if (wants(0)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) * n.factor;
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kExp: {
        if (wants(0)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) * n.value.at(i);
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kLog: {
        if (wants(0)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) / in(0).value.at(i);
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kLog1p: {
        if (wants(0)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) / (1.0 + in(0).value.at(i));
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kTanh: {
        if (wants(0)) {
          Tensor d(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            d.data()[i] = g.at(i) * (1.0 - n.value.at(i) * n.value.at(i));
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kMatMul: {
        if (wants(0)) accumulate(grads_, n.inputs[0], matmul_nt(g, in(1).value));
        if (wants(1)) accumulate(grads_, n.inputs[1], matmul_tn(in(0).value, g));
        break;
      }
      case Op::kTranspose: {
        if (wants(0)) {
          const std::size_t r = g.rows(), c = g.cols();
          Tensor d({c, r});
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              d.data()[j * r + i] = g.at(i, j);
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kSumCols: {
        if (wants(0)) {
          const Tensor& av = in(0).value;
          Tensor d(av.shape());
          for (std::size_t i = 0; i < av.rows(); ++i)
            for (std::size_t j = 0; j < av.cols(); ++j)
              d.data()[i * av.cols() + j] = g.at(i);
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kSumAll: {
        if (wants(0)) {
          Tensor d = Tensor::full(in(0).value.shape(), g.at(0));
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kMaxCols: {
        if (wants(0)) {
          const Tensor& av = in(0).value;
          Tensor d = Tensor::zeros(av.shape());
          for (std::size_t i = 0; i < av.rows(); ++i) {
            const double m = n.value.at(i);
            std::size_t ties = 0;
            for (std::size_t j = 0; j < av.cols(); ++j)
              if (av.at(i, j) == m) ++ties;
            const double share = g.at(i) / static_cast<double>(ties);
            for (std::size_t j = 0; j < av.cols(); ++j)
              if (av.at(i, j) == m) d.data()[i * av.cols() + j] = share;
          }
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kBroadcast: {
        if (wants(0)) {
          const Tensor& av = in(0).value;
          Tensor d = Tensor::zeros(av.shape());
          const std::size_t r = g.rows(), c = g.cols();
          if (av.size() == 1) {
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g.at(i);
            d.data()[0] = s;
          } else if (av.rank() == 2 && av.cols() == 1) {
            for (std::size_t i = 0; i < r; ++i) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j) s += g.at(i, j);
              d.data()[i] = s;
            }
          } else {  // row vector
            for (std::size_t j = 0; j < c; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < r; ++i) s += g.at(i, j);
              d.data()[j] = s;
            }
          }
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kReshape: {
        if (wants(0)) {
          Tensor d(in(0).value.shape());
          std::memcpy(d.data(), g.data(), g.size() * sizeof(double));
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kGatherRows: {
        if (wants(0)) {
          const Tensor& av = in(0).value;
          Tensor d = Tensor::zeros(av.shape());
          const std::size_t c = av.cols();
          for (std::size_t i = 0; i < n.indices.size(); ++i) {
            double* dst = d.data() + n.indices[i] * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += g.at(i, j);
          }
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kSliceCols: {
        if (wants(0)) {
          const Tensor& av = in(0).value;
          Tensor d = Tensor::zeros(av.shape());
          const std::size_t c0 = n.indices[0], w = n.indices[1] - n.indices[0];
          for (std::size_t i = 0; i < av.rows(); ++i)
            for (std::size_t j = 0; j < w; ++j)
              d.data()[i * av.cols() + c0 + j] = g.at(i, j);
          accumulate(grads_, n.inputs[0], d);
        }
        break;
      }
      case Op::kConcatRows: {
        std::size_t row = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Tensor& pv = in(k).value;
          if (wants(k)) {
            Tensor d(pv.shape());
            std::memcpy(d.data(), g.data() + row * g.cols(),
                        pv.size() * sizeof(double));
            accumulate(grads_, n.inputs[k], d);
          }
          row += pv.rows();
        }
        break;
      }
    }
  }
}

}  // namespace hicl
