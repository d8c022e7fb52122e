#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hicl/tensor.hpp"

namespace hicl {

class Graph;

/// Handle to a node on a Graph's tape.
struct Var {
  Graph* graph = nullptr;
  std::int32_t id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// Eager reverse-mode tape. Each builder computes its value immediately,
/// records the op, and rejects non-finite results on the spot. The
/// backward pass visits nodes exactly once in reverse insertion order.
///
/// A Graph is confined to one logical training step on one thread;
/// independent forward passes may run in parallel on separate Graphs.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // -- leaves ---------------------------------------------------------
  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  // -- primitives -----------------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double factor);
  Var exp(Var a);
  Var log(Var a);
  Var log1p(Var a);
  Var tanh(Var a);
  Var matmul(Var a, Var b);                    // (r,k) x (k,c) -> (r,c)
  Var transpose(Var a);                        // (r,c) -> (c,r)
  Var sum_cols(Var a);                         // (r,c) -> (r,1)
  Var sum_all(Var a);                          // any -> (1)
  Var max_cols(Var a);                         // (r,c) -> (r,1)
  Var broadcast_to(Var a, std::size_t rows, std::size_t cols);
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var gather_rows(Var a, std::vector<std::size_t> indices);
  Var slice_cols(Var a, std::size_t c0, std::size_t c1);  // [c0, c1)
  Var concat_rows(std::span<const Var> parts);

  // -- composites (no new backward rules) -----------------------------
  Var add_scalar(Var a, double v);
  Var mean_cols(Var a);
  Var softmax_cols(Var a);        // stabilized with a detached row max
  Var row_normalize(Var a);       // L2-normalize each row; rejects zero rows
  Var rowwise_dot(Var a, Var b);  // (r,c),(r,c) -> (r,1)
  Var cosine_sim(Var u, Var v);   // vectors -> scalar in [-1, 1]
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var gelu(Var x);

  // -- execution ------------------------------------------------------
  /// Seed d(root)/d(root) = 1 and accumulate gradients for every node
  /// reachable from `root` that requires them. `root` must be scalar.
  void backward(Var root);

  const Tensor& value(Var v) const;
  /// Accumulated gradient, or nullptr if the node has none (not tracked,
  /// or backward has not reached it).
  const Tensor* grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf, kAdd, kSub, kMul, kDiv, kScale, kExp, kLog, kLog1p, kTanh,
    kMatMul, kTranspose, kSumCols, kSumAll, kMaxCols, kBroadcast,
    kReshape, kGatherRows, kSliceCols, kConcatRows,
  };

  struct Node {
    Op op;
    std::vector<std::int32_t> inputs;
    Tensor value;
    bool requires_grad = false;
    double factor = 0.0;                 // kScale
    std::vector<std::size_t> indices;    // kGatherRows / kSliceCols bounds
  };

  Var record(Node node, const char* op_name);
  Node& node(Var v);
  const Node& node(Var v) const;
  void check_same_graph(Var v) const;
  void accumulate(std::vector<Tensor>& grads, std::int32_t id,
                  const Tensor& contribution);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;  // aligned with nodes_ after backward()
};

inline Var operator+(Var a, Var b) { return a.graph->add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.graph->div(a, b); }

}  // namespace hicl
