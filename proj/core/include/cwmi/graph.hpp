#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwmi/tensor.hpp"

namespace cwmi {

enum class Op : int {
  Leaf,
  MatMul,     // rank-2 x rank-2, or batched rank-3 x rank-3; optional transposed rhs
  Add,        // same-shape, row-broadcast, group-tile, or middle-broadcast
  Scale,      // multiply by a compile-time scalar
  Reshape,
  Slice,      // rectangular block of a rank-2 tensor
  ConcatCols, // rank-2 tensors side by side
  LayerNorm,  // last-axis normalization with learned gain/bias, eps = 1e-5
  Softmax,    // last axis
  Gelu,       // tanh approximation
  Mse,        // mean squared error over all elements -> scalar
  Transpose,  // rank-2
};

const char* op_name(Op op);

struct Node {
  Op op = Op::Leaf;
  std::vector<int> inputs;
  Tensor value;
  Tensor grad;
  bool trainable = false;     // leaves only
  std::string name;           // leaves only; used in diagnostics
  double scalar = 0.0;        // Scale
  bool trans_b = false;       // MatMul
  int row0 = 0, rows = 0, col0 = 0, cols = 0;  // Slice
  std::vector<double> aux;    // LayerNorm caches mean/invstd per row
};

/// Static compute graph with reverse-mode differentiation. Nodes are
/// appended in topological order; `forward()` re-evaluates everything from
/// current leaf values, `backward(loss)` fills gradients for every node on
/// a path from a trainable leaf to the loss. Evaluation is purely
/// sequential and allocation-stable, so repeated runs on equal inputs are
/// bit-identical.
class Graph {
 public:
  int leaf(std::vector<int> shape, bool trainable, std::string name);
  int matmul(int a, int b, bool trans_b = false);
  int add(int a, int b);
  int scale(int a, double s);
  int reshape(int a, std::vector<int> shape);
  int slice(int a, int row0, int rows, int col0, int cols);
  int concat_cols(const std::vector<int>& parts);
  int layer_norm(int x, int gamma, int beta);
  int softmax(int a);
  int gelu(int a);
  int mse(int a, int b);
  int transpose(int a);

  void set_leaf(int id, const Tensor& v);
  /// Direct mutable access to a leaf's storage (for in-place rebinding).
  double* leaf_data(int id);
  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad(int id) const;
  bool has_grad(int id) const;
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Node ids that consume `id` as an input (structural introspection).
  std::vector<int> consumers(int id) const;

  void forward();
  /// Reverse sweep from a scalar loss node. Throws ContractError if the
  /// node is not scalar. Gradients of frozen leaves are not materialized.
  void backward(int loss_node);

 private:
  int push(Node n);
  void check_id(int id) const;
  void eval(Node& n);
  void backprop(int id);
  void ensure_grad_plan();

  std::vector<Node> nodes_;
  std::vector<char> needs_grad_;
  bool plan_ready_ = false;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  long coords_checked = 0;
};

/// Central-difference check of every trainable-leaf gradient against the
/// reverse-mode result. `max_coords_per_leaf` 0 checks every coordinate;
/// otherwise that many are sampled per leaf from `seed`. Relative error is
/// |ad - fd| / max(1e-8, |ad| + |fd|). Throws ContractError for eps outside
/// [1e-10, 1e-2].
GradCheckResult grad_check(Graph& g, int loss_node, double eps, std::uint64_t seed,
                           int max_coords_per_leaf = 0);

}  // namespace cwmi
