#include "cwmi/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cwmi/rng.hpp"

namespace cwmi {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu_val(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_deriv(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Scale: return "scale";
    case Op::Reshape: return "reshape";
    case Op::Slice: return "slice";
    case Op::ConcatCols: return "concat_cols";
    case Op::LayerNorm: return "layer_norm";
    case Op::Softmax: return "softmax";
    case Op::Gelu: return "gelu";
    case Op::Mse: return "mse";
    case Op::Transpose: return "transpose";
  }
  return "?";
}

namespace {

std::string node_desc(const Node& n, int id) {
  std::string s = "node " + std::to_string(id) + " (" + op_name(n.op);
  if (!n.name.empty()) s += " '" + n.name + "'";
  return s + ")";
}

}  // namespace

void Graph::check_id(int id) const {
  if (id < 0 || id >= size()) throw DimensionError("invalid node id " + std::to_string(id));
}

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  plan_ready_ = false;
  return size() - 1;
}

int Graph::leaf(std::vector<int> shape, bool trainable, std::string name) {
  Node n;
  n.op = Op::Leaf;
  n.trainable = trainable;
  n.name = std::move(name);
  n.value = Tensor(std::move(shape));
  return push(std::move(n));
}

int Graph::matmul(int a, int b, bool trans_b) {
  check_id(a);
  check_id(b);
  const auto& sa = nodes_[a].value.shape();
  const auto& sb = nodes_[b].value.shape();
  std::vector<int> out;
  if (sa.size() == 2 && sb.size() == 2) {
    const int ka = sa[1];
    const int kb = trans_b ? sb[1] : sb[0];
    if (ka != kb) {
      throw DimensionError("matmul inner dims " + Tensor::shape_str(sa) + " x " +
                           Tensor::shape_str(sb) + (trans_b ? "^T" : "") + " at new node " +
                           std::to_string(size()));
    }
    out = {sa[0], trans_b ? sb[0] : sb[1]};
  } else if (sa.size() == 3 && sb.size() == 3) {
    if (sa[0] != sb[0]) {
      throw DimensionError("batched matmul group counts differ: " + Tensor::shape_str(sa) +
                           " vs " + Tensor::shape_str(sb));
    }
    const int ka = sa[2];
    const int kb = trans_b ? sb[2] : sb[1];
    if (ka != kb) {
      throw DimensionError("batched matmul inner dims " + Tensor::shape_str(sa) + " x " +
                           Tensor::shape_str(sb) + (trans_b ? "^T" : ""));
    }
    out = {sa[0], sa[1], trans_b ? sb[1] : sb[2]};
  } else {
    throw DimensionError("matmul requires two rank-2 or two rank-3 tensors");
  }
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a, b};
  n.trans_b = trans_b;
  n.value = Tensor(out);
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  check_id(a);
  check_id(b);
  const auto& sa = nodes_[a].value.shape();
  const auto& sb = nodes_[b].value.shape();
  bool ok = false;
  if (sa == sb) {
    ok = true;
  } else if (sa.size() == 2 && sb.size() == 1 && sb[0] == sa[1]) {
    ok = true;  // (m,n) + (n)
  } else if (sa.size() == 2 && sb.size() == 2 && sb[0] == 1 && sb[1] == sa[1]) {
    ok = true;  // (m,n) + (1,n)
  } else if (sa.size() == 3 && sb.size() == 2 && sb[0] == sa[1] && sb[1] == sa[2]) {
    ok = true;  // (g,m,n) + (m,n)
  } else if (sa.size() == 3 && sb.size() == 3 && sb[0] == sa[0] && sb[1] == 1 && sb[2] == sa[2]) {
    ok = true;  // (g,m,n) + (g,1,n)
  }
  if (!ok) {
    throw DimensionError("add shapes incompatible: " + Tensor::shape_str(sa) + " + " +
                         Tensor::shape_str(sb) + " at new node " + std::to_string(size()));
  }
  Node n;
  n.op = Op::Add;
  n.inputs = {a, b};
  n.value = Tensor(sa);
  return push(std::move(n));
}

int Graph::scale(int a, double s) {
  check_id(a);
  Node n;
  n.op = Op::Scale;
  n.inputs = {a};
  n.scalar = s;
  n.value = Tensor(nodes_[a].value.shape());
  return push(std::move(n));
}

int Graph::reshape(int a, std::vector<int> shape) {
  check_id(a);
  if (shape_numel(shape) != nodes_[a].value.size()) {
    throw DimensionError("reshape element count mismatch: " +
                         Tensor::shape_str(nodes_[a].value.shape()) + " -> " +
                         Tensor::shape_str(shape));
  }
  Node n;
  n.op = Op::Reshape;
  n.inputs = {a};
  n.value = Tensor(std::move(shape));
  return push(std::move(n));
}

int Graph::slice(int a, int row0, int rows, int col0, int cols) {
  check_id(a);
  const auto& sa = nodes_[a].value.shape();
  if (sa.size() != 2) throw DimensionError("slice requires a rank-2 input");
  if (row0 < 0 || rows <= 0 || row0 + rows > sa[0] || col0 < 0 || cols <= 0 ||
      col0 + cols > sa[1]) {
    throw DimensionError("slice window out of range for " + Tensor::shape_str(sa));
  }
  Node n;
  n.op = Op::Slice;
  n.inputs = {a};
  n.row0 = row0;
  n.rows = rows;
  n.col0 = col0;
  n.cols = cols;
  n.value = Tensor({rows, cols});
  return push(std::move(n));
}

int Graph::concat_cols(const std::vector<int>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols needs at least one input");
  int m = -1, total = 0;
  for (int id : parts) {
    check_id(id);
    const auto& s = nodes_[id].value.shape();
    if (s.size() != 2) throw DimensionError("concat_cols requires rank-2 inputs");
    if (m < 0) m = s[0];
    if (s[0] != m) throw DimensionError("concat_cols row counts differ");
    total += s[1];
  }
  Node n;
  n.op = Op::ConcatCols;
  n.inputs = parts;
  n.value = Tensor({m, total});
  return push(std::move(n));
}

int Graph::layer_norm(int x, int gamma, int beta) {
  check_id(x);
  check_id(gamma);
  check_id(beta);
  const auto& sx = nodes_[x].value.shape();
  if (sx.size() != 2) throw DimensionError("layer_norm requires a rank-2 input");
  const std::vector<int> want{sx[1]};
  if (nodes_[gamma].value.shape() != want || nodes_[beta].value.shape() != want) {
    throw DimensionError("layer_norm gain/bias must have shape " + Tensor::shape_str(want));
  }
  Node n;
  n.op = Op::LayerNorm;
  n.inputs = {x, gamma, beta};
  n.value = Tensor(sx);
  n.aux.assign(static_cast<std::size_t>(2 * sx[0]), 0.0);
  return push(std::move(n));
}

int Graph::softmax(int a) {
  check_id(a);
  const auto& sa = nodes_[a].value.shape();
  if (sa.empty()) throw DimensionError("softmax requires rank >= 1");
  Node n;
  n.op = Op::Softmax;
  n.inputs = {a};
  n.value = Tensor(sa);
  return push(std::move(n));
}

int Graph::gelu(int a) {
  check_id(a);
  Node n;
  n.op = Op::Gelu;
  n.inputs = {a};
  n.value = Tensor(nodes_[a].value.shape());
  return push(std::move(n));
}

int Graph::mse(int a, int b) {
  check_id(a);
  check_id(b);
  if (!nodes_[a].value.same_shape(nodes_[b].value)) {
    throw DimensionError("mse operands differ: " + Tensor::shape_str(nodes_[a].value.shape()) +
                         " vs " + Tensor::shape_str(nodes_[b].value.shape()));
  }
  Node n;
  n.op = Op::Mse;
  n.inputs = {a, b};
  n.value = Tensor(std::vector<int>{});
  return push(std::move(n));
}

int Graph::transpose(int a) {
  check_id(a);
  const auto& sa = nodes_[a].value.shape();
  if (sa.size() != 2) throw DimensionError("transpose requires a rank-2 input");
  Node n;
  n.op = Op::Transpose;
  n.inputs = {a};
  n.value = Tensor({sa[1], sa[0]});
  return push(std::move(n));
}

void Graph::set_leaf(int id, const Tensor& v) {
  check_id(id);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.op != Op::Leaf) throw ContractError("set_leaf on non-leaf " + node_desc(n, id));
  if (!n.value.same_shape(v)) {
    throw DimensionError("set_leaf shape " + Tensor::shape_str(v.shape()) + " != " +
                         Tensor::shape_str(n.value.shape()) + " for " + node_desc(n, id));
  }
  n.value = v;
}

double* Graph::leaf_data(int id) {
  check_id(id);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.op != Op::Leaf) throw ContractError("leaf_data on non-leaf " + node_desc(n, id));
  return n.value.data();
}

const Tensor& Graph::grad(int id) const {
  check_id(id);
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!has_grad(id)) {
    throw ContractError("no gradient stored for " + node_desc(n, id) +
                        " (frozen or off the loss path)");
  }
  return n.grad;
}

bool Graph::has_grad(int id) const {
  check_id(id);
  return !needs_grad_.empty() && needs_grad_[static_cast<std::size_t>(id)] &&
         nodes_[static_cast<std::size_t>(id)].grad.size() ==
             nodes_[static_cast<std::size_t>(id)].value.size() &&
         nodes_[static_cast<std::size_t>(id)].grad.rank() ==
             nodes_[static_cast<std::size_t>(id)].value.rank();
}

std::vector<int> Graph::consumers(int id) const {
  check_id(id);
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (std::find(n.inputs.begin(), n.inputs.end(), id) != n.inputs.end()) out.push_back(i);
  }
  return out;
}

void Graph::ensure_grad_plan() {
  if (plan_ready_) return;
  needs_grad_.assign(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::Leaf) {
      needs_grad_[i] = n.trainable ? 1 : 0;
      continue;
    }
    for (int in : n.inputs) {
      if (needs_grad_[static_cast<std::size_t>(in)]) {
        needs_grad_[i] = 1;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (needs_grad_[i]) nodes_[i].grad = Tensor(nodes_[i].value.shape());
  }
  plan_ready_ = true;
}

void Graph::forward() {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op != Op::Leaf) eval(nodes_[i]);
  }
}

void Graph::eval(Node& n) {
  const Tensor& a = nodes_[static_cast<std::size_t>(n.inputs.empty() ? 0 : n.inputs[0])].value;
  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::MatMul: {
      const Tensor& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
      if (a.rank() == 2) {
        CMap ma(a.data(), a.dim(0), a.dim(1));
        Map mc(n.value.data(), n.value.dim(0), n.value.dim(1));
        if (n.trans_b) {
          CMap mb(b.data(), b.dim(0), b.dim(1));
          mc.noalias() = ma * mb.transpose();
        } else {
          CMap mb(b.data(), b.dim(0), b.dim(1));
          mc.noalias() = ma * mb;
        }
      } else {
        const int g = a.dim(0), m = a.dim(1), k = a.dim(2);
        const int bn = n.trans_b ? b.dim(1) : b.dim(2);
        const int brow = b.dim(1), bcol = b.dim(2);
        for (int gi = 0; gi < g; ++gi) {
          CMap ma(a.data() + static_cast<std::size_t>(gi) * m * k, m, k);
          CMap mb(b.data() + static_cast<std::size_t>(gi) * brow * bcol, brow, bcol);
          Map mc(n.value.data() + static_cast<std::size_t>(gi) * m * bn, m, bn);
          if (n.trans_b) {
            mc.noalias() = ma * mb.transpose();
          } else {
            mc.noalias() = ma * mb;
          }
        }
      }
      return;
    }
    case Op::Add: {
      const Tensor& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
      const double* pa = a.data();
      const double* pb = b.data();
      double* pc = n.value.data();
      const std::int64_t total = n.value.size();
      if (a.same_shape(b)) {
        for (std::int64_t i = 0; i < total; ++i) pc[i] = pa[i] + pb[i];
      } else if (a.rank() == 2) {
        const int m = a.dim(0), cols = a.dim(1);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < cols; ++j) {
            pc[static_cast<std::size_t>(i) * cols + j] =
                pa[static_cast<std::size_t>(i) * cols + j] + pb[j];
          }
        }
      } else if (b.rank() == 2) {  // (g,m,n) + (m,n)
        const std::int64_t chunk = b.size();
        const int g = a.dim(0);
        for (int gi = 0; gi < g; ++gi) {
          const double* base = pa + gi * chunk;
          double* out = pc + gi * chunk;
          for (std::int64_t i = 0; i < chunk; ++i) out[i] = base[i] + pb[i];
        }
      } else {  // (g,m,n) + (g,1,n)
        const int g = a.dim(0), m = a.dim(1), cols = a.dim(2);
        for (int gi = 0; gi < g; ++gi) {
          const double* row = pb + static_cast<std::size_t>(gi) * cols;
          for (int i = 0; i < m; ++i) {
            const std::size_t off = (static_cast<std::size_t>(gi) * m + i) * cols;
            for (int j = 0; j < cols; ++j) pc[off + j] = pa[off + j] + row[j];
          }
        }
      }
      return;
    }
    case Op::Scale: {
      const double s = n.scalar;
      const double* pa = a.data();
      double* pc = n.value.data();
      for (std::int64_t i = 0; i < n.value.size(); ++i) pc[i] = s * pa[i];
      return;
    }
    case Op::Reshape:
      std::copy(a.data(), a.data() + a.size(), n.value.data());
      return;
    case Op::Slice: {
      const int an = a.dim(1);
      for (int i = 0; i < n.rows; ++i) {
        const double* src = a.data() + static_cast<std::size_t>(n.row0 + i) * an + n.col0;
        std::copy(src, src + n.cols, n.value.data() + static_cast<std::size_t>(i) * n.cols);
      }
      return;
    }
    case Op::ConcatCols: {
      const int m = n.value.dim(0), total = n.value.dim(1);
      int off = 0;
      for (int id : n.inputs) {
        const Tensor& part = nodes_[static_cast<std::size_t>(id)].value;
        const int c = part.dim(1);
        for (int i = 0; i < m; ++i) {
          std::copy(part.data() + static_cast<std::size_t>(i) * c,
                    part.data() + static_cast<std::size_t>(i) * c + c,
                    n.value.data() + static_cast<std::size_t>(i) * total + off);
        }
        off += c;
      }
      return;
    }
    case Op::LayerNorm: {
      const Tensor& gm = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
      const Tensor& bt = nodes_[static_cast<std::size_t>(n.inputs[2])].value;
      const int m = a.dim(0), d = a.dim(1);
      for (int i = 0; i < m; ++i) {
        const double* x = a.data() + static_cast<std::size_t>(i) * d;
        double* y = n.value.data() + static_cast<std::size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        n.aux[static_cast<std::size_t>(2 * i)] = mu;
        n.aux[static_cast<std::size_t>(2 * i + 1)] = inv;
        for (int j = 0; j < d; ++j) y[j] = (x[j] - mu) * inv * gm.at(j) + bt.at(j);
      }
      return;
    }
    case Op::Softmax: {
      const int d = a.dim(a.rank() - 1);
      const std::int64_t rows = a.size() / d;
      for (std::int64_t i = 0; i < rows; ++i) {
        const double* x = a.data() + i * d;
        double* y = n.value.data() + i * d;
        double mx = x[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < d; ++j) {
          y[j] = std::exp(x[j] - mx);
          sum += y[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < d; ++j) y[j] *= inv;
      }
      return;
    }
    case Op::Gelu: {
      const double* pa = a.data();
      double* pc = n.value.data();
      for (std::int64_t i = 0; i < n.value.size(); ++i) pc[i] = gelu_val(pa[i]);
      return;
    }
    case Op::Mse: {
      const Tensor& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
      const double* pa = a.data();
      const double* pb = b.data();
      double acc = 0.0;
      for (std::int64_t i = 0; i < a.size(); ++i) {
        const double dlt = pa[i] - pb[i];
        acc += dlt * dlt;
      }
      n.value.data()[0] = acc / static_cast<double>(a.size());
      return;
    }
    case Op::Transpose: {
      const int m = a.dim(0), c = a.dim(1);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < c; ++j) n.value.at(j, i) = a.at(i, j);
      }
      return;
    }
  }
}

void Graph::backward(int loss_node) {
  check_id(loss_node);
  if (nodes_[static_cast<std::size_t>(loss_node)].value.rank() != 0) {
    throw ContractError("backward requires a scalar loss; " +
                        node_desc(nodes_[static_cast<std::size_t>(loss_node)], loss_node) +
                        " has shape " +
                        Tensor::shape_str(nodes_[static_cast<std::size_t>(loss_node)].value.shape()));
  }
  ensure_grad_plan();
  if (!needs_grad_[static_cast<std::size_t>(loss_node)]) {
    throw ContractError("loss node has no path from any trainable leaf");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (needs_grad_[i]) nodes_[i].grad.fill(0.0);
  }
  nodes_[static_cast<std::size_t>(loss_node)].grad.data()[0] = 1.0;
  for (int i = loss_node; i >= 0; --i) {
    if (needs_grad_[static_cast<std::size_t>(i)] &&
        nodes_[static_cast<std::size_t>(i)].op != Op::Leaf) {
      backprop(i);
    }
  }
}

void Graph::backprop(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Tensor& g = n.grad;
  auto needs = [this](int in) { return needs_grad_[static_cast<std::size_t>(in)] != 0; };
  auto in_val = [this](int i) -> const Tensor& { return nodes_[static_cast<std::size_t>(i)].value; };
  auto in_grad = [this](int i) -> Tensor& { return nodes_[static_cast<std::size_t>(i)].grad; };

  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::MatMul: {
      const int ia = n.inputs[0], ib = n.inputs[1];
      const Tensor& a = in_val(ia);
      const Tensor& b = in_val(ib);
      if (a.rank() == 2) {
        CMap ma(a.data(), a.dim(0), a.dim(1));
        CMap mb(b.data(), b.dim(0), b.dim(1));
        CMap mg(g.data(), g.dim(0), g.dim(1));
        if (needs(ia)) {
          Map da(in_grad(ia).data(), a.dim(0), a.dim(1));
          if (n.trans_b) {
            da.noalias() += mg * mb;
          } else {
            da.noalias() += mg * mb.transpose();
          }
        }
        if (needs(ib)) {
          Map db(in_grad(ib).data(), b.dim(0), b.dim(1));
          if (n.trans_b) {
            db.noalias() += mg.transpose() * ma;
          } else {
            db.noalias() += ma.transpose() * mg;
          }
        }
      } else {
        const int gcount = a.dim(0), m = a.dim(1), k = a.dim(2);
        const int brow = b.dim(1), bcol = b.dim(2);
        const int on = g.dim(2);
        for (int gi = 0; gi < gcount; ++gi) {
          CMap ma(a.data() + static_cast<std::size_t>(gi) * m * k, m, k);
          CMap mb(b.data() + static_cast<std::size_t>(gi) * brow * bcol, brow, bcol);
          CMap mg(g.data() + static_cast<std::size_t>(gi) * m * on, m, on);
          if (needs(ia)) {
            Map da(in_grad(ia).data() + static_cast<std::size_t>(gi) * m * k, m, k);
            if (n.trans_b) {
              da.noalias() += mg * mb;
            } else {
              da.noalias() += mg * mb.transpose();
            }
          }
          if (needs(ib)) {
            Map db(in_grad(ib).data() + static_cast<std::size_t>(gi) * brow * bcol, brow, bcol);
            if (n.trans_b) {
              db.noalias() += mg.transpose() * ma;
            } else {
              db.noalias() += ma.transpose() * mg;
            }
          }
        }
      }
      return;
    }
    case Op::Add: {
      const int ia = n.inputs[0], ib = n.inputs[1];
      const Tensor& a = in_val(ia);
      const Tensor& b = in_val(ib);
      if (needs(ia)) {
        double* da = in_grad(ia).data();
        const double* pg = g.data();
        for (std::int64_t i = 0; i < g.size(); ++i) da[i] += pg[i];
      }
      if (needs(ib)) {
        double* db = in_grad(ib).data();
        const double* pg = g.data();
        if (a.same_shape(b)) {
          for (std::int64_t i = 0; i < g.size(); ++i) db[i] += pg[i];
        } else if (a.rank() == 2) {
          const int m = a.dim(0), cols = a.dim(1);
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j < cols; ++j) db[j] += pg[static_cast<std::size_t>(i) * cols + j];
          }
        } else if (b.rank() == 2) {
          const std::int64_t chunk = b.size();
          for (int gi = 0; gi < a.dim(0); ++gi) {
            const double* src = pg + gi * chunk;
            for (std::int64_t i = 0; i < chunk; ++i) db[i] += src[i];
          }
        } else {
          const int gcount = a.dim(0), m = a.dim(1), cols = a.dim(2);
          for (int gi = 0; gi < gcount; ++gi) {
            double* row = db + static_cast<std::size_t>(gi) * cols;
            for (int i = 0; i < m; ++i) {
              const std::size_t off = (static_cast<std::size_t>(gi) * m + i) * cols;
              for (int j = 0; j < cols; ++j) row[j] += pg[off + j];
            }
          }
        }
      }
      return;
    }
    case Op::Scale: {
      if (needs(n.inputs[0])) {
        double* da = in_grad(n.inputs[0]).data();
        const double* pg = g.data();
        for (std::int64_t i = 0; i < g.size(); ++i) da[i] += n.scalar * pg[i];
      }
      return;
    }
    case Op::Reshape: {
      if (needs(n.inputs[0])) {
        double* da = in_grad(n.inputs[0]).data();
        const double* pg = g.data();
        for (std::int64_t i = 0; i < g.size(); ++i) da[i] += pg[i];
      }
      return;
    }
    case Op::Slice: {
      if (needs(n.inputs[0])) {
        Tensor& da = in_grad(n.inputs[0]);
        const int an = da.dim(1);
        for (int i = 0; i < n.rows; ++i) {
          double* dst = da.data() + static_cast<std::size_t>(n.row0 + i) * an + n.col0;
          const double* src = g.data() + static_cast<std::size_t>(i) * n.cols;
          for (int j = 0; j < n.cols; ++j) dst[j] += src[j];
        }
      }
      return;
    }
    case Op::ConcatCols: {
      const int m = n.value.dim(0), total = n.value.dim(1);
      int off = 0;
      for (int id_in : n.inputs) {
        const int c = in_val(id_in).dim(1);
        if (needs(id_in)) {
          Tensor& da = in_grad(id_in);
          for (int i = 0; i < m; ++i) {
            const double* src = g.data() + static_cast<std::size_t>(i) * total + off;
            double* dst = da.data() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) dst[j] += src[j];
          }
        }
        off += c;
      }
      return;
    }
    case Op::LayerNorm: {
      const int ix = n.inputs[0], ig = n.inputs[1], ibt = n.inputs[2];
      const Tensor& x = in_val(ix);
      const Tensor& gm = in_val(ig);
      const int m = x.dim(0), d = x.dim(1);
      std::vector<double> xhat(static_cast<std::size_t>(d));
      std::vector<double> dxhat(static_cast<std::size_t>(d));
      for (int i = 0; i < m; ++i) {
        const double mu = n.aux[static_cast<std::size_t>(2 * i)];
        const double inv = n.aux[static_cast<std::size_t>(2 * i + 1)];
        const double* xr = x.data() + static_cast<std::size_t>(i) * d;
        const double* gr = g.data() + static_cast<std::size_t>(i) * d;
        double mean_dx = 0.0, mean_dxx = 0.0;
        for (int j = 0; j < d; ++j) {
          xhat[static_cast<std::size_t>(j)] = (xr[j] - mu) * inv;
          dxhat[static_cast<std::size_t>(j)] = gr[j] * gm.at(j);
          mean_dx += dxhat[static_cast<std::size_t>(j)];
          mean_dxx += dxhat[static_cast<std::size_t>(j)] * xhat[static_cast<std::size_t>(j)];
        }
        mean_dx /= d;
        mean_dxx /= d;
        if (needs(ig)) {
          Tensor& dg = in_grad(ig);
          for (int j = 0; j < d; ++j) dg.at(j) += gr[j] * xhat[static_cast<std::size_t>(j)];
        }
        if (needs(ibt)) {
          Tensor& dbt = in_grad(ibt);
          for (int j = 0; j < d; ++j) dbt.at(j) += gr[j];
        }
        if (needs(ix)) {
          Tensor& dx = in_grad(ix);
          double* dxr = dx.data() + static_cast<std::size_t>(i) * d;
          for (int j = 0; j < d; ++j) {
            dxr[j] += inv * (dxhat[static_cast<std::size_t>(j)] - mean_dx -
                             xhat[static_cast<std::size_t>(j)] * mean_dxx);
          }
        }
      }
      return;
    }
    case Op::Softmax: {
      if (needs(n.inputs[0])) {
        Tensor& da = in_grad(n.inputs[0]);
        const int d = n.value.dim(n.value.rank() - 1);
        const std::int64_t rows = n.value.size() / d;
        for (std::int64_t i = 0; i < rows; ++i) {
          const double* y = n.value.data() + i * d;
          const double* gy = g.data() + i * d;
          double dot = 0.0;
          for (int j = 0; j < d; ++j) dot += y[j] * gy[j];
          double* dst = da.data() + i * d;
          for (int j = 0; j < d; ++j) dst[j] += y[j] * (gy[j] - dot);
        }
      }
      return;
    }
    case Op::Gelu: {
      if (needs(n.inputs[0])) {
        const Tensor& a = in_val(n.inputs[0]);
        double* da = in_grad(n.inputs[0]).data();
        const double* pg = g.data();
        const double* pa = a.data();
        for (std::int64_t i = 0; i < g.size(); ++i) da[i] += pg[i] * gelu_deriv(pa[i]);
      }
      return;
    }
    case Op::Mse: {
      const int ia = n.inputs[0], ib = n.inputs[1];
      const Tensor& a = in_val(ia);
      const Tensor& b = in_val(ib);
      const double scale = 2.0 * g.data()[0] / static_cast<double>(a.size());
      if (needs(ia)) {
        double* da = in_grad(ia).data();
        for (std::int64_t i = 0; i < a.size(); ++i) da[i] += scale * (a.data()[i] - b.data()[i]);
      }
      if (needs(ib)) {
        double* db = in_grad(ib).data();
        for (std::int64_t i = 0; i < a.size(); ++i) db[i] -= scale * (a.data()[i] - b.data()[i]);
      }
      return;
    }
    case Op::Transpose: {
      if (needs(n.inputs[0])) {
        Tensor& da = in_grad(n.inputs[0]);
        const int m = da.dim(0), c = da.dim(1);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < c; ++j) da.at(i, j) += g.at(j, i);
        }
      }
      return;
    }
  }
}

GradCheckResult grad_check(Graph& g, int loss_node, double eps, std::uint64_t seed,
                           int max_coords_per_leaf) {
  if (!(eps >= 1e-10 && eps <= 1e-2)) {
    throw ContractError("grad_check eps must lie in [1e-10, 1e-2]");
  }
  g.forward();
  g.backward(loss_node);

  struct LeafPick {
    int id;
    std::vector<std::int64_t> coords;
    std::vector<double> ad;
  };
  std::vector<LeafPick> picks;
  Rng rng(seed);
  for (int id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    if (n.op != Op::Leaf || !n.trainable) continue;
    LeafPick p;
    p.id = id;
    const std::int64_t total = n.value.size();
    if (max_coords_per_leaf <= 0 || total <= max_coords_per_leaf) {
      for (std::int64_t c = 0; c < total; ++c) p.coords.push_back(c);
    } else {
      for (int c = 0; c < max_coords_per_leaf; ++c) {
        p.coords.push_back(static_cast<std::int64_t>(
            rng.uniform_index(static_cast<std::uint64_t>(total))));
      }
    }
    const Tensor& ad = g.grad(id);
    for (std::int64_t c : p.coords) p.ad.push_back(ad.data()[c]);
    picks.push_back(std::move(p));
  }

  GradCheckResult res;
  for (const LeafPick& p : picks) {
    for (std::size_t k = 0; k < p.coords.size(); ++k) {
      const std::int64_t c = p.coords[k];
      double* slot = g.leaf_data(p.id) + c;
      const double orig = *slot;
      *slot = orig + eps;
      g.forward();
      const double lp = g.value(loss_node).item();
      *slot = orig - eps;
      g.forward();
      const double lm = g.value(loss_node).item();
      *slot = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      const double ad = p.ad[k];
      const double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      res.max_rel_err = std::max(res.max_rel_err, rel);
      ++res.coords_checked;
    }
  }
  g.forward();  // leave values consistent with restored leaves
  return res;
}

}  // namespace cwmi
