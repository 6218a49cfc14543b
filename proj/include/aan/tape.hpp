#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "aan/tensor.hpp"

namespace aan::ndgrad {

using NodeId = int;

// Define-by-run tape. Values are computed eagerly as operations are
// recorded, so node order is already topological; backward() walks the
// nodes once in reverse. Gradient buffers are rebuilt on every backward()
// call, so running it twice on the same tape gives identical results.
class Tape {
 public:
  NodeId leaf(Tensor value) { return push(Op::kLeaf, {}, std::move(value)); }

  // Gather rows of a matrix: parameter-embedding lookup and row slicing
  // share one kernel. Adjoint scatter-adds row gradients.
  NodeId gather_rows(NodeId m, std::vector<int> ids) {
    const Tensor& src = val(m);
    check(src.rank() == 2, "gather_rows: input must be a matrix");
    Tensor out({ids.size(), src.cols()});
    for (std::size_t r = 0; r < ids.size(); ++r) {
      check(ids[r] >= 0 && static_cast<std::size_t>(ids[r]) < src.rows(),
            "gather_rows: row index out of range");
      for (std::size_t j = 0; j < src.cols(); ++j) out.at(r, j) = src.at(ids[r], j);
    }
    NodeId id = push(Op::kGatherRows, {m}, std::move(out));
    nodes_[id].indices = std::move(ids);
    return id;
  }

  // Single row of a matrix as a vector.
  NodeId row(NodeId m, int i) {
    const Tensor& src = val(m);
    check(src.rank() == 2 && i >= 0 && static_cast<std::size_t>(i) < src.rows(),
          "row: index out of range");
    Tensor out({src.cols()});
    for (std::size_t j = 0; j < src.cols(); ++j) out[j] = src.at(i, j);
    NodeId id = push(Op::kRow, {m}, std::move(out));
    nodes_[id].indices = {i};
    return id;
  }

  // Stack equal-length vectors into a matrix, one per row.
  NodeId stack_rows(const std::vector<NodeId>& rows_in) {
    check(!rows_in.empty(), "stack_rows: no inputs");
    std::size_t n = val(rows_in[0]).numel();
    Tensor out({rows_in.size(), n});
    for (std::size_t r = 0; r < rows_in.size(); ++r) {
      const Tensor& v = val(rows_in[r]);
      check(v.rank() == 1 && v.numel() == n, "stack_rows: inputs must be equal-length vectors");
      for (std::size_t j = 0; j < n; ++j) out.at(r, j) = v[j];
    }
    return push(Op::kStackRows, rows_in, std::move(out));
  }

  NodeId concat(NodeId a, NodeId b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    check(x.rank() == 1 && y.rank() == 1, "concat: inputs must be vectors");
    Tensor out({x.numel() + y.numel()});
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i];
    for (std::size_t i = 0; i < y.numel(); ++i) out[x.numel() + i] = y[i];
    return push(Op::kConcat, {a, b}, std::move(out));
  }

  // C = A * B
  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(), "matmul: shape mismatch");
    Tensor out({A.rows(), B.cols()});
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t k = 0; k < A.cols(); ++k) {
        double aik = A.at(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < B.cols(); ++j) out.at(i, j) += aik * B.at(k, j);
      }
    return push(Op::kMatMul, {a, b}, std::move(out));
  }

  // C = A * B^T  (A: m x k, B: n x k -> m x n)
  NodeId matmul_nt(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check(A.rank() == 2 && B.rank() == 2 && A.cols() == B.cols(), "matmul_nt: shape mismatch");
    Tensor out({A.rows(), B.rows()});
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < B.rows(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < A.cols(); ++k) s += A.at(i, k) * B.at(j, k);
        out.at(i, j) = s;
      }
    return push(Op::kMatMulNT, {a, b}, std::move(out));
  }

  // y = A * x
  NodeId matvec(NodeId a, NodeId x) {
    const Tensor& A = val(a);
    const Tensor& v = val(x);
    check(A.rank() == 2 && v.rank() == 1 && A.cols() == v.numel(), "matvec: shape mismatch");
    Tensor out({A.rows()});
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) s += A.at(i, j) * v[j];
      out[i] = s;
    }
    return push(Op::kMatVec, {a, x}, std::move(out));
  }

  // y = A^T * x  (A: m x n, x: m -> y: n)
  NodeId matvec_t(NodeId a, NodeId x) {
    const Tensor& A = val(a);
    const Tensor& v = val(x);
    check(A.rank() == 2 && v.rank() == 1 && A.rows() == v.numel(), "matvec_t: shape mismatch");
    Tensor out({A.cols()});
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) out[j] += A.at(i, j) * v[i];
    return push(Op::kMatVecT, {a, x}, std::move(out));
  }

  NodeId add(NodeId a, NodeId b) { return add_n({a, b}); }

  NodeId add_n(const std::vector<NodeId>& terms) {
    check(!terms.empty(), "add_n: no inputs");
    Tensor out = val(terms[0]);
    for (std::size_t i = 1; i < terms.size(); ++i) {
      const Tensor& t = val(terms[i]);
      check(t.same_shape(out), "add_n: shape mismatch");
      for (std::size_t j = 0; j < out.numel(); ++j) out[j] += t[j];
    }
    return push(Op::kAddN, terms, std::move(out));
  }

  // Broadcast a length-n vector over the rows of an m x n matrix.
  NodeId add_bias(NodeId m, NodeId b) {
    const Tensor& M = val(m);
    const Tensor& B = val(b);
    check(B.rank() == 1 && M.cols() == B.numel(), "add_bias: shape mismatch");
    Tensor out = M;
    for (std::size_t i = 0; i < M.rows(); ++i)
      for (std::size_t j = 0; j < M.cols(); ++j) out.at(i, j) += B[j];
    return push(Op::kAddBias, {m, b}, std::move(out));
  }

  NodeId scale(NodeId a, double c) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    NodeId id = push(Op::kScale, {a}, std::move(out));
    nodes_[id].factor = c;
    return id;
  }

  NodeId tanh(NodeId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    return push(Op::kTanh, {a}, std::move(out));
  }

  // relu'(0) taken as 0.
  NodeId relu(NodeId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return push(Op::kRelu, {a}, std::move(out));
  }

  NodeId log(NodeId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
    return push(Op::kLog, {a}, std::move(out));
  }

  NodeId mul(NodeId a, NodeId b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    check(x.same_shape(y), "mul: shape mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= y[i];
    return push(Op::kMul, {a, b}, std::move(out));
  }

  // Elementwise product with an externally supplied constant mask
  // (inverted-dropout masks live outside the tape, keeping forward pure).
  NodeId apply_mask(NodeId a, Tensor mask) {
    const Tensor& x = val(a);
    check(x.same_shape(mask), "apply_mask: shape mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
    NodeId id = push(Op::kApplyMask, {a}, std::move(out));
    nodes_[id].aux = std::move(mask);
    return id;
  }

  // Softmax along the last axis (per row for matrices, whole vector
  // otherwise). Max-subtraction keeps it stable and bit-reproducible.
  NodeId softmax(NodeId a) {
    const Tensor& x = val(a);
    check(x.rank() >= 1, "softmax: scalar input");
    Tensor out = x;
    std::size_t nrows = x.numel() / x.cols();
    for (std::size_t r = 0; r < nrows; ++r) {
      double* p = out.data() + r * x.cols();
      double mx = p[0];
      for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, p[j]);
      double sum = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) {
        p[j] = std::exp(p[j] - mx);
        sum += p[j];
      }
      for (std::size_t j = 0; j < x.cols(); ++j) p[j] /= sum;
    }
    return push(Op::kSoftmax, {a}, std::move(out));
  }

  NodeId sum(NodeId a) {
    const Tensor& x = val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x[i];
    return push(Op::kSum, {a}, Tensor::scalar(s));
  }

  NodeId frobenius_norm(NodeId a) {
    const Tensor& x = val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x[i] * x[i];
    return push(Op::kFrobeniusNorm, {a}, Tensor::scalar(std::sqrt(s)));
  }

  NodeId pick(NodeId a, int index) {
    const Tensor& x = val(a);
    check(x.rank() == 1 && index >= 0 && static_cast<std::size_t>(index) < x.numel(),
          "pick: index out of range");
    NodeId id = push(Op::kPick, {a}, Tensor::scalar(x[index]));
    nodes_[id].indices = {index};
    return id;
  }

  const Tensor& value(NodeId id) const { return nodes_[id].value; }

  // Valid after backward().
  const Tensor& grad(NodeId id) const { return grads_[id]; }

  std::size_t size() const { return nodes_.size(); }

  void backward(NodeId loss) {
    check(loss >= 0 && static_cast<std::size_t>(loss) < nodes_.size(), "backward: bad node id");
    check(nodes_[loss].value.numel() == 1, "backward: loss node must be scalar");
    grads_.clear();
    grads_.reserve(nodes_.size());
    for (const Node& n : nodes_) grads_.emplace_back(Tensor(n.value.shape()));
    grads_[loss][0] = 1.0;
    for (NodeId i = loss; i >= 0; --i) accumulate(i);
  }

 private:
  enum class Op {
    kLeaf, kGatherRows, kRow, kStackRows, kConcat, kMatMul, kMatMulNT,
    kMatVec, kMatVecT, kAddN, kAddBias, kScale, kTanh, kRelu, kLog, kMul,
    kApplyMask, kSoftmax, kSum, kFrobeniusNorm, kPick,
  };

  struct Node {
    Op op;
    std::vector<NodeId> in;
    Tensor value;
    std::vector<int> indices;
    Tensor aux;
    double factor = 1.0;
  };

  NodeId push(Op op, std::vector<NodeId> in, Tensor value) {
    nodes_.push_back(Node{op, std::move(in), std::move(value), {}, {}, 1.0});
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  const Tensor& val(NodeId id) const {
    check(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), "bad node id");
    return nodes_[id].value;
  }

  void accumulate(NodeId id) {
    const Node& n = nodes_[id];
    const Tensor& g = grads_[id];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kGatherRows: {
        Tensor& gin = grads_[n.in[0]];
        std::size_t c = n.value.cols();
        for (std::size_t r = 0; r < n.indices.size(); ++r)
          for (std::size_t j = 0; j < c; ++j) gin.at(n.indices[r], j) += g.at(r, j);
        break;
      }
      case Op::kRow: {
        Tensor& gin = grads_[n.in[0]];
        for (std::size_t j = 0; j < n.value.numel(); ++j) gin.at(n.indices[0], j) += g[j];
        break;
      }
      case Op::kStackRows: {
        std::size_t c = n.value.cols();
        for (std::size_t r = 0; r < n.in.size(); ++r) {
          Tensor& gin = grads_[n.in[r]];
          for (std::size_t j = 0; j < c; ++j) gin[j] += g.at(r, j);
        }
        break;
      }
      case Op::kConcat: {
        Tensor& ga = grads_[n.in[0]];
        Tensor& gb = grads_[n.in[1]];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g[ga.numel() + i];
        break;
      }
      case Op::kMatMul: {
        const Tensor& A = nodes_[n.in[0]].value;
        const Tensor& B = nodes_[n.in[1]].value;
        Tensor& gA = grads_[n.in[0]];
        Tensor& gB = grads_[n.in[1]];
        // dA += dC * B^T ; dB += A^T * dC
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t k = 0; k < A.cols(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < B.cols(); ++j) s += g.at(i, j) * B.at(k, j);
            gA.at(i, k) += s;
          }
        for (std::size_t k = 0; k < B.rows(); ++k)
          for (std::size_t j = 0; j < B.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < A.rows(); ++i) s += A.at(i, k) * g.at(i, j);
            gB.at(k, j) += s;
          }
        break;
      }
      case Op::kMatMulNT: {
        const Tensor& A = nodes_[n.in[0]].value;
        const Tensor& B = nodes_[n.in[1]].value;
        Tensor& gA = grads_[n.in[0]];
        Tensor& gB = grads_[n.in[1]];
        // C = A B^T: dA += dC * B ; dB += dC^T * A
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t k = 0; k < A.cols(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < B.rows(); ++j) s += g.at(i, j) * B.at(j, k);
            gA.at(i, k) += s;
          }
        for (std::size_t j = 0; j < B.rows(); ++j)
          for (std::size_t k = 0; k < B.cols(); ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < A.rows(); ++i) s += g.at(i, j) * A.at(i, k);
            gB.at(j, k) += s;
          }
        break;
      }
      case Op::kMatVec: {
        const Tensor& A = nodes_[n.in[0]].value;
        const Tensor& x = nodes_[n.in[1]].value;
        Tensor& gA = grads_[n.in[0]];
        Tensor& gx = grads_[n.in[1]];
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t j = 0; j < A.cols(); ++j) {
            gA.at(i, j) += g[i] * x[j];
            gx[j] += A.at(i, j) * g[i];
          }
        break;
      }
      case Op::kMatVecT: {
        const Tensor& A = nodes_[n.in[0]].value;
        const Tensor& x = nodes_[n.in[1]].value;
        Tensor& gA = grads_[n.in[0]];
        Tensor& gx = grads_[n.in[1]];
        // y = A^T x: dA += x outer dy ; dx += A dy
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t j = 0; j < A.cols(); ++j) {
            gA.at(i, j) += x[i] * g[j];
            gx[i] += A.at(i, j) * g[j];
          }
        break;
      }
      case Op::kAddN:
        for (NodeId in : n.in) {
          Tensor& gin = grads_[in];
          for (std::size_t i = 0; i < g.numel(); ++i) gin[i] += g[i];
        }
        break;
      case Op::kAddBias: {
        Tensor& gm = grads_[n.in[0]];
        Tensor& gb = grads_[n.in[1]];
        for (std::size_t i = 0; i < g.numel(); ++i) gm[i] += g[i];
        std::size_t c = n.value.cols();
        for (std::size_t i = 0; i < n.value.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += g.at(i, j);
        break;
      }
      case Op::kScale: {
        Tensor& gin = grads_[n.in[0]];
        for (std::size_t i = 0; i < g.numel(); ++i) gin[i] += n.factor * g[i];
        break;
      }
      case Op::kTanh: {
        Tensor& gin = grads_[n.in[0]];
        for (std::size_t i = 0; i < g.numel(); ++i)
          gin[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kRelu: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& gin = grads_[n.in[0]];
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (x[i] > 0.0) gin[i] += g[i];
        break;
      }
      case Op::kLog: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& gin = grads_[n.in[0]];
        for (std::size_t i = 0; i < g.numel(); ++i) gin[i] += g[i] / x[i];
        break;
      }
      case Op::kMul: {
        const Tensor& x = nodes_[n.in[0]].value;
        const Tensor& y = nodes_[n.in[1]].value;
        Tensor& gx = grads_[n.in[0]];
        Tensor& gy = grads_[n.in[1]];
        for (std::size_t i = 0; i < g.numel(); ++i) {
          gx[i] += g[i] * y[i];
          gy[i] += g[i] * x[i];
        }
        break;
      }
      case Op::kApplyMask: {
        Tensor& gin = grads_[n.in[0]];
        for (std::size_t i = 0; i < g.numel(); ++i) gin[i] += g[i] * n.aux[i];
        break;
      }
      case Op::kSoftmax: {
        Tensor& gin = grads_[n.in[0]];
        const Tensor& y = n.value;
        std::size_t c = y.cols();
        std::size_t nrows = y.numel() / c;
        for (std::size_t r = 0; r < nrows; ++r) {
          const double* yr = y.data() + r * c;
          const double* gr = g.data() + r * c;
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
          for (std::size_t j = 0; j < c; ++j) gin[r * c + j] += yr[j] * (gr[j] - dot);
        }
        break;
      }
      case Op::kSum: {
        Tensor& gin = grads_[n.in[0]];
        for (std::size_t i = 0; i < gin.numel(); ++i) gin[i] += g[0];
        break;
      }
      case Op::kFrobeniusNorm: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& gin = grads_[n.in[0]];
        double norm = n.value[0];
        if (norm != 0.0) {  // subgradient 0 at the origin
          for (std::size_t i = 0; i < x.numel(); ++i) gin[i] += g[0] * x[i] / norm;
        }
        break;
      }
      case Op::kPick:
        grads_[n.in[0]][n.indices[0]] += g[0];
        break;
    }
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace aan::ndgrad
