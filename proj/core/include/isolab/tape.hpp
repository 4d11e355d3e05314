#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "isolab/matrix.hpp"

namespace isolab {

// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = 0;
};

// Reverse-mode differentiation over a recorded computation of matrix-valued
// nodes. Each operation appends one node holding its output value and a
// closure mapping the node's output gradient to contributions on its inputs;
// backward() replays the closures in reverse creation order and accumulates
// exact gradients into every leaf.
//
// Stochastic elements (dropout masks, batch composition) enter the graph as
// constants of the recorded pass, so the recorded scalar is a deterministic,
// differentiable function of the leaves.
//
// The tape is single-writer: record and backpropagate from one thread.
class Tape {
 public:
  // Differentiable input (parameter or data).
  Var leaf(Matrix value);

  // y = a + b, same shape
  Var add(Var a, Var b);
  // y = a - b, same shape
  Var sub(Var a, Var b);
  // y = k * a
  Var scale(Var a, double k);
  // y = a + k (elementwise)
  Var add_scalar(Var a, double k);
  // y = a (+) k, k a constant matrix of a's shape
  Var add_const(Var a, const Matrix& k);
  // y = a .* b, same shape, both differentiable
  Var mul(Var a, Var b);
  // y = a .* k, k a constant matrix (dropout masks)
  Var mul_const(Var a, const Matrix& k);
  // y = a b
  Var matmul(Var a, Var b);
  // y = a b^T
  Var matmul_nt(Var a, Var b);
  // y = a^T b
  Var matmul_tn(Var a, Var b);
  // y(i,:) = a(i,:) + r, r a 1 x cols node (bias broadcast)
  Var add_row(Var a, Var r);
  // y(i,j) = a(i,j) * r(j), r a 1 x cols node
  Var mul_row(Var a, Var r);
  // y(i,j) = a(i,j) * c(i), c a rows x 1 node
  Var mul_col(Var a, Var c);
  Var tanh_act(Var a);
  // y = sqrt(a + eps), elementwise
  Var sqrt_eps(Var a, double eps);
  // y = (a + eps)^(-1/2), elementwise
  Var rsqrt_eps(Var a, double eps);
  // y = 1 / a, elementwise
  Var recip(Var a);
  // y = a - column means broadcast over rows
  Var col_center(Var a);
  // y = 1 x cols vector of column means
  Var col_mean(Var a);
  // y = rows x 1 vector of row sums
  Var row_sum(Var a);
  // y = 1 x d diagonal of a (d x d)
  Var diag_part(Var a);
  // scalar sum of all entries
  Var sum(Var a);
  // scalar sqrt(sum(a^2) + eps)
  Var fro_norm_eps(Var a, double eps);
  // Mean pooling of embedding-table rows: out(i,:) is the mean of
  // table(tok,:) over tok in seqs[i]. Sequences must be non-empty.
  Var embed_mean(Var table, std::vector<std::vector<int>> seqs);
  // scalar mean over rows of (logsumexp(logits(i,:)) - logits(i, labels[i]))
  Var softmax_xent(Var logits, std::vector<int> labels);
  // scalar (1/N) * sum_i (logsumexp(s(i,:)) - s(i,i)), s square
  Var row_lse_minus_diag_mean(Var s);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  // Value of a 1x1 node.
  double scalar(Var v) const;

  // Backpropagates from a scalar node; afterwards grad() is valid for every
  // node the scalar depends on.
  void backward(Var loss);
  const Matrix& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  void reset();

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // allocated on first accumulation
    std::function<void(Tape&, const Matrix&)> back;  // null for leaves
  };

  Var push(Matrix value, std::function<void(Tape&, const Matrix&)> back);
  void accumulate(Var v, const Matrix& g);
  // Adds k*g into the gradient of v without materializing a temporary.
  void accumulate_scaled(Var v, const Matrix& g, double k);
  Matrix& grad_storage(Var v);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace isolab
