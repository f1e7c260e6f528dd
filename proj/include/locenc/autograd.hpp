#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "locenc/tensor.hpp"

namespace locenc {

/// A trainable tensor with its gradient buffer. Frozen parameters take part
/// in forward passes but never receive gradient or optimizer updates.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  bool frozen = false;
  bool decay = true;  // subject to weight decay

  Parameter() = default;
  Parameter(std::string n, Tensor2 v) : name(std::move(n)), value(std::move(v)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Tensor2& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Scalar value of a 1x1 node.
  double item() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a computation as it is evaluated and replays it backwards.
/// One tape per forward/backward pass; a tape is not thread-safe, but
/// independent tapes may run concurrently.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  /// Leaf bound to a parameter; backward() accumulates into p.grad unless frozen.
  Var param(Parameter& p);

  /// Records an op node. `parents` decide whether the node needs a gradient.
  Var record(Tensor2 value, std::span<const Var> parents, Backprop backprop);

  /// Reverse sweep from a 1x1 loss. Throws NumericalError when the loss or any
  /// parameter gradient is non-finite.
  void backward(Var loss);

  const Tensor2& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient of the loss w.r.t. node `id`; zero-filled if nothing reached it.
  const Tensor2& grad(std::size_t id);
  /// Adds `g` into node `id`'s gradient (no-op for nodes that need none).
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    bool needs_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    Backprop backprop;
  };
  void ensure_grad(Node& n);
  Var make(Node n);

  std::vector<Node> nodes_;
};

template <typename Derived>
void Tape::accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.has_grad) {
    n.grad.noalias() = g;
    n.has_grad = true;
  } else {
    n.grad.noalias() += g;
  }
}

// Differentiable operations. Each checks shapes and throws ShapeError on mismatch.

Var matmul(Var a, Var b);                ///< a * b
Var matmul_nt(Var a, Var b);             ///< a * b^T
Var add(Var a, Var b);                   ///< same shape
Var sub(Var a, Var b);                   ///< same shape
Var hadamard(Var a, Var b);              ///< elementwise product, same shape
Var add_row(Var x, Var row);             ///< x + 1 * row, row is 1 x cols
Var scale(Var x, double c);
Var affine(Var x, Var w, Var b);         ///< x * w + 1 * b, b is 1 x cols(w)
/// sin(omega0 * (x * w + 1 * b)); keeps the cosine for the backward pass.
Var sine_layer(Var x, Var w, Var b, double omega0);
Var scale_by(Var x, Var s);              ///< x * s, s is 1x1
Var sin(Var x);
Var relu(Var x);
Var exp(Var x);
Var sum(Var x);                          ///< 1x1
Var mean(Var x);                         ///< 1x1
Var l2_normalize_rows(Var x);            ///< rows with norm < 1e-12 throw DomainError
Var mse_loss(Var pred, const Tensor2& target);
/// Mean softmax cross-entropy of each row's logits against integer labels.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
/// Symmetric in-batch contrastive cross-entropy over a square logit matrix:
/// (sum of row terms + sum of column terms) / 2N, targets on the diagonal.
Var symmetric_diagonal_cross_entropy(Var logits);

}  // namespace locenc
