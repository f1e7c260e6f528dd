#include "locenc/autograd.hpp"

#include <memory>

#include <cmath>
#include <string>

namespace locenc {

const Tensor2& Var::value() const { return tape_->value(id_); }

double Var::item() const {
  const Tensor2& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("item() on a non-scalar node " + shape_str(v));
  return v(0, 0);
}

Var Tape::make(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor2 value) {
  Node n;
  n.value = std::move(value);
  return make(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.needs_grad = !p.frozen;
  n.param = &p;
  return make(std::move(n));
}

Var Tape::record(Tensor2 value, std::span<const Var> parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw Error("operands recorded on different tapes");
    n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (n.needs_grad) n.backprop = std::move(backprop);
  return make(std::move(n));
}

void Tape::ensure_grad(Node& n) {
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
}

const Tensor2& Tape::grad(std::size_t id) {
  ensure_grad(nodes_[id]);
  return nodes_[id].grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("backward: loss belongs to another tape");
  Node& root = nodes_[loss.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(root.value));
  }
  if (!std::isfinite(root.value(0, 0))) throw NumericalError("backward: loss is not finite");
  if (!root.needs_grad) return;
  root.grad = Tensor2::Ones(1, 1);
  root.has_grad = true;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.needs_grad) continue;
    if (n.backprop) n.backprop(*this, i);
  }
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    Node& n = nodes_[i];
    if (n.param == nullptr || !n.has_grad || n.param->frozen) continue;
    if (!n.grad.allFinite()) {
      throw NumericalError("backward: non-finite gradient for parameter '" + n.param->name + "'");
    }
    if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols()) {
      n.param->zero_grad();
    }
    n.param->grad += n.grad;
  }
}

namespace {

void same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw Error("operands recorded on different tapes");
}

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
  }
}

double log_sum_exp(const double* x, Eigen::Index n, Eigen::Index stride) {
  double mx = x[0];
  for (Eigen::Index j = 1; j < n; ++j) mx = std::max(mx, x[j * stride]);
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) s += std::exp(x[j * stride] - mx);
  return mx + std::log(s);
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  Tensor2 out = a.value() * b.value();
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), parents, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  same_tape(a, b);
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a.value()) + " * (" + shape_str(b.value()) + ")^T");
  }
  Tensor2 out = a.value() * b.value().transpose();
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), parents, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

namespace {

void check_affine(const Var& x, const Var& w, const Var& b, const char* what) {
  same_tape(x, w);
  same_tape(x, b);
  if (x.cols() != w.rows()) throw ShapeError(std::string(what) + ": " + shape_str(x.value()) + " * " + shape_str(w.value()));
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError(std::string(what) + ": bias " + shape_str(b.value()) + " does not fit " + shape_str(w.value()));
  }
}

// Shared backward of x * w + b given the gradient d w.r.t. the affine output.
void affine_backward(Tape& t, std::size_t ix, std::size_t iw, std::size_t ib, const Tensor2& d) {
  if (t.needs_grad(ix)) t.accumulate(ix, d * t.value(iw).transpose());
  if (t.needs_grad(iw)) t.accumulate(iw, t.value(ix).transpose() * d);
  if (t.needs_grad(ib)) t.accumulate(ib, d.colwise().sum());
}

}  // namespace

Var affine(Var x, Var w, Var b) {
  check_affine(x, w, b, "affine");
  Tensor2 out(x.rows(), w.cols());
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  const Var parents[] = {x, w, b};
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape()->record(std::move(out), parents, [ix, iw, ib](Tape& t, std::size_t self) {
    affine_backward(t, ix, iw, ib, t.grad(self));
  });
}

Var sine_layer(Var x, Var w, Var b, double omega0) {
  check_affine(x, w, b, "sine_layer");
  Tensor2 z(x.rows(), w.cols());
  z.noalias() = x.value() * w.value();
  z.rowwise() += b.value().row(0);
  auto dcos = std::make_shared<Tensor2>(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double a = omega0 * z.data()[i];
    z.data()[i] = std::sin(a);
    dcos->data()[i] = omega0 * std::cos(a);
  }
  const Var parents[] = {x, w, b};
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape()->record(std::move(z), parents, [ix, iw, ib, dcos](Tape& t, std::size_t self) {
    const Tensor2 d = t.grad(self).cwiseProduct(*dcos);
    affine_backward(t, ix, iw, ib, d);
  });
}

Var add(Var a, Var b) {
  same_tape(a, b);
  same_shape(a, b, "add");
  Tensor2 out = a.value() + b.value();
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), parents, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  same_shape(a, b, "sub");
  Tensor2 out = a.value() - b.value();
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), parents, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.needs_grad(ib)) t.accumulate(ib, -g);
  });
}

Var hadamard(Var a, Var b) {
  same_tape(a, b);
  same_shape(a, b, "hadamard");
  Tensor2 out = a.value().cwiseProduct(b.value());
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), parents, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var add_row(Var x, Var row) {
  same_tape(x, row);
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_row: row " + shape_str(row.value()) + " does not fit " + shape_str(x.value()));
  }
  Tensor2 out = x.value();
  out.rowwise() += row.value().row(0);
  const Var parents[] = {x, row};
  const std::size_t ix = x.id(), ir = row.id();
  return x.tape()->record(std::move(out), parents, [ix, ir](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    t.accumulate(ix, g);
    if (t.needs_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var scale(Var x, double c) {
  Tensor2 out = x.value() * c;
  const Var parents[] = {x};
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), parents, [ix, c](Tape& t, std::size_t self) {
    t.accumulate(ix, t.grad(self) * c);
  });
}

Var scale_by(Var x, Var s) {
  same_tape(x, s);
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scale_by: scale must be 1x1, got " + shape_str(s.value()));
  Tensor2 out = x.value() * s.value()(0, 0);
  const Var parents[] = {x, s};
  const std::size_t ix = x.id(), is = s.id();
  return x.tape()->record(std::move(out), parents, [ix, is](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.needs_grad(ix)) t.accumulate(ix, g * t.value(is)(0, 0));
    if (t.needs_grad(is)) t.accumulate(is, Tensor2::Constant(1, 1, g.cwiseProduct(t.value(ix)).sum()));
  });
}

Var sin(Var x) {
  Tensor2 out = x.value().array().sin().matrix();
  const Var parents[] = {x};
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), parents, [ix](Tape& t, std::size_t self) {
    t.accumulate(ix, (t.grad(self).array() * t.value(ix).array().cos()).matrix());
  });
}

Var relu(Var x) {
  Tensor2 out = x.value().cwiseMax(0.0);
  const Var parents[] = {x};
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), parents, [ix](Tape& t, std::size_t self) {
    t.accumulate(ix, (t.grad(self).array() * (t.value(ix).array() > 0.0).cast<double>()).matrix());
  });
}

Var exp(Var x) {
  Tensor2 out = x.value().array().exp().matrix();
  const Var parents[] = {x};
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), parents, [ix](Tape& t, std::size_t self) {
    t.accumulate(ix, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var sum(Var x) {
  Tensor2 out = Tensor2::Constant(1, 1, x.value().sum());
  const Var parents[] = {x};
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), parents, [ix](Tape& t, std::size_t self) {
    const Tensor2& v = t.value(ix);
    t.accumulate(ix, Tensor2::Constant(v.rows(), v.cols(), t.grad(self)(0, 0)));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / n);
}

Var l2_normalize_rows(Var x) {
  const Tensor2& v = x.value();
  Eigen::VectorXd norms = v.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) >= 1e-12)) {
      if (!std::isfinite(norms(i))) throw NumericalError("l2_normalize_rows: non-finite row " + std::to_string(i));
      throw DomainError("l2_normalize_rows: row " + std::to_string(i) + " has near-zero norm");
    }
  }
  Tensor2 out = norms.cwiseInverse().asDiagonal() * v;
  const Var parents[] = {x};
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), parents, [ix, norms = std::move(norms)](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    const Eigen::VectorXd proj = (g.cwiseProduct(y)).rowwise().sum();
    Tensor2 dx = g - proj.asDiagonal() * y;
    dx = norms.cwiseInverse().asDiagonal() * dx;
    t.accumulate(ix, dx);
  });
}

Var mse_loss(Var pred, const Tensor2& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("mse_loss: prediction " + shape_str(pred.value()) + " vs target " + shape_str(target));
  }
  const double n = static_cast<double>(target.size());
  Tensor2 diff = pred.value() - target;
  Tensor2 out = Tensor2::Constant(1, 1, diff.squaredNorm() / n);
  const Var parents[] = {pred};
  const std::size_t ip = pred.id();
  return pred.tape()->record(std::move(out), parents, [ip, n, diff = std::move(diff)](Tape& t, std::size_t self) {
    t.accumulate(ip, diff * (2.0 * t.grad(self)(0, 0) / n));
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor2& z = logits.value();
  if (static_cast<std::size_t>(z.rows()) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(z.rows()) + " rows vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const Eigen::Index n = z.rows(), k = z.cols();
  Tensor2 probs(n, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw DomainError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    const double lse = log_sum_exp(z.row(i).data(), k, 1);
    probs.row(i) = (z.row(i).array() - lse).exp().matrix();
    total += lse - z(i, y);
  }
  Tensor2 out = Tensor2::Constant(1, 1, total / static_cast<double>(n));
  std::vector<int> ys(labels.begin(), labels.end());
  const Var parents[] = {logits};
  const std::size_t il = logits.id();
  return logits.tape()->record(std::move(out), parents,
                               [il, probs = std::move(probs), ys = std::move(ys)](Tape& t, std::size_t self) {
                                 Tensor2 d = probs;
                                 for (std::size_t i = 0; i < ys.size(); ++i) d(static_cast<Eigen::Index>(i), ys[i]) -= 1.0;
                                 t.accumulate(il, d * (t.grad(self)(0, 0) / static_cast<double>(ys.size())));
                               });
}

Var symmetric_diagonal_cross_entropy(Var logits) {
  const Tensor2& z = logits.value();
  if (z.rows() != z.cols() || z.rows() == 0) {
    throw ShapeError("symmetric_diagonal_cross_entropy: need a non-empty square matrix, got " + shape_str(z));
  }
  if (!z.allFinite()) throw NumericalError("contrastive loss: non-finite similarity logits");
  const Eigen::Index n = z.rows();
  Eigen::VectorXd row_lse(n), col_lse(n);
  double row_total = 0.0, col_total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    row_lse(i) = log_sum_exp(z.data() + i * n, n, 1);
    row_total += row_lse(i) - z(i, i);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    col_lse(j) = log_sum_exp(z.data() + j, n, n);
    col_total += col_lse(j) - z(j, j);
  }
  const double denom = 2.0 * static_cast<double>(n);
  Tensor2 out = Tensor2::Constant(1, 1, (row_total + col_total) / denom);
  const Var parents[] = {logits};
  const std::size_t il = logits.id();
  return logits.tape()->record(
      std::move(out), parents,
      [il, denom, row_lse = std::move(row_lse), col_lse = std::move(col_lse)](Tape& t, std::size_t self) {
        const Tensor2& z = t.value(il);
        const Eigen::Index n = z.rows();
        Tensor2 d(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) {
            d(i, j) = std::exp(z(i, j) - row_lse(i)) + std::exp(z(i, j) - col_lse(j));
          }
          d(i, i) -= 2.0;
        }
        t.accumulate(il, d * (t.grad(self)(0, 0) / denom));
      });
}

}  // namespace locenc
