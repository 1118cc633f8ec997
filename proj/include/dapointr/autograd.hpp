#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Leaves are constants,
// free variables, or Parameters; calling backward() on a 1x1 result
// accumulates d(result)/d(leaf) into each leaf, and for Parameter leaves
// into Parameter::grad(). Tapes are single-use and not thread safe;
// Parameters may be shared read-only by concurrent tapes as long as nobody
// calls backward() concurrently.

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dapointr::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Parameter {
 public:
  Parameter(std::string name, Matrix value)
      : name_(std::move(name)), value_(std::move(value)), grad_(Matrix::Zero(value_.rows(), value_.cols())) {}

  const std::string& name() const noexcept { return name_; }
  Matrix& value() noexcept { return value_; }
  const Matrix& value() const noexcept { return value_; }
  Matrix& grad() noexcept { return grad_; }
  const Matrix& grad() const noexcept { return grad_; }
  void zero_grad() { grad_.setZero(); }
  Eigen::Index size() const noexcept { return value_.size(); }

 private:
  std::string name_;
  Matrix value_;
  Matrix grad_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient after Tape::backward(); zero-sized if no gradient reached the node.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  /// With gradients disabled no backward closures are kept (inference).
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf that receives a gradient (used by gradient checks on inputs).
  Var variable(Matrix value);
  /// Leaf bound to a Parameter; backward() adds into Parameter::grad().
  Var parameter(Parameter& p);

  /// Reverse sweep from a 1x1 node. May be called once per tape.
  void backward(Var root);

  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Interface used by operation implementations.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var record(Matrix value, std::span<const Var> parents, Backward backward);
  void accumulate(Var v, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(Var v, const Expr& g) {
    auto& n = nodes_[static_cast<std::size_t>(v.id())];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = g;
    else n.grad += g;
  }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  bool backward_done_ = false;
  bool grad_enabled_ = true;
};

// ---- operations ------------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (r x c) + row (1 x c) broadcast over rows.
Var add_row(Var a, Var row);
/// a (r x c) .* row (1 x c) broadcast over rows.
Var mul_row(Var a, Var row);

Var gelu(Var a);  // exact erf form
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
/// Values outside [lo, hi] are clamped and receive zero gradient.
Var clamp(Var a, double lo, double hi);

Var softmax_rows(Var a);
/// Per-row standardization (no affine part).
Var layer_norm_rows(Var a, double eps = 1e-5);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, std::span<const std::size_t> index);
/// Row i repeated `times` consecutively: rows [i*times, (i+1)*times).
Var repeat_rows(Var a, Eigen::Index times);
/// Whole matrix stacked `times` times.
Var tile_rows(Var a, Eigen::Index times);
/// Row-major reinterpretation.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

/// Consecutive groups of `group` rows reduced by column-wise max; gradient
/// routes to the first maximal row.
Var group_max_rows(Var a, Eigen::Index group);
Var max_rows(Var a);
Var mean_rows(Var a);
Var sum(Var a);
Var mean(Var a);

/// Identity forward; backward multiplies the incoming gradient by -eta.
Var gradient_reverse(Var a, double eta);

/// Symmetric chamfer distance between two n x 3 / m x 3 point sets: squared
/// nearest-neighbour distances averaged per point per direction, summed.
Var chamfer(Var a, Var b);

/// -mean(label * log p + (1 - label) * log(1 - p)) with p clamped to
/// [eps, 1 - eps]; `probs` is any shape.
Var binary_cross_entropy(Var probs, double label, double eps = 1e-7);

}  // namespace dapointr::ad
