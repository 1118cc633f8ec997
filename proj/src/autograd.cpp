#include "dapointr/autograd.hpp"

#include "dapointr/errors.hpp"
#include "dapointr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dapointr::ad {

const Matrix& Var::value() const { return tape_->nodes_[static_cast<std::size_t>(id_)].value; }
const Matrix& Var::grad() const { return tape_->nodes_[static_cast<std::size_t>(id_)].grad; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw std::logic_error("Var::scalar on non-1x1 value");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, grad_enabled_});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value(), {}, {}, &p, grad_enabled_});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  bool rg = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw std::logic_error("Var from a different tape");
    rg = rg || nodes_[static_cast<std::size_t>(p.id_)].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, rg ? std::move(backward) : Backward{}, nullptr, rg});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

void Tape::accumulate(Var v, const Matrix& g) { accumulate_expr(v, g); }

void Tape::backward(Var root) {
  if (backward_done_) throw std::logic_error("Tape::backward called twice");
  if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("backward root must be 1x1");
  backward_done_ = true;
  auto& r = nodes_[static_cast<std::size_t>(root.id())];
  if (!r.requires_grad) return;
  r.grad = Matrix::Ones(1, 1);
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->grad() += n.grad;
  }
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix v = a.value() * b.value();
  return a.tape().record(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate_expr(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate_expr(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  Matrix v = a.value().transpose();
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, g.transpose());
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Matrix v = a.value() + b.value();
  return a.tape().record(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Matrix v = a.value() - b.value();
  return a.tape().record(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate_expr(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Matrix v = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate_expr(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate_expr(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  Matrix v = a.value() * s;
  return a.tape().record(std::move(v), {a}, [a, s](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, g * s);
  });
}

Var add_scalar(Var a, double s) {
  Matrix v = a.value().array() + s;
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(v), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate_expr(row, g.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("mul_row: shape mismatch");
  Matrix v = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape().record(std::move(v), {a, row}, [a, row](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) {
      Matrix ga = g.array().rowwise() * row.value().row(0).array();
      t.accumulate(a, ga);
    }
    if (t.requires_grad(row)) t.accumulate_expr(row, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix v = x.unaryExpr([](double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); });
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    Matrix d = a.value().unaryExpr([](double z) {
      const double cdf = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + z * pdf;
    });
    t.accumulate_expr(a, g.cwiseProduct(d));
  });
}

Var relu(Var a) {
  Matrix v = a.value().cwiseMax(0.0);
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    Matrix d = (a.value().array() > 0.0).cast<double>();
    t.accumulate_expr(a, g.cwiseProduct(d));
  });
}

Var tanh(Var a) {
  Matrix v = a.value().array().tanh();
  Var out = a.tape().record(v, {a}, [a, v](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, g.cwiseProduct((1.0 - v.array().square()).matrix()));
  });
  return out;
}

Var sigmoid(Var a) {
  Matrix v = a.value().unaryExpr([](double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  });
  return a.tape().record(v, {a}, [a, v](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, g.cwiseProduct((v.array() * (1.0 - v.array())).matrix()));
  });
}

Var log(Var a) {
  Matrix v = a.value().array().log();
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, g.cwiseQuotient(a.value()));
  });
}

Var clamp(Var a, double lo, double hi) {
  Matrix v = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record(std::move(v), {a}, [a, lo, hi](Tape& t, const Matrix& g) {
    Matrix d = ((a.value().array() >= lo) && (a.value().array() <= hi)).cast<double>();
    t.accumulate_expr(a, g.cwiseProduct(d));
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix v(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    v.row(r) = (x.row(r).array() - m).exp();
    v.row(r) /= v.row(r).sum();
  }
  return a.tape().record(v, {a}, [a, v](Tape& t, const Matrix& g) {
    Eigen::VectorXd dot = g.cwiseProduct(v).rowwise().sum();
    Matrix ga = v.array() * (g.colwise() - dot).array();
    t.accumulate(a, ga);
  });
}

Var layer_norm_rows(Var a, double eps) {
  const Matrix& x = a.value();
  const auto c = static_cast<double>(x.cols());
  Eigen::VectorXd mu = x.rowwise().mean();
  Matrix centered = x.colwise() - mu;
  Eigen::VectorXd inv_std = ((centered.array().square().rowwise().sum() / c) + eps).rsqrt();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  return a.tape().record(xhat, {a}, [a, xhat, inv_std, c](Tape& t, const Matrix& g) {
    Eigen::VectorXd g_mean = g.rowwise().mean();
    Eigen::VectorXd gx_mean = g.cwiseProduct(xhat).rowwise().sum() / c;
    Matrix ga = (g.colwise() - g_mean) - (xhat.array().colwise() * gx_mean.array()).matrix();
    ga = ga.array().colwise() * inv_std.array();
    t.accumulate(a, ga);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(v), parts, [ps](Tape& t, const Matrix& g) {
    Eigen::Index r0 = 0;
    for (const Var& p : ps) {
      if (t.requires_grad(p)) t.accumulate_expr(p, g.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(v), parts, [ps](Tape& t, const Matrix& g) {
    Eigen::Index c0 = 0;
    for (const Var& p : ps) {
      if (t.requires_grad(p)) t.accumulate_expr(p, g.middleCols(c0, p.cols()));
      c0 += p.cols();
    }
  });
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::invalid_argument("slice_rows: out of range");
  Matrix v = a.value().middleRows(start, count);
  return a.tape().record(std::move(v), {a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.middleRows(start, count) = g;
    t.accumulate(a, ga);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  Matrix v = a.value().middleCols(start, count);
  return a.tape().record(std::move(v), {a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.middleCols(start, count) = g;
    t.accumulate(a, ga);
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= static_cast<std::size_t>(a.rows())) throw std::invalid_argument("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(static_cast<Eigen::Index>(index[i]));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape().record(std::move(v), {a}, [a, idx](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      ga.row(static_cast<Eigen::Index>(idx[i])) += g.row(static_cast<Eigen::Index>(i));
    }
    t.accumulate(a, ga);
  });
}

Var repeat_rows(Var a, Eigen::Index times) {
  Matrix v(a.rows() * times, a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    v.middleRows(r * times, times) = a.value().row(r).replicate(times, 1);
  }
  return a.tape().record(std::move(v), {a}, [a, times](Tape& t, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) ga.row(r) = g.middleRows(r * times, times).colwise().sum();
    t.accumulate(a, ga);
  });
}

Var tile_rows(Var a, Eigen::Index times) {
  Matrix v = a.value().replicate(times, 1);
  return a.tape().record(std::move(v), {a}, [a, times](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index k = 0; k < times; ++k) ga += g.middleRows(k * a.rows(), a.rows());
    t.accumulate(a, ga);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  Matrix v = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, Eigen::Map<const Matrix>(g.data(), a.rows(), a.cols()));
  });
}

Var group_max_rows(Var a, Eigen::Index group) {
  if (group <= 0 || a.rows() % group != 0) throw std::invalid_argument("group_max_rows: bad group size");
  const Eigen::Index groups = a.rows() / group;
  const Eigen::Index cols = a.cols();
  const Matrix& x = a.value();
  Matrix v(groups, cols);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(groups * cols));
  for (Eigen::Index gi = 0; gi < groups; ++gi) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::Index best = gi * group;
      for (Eigen::Index r = gi * group + 1; r < (gi + 1) * group; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      v(gi, c) = x(best, c);
      arg[static_cast<std::size_t>(gi * cols + c)] = best;
    }
  }
  return a.tape().record(std::move(v), {a}, [a, arg, groups, cols](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index gi = 0; gi < groups; ++gi) {
      for (Eigen::Index c = 0; c < cols; ++c) ga(arg[static_cast<std::size_t>(gi * cols + c)], c) += g(gi, c);
    }
    t.accumulate(a, ga);
  });
}

Var max_rows(Var a) { return group_max_rows(a, a.rows()); }

Var mean_rows(Var a) {
  Matrix v = a.value().colwise().mean();
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, g.replicate(a.rows(), 1) / static_cast<double>(a.rows()));
  });
}

Var sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape().record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var gradient_reverse(Var a, double eta) {
  if (eta < 0.0) throw InvalidInput("gradient_reverse: eta must be >= 0");
  return a.tape().record(a.value(), {a}, [a, eta](Tape& t, const Matrix& g) {
    t.accumulate_expr(a, g * -eta);
  });
}

Var chamfer(Var a, Var b) {
  if (a.cols() != 3 || b.cols() != 3) throw std::invalid_argument("chamfer: expected n x 3 inputs");
  if (a.rows() == 0 || b.rows() == 0) throw InvalidInput("chamfer: empty point set");
  const Points pa = a.value();
  const Points pb = b.value();
  std::vector<double> dab, dba;
  std::vector<std::size_t> iab, iba;
  geometry::nearest_neighbors(pa, pb, dab, iab);
  geometry::nearest_neighbors(pb, pa, dba, iba);
  const auto na = static_cast<double>(pa.rows());
  const auto nb = static_cast<double>(pb.rows());
  double total = 0.0;
  for (double d : dab) total += d / na;
  double back = 0.0;
  for (double d : dba) back += d / nb;
  Matrix v(1, 1);
  v(0, 0) = total + back;
  return a.tape().record(std::move(v), {a, b}, [a, b, iab, iba, na, nb](Tape& t, const Matrix& g) {
    const double s = g(0, 0);
    const Matrix& xa = a.value();
    const Matrix& xb = b.value();
    Matrix ga = Matrix::Zero(xa.rows(), 3);
    Matrix gb = Matrix::Zero(xb.rows(), 3);
    for (Eigen::Index i = 0; i < xa.rows(); ++i) {
      const auto j = static_cast<Eigen::Index>(iab[static_cast<std::size_t>(i)]);
      const Eigen::RowVector3d d = (xa.row(i) - xb.row(j)) * (2.0 * s / na);
      ga.row(i) += d;
      gb.row(j) -= d;
    }
    for (Eigen::Index j = 0; j < xb.rows(); ++j) {
      const auto i = static_cast<Eigen::Index>(iba[static_cast<std::size_t>(j)]);
      const Eigen::RowVector3d d = (xb.row(j) - xa.row(i)) * (2.0 * s / nb);
      gb.row(j) += d;
      ga.row(i) -= d;
    }
    if (t.requires_grad(a)) t.accumulate(a, ga);
    if (t.requires_grad(b)) t.accumulate(b, gb);
  });
}

Var binary_cross_entropy(Var probs, double label, double eps) {
  const Matrix& p = probs.value();
  const auto n = static_cast<double>(p.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p.data()[i], eps, 1.0 - eps);
    total -= label * std::log(q) + (1.0 - label) * std::log(1.0 - q);
  }
  Matrix v(1, 1);
  v(0, 0) = total / n;
  return probs.tape().record(std::move(v), {probs}, [probs, label, eps, n](Tape& t, const Matrix& g) {
    const Matrix& p = probs.value();
    Matrix gp(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double q = p.data()[i];
      gp.data()[i] = (q < eps || q > 1.0 - eps) ? 0.0 : -(label / q - (1.0 - label) / (1.0 - q)) / n;
    }
    t.accumulate_expr(probs, gp * g(0, 0));
  });
}

}  // namespace dapointr::ad
