#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "deepck/error.hpp"

// Minimal reverse-mode differentiation over dense matrices. Rows index tokens.
namespace deepck::nn {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& g() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
  bool has_grad() const { return grad.size() != 0; }
};

using Var = std::shared_ptr<Node>;

inline Var constant(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  return n;
}

/// Leaf whose gradient is kept across backward passes until zeroed.
inline Var leaf(Matrix m) {
  auto n = constant(std::move(m));
  n->requires_grad = true;
  return n;
}

namespace detail {

inline Var make_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(bw);
  }
  return n;
}

inline void check_shape(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(std::string("shape mismatch in ") + what);
}

}  // namespace detail

/// Accumulates d(root)/d(leaf) into every reachable leaf. `root` must be 1x1.
inline void backward(const Var& root) {
  if (root->value.size() != 1) throw InvalidArgument("backward needs a scalar root");
  if (!root->requires_grad) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->g().array() += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->has_grad()) n->backward(*n);
  }
}

inline Var matmul(const Var& a, const Var& b) {
  detail::check_shape(a->value.cols() == b->value.rows(), "matmul");
  return detail::make_op(a->value * b->value, {a, b}, [](Node& n) {
    auto& a = *n.parents[0];
    auto& b = *n.parents[1];
    if (a.requires_grad) a.g().noalias() += n.grad * b.value.transpose();
    if (b.requires_grad) b.g().noalias() += a.value.transpose() * n.grad;
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::check_shape(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(), "add");
  return detail::make_op(a->value + b->value, {a, b}, [](Node& n) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->g() += n.grad;
  });
}

/// Adds a 1 x n row to every row of `a`.
inline Var add_row(const Var& a, const Var& row) {
  detail::check_shape(row->value.rows() == 1 && row->value.cols() == a->value.cols(), "add_row");
  Matrix v = a->value.rowwise() + row->value.row(0);
  return detail::make_op(std::move(v), {a, row}, [](Node& n) {
    auto& a = *n.parents[0];
    auto& r = *n.parents[1];
    if (a.requires_grad) a.g() += n.grad;
    if (r.requires_grad) r.g() += n.grad.colwise().sum();
  });
}

inline Var scale(const Var& a, double s) {
  return detail::make_op(a->value * s, {a}, [s](Node& n) { n.parents[0]->g() += n.grad * s; });
}

inline Var transpose(const Var& a) {
  return detail::make_op(a->value.transpose(), {a},
                         [](Node& n) { n.parents[0]->g() += n.grad.transpose(); });
}

/// Tanh-approximated GELU.
inline Var gelu(const Var& a) {
  static constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  Matrix t = (c * (a->value.array() + 0.044715 * a->value.array().cube())).tanh().matrix();
  Matrix v = (0.5 * a->value.array() * (1.0 + t.array())).matrix();
  return detail::make_op(std::move(v), {a}, [t = std::move(t)](Node& n) {
    const auto x = n.parents[0]->value.array();
    const auto d = 0.5 * (1.0 + t.array()) +
                   0.5 * x * (1.0 - t.array().square()) * c * (1.0 + 3.0 * 0.044715 * x.square());
    n.parents[0]->g().array() += n.grad.array() * d;
  });
}

/// Row-wise layer normalization with learned gain and bias (both 1 x n).
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
  const auto cols = x->value.cols();
  detail::check_shape(gain->value.cols() == cols && bias->value.cols() == cols, "layer_norm");
  Matrix xhat(x->value.rows(), cols);
  Eigen::VectorXd inv(x->value.rows());
  for (Eigen::Index r = 0; r < x->value.rows(); ++r) {
    const double mu = x->value.row(r).mean();
    const double var = (x->value.row(r).array() - mu).square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x->value.row(r).array() - mu) * inv(r);
  }
  Matrix v = (xhat.array().rowwise() * gain->value.row(0).array()).matrix();
  v.rowwise() += bias->value.row(0);
  return detail::make_op(std::move(v), {x, gain, bias}, [xhat = std::move(xhat), inv](Node& n) {
    auto& x = *n.parents[0];
    auto& gain = *n.parents[1];
    auto& bias = *n.parents[2];
    if (gain.requires_grad) gain.g() += (n.grad.array() * xhat.array()).colwise().sum().matrix();
    if (bias.requires_grad) bias.g() += n.grad.colwise().sum();
    if (x.requires_grad) {
      const double d = static_cast<double>(xhat.cols());
      Matrix dxhat = (n.grad.array().rowwise() * gain.value.row(0).array()).matrix();
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).sum() / d;
        const double m2 = dxhat.row(r).dot(xhat.row(r)) / d;
        x.g().row(r).array() += inv(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
    }
  });
}

inline Matrix softmax_rows_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

inline Var softmax_rows(const Var& x) {
  return detail::make_op(softmax_rows_value(x->value), {x}, [](Node& n) {
    // n.value holds the softmax output
    const Eigen::VectorXd dots = (n.grad.array() * n.value.array()).rowwise().sum();
    n.parents[0]->g().array() += n.value.array() * (n.grad.colwise() - dots).array();
  });
}

/// Rows of `x` at `rows`, in order; repeats allowed.
inline Var gather_rows(const Var& x, std::vector<Eigen::Index> rows) {
  Matrix v(static_cast<Eigen::Index>(rows.size()), x->value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x->value.rows()) throw InvalidArgument("gather_rows index out of range");
    v.row(static_cast<Eigen::Index>(i)) = x->value.row(rows[i]);
  }
  return detail::make_op(std::move(v), {x}, [rows = std::move(rows)](Node& n) {
    auto& g = n.parents[0]->g();
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

inline Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
  detail::check_shape(start >= 0 && start + count <= x->value.cols(), "slice_cols");
  return detail::make_op(x->value.middleCols(start, count), {x}, [start, count](Node& n) {
    n.parents[0]->g().middleCols(start, count) += n.grad;
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols of nothing");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::check_shape(p->value.rows() == parts[0]->value.rows(), "concat_cols");
    cols += p->value.cols();
  }
  Matrix v(parts[0]->value.rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p->value.cols()) = p->value;
    at += p->value.cols();
  }
  return detail::make_op(std::move(v), parts, [](Node& n) {
    Eigen::Index at = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->g() += n.grad.middleCols(at, p->value.cols());
      at += p->value.cols();
    }
  });
}

/// log(max(x(r, c), floor)) as a 1x1 node. The gradient is zero where the floor applies.
inline Var log_at(const Var& x, Eigen::Index r, Eigen::Index c, double floor = 1e-12) {
  const double p = x->value(r, c);
  const bool clamped = !(p > floor);
  Matrix v(1, 1);
  v(0, 0) = std::log(clamped ? floor : p);
  return detail::make_op(std::move(v), {x}, [r, c, p, clamped](Node& n) {
    if (!clamped) n.parents[0]->g()(r, c) += n.grad(0, 0) / p;
  });
}

/// Sum of 1x1 nodes.
inline Var sum_scalars(const std::vector<Var>& xs) {
  Matrix v = Matrix::Zero(1, 1);
  for (const auto& x : xs) {
    detail::check_shape(x->value.size() == 1, "sum_scalars");
    v(0, 0) += x->value(0, 0);
  }
  return detail::make_op(std::move(v), xs, [](Node& n) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->g()(0, 0) += n.grad(0, 0);
  });
}

}  // namespace deepck::nn
