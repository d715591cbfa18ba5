#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "deepck/nn/autograd.hpp"

namespace deepck::nn {

struct NamedParam {
  std::string name;
  Var var;
};

using ParamList = std::vector<NamedParam>;

/// Portable uniform doubles from a seeded mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng)
      : weight(leaf(xavier(in, out, rng))), bias(leaf(Matrix::Zero(1, out))) {}

  Var operator()(const Var& x) const { return add_row(matmul(x, weight), bias); }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

struct LayerNorm {
  Var gain;
  Var bias;

  LayerNorm() = default;
  explicit LayerNorm(Eigen::Index dim) : gain(leaf(Matrix::Ones(1, dim))), bias(leaf(Matrix::Zero(1, dim))) {}

  Var operator()(const Var& x) const { return layer_norm(x, gain, bias); }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".bias", bias});
  }
};

/// Scaled dot-product self-attention with `heads` heads over rows of the input.
struct MultiHeadAttention {
  Linear query, key, value, output;
  Eigen::Index heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(Eigen::Index dim, Eigen::Index num_heads, Rng& rng)
      : query(dim, dim, rng), key(dim, dim, rng), value(dim, dim, rng), output(dim, dim, rng), heads(num_heads) {
    if (num_heads < 1 || dim % num_heads != 0) throw InvalidArgument("head count must divide hidden size");
  }

  Var operator()(const Var& x) const {
    const Eigen::Index dim = x->value.cols();
    const Eigen::Index dh = dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto q = query(x), k = key(x), v = value(x);
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      auto qh = slice_cols(q, h * dh, dh);
      auto kh = slice_cols(k, h * dh, dh);
      auto vh = slice_cols(v, h * dh, dh);
      auto weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
      outs.push_back(matmul(weights, vh));
    }
    return output(heads == 1 ? outs[0] : concat_cols(outs));
  }

  void collect(ParamList& out, const std::string& prefix) const {
    query.collect(out, prefix + ".query");
    key.collect(out, prefix + ".key");
    value.collect(out, prefix + ".value");
    output.collect(out, prefix + ".output");
  }
};

/// Adam with bias correction and optional global-norm gradient clipping.
class Adam {
 public:
  Adam(ParamList params, double lr, double max_grad_norm = 0.0, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), clip_(max_grad_norm), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.push_back(Matrix::Zero(p.var->value.rows(), p.var->value.cols()));
      v_.push_back(Matrix::Zero(p.var->value.rows(), p.var->value.cols()));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.var->grad.resize(0, 0);
  }

  /// Gradient norm before clipping.
  double step() {
    ++t_;
    double sq = 0.0;
    for (const auto& p : params_)
      if (p.var->has_grad()) sq += p.var->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    const double factor = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& var = *params_[i].var;
      if (!var.has_grad()) {
        m_[i] *= b1_;
        v_[i] *= b2_;
      } else {
        const Matrix g = var.grad * factor;
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
      }
      var.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
    return norm;
  }

  std::size_t steps() const { return t_; }

 private:
  ParamList params_;
  std::vector<Matrix> m_, v_;
  double lr_, clip_, b1_, b2_, eps_;
  std::size_t t_ = 0;
};

/// Binary parameter dump: per tensor a "name rows cols" line followed by raw doubles.
inline void save_params(std::ostream& out, const ParamList& params) {
  out << "deepck-params " << params.size() << '\n';
  for (const auto& p : params) {
    const auto& m = p.var->value;
    out << p.name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    out << '\n';
  }
}

inline void load_params(std::istream& in, const ParamList& params) {
  std::string magic;
  std::size_t count = 0;
  in >> magic >> count;
  if (magic != "deepck-params" || count != params.size()) throw ParseError(0, "parameter file does not match model");
  in.get();
  for (const auto& p : params) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    in >> name >> rows >> cols;
    in.get();
    auto& m = p.var->value;
    if (name != p.name || rows != m.rows() || cols != m.cols())
      throw ParseError(0, "parameter '" + name + "' does not match model tensor '" + p.name + "'");
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    in.get();
    if (!in) throw ParseError(0, "truncated parameter file");
  }
}

}  // namespace deepck::nn
