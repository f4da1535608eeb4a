#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "canet/common.hpp"

namespace canet {

// Minimal dense reverse-mode engine. Every tensor is a rows x cols
// matrix of T (double by default, float for the 32-bit mode); a scalar
// is 1x1. Ops allocate a fresh node capturing its parents, backward()
// topo-sorts from the root and accumulates exact gradients. Graphs are
// small (one batch), so no in-place tricks and no broadcasting beyond
// the few row/column patterns the layers need.
template <typename T>
struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<T> values;
  std::vector<T> grad;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Empty for leaves. Must capture its own node raw, never via
  // shared_ptr: that self-reference would leak the entire graph.
  std::function<void()> backward_fn;

  int64_t size() const { return static_cast<int64_t>(rows) * cols; }
};

template <typename T = double>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int rows, int cols) {
    auto node = std::make_shared<TensorNode<T>>();
    node->rows = rows;
    node->cols = cols;
    node->values.assign(static_cast<size_t>(rows) * cols, T(0));
    node->grad.assign(node->values.size(), T(0));
    return Tensor(std::move(node));
  }

  static Tensor from(int rows, int cols, std::vector<T> values) {
    if (static_cast<int64_t>(values.size()) !=
        static_cast<int64_t>(rows) * cols)
      throw ContractViolation("tensor init: " + std::to_string(values.size()) +
                              " values for shape " + shape_str(rows, cols));
    auto t = zeros(rows, cols);
    t.node_->values = std::move(values);
    return t;
  }

  static Tensor scalar(T v) { return from(1, 1, {v}); }

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  int64_t size() const { return node_->size(); }

  std::vector<T>& values() { return node_->values; }
  const std::vector<T>& values() const { return node_->values; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }

  T item() const {
    if (size() != 1)
      throw ContractViolation("item() on non-scalar tensor " +
                              shape_str(rows(), cols()));
    return node_->values[0];
  }

  T at(int r, int c) const { return node_->values[idx(r, c)]; }
  void set(int r, int c, T v) { node_->values[idx(r, c)] = v; }

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }

  // Reverse pass from a scalar root. Seeds d(root)/d(root) = 1 and walks
  // the graph once in reverse topological order.
  void backward() {
    if (size() != 1)
      throw ContractViolation("backward() requires a scalar root, got " +
                              shape_str(rows(), cols()));
    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> seen;
    topo(node_.get(), seen, order);
    node_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backward_fn) (*it)->backward_fn();
  }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

  static std::string shape_str(int rows, int cols) {
    return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
  }
  std::string shape_str() const { return shape_str(rows(), cols()); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode<T>> node)
      : node_(std::move(node)) {}

  size_t idx(int r, int c) const {
    return static_cast<size_t>(r) * cols() + c;
  }

  static void topo(TensorNode<T>* node, std::unordered_set<TensorNode<T>*>& seen,
                   std::vector<TensorNode<T>*>& order) {
    // Iterative DFS; graphs can be a few thousand nodes deep over a batch.
    std::vector<std::pair<TensorNode<T>*, size_t>> stack{{node, 0}};
    seen.insert(node);
    while (!stack.empty()) {
      auto& [cur, next_child] = stack.back();
      if (next_child < cur->parents.size()) {
        TensorNode<T>* parent = cur->parents[next_child++].get();
        if (seen.insert(parent).second) stack.push_back({parent, 0});
      } else {
        order.push_back(cur);
        stack.pop_back();
      }
    }
  }

  template <typename U>
  friend Tensor<U> make_op(int rows, int cols,
                           std::vector<std::shared_ptr<TensorNode<U>>> parents);

  std::shared_ptr<TensorNode<T>> node_;
};

template <typename T>
Tensor<T> make_op(int rows, int cols,
                  std::vector<std::shared_ptr<TensorNode<T>>> parents) {
  auto t = Tensor<T>::zeros(rows, cols);
  t.node_->parents = std::move(parents);
  return t;
}

template <typename T>
[[noreturn]] void shape_fail(const std::string& op, const Tensor<T>& a,
                             const Tensor<T>& b) {
  throw ContractViolation(op + ": incompatible shapes " + a.shape_str() +
                          " and " + b.shape_str());
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  int m = a.rows(), k = a.cols(), n = b.cols();
  auto out = make_op<T>(m, n, {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      T aip = av[static_cast<size_t>(i) * k + p];
      if (aip == T(0)) continue;
      const T* brow = bv.data() + static_cast<size_t>(p) * n;
      T* orow = ov.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  auto an = a.node(), bn = b.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, bn, on, m, k, n] {
    // dA = dC B^T, dB = A^T dC
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        T g = on->grad[static_cast<size_t>(i) * n + j];
        if (g == T(0)) continue;
        for (int p = 0; p < k; ++p) {
          an->grad[static_cast<size_t>(i) * k + p] +=
              g * bn->values[static_cast<size_t>(p) * n + j];
          bn->grad[static_cast<size_t>(p) * n + j] +=
              g * an->values[static_cast<size_t>(i) * k + p];
        }
      }
  };
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("add", a, b);
  auto out = make_op<T>(a.rows(), a.cols(), {a.node(), b.node()});
  for (int64_t i = 0; i < a.size(); ++i)
    out.values()[i] = a.values()[i] + b.values()[i];
  auto an = a.node(), bn = b.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, bn, on] {
    for (size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[i] += on->grad[i];
      bn->grad[i] += on->grad[i];
    }
  };
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("mul", a, b);
  auto out = make_op<T>(a.rows(), a.cols(), {a.node(), b.node()});
  for (int64_t i = 0; i < a.size(); ++i)
    out.values()[i] = a.values()[i] * b.values()[i];
  auto an = a.node(), bn = b.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, bn, on] {
    for (size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[i] += on->grad[i] * bn->values[i];
      bn->grad[i] += on->grad[i] * an->values[i];
    }
  };
  return out;
}

// Row-broadcast add: b is 1 x n, added to every row of a.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) shape_fail("add_bias", a, b);
  int m = a.rows(), n = a.cols();
  auto out = make_op<T>(m, n, {a.node(), b.node()});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.values()[static_cast<size_t>(i) * n + j] =
          a.values()[static_cast<size_t>(i) * n + j] + b.values()[j];
  auto an = a.node(), bn = b.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, bn, on, m, n] {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        T g = on->grad[static_cast<size_t>(i) * n + j];
        an->grad[static_cast<size_t>(i) * n + j] += g;
        bn->grad[j] += g;
      }
  };
  return out;
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, T c) {
  auto out = make_op<T>(a.rows(), a.cols(), {a.node()});
  for (int64_t i = 0; i < a.size(); ++i) out.values()[i] = c * a.values()[i];
  auto an = a.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, on, c] {
    for (size_t i = 0; i < on->grad.size(); ++i)
      an->grad[i] += c * on->grad[i];
  };
  return out;
}

// Scales row i of a by s[i]; s is m x 1. Used for alpha-weighted messages
// and for the gamma feature scaling after pooling.
template <typename T>
Tensor<T> mul_rows(const Tensor<T>& a, const Tensor<T>& s) {
  if (s.cols() != 1 || s.rows() != a.rows()) shape_fail("mul_rows", a, s);
  int m = a.rows(), n = a.cols();
  auto out = make_op<T>(m, n, {a.node(), s.node()});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.values()[static_cast<size_t>(i) * n + j] =
          a.values()[static_cast<size_t>(i) * n + j] * s.values()[i];
  auto an = a.node(), sn = s.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, sn, on, m, n] {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        T g = on->grad[static_cast<size_t>(i) * n + j];
        an->grad[static_cast<size_t>(i) * n + j] += g * sn->values[i];
        sn->grad[i] += g * an->values[static_cast<size_t>(i) * n + j];
      }
  };
  return out;
}

// Concatenation along the last (column) axis.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no inputs");
  int m = parts[0].rows(), n = 0;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  for (const auto& p : parts) {
    if (p.rows() != m) shape_fail("concat_cols", parts[0], p);
    n += p.cols();
    parents.push_back(p.node());
  }
  auto out = make_op<T>(m, n, parents);
  int offset = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p.cols(); ++j)
        out.values()[static_cast<size_t>(i) * n + offset + j] =
            p.values()[static_cast<size_t>(i) * p.cols() + j];
    offset += p.cols();
  }
  auto* on = out.node().get();
  auto parent_nodes = parents;
  out.node()->backward_fn = [parent_nodes, on, m, n] {
    int offset = 0;
    for (const auto& pn : parent_nodes) {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < pn->cols; ++j)
          pn->grad[static_cast<size_t>(i) * pn->cols + j] +=
              on->grad[static_cast<size_t>(i) * n + offset + j];
      offset += pn->cols;
    }
  };
  return out;
}

// out[i] = a[index[i]]; indices may repeat, gradients accumulate.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int>& index) {
  int n = a.cols();
  for (int r : index)
    if (r < 0 || r >= a.rows())
      throw ContractViolation("gather_rows: row " + std::to_string(r) +
                              " outside " + a.shape_str());
  auto out = make_op<T>(static_cast<int>(index.size()), n, {a.node()});
  for (size_t i = 0; i < index.size(); ++i)
    std::copy_n(a.values().begin() + static_cast<size_t>(index[i]) * n, n,
                out.values().begin() + i * n);
  auto an = a.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, on, index, n] {
    for (size_t i = 0; i < index.size(); ++i)
      for (int j = 0; j < n; ++j)
        an->grad[static_cast<size_t>(index[i]) * n + j] +=
            on->grad[i * static_cast<size_t>(n) + j];
  };
  return out;
}

// out[t] = sum of rows i with index[i] == t; out has out_rows rows.
template <typename T>
Tensor<T> scatter_add_rows(const Tensor<T>& a, const std::vector<int>& index,
                           int out_rows) {
  if (static_cast<int>(index.size()) != a.rows())
    throw ContractViolation("scatter_add_rows: " +
                            std::to_string(index.size()) + " indices for " +
                            a.shape_str());
  int n = a.cols();
  for (int r : index)
    if (r < 0 || r >= out_rows)
      throw ContractViolation("scatter_add_rows: target " + std::to_string(r) +
                              " outside [0, " + std::to_string(out_rows) + ")");
  auto out = make_op<T>(out_rows, n, {a.node()});
  for (size_t i = 0; i < index.size(); ++i)
    for (int j = 0; j < n; ++j)
      out.values()[static_cast<size_t>(index[i]) * n + j] +=
          a.values()[i * static_cast<size_t>(n) + j];
  auto an = a.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, on, index, n] {
    for (size_t i = 0; i < index.size(); ++i)
      for (int j = 0; j < n; ++j)
        an->grad[i * static_cast<size_t>(n) + j] +=
            on->grad[static_cast<size_t>(index[i]) * n + j];
  };
  return out;
}

// Softmax over contiguous row spans of an m x 1 score column. offsets has
// one entry per group plus a final end sentinel; empty groups contribute
// nothing (the consumer treats the group's aggregate as a zero vector).
// Per-group max subtraction keeps the exponentials bounded.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores,
                         const std::vector<int>& offsets) {
  if (scores.cols() != 1)
    throw ContractViolation("masked_softmax: expected a column, got " +
                            scores.shape_str());
  if (offsets.empty() || offsets.front() != 0 ||
      offsets.back() != scores.rows())
    throw ContractViolation("masked_softmax: offsets must span 0.." +
                            std::to_string(scores.rows()));
  auto out = make_op<T>(scores.rows(), 1, {scores.node()});
  for (size_t g = 0; g + 1 < offsets.size(); ++g) {
    int lo = offsets[g], hi = offsets[g + 1];
    if (lo > hi)
      throw ContractViolation("masked_softmax: offsets not ascending");
    if (lo == hi) continue;
    T mx = scores.values()[lo];
    for (int i = lo + 1; i < hi; ++i)
      mx = std::max(mx, scores.values()[i]);
    T denom = T(0);
    for (int i = lo; i < hi; ++i) {
      out.values()[i] = std::exp(scores.values()[i] - mx);
      denom += out.values()[i];
    }
    for (int i = lo; i < hi; ++i) out.values()[i] /= denom;
  }
  auto sn = scores.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [sn, on, offsets] {
    for (size_t g = 0; g + 1 < offsets.size(); ++g) {
      int lo = offsets[g], hi = offsets[g + 1];
      T dot = T(0);
      for (int i = lo; i < hi; ++i) dot += on->values[i] * on->grad[i];
      for (int i = lo; i < hi; ++i)
        sn->grad[i] += on->values[i] * (on->grad[i] - dot);
    }
  };
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise activations

// Shared skeleton: forward map plus a derivative expressed in terms of
// the input value x and output value y.
template <typename T, typename F, typename DF>
Tensor<T> pointwise(const Tensor<T>& a, F f, DF df) {
  auto out = make_op<T>(a.rows(), a.cols(), {a.node()});
  for (int64_t i = 0; i < a.size(); ++i) out.values()[i] = f(a.values()[i]);
  auto an = a.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, on, df] {
    for (size_t i = 0; i < on->grad.size(); ++i)
      an->grad[i] += on->grad[i] * df(an->values[i], on->values[i]);
  };
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return pointwise(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T neg_slope) {
  return pointwise(
      a, [neg_slope](T x) { return x > T(0) ? x : neg_slope * x; },
      [neg_slope](T x, T) { return x > T(0) ? T(1) : neg_slope; });
}

template <typename T>
Tensor<T> elu(const Tensor<T>& a) {
  return pointwise(
      a, [](T x) { return x > T(0) ? x : std::expm1(x); },
      [](T x, T y) { return x > T(0) ? T(1) : y + T(1); });
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& a) {
  return pointwise(
      a, [](T x) { return std::tanh(x); },
      [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return pointwise(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  const T k = T(0.044715);
  return pointwise(
      a,
      [c, k](T x) {
        return T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x)));
      },
      [c, k](T x, T) {
        T u = c * (x + k * x * x * x);
        T th = std::tanh(u);
        T du = c * (T(1) + T(3) * k * x * x);
        return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
      });
}

enum class Activation { Identity, ReLU, LeakyReLU, ELU, Tanh, Sigmoid, GELU };

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& a, Activation act, T neg_slope) {
  switch (act) {
    case Activation::Identity: return scalar_mul(a, T(1));
    case Activation::ReLU: return relu(a);
    case Activation::LeakyReLU: return leaky_relu(a, neg_slope);
    case Activation::ELU: return elu(a);
    case Activation::Tanh: return tanh_act(a);
    case Activation::Sigmoid: return sigmoid(a);
    case Activation::GELU: return gelu(a);
  }
  throw ContractViolation("unknown activation");
}

// ---------------------------------------------------------------------------
// Regularization and normalization

// Inverted dropout: kept entries are scaled by 1/(1-p) so eval needs no
// rescaling; train=false is the identity.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ContractViolation("dropout rate must be in [0, 1), got " +
                            std::to_string(p));
  if (!train || p == 0.0) return scalar_mul(a, T(1));
  auto mask = std::make_shared<std::vector<T>>(a.size());
  T scale = T(1.0 / (1.0 - p));
  for (int64_t i = 0; i < a.size(); ++i)
    (*mask)[i] = rng.uniform() < p ? T(0) : scale;
  auto out = make_op<T>(a.rows(), a.cols(), {a.node()});
  for (int64_t i = 0; i < a.size(); ++i)
    out.values()[i] = a.values()[i] * (*mask)[i];
  auto an = a.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, on, mask] {
    for (size_t i = 0; i < on->grad.size(); ++i)
      an->grad[i] += on->grad[i] * (*mask)[i];
  };
  return out;
}

// Per-feature batch normalization over the row axis. gamma/beta are 1 x n
// parameter tensors; running stats are plain buffers owned by the layer,
// updated only in train mode (momentum 0.1 toward the batch statistics,
// unbiased variance for the running estimate). Normalization itself uses
// the biased batch variance.
template <typename T>
Tensor<T> batch_norm_1d(const Tensor<T>& x, const Tensor<T>& gamma,
                        const Tensor<T>& beta, std::vector<T>& running_mean,
                        std::vector<T>& running_var, bool train,
                        double momentum = 0.1, double eps = 1e-5) {
  int m = x.rows(), n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n) shape_fail("batch_norm", x, gamma);
  if (beta.rows() != 1 || beta.cols() != n) shape_fail("batch_norm", x, beta);
  if (static_cast<int>(running_mean.size()) != n ||
      static_cast<int>(running_var.size()) != n)
    throw ContractViolation("batch_norm: running stats have wrong width");

  auto out = make_op<T>(m, n, {x.node(), gamma.node(), beta.node()});
  auto mean = std::make_shared<std::vector<T>>(n, T(0));
  auto inv_std = std::make_shared<std::vector<T>>(n, T(0));

  if (train) {
    if (m == 0) throw ContractViolation("batch_norm: empty batch in train mode");
    for (int j = 0; j < n; ++j) {
      T mu = T(0);
      for (int i = 0; i < m; ++i) mu += x.values()[static_cast<size_t>(i) * n + j];
      mu /= T(m);
      T var = T(0);
      for (int i = 0; i < m; ++i) {
        T d = x.values()[static_cast<size_t>(i) * n + j] - mu;
        var += d * d;
      }
      var /= T(m);
      (*mean)[j] = mu;
      (*inv_std)[j] = T(1) / std::sqrt(var + T(eps));
      T unbiased = m > 1 ? var * T(m) / T(m - 1) : var;
      running_mean[j] = T(1.0 - momentum) * running_mean[j] + T(momentum) * mu;
      running_var[j] =
          T(1.0 - momentum) * running_var[j] + T(momentum) * unbiased;
    }
  } else {
    for (int j = 0; j < n; ++j) {
      (*mean)[j] = running_mean[j];
      (*inv_std)[j] = T(1) / std::sqrt(running_var[j] + T(eps));
    }
  }

  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T xhat = (x.values()[static_cast<size_t>(i) * n + j] - (*mean)[j]) *
               (*inv_std)[j];
      out.values()[static_cast<size_t>(i) * n + j] =
          gamma.values()[j] * xhat + beta.values()[j];
    }

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [xn, gn, bn, on, mean, inv_std, train, m, n] {
    for (int j = 0; j < n; ++j) {
      // Column-wise reductions of dL/dy and dL/dy * xhat.
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int i = 0; i < m; ++i) {
        size_t ij = static_cast<size_t>(i) * n + j;
        T xhat = (xn->values[ij] - (*mean)[j]) * (*inv_std)[j];
        sum_dy += on->grad[ij];
        sum_dy_xhat += on->grad[ij] * xhat;
      }
      gn->grad[j] += sum_dy_xhat;
      bn->grad[j] += sum_dy;
      for (int i = 0; i < m; ++i) {
        size_t ij = static_cast<size_t>(i) * n + j;
        if (train) {
          // Batch statistics depend on x, so the chain rule couples the
          // whole column: dx = g/std * (dy - mean(dy) - xhat*mean(dy*xhat)).
          T xhat = (xn->values[ij] - (*mean)[j]) * (*inv_std)[j];
          xn->grad[ij] += gn->values[j] * (*inv_std)[j] *
                          (on->grad[ij] - sum_dy / T(m) -
                           xhat * sum_dy_xhat / T(m));
        } else {
          xn->grad[ij] += gn->values[j] * (*inv_std)[j] * on->grad[ij];
        }
      }
    }
  };
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and loss

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto out = make_op<T>(1, 1, {a.node()});
  T s = T(0);
  for (int64_t i = 0; i < a.size(); ++i) s += a.values()[i];
  out.values()[0] = s;
  auto an = a.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [an, on] {
    for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
  };
  return out;
}

// Mean cross-entropy of logits rows against integer labels, computed via
// log-sum-exp with per-row max subtraction.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits,
                        const std::vector<int>& labels) {
  int m = logits.rows(), n = logits.cols();
  if (static_cast<int>(labels.size()) != m)
    throw ContractViolation("cross_entropy: " + std::to_string(labels.size()) +
                            " labels for " + logits.shape_str());
  if (m == 0) throw ContractViolation("cross_entropy: empty batch");
  for (int y : labels)
    if (y < 0 || y >= n)
      throw ContractViolation("cross_entropy: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(n) + ")");
  auto out = make_op<T>(1, 1, {logits.node()});
  auto probs = std::make_shared<std::vector<T>>(logits.values().size());
  T loss = T(0);
  for (int i = 0; i < m; ++i) {
    const T* row = logits.values().data() + static_cast<size_t>(i) * n;
    T mx = *std::max_element(row, row + n);
    T denom = T(0);
    for (int j = 0; j < n; ++j) denom += std::exp(row[j] - mx);
    T log_denom = std::log(denom) + mx;
    for (int j = 0; j < n; ++j)
      (*probs)[static_cast<size_t>(i) * n + j] = std::exp(row[j] - log_denom);
    loss += log_denom - row[labels[i]];
  }
  out.values()[0] = loss / T(m);
  auto ln = logits.node();
  auto* on = out.node().get();
  out.node()->backward_fn = [ln, on, probs, labels, m, n] {
    T g = on->grad[0] / T(m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        ln->grad[static_cast<size_t>(i) * n + j] +=
            g * ((*probs)[static_cast<size_t>(i) * n + j] -
                 (j == labels[i] ? T(1) : T(0)));
  };
  return out;
}

}  // namespace canet
