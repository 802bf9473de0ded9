// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   tensor.hpp
 * @brief  Dense row-major tensors with define-by-run reverse-mode autodiff.
 *
 * A Tensor is a shared handle onto a graph node. Every op allocates a fresh
 * node, records its inputs, and stores a closure that pushes the output
 * gradient back to them. The graph is rebuilt on every forward pass and is
 * released when the last handle to the loss goes away.
 *
 * Nodes that participate in a live graph are never mutated in place; only
 * leaves (nodes without inputs) expose mutable storage, which is what the
 * optimizer writes through after a backward pass.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hallmark/errors.hpp"
#include "hallmark/random.hpp"

namespace hallmark {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace detail {

inline thread_local int no_grad_depth = 0;

template <typename T> struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node &)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T{0});
  }
};

} // namespace detail

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

/// Suspends graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;
};

template <typename T> class Tensor {
public:
  using value_type = T;
  using NodeT = detail::Node<T>;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : node_(std::make_shared<NodeT>()) {
    if (numel_of(shape) != values.size()) {
      throw ShapeError("tensor of shape " + shape_str(shape) + " needs " +
                       std::to_string(numel_of(shape)) + " values, got " +
                       std::to_string(values.size()));
    }
    for (auto d : shape) {
      if (d == 0) throw ShapeError("zero-sized dimension in " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T{0}), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<T>(n, v), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return Tensor(Shape{}, {v}, requires_grad);
  }

  static Tensor from_node(std::shared_ptr<NodeT> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape &shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }
  const std::string &op() const { return node_->op; }
  bool is_leaf() const { return node_->inputs.empty(); }

  std::span<const T> values() const { return node_->value; }

  /// Writable storage; only leaves may be written.
  std::span<T> data() {
    if (!is_leaf()) {
      throw Error("in-place write to non-leaf tensor produced by '" +
                  node_->op + "'");
    }
    return node_->value;
  }

  T item() const {
    if (numel() != 1) {
      throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    }
    return node_->value[0];
  }

  T at(std::size_t i) const { return node_->value.at(i); }
  T at(std::size_t r, std::size_t c) const {
    return node_->value.at(r * node_->shape.at(1) + c);
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), T{0}); }

  /// Copy of the values with no graph attached.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  NodeT &node() const { return *node_; }
  const std::shared_ptr<NodeT> &node_ptr() const { return node_; }

private:
  std::shared_ptr<NodeT> node_;
};

namespace detail {

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::string op,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T> &)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = std::move(op);
  bool track = false;
  if (grad_enabled()) {
    for (const auto &in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    for (auto &in : inputs) node->inputs.push_back(in.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor<T>::from_node(std::move(node));
}

inline void require_rank(const Shape &s, std::size_t rank, const char *op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(s));
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T> Tensor<T> matmul(const Tensor<T> &a, const Tensor<T> &b) {
  detail::require_rank(a.shape(), 2, "matmul");
  detail::require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ for " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T{0});
  auto A = a.values();
  auto B = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    T *row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      const T *brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return detail::make_result<T>({m, n}, std::move(out), "matmul", {a, b},
                                [m, k, n](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    auto &nb = *o.inputs[1];
    const T *G = o.grad.data();
    if (na.requires_grad) {
      na.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const T *brow = nb.value.data() + p * n;
          const T *grow = G + i * n;
          T acc{0};
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          na.grad[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const T *grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T av = na.value[i * k + p];
          T *dst = nb.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) dst[j] += av * grow[j];
        }
      }
    }
  });
}

template <typename T> Tensor<T> transpose(const Tensor<T> &a) {
  detail::require_rank(a.shape(), 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(r * c);
  auto v = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return detail::make_result<T>({c, r}, std::move(out), "transpose", {a},
                                [r, c](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) na.grad[i * c + j] += o.grad[j * r + i];
  });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T> &a, const Tensor<T> &b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
  std::vector<T> out(a.numel());
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return detail::make_result<T>(a.shape(), std::move(out), "add", {a, b},
                                [](detail::Node<T> &o) {
    for (auto &in : o.inputs) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) in->grad[i] += o.grad[i];
    }
  });
}

/// a[rows x n] + bias[n], bias broadcast over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T> &a, const Tensor<T> &bias) {
  detail::require_rank(bias.shape(), 1, "add_bias");
  const std::size_t n = bias.dim(0);
  if (a.rank() == 0 || a.shape().back() != n) {
    throw ShapeError("add_bias: " + shape_str(a.shape()) +
                     " cannot take bias " + shape_str(bias.shape()));
  }
  std::vector<T> out(a.values().begin(), a.values().end());
  auto bv = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  return detail::make_result<T>(a.shape(), std::move(out), "add_bias",
                                {a, bias}, [n](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    auto &nb = *o.inputs[1];
    if (na.requires_grad) {
      na.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) na.grad[i] += o.grad[i];
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) nb.grad[i % n] += o.grad[i];
    }
  });
}

template <typename T> Tensor<T> mul(const Tensor<T> &a, const Tensor<T> &b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
  std::vector<T> out(a.numel());
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return detail::make_result<T>(a.shape(), std::move(out), "mul", {a, b},
                                [](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    auto &nb = *o.inputs[1];
    // Read both value arrays before writing; na and nb may be the same node.
    if (na.requires_grad) {
      na.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        na.grad[i] += o.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        nb.grad[i] += o.grad[i] * na.value[i];
    }
  });
}

template <typename T> Tensor<T> scale(const Tensor<T> &a, T s) {
  std::vector<T> out(a.values().begin(), a.values().end());
  for (auto &v : out) v *= s;
  return detail::make_result<T>(a.shape(), std::move(out), "scale", {a},
                                [s](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) na.grad[i] += s * o.grad[i];
  });
}

namespace detail {

/// Elementwise op whose derivative is expressed through (x, y).
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T> &a, const char *name, F f, D df) {
  std::vector<T> out(a.numel());
  auto x = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result<T>(a.shape(), std::move(out), name, {a},
                        [df](Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      na.grad[i] += o.grad[i] * df(na.value[i], o.value[i]);
  });
}

} // namespace detail

/// GELU, tanh approximation.
template <typename T> Tensor<T> gelu(const Tensor<T> &a) {
  constexpr T c = T(0.7978845608028654); // sqrt(2/pi)
  constexpr T k = T(0.044715);
  return detail::unary(
      a, "gelu",
      [](T x) { return T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x))); },
      [](T x, T) {
        const T t = std::tanh(c * (x + k * x * x * x));
        return T(0.5) * (T(1) + t) +
               T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * k * x * x);
      });
}

template <typename T> Tensor<T> relu(const Tensor<T> &a) {
  return detail::unary(
      a, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T> Tensor<T> sigmoid(const Tensor<T> &a) {
  return detail::unary(
      a, "sigmoid",
      [](T x) {
        // Split by sign so exp never overflows.
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T> Tensor<T> log(const Tensor<T> &a) {
  return detail::unary(
      a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

// ---------------------------------------------------------------------------
// Reductions and normalizations
// ---------------------------------------------------------------------------

template <typename T> Tensor<T> sum(const Tensor<T> &a) {
  T s{0};
  for (auto v : a.values()) s += v;
  return detail::make_result<T>({}, {s}, "sum", {a}, [](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (auto &g : na.grad) g += o.grad[0];
  });
}

template <typename T> Tensor<T> mean(const Tensor<T> &a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T> Tensor<T> softmax(const Tensor<T> &x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) +
                     " invalid for shape " + shape_str(x.shape()));
  }
  const auto &s = x.shape();
  const std::size_t len = s[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

  std::vector<T> out(x.numel());
  auto v = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = v[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, v[base + j * inner]);
      T z{0};
      for (std::size_t j = 0; j < len; ++j) {
        const T e = std::exp(v[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= z;
    }
  }
  return detail::make_result<T>(s, std::move(out), "softmax", {x},
                                [outer, inner, len](detail::Node<T> &o) {
    auto &nx = *o.inputs[0];
    nx.ensure_grad();
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = a * len * inner + in;
        T dot{0};
        for (std::size_t j = 0; j < len; ++j) {
          const auto idx = base + j * inner;
          dot += o.grad[idx] * o.value[idx];
        }
        for (std::size_t j = 0; j < len; ++j) {
          const auto idx = base + j * inner;
          nx.grad[idx] += o.value[idx] * (o.grad[idx] - dot);
        }
      }
    }
  });
}

/// Normalizes each row over the last dimension, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T> &x, const Tensor<T> &gamma,
                     const Tensor<T> &beta, T eps = T(1e-12)) {
  if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: last dimension " + std::to_string(d) +
                     " does not match gamma " + shape_str(gamma.shape()) +
                     " / beta " + shape_str(beta.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel());
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  auto v = x.values();
  auto g = gamma.values();
  auto b = beta.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const T *row = v.data() + r * d;
    T mu{0};
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * rs;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * g[j] + b[j];
    }
  }
  return detail::make_result<T>(x.shape(), std::move(out), "layer_norm",
                                {x, gamma, beta},
                                [d, rows, xhat, rstd](detail::Node<T> &o) {
    auto &nx = *o.inputs[0];
    auto &ng = *o.inputs[1];
    auto &nb = *o.inputs[2];
    if (ng.requires_grad) {
      ng.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        ng.grad[i % d] += o.grad[i] * (*xhat)[i];
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) nb.grad[i % d] += o.grad[i];
    }
    if (nx.requires_grad) {
      nx.ensure_grad();
      std::vector<T> dh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T m1{0}, m2{0};
        for (std::size_t j = 0; j < d; ++j) {
          dh[j] = o.grad[r * d + j] * ng.value[j];
          m1 += dh[j];
          m2 += dh[j] * (*xhat)[r * d + j];
        }
        m1 /= static_cast<T>(d);
        m2 /= static_cast<T>(d);
        for (std::size_t j = 0; j < d; ++j) {
          nx.grad[r * d + j] +=
              (*rstd)[r] * (dh[j] - m1 - (*xhat)[r * d + j] * m2);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Indexing and layout
// ---------------------------------------------------------------------------

template <typename T> Tensor<T> reshape(const Tensor<T> &a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " +
                     shape_str(shape));
  }
  std::vector<T> out(a.values().begin(), a.values().end());
  return detail::make_result<T>(std::move(shape), std::move(out), "reshape",
                                {a}, [](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) na.grad[i] += o.grad[i];
  });
}

/// Columns [start, start + count) of a rank-2 tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T> &a, std::size_t start, std::size_t count) {
  detail::require_rank(a.shape(), 2, "slice_cols");
  const std::size_t r = a.dim(0), c = a.dim(1);
  if (count == 0 || start + count > c) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_str(a.shape()));
  }
  std::vector<T> out(r * count);
  auto v = a.values();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(v.data() + i * c + start, count, out.data() + i * count);
  return detail::make_result<T>({r, count}, std::move(out), "slice_cols", {a},
                                [r, c, start, count](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j)
        na.grad[i * c + start + j] += o.grad[i * count + j];
  });
}

/// Rows [start, start + count) of a rank-2 tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T> &a, std::size_t start, std::size_t count) {
  detail::require_rank(a.shape(), 2, "slice_rows");
  const std::size_t r = a.dim(0), c = a.dim(1);
  if (count == 0 || start + count > r) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_str(a.shape()));
  }
  auto v = a.values();
  std::vector<T> out(v.begin() + start * c, v.begin() + (start + count) * c);
  return detail::make_result<T>({count, c}, std::move(out), "slice_rows", {a},
                                [c, start](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      na.grad[start * c + i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>> &parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto &p : parts) {
    detail::require_rank(p.shape(), 2, "concat_cols");
    if (p.dim(0) != r) {
      throw ShapeError("concat_cols: row count mismatch " +
                       shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<T> out(r * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k],
                  out.data() + i * total + off);
    off += widths[k];
  }
  return detail::make_result<T>({r, total}, std::move(out), "concat_cols",
                                parts, [r, total, widths](detail::Node<T> &o) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < o.inputs.size(); ++k) {
      auto &in = *o.inputs[k];
      const std::size_t w = widths[k];
      if (in.requires_grad) {
        in.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j)
            in.grad[i * w + j] += o.grad[i * total + off + j];
      }
      off += w;
    }
  });
}

/// Stacks equal-shape tensors into rows of a [count x numel] matrix.
template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>> &rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  const std::size_t n = rows[0].numel();
  std::vector<T> out;
  out.reserve(rows.size() * n);
  for (const auto &r : rows) {
    if (r.numel() != n) {
      throw ShapeError("stack_rows: " + shape_str(rows[0].shape()) + " vs " +
                       shape_str(r.shape()));
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  return detail::make_result<T>({rows.size(), n}, std::move(out), "stack_rows",
                                rows, [n](detail::Node<T> &o) {
    for (std::size_t k = 0; k < o.inputs.size(); ++k) {
      auto &in = *o.inputs[k];
      if (!in.requires_grad) continue;
      in.ensure_grad();
      for (std::size_t j = 0; j < n; ++j) in.grad[j] += o.grad[k * n + j];
    }
  });
}

/// Row lookup: out[i] = table[ids[i]].
template <typename T>
Tensor<T> gather_rows(const Tensor<T> &table, std::span<const std::size_t> ids) {
  detail::require_rank(table.shape(), 2, "gather_rows");
  const std::size_t rows = table.dim(0), c = table.dim(1);
  if (ids.empty()) throw ShapeError("gather_rows: no ids");
  std::vector<T> out(ids.size() * c);
  auto v = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) +
                       " out of range for table " + shape_str(table.shape()));
    }
    std::copy_n(v.data() + ids[i] * c, c, out.data() + i * c);
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return detail::make_result<T>({ids.size(), c}, std::move(out), "gather_rows",
                                {table}, [idx, c](detail::Node<T> &o) {
    auto &nt = *o.inputs[0];
    nt.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j)
        nt.grad[idx[i] * c + j] += o.grad[i * c + j];
  });
}

/// Inverted dropout: zeroes each entry with probability p, scales the rest
/// by 1/(1-p). Identity when p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T> &a, double p, std::mt19937_64 &rng) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(p));
  }
  if (p == 0.0) return a;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(a.numel());
  std::vector<T> out(a.numel());
  auto v = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = unit_uniform(rng) < p ? T(0) : keep_scale;
    out[i] = v[i] * (*mask)[i];
  }
  return detail::make_result<T>(a.shape(), std::move(out), "dropout", {a},
                                [mask](detail::Node<T> &o) {
    auto &na = *o.inputs[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      na.grad[i] += o.grad[i] * (*mask)[i];
  });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Nodes reachable from `root` that carry gradient, inputs before consumers.
template <typename T>
std::vector<detail::Node<T> *> topological_order(const Tensor<T> &root) {
  std::vector<detail::Node<T> *> order;
  std::unordered_set<const detail::Node<T> *> seen;
  std::vector<std::pair<detail::Node<T> *, std::size_t>> stack;
  stack.emplace_back(&root.node(), 0);
  seen.insert(&root.node());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto *child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

/// Accumulates d(loss)/d(leaf) into every reachable requires_grad leaf.
/// Leaf gradients accumulate across calls; call zero_grad() between steps.
template <typename T> void backward(const Tensor<T> &loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  if (!loss.requires_grad()) {
    throw Error("backward: loss is detached from any parameter");
  }
  auto order = topological_order(loss);
  for (auto *n : order) {
    if (!n->inputs.empty()) n->grad.assign(n->value.size(), T{0});
  }
  loss.node().ensure_grad();
  loss.node().grad[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

} // namespace hallmark
