#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "btc/errors.hpp"
#include "btc/rng.hpp"

namespace btc {

using Shape = std::vector<int>;

inline std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

template <class S>
struct Node {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;  // allocated iff requires_grad, always same size as data
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // empty for leaves
};

}  // namespace detail

// Dense row-major tensor participating in a reverse-mode differentiation
// graph. Handles share the underlying node; ops build new nodes that keep
// their parents alive until the output is dropped.
template <class S>
class Tensor {
 public:
  using Node = detail::Node<S>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from_data(std::move(shape), {}, requires_grad, true);
  }

  static Tensor full(Shape shape, S value, bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    std::fill(t.node_->data.begin(), t.node_->data.end(), value);
    return t;
  }

  static Tensor scalar(S value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }

  static Tensor from(Shape shape, std::vector<S> data, bool requires_grad = false) {
    if (static_cast<std::int64_t>(data.size()) != shape_size(shape))
      fail(ErrorCode::shape_mismatch,
           "data length " + std::to_string(data.size()) + " does not match shape " +
               shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    if (requires_grad) t.node_->grad.assign(t.node_->data.size(), S(0));
    return t;
  }

  // Low-level hook for building custom differentiable ops. The backward
  // callback receives the output node and is responsible for accumulating
  // into the parents' grad buffers.
  static Tensor make_op(Shape shape, std::vector<S> data, std::vector<Tensor> parents,
                        std::function<void(Node&)> backward) {
    Tensor out = from(std::move(shape), std::move(data), false);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->grad.assign(out.node_->data.size(), S(0));
      out.node_->parents.reserve(parents.size());
      for (auto& p : parents) out.node_->parents.push_back(p.node_);
      out.node_->backward_fn = std::move(backward);
    }
    return out;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->data.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const S> data() const { return node_->data; }
  std::span<S> mutable_data() { return node_->data; }
  std::span<const S> grad() const { return node_->grad; }
  std::span<S> mutable_grad() { return node_->grad; }

  S item() const {
    if (size() != 1)
      fail(ErrorCode::shape_mismatch, "item() requires a scalar, got " + shape_str(shape()));
    return node_->data[0];
  }

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), S(0)); }

  // Populates grad buffers of every requires_grad ancestor. Leaf gradients
  // accumulate across calls; interior nodes are recomputed per call.
  void backward() const {
    if (size() != 1)
      fail(ErrorCode::data_error, "backward requires a scalar loss, got " + shape_str(shape()));
    if (!node_->requires_grad) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (p->requires_grad && !seen.count(p)) {
          seen.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    // Interior gradients are per-pass; leaves keep accumulating.
    for (Node* n : order)
      if (n->backward_fn) std::fill(n->grad.begin(), n->grad.end(), S(0));
    node_->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }

  Node* node() const { return node_.get(); }

 private:
  static Tensor from_data(Shape shape, std::vector<S>, bool requires_grad, bool) {
    std::vector<S> data(static_cast<std::size_t>(shape_size(shape)), S(0));
    return from(std::move(shape), std::move(data), requires_grad);
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

// c[m x n] += a[m x k] * b[k x n]
template <class S>
void gemm_nn_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * k;
    S* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      const S* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x k] += a[m x n] * b[k x n]^T
template <class S>
void gemm_nt_acc(const S* a, const S* b, S* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * n;
    S* crow = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const S* brow = b + static_cast<std::size_t>(j) * n;
      S acc = S(0);
      for (int p = 0; p < n; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
template <class S>
void gemm_tn_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int p = 0; p < m; ++p) {
    const S* arow = a + static_cast<std::size_t>(p) * k;
    const S* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < k; ++i) {
      const S av = arow[i];
      S* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorCode::shape_mismatch, std::string(op) + ": shapes " + shape_str(a.shape()) +
                                        " and " + shape_str(b.shape()) + " differ");
}

}  // namespace detail

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<S> out(a.data().begin(), a.data().end());
  for (std::int64_t i = 0; i < b.size(); ++i) out[static_cast<std::size_t>(i)] += b.data()[i];
  auto* an = a.node();
  auto* bn = b.node();
  return Tensor<S>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& node) {
    if (an->requires_grad)
      for (std::size_t i = 0; i < node.grad.size(); ++i) an->grad[i] += node.grad[i];
    if (bn->requires_grad)
      for (std::size_t i = 0; i < node.grad.size(); ++i) bn->grad[i] += node.grad[i];
  });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<S> out(static_cast<std::size_t>(a.size()));
  for (std::int64_t i = 0; i < a.size(); ++i)
    out[static_cast<std::size_t>(i)] = a.data()[i] * b.data()[i];
  auto* an = a.node();
  auto* bn = b.node();
  return Tensor<S>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& node) {
    if (an->requires_grad)
      for (std::size_t i = 0; i < node.grad.size(); ++i) an->grad[i] += node.grad[i] * bn->data[i];
    if (bn->requires_grad)
      for (std::size_t i = 0; i < node.grad.size(); ++i) bn->grad[i] += node.grad[i] * an->data[i];
  });
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  std::vector<S> out(static_cast<std::size_t>(a.size()));
  for (std::int64_t i = 0; i < a.size(); ++i)
    out[static_cast<std::size_t>(i)] = a.data()[i] * factor;
  auto* an = a.node();
  return Tensor<S>::make_op(a.shape(), std::move(out), {a}, [an, factor](auto& node) {
    for (std::size_t i = 0; i < node.grad.size(); ++i) an->grad[i] += node.grad[i] * factor;
  });
}

template <class S>
Tensor<S> neg(const Tensor<S>& a) {
  return scale(a, S(-1));
}

template <class S>
Tensor<S> sum(const Tensor<S>& a) {
  S total = S(0);
  for (S v : a.data()) total += v;
  auto* an = a.node();
  return Tensor<S>::make_op({1}, {total}, {a}, [an](auto& node) {
    const S g = node.grad[0];
    for (auto& gv : an->grad) gv += g;
  });
}

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    fail(ErrorCode::shape_mismatch,
         "matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<S> out(static_cast<std::size_t>(m) * n, S(0));
  detail::gemm_nn_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto* an = a.node();
  auto* bn = b.node();
  return Tensor<S>::make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](auto& node) {
    if (an->requires_grad)
      detail::gemm_nt_acc(node.grad.data(), bn->data.data(), an->grad.data(), m, n, k);
    if (bn->requires_grad)
      detail::gemm_tn_acc(an->data.data(), node.grad.data(), bn->grad.data(), m, k, n);
  });
}

template <class S>
Tensor<S> transpose2d(const Tensor<S>& a) {
  if (a.rank() != 2)
    fail(ErrorCode::shape_mismatch, "transpose2d: expected rank 2, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  std::vector<S> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j) * m + i] = a.data()[static_cast<std::size_t>(i) * n + j];
  auto* an = a.node();
  return Tensor<S>::make_op({n, m}, std::move(out), {a}, [an, m, n](auto& node) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        an->grad[static_cast<std::size_t>(i) * n + j] +=
            node.grad[static_cast<std::size_t>(j) * m + i];
  });
}

// x[... x d_in] * w[d_in x d_out] + b, broadcast over leading dims.
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  if (x.rank() < 1 || w.rank() != 2 || b.rank() != 1 || x.dim(x.rank() - 1) != w.dim(0) ||
      b.dim(0) != w.dim(1))
    fail(ErrorCode::shape_mismatch, "linear: shapes " + shape_str(x.shape()) + ", " +
                                        shape_str(w.shape()) + ", " + shape_str(b.shape()) +
                                        " are incompatible");
  const int d_in = w.dim(0), d_out = w.dim(1);
  const int rows = static_cast<int>(x.size() / d_in);
  std::vector<S> out(static_cast<std::size_t>(rows) * d_out);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < d_out; ++j) out[static_cast<std::size_t>(i) * d_out + j] = b.data()[j];
  detail::gemm_nn_acc(x.data().data(), w.data().data(), out.data(), rows, d_in, d_out);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(d_out);
  auto* xn = x.node();
  auto* wn = w.node();
  auto* bn = b.node();
  return Tensor<S>::make_op(std::move(out_shape), std::move(out), {x, w, b},
                            [xn, wn, bn, rows, d_in, d_out](auto& node) {
                              if (xn->requires_grad)
                                detail::gemm_nt_acc(node.grad.data(), wn->data.data(),
                                                    xn->grad.data(), rows, d_out, d_in);
                              if (wn->requires_grad)
                                detail::gemm_tn_acc(xn->data.data(), node.grad.data(),
                                                    wn->grad.data(), rows, d_in, d_out);
                              if (bn->requires_grad)
                                for (int i = 0; i < rows; ++i)
                                  for (int j = 0; j < d_out; ++j)
                                    bn->grad[static_cast<std::size_t>(j)] +=
                                        node.grad[static_cast<std::size_t>(i) * d_out + j];
                            });
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  std::vector<S> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i)
    out[static_cast<std::size_t>(i)] = x.data()[i] > S(0) ? x.data()[i] : S(0);
  auto* xn = x.node();
  return Tensor<S>::make_op(x.shape(), std::move(out), {x}, [xn](auto& node) {
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      if (xn->data[i] > S(0)) xn->grad[i] += node.grad[i];
  });
}

// Inverted dropout: in training mode each entry is zeroed with probability p
// and survivors are scaled by 1/(1-p); eval mode is the identity.
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0)
    fail(ErrorCode::config_error, "dropout probability must be in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<S>>(static_cast<std::size_t>(x.size()));
  std::vector<S> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const S m = rng.uniform() < p ? S(0) : keep_scale;
    (*mask)[static_cast<std::size_t>(i)] = m;
    out[static_cast<std::size_t>(i)] = x.data()[i] * m;
  }
  auto* xn = x.node();
  return Tensor<S>::make_op(x.shape(), std::move(out), {x}, [xn, mask](auto& node) {
    for (std::size_t i = 0; i < node.grad.size(); ++i) xn->grad[i] += node.grad[i] * (*mask)[i];
  });
}

// Row-wise softmax with additive-mask support: -inf entries map to exactly 0.
// A row containing NaN yields NaN outputs rather than an error, so numeric
// blowups surface as a non-finite loss the trainer can detect.
template <class S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
  if (x.rank() != 2)
    fail(ErrorCode::shape_mismatch, "softmax_rows: expected rank 2, got " + shape_str(x.shape()));
  const int rows = x.dim(0), cols = x.dim(1);
  const S neg_inf = -std::numeric_limits<S>::infinity();
  std::vector<S> out(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    const S* row = x.data().data() + static_cast<std::size_t>(i) * cols;
    S row_max = neg_inf;
    bool has_nan = false;
    for (int j = 0; j < cols; ++j) {
      if (std::isnan(row[j])) has_nan = true;
      else row_max = std::max(row_max, row[j]);
    }
    if (has_nan) {
      S* orow = out.data() + static_cast<std::size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) orow[j] = std::numeric_limits<S>::quiet_NaN();
      continue;
    }
    if (row_max == neg_inf)
      fail(ErrorCode::data_error, "softmax_rows: row " + std::to_string(i) + " is fully masked");
    S denom = S(0);
    S* orow = out.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) {
      const S e = row[j] == neg_inf ? S(0) : std::exp(row[j] - row_max);
      orow[j] = e;
      denom += e;
    }
    for (int j = 0; j < cols; ++j) orow[j] /= denom;
  }
  auto* xn = x.node();
  return Tensor<S>::make_op(x.shape(), std::move(out), {x}, [xn, rows, cols](auto& node) {
    for (int i = 0; i < rows; ++i) {
      const S* y = node.data.data() + static_cast<std::size_t>(i) * cols;
      const S* g = node.grad.data() + static_cast<std::size_t>(i) * cols;
      S dot = S(0);
      for (int j = 0; j < cols; ++j) dot += g[j] * y[j];
      S* gx = xn->grad.data() + static_cast<std::size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) gx[j] += y[j] * (g[j] - dot);
    }
  });
}

// Normalizes the last axis to zero mean / unit variance, then applies the
// affine transform gain * xhat + bias.
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps) {
  if (x.rank() < 1 || gain.rank() != 1 || bias.rank() != 1)
    fail(ErrorCode::shape_mismatch, "layer_norm: bad ranks");
  const int d = x.dim(x.rank() - 1);
  if (gain.dim(0) != d || bias.dim(0) != d)
    fail(ErrorCode::shape_mismatch, "layer_norm: feature dim " + std::to_string(d) +
                                        " does not match gain " + shape_str(gain.shape()) +
                                        " / bias " + shape_str(bias.shape()));
  if (d < 2) fail(ErrorCode::config_error, "layer_norm: last axis must have size >= 2");
  if (!(eps > S(0))) fail(ErrorCode::config_error, "layer_norm: eps must be positive");
  const int rows = static_cast<int>(x.size() / d);

  auto xhat = std::make_shared<std::vector<S>>(static_cast<std::size_t>(x.size()));
  auto inv_std = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
  std::vector<S> out(static_cast<std::size_t>(x.size()));
  for (int i = 0; i < rows; ++i) {
    const S* row = x.data().data() + static_cast<std::size_t>(i) * d;
    S mean = S(0);
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<S>(d);
    S var = S(0);
    for (int j = 0; j < d; ++j) {
      const S c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<S>(d);
    const S inv = S(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = inv;
    for (int j = 0; j < d; ++j) {
      const S xh = (row[j] - mean) * inv;
      (*xhat)[static_cast<std::size_t>(i) * d + j] = xh;
      out[static_cast<std::size_t>(i) * d + j] = gain.data()[j] * xh + bias.data()[j];
    }
  }
  auto* xn = x.node();
  auto* gn = gain.node();
  auto* bn = bias.node();
  return Tensor<S>::make_op(
      x.shape(), std::move(out), {x, gain, bias}, [xn, gn, bn, xhat, inv_std, rows, d](auto& node) {
        for (int i = 0; i < rows; ++i) {
          const S* g = node.grad.data() + static_cast<std::size_t>(i) * d;
          const S* xh = xhat->data() + static_cast<std::size_t>(i) * d;
          if (gn->requires_grad)
            for (int j = 0; j < d; ++j) gn->grad[static_cast<std::size_t>(j)] += g[j] * xh[j];
          if (bn->requires_grad)
            for (int j = 0; j < d; ++j) bn->grad[static_cast<std::size_t>(j)] += g[j];
          if (xn->requires_grad) {
            S mean_dxhat = S(0), mean_dxhat_xhat = S(0);
            for (int j = 0; j < d; ++j) {
              const S dxh = g[j] * gn->data[static_cast<std::size_t>(j)];
              mean_dxhat += dxh;
              mean_dxhat_xhat += dxh * xh[j];
            }
            mean_dxhat /= static_cast<S>(d);
            mean_dxhat_xhat /= static_cast<S>(d);
            const S inv = (*inv_std)[static_cast<std::size_t>(i)];
            S* gx = xn->grad.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) {
              const S dxh = g[j] * gn->data[static_cast<std::size_t>(j)];
              gx[j] += inv * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
            }
          }
        }
      });
}

enum class ConvPad {
  same,   // (k-1)/2 zeros each side, k odd
  left,   // k-1 zeros on the left: output t sees inputs [t-k+1, t]
  right,  // k-1 zeros on the right: output t sees inputs [t, t+k-1]
};

// 1D convolution over x[T x C_in] with kernels[C_out x C_in x k]; sequence
// length is preserved for every padding mode.
template <class S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& kernels, const Tensor<S>& bias,
                 ConvPad pad_mode) {
  if (x.rank() != 2 || kernels.rank() != 3 || bias.rank() != 1)
    fail(ErrorCode::shape_mismatch, "conv1d: bad ranks");
  const int frames = x.dim(0), c_in = x.dim(1);
  const int c_out = kernels.dim(0), width = kernels.dim(2);
  if (kernels.dim(1) != c_in || bias.dim(0) != c_out)
    fail(ErrorCode::shape_mismatch, "conv1d: kernels " + shape_str(kernels.shape()) +
                                        " incompatible with input " + shape_str(x.shape()));
  if (pad_mode == ConvPad::same && width % 2 == 0)
    fail(ErrorCode::config_error,
         "conv1d: same padding requires odd kernel width, got " + std::to_string(width));
  const int pad_left = pad_mode == ConvPad::same   ? (width - 1) / 2
                       : pad_mode == ConvPad::left ? width - 1
                                                   : 0;

  std::vector<S> out(static_cast<std::size_t>(frames) * c_out);
  for (int t = 0; t < frames; ++t) {
    S* orow = out.data() + static_cast<std::size_t>(t) * c_out;
    for (int co = 0; co < c_out; ++co) orow[co] = bias.data()[co];
    for (int w = 0; w < width; ++w) {
      const int s = t + w - pad_left;
      if (s < 0 || s >= frames) continue;
      const S* xrow = x.data().data() + static_cast<std::size_t>(s) * c_in;
      for (int co = 0; co < c_out; ++co) {
        const S* krow = kernels.data().data() +
                        (static_cast<std::size_t>(co) * c_in) * width + static_cast<std::size_t>(w);
        S acc = S(0);
        for (int ci = 0; ci < c_in; ++ci) acc += krow[static_cast<std::size_t>(ci) * width] * xrow[ci];
        orow[co] += acc;
      }
    }
  }
  auto* xn = x.node();
  auto* kn = kernels.node();
  auto* bn = bias.node();
  return Tensor<S>::make_op(
      {frames, c_out}, std::move(out), {x, kernels, bias},
      [xn, kn, bn, frames, c_in, c_out, width, pad_left](auto& node) {
        for (int t = 0; t < frames; ++t) {
          const S* grow = node.grad.data() + static_cast<std::size_t>(t) * c_out;
          if (bn->requires_grad)
            for (int co = 0; co < c_out; ++co) bn->grad[static_cast<std::size_t>(co)] += grow[co];
          for (int w = 0; w < width; ++w) {
            const int s = t + w - pad_left;
            if (s < 0 || s >= frames) continue;
            const S* xrow = xn->data.data() + static_cast<std::size_t>(s) * c_in;
            S* gxrow = xn->grad.empty() ? nullptr : xn->grad.data() + static_cast<std::size_t>(s) * c_in;
            for (int co = 0; co < c_out; ++co) {
              const S g = grow[co];
              const std::size_t kbase = (static_cast<std::size_t>(co) * c_in) * width +
                                        static_cast<std::size_t>(w);
              if (kn->requires_grad)
                for (int ci = 0; ci < c_in; ++ci)
                  kn->grad[kbase + static_cast<std::size_t>(ci) * width] += g * xrow[ci];
              if (xn->requires_grad)
                for (int ci = 0; ci < c_in; ++ci)
                  gxrow[ci] += g * kn->data[kbase + static_cast<std::size_t>(ci) * width];
            }
          }
        }
      });
}

template <class S>
Tensor<S> conv1d_same(const Tensor<S>& x, const Tensor<S>& kernels, const Tensor<S>& bias) {
  return conv1d(x, kernels, bias, ConvPad::same);
}

// Joins a and b along the final axis; leading dims must match.
template <class S>
Tensor<S> concat_last(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != b.rank() || a.rank() < 1)
    fail(ErrorCode::shape_mismatch, "concat_last: rank mismatch");
  for (int i = 0; i + 1 < a.rank(); ++i)
    if (a.dim(i) != b.dim(i))
      fail(ErrorCode::shape_mismatch, "concat_last: leading dims of " + shape_str(a.shape()) +
                                          " and " + shape_str(b.shape()) + " differ");
  const int da = a.dim(a.rank() - 1), db = b.dim(b.rank() - 1);
  const int rows = static_cast<int>(a.size() / da);
  std::vector<S> out(static_cast<std::size_t>(rows) * (da + db));
  for (int i = 0; i < rows; ++i) {
    std::copy_n(a.data().data() + static_cast<std::size_t>(i) * da, da,
                out.data() + static_cast<std::size_t>(i) * (da + db));
    std::copy_n(b.data().data() + static_cast<std::size_t>(i) * db, db,
                out.data() + static_cast<std::size_t>(i) * (da + db) + da);
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(da + db);
  auto* an = a.node();
  auto* bn = b.node();
  return Tensor<S>::make_op(std::move(out_shape), std::move(out), {a, b},
                            [an, bn, rows, da, db](auto& node) {
                              for (int i = 0; i < rows; ++i) {
                                const S* g = node.grad.data() + static_cast<std::size_t>(i) * (da + db);
                                if (an->requires_grad)
                                  for (int j = 0; j < da; ++j)
                                    an->grad[static_cast<std::size_t>(i) * da + j] += g[j];
                                if (bn->requires_grad)
                                  for (int j = 0; j < db; ++j)
                                    bn->grad[static_cast<std::size_t>(i) * db + j] += g[da + j];
                              }
                            });
}

// Slice [start, start+len) of the final axis.
template <class S>
Tensor<S> slice_last(const Tensor<S>& x, int start, int len) {
  const int d = x.dim(x.rank() - 1);
  if (start < 0 || len <= 0 || start + len > d)
    fail(ErrorCode::shape_mismatch, "slice_last: range [" + std::to_string(start) + ", " +
                                        std::to_string(start + len) + ") out of " +
                                        std::to_string(d));
  const int rows = static_cast<int>(x.size() / d);
  std::vector<S> out(static_cast<std::size_t>(rows) * len);
  for (int i = 0; i < rows; ++i)
    std::copy_n(x.data().data() + static_cast<std::size_t>(i) * d + start, len,
                out.data() + static_cast<std::size_t>(i) * len);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(len);
  auto* xn = x.node();
  return Tensor<S>::make_op(std::move(out_shape), std::move(out), {x},
                            [xn, rows, d, start, len](auto& node) {
                              for (int i = 0; i < rows; ++i)
                                for (int j = 0; j < len; ++j)
                                  xn->grad[static_cast<std::size_t>(i) * d + start + j] +=
                                      node.grad[static_cast<std::size_t>(i) * len + j];
                            });
}

// Negative log-likelihood of integer targets under row-softmax of the logits,
// averaged over the frames marked valid. Fused with the softmax for numeric
// stability.
template <class S>
Tensor<S> nll_loss(const Tensor<S>& logits, const std::vector<int>& targets,
                   const std::vector<bool>& valid) {
  if (logits.rank() != 2)
    fail(ErrorCode::shape_mismatch, "nll_loss: expected rank-2 logits, got " +
                                        shape_str(logits.shape()));
  const int frames = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(targets.size()) != frames ||
      (!valid.empty() && static_cast<int>(valid.size()) != frames))
    fail(ErrorCode::shape_mismatch, "nll_loss: targets/mask length does not match frame count");
  int n_valid = 0;
  for (int t = 0; t < frames; ++t) {
    if (!valid.empty() && !valid[static_cast<std::size_t>(t)]) continue;
    ++n_valid;
    const int y = targets[static_cast<std::size_t>(t)];
    if (y < 0 || y >= classes)
      fail(ErrorCode::data_error, "nll_loss: target " + std::to_string(y) + " out of range at frame " +
                                      std::to_string(t));
  }
  if (n_valid == 0) fail(ErrorCode::data_error, "nll_loss: no valid frames");

  auto probs = std::make_shared<std::vector<S>>(static_cast<std::size_t>(logits.size()));
  S total = S(0);
  for (int t = 0; t < frames; ++t) {
    const S* row = logits.data().data() + static_cast<std::size_t>(t) * classes;
    S row_max = row[0];
    for (int c = 1; c < classes; ++c) row_max = std::max(row_max, row[c]);
    S denom = S(0);
    S* prow = probs->data() + static_cast<std::size_t>(t) * classes;
    for (int c = 0; c < classes; ++c) {
      prow[c] = std::exp(row[c] - row_max);
      denom += prow[c];
    }
    for (int c = 0; c < classes; ++c) prow[c] /= denom;
    if (valid.empty() || valid[static_cast<std::size_t>(t)]) {
      const int y = targets[static_cast<std::size_t>(t)];
      total -= row[y] - row_max - std::log(denom);
    }
  }
  total /= static_cast<S>(n_valid);

  auto targets_copy = std::make_shared<std::vector<int>>(targets);
  auto valid_copy = std::make_shared<std::vector<bool>>(valid);
  auto* ln = logits.node();
  return Tensor<S>::make_op(
      {1}, {total}, {logits},
      [ln, probs, targets_copy, valid_copy, frames, classes, n_valid](auto& node) {
        const S g = node.grad[0] / static_cast<S>(n_valid);
        for (int t = 0; t < frames; ++t) {
          if (!valid_copy->empty() && !(*valid_copy)[static_cast<std::size_t>(t)]) continue;
          const S* prow = probs->data() + static_cast<std::size_t>(t) * classes;
          S* grow = ln->grad.data() + static_cast<std::size_t>(t) * classes;
          const int y = (*targets_copy)[static_cast<std::size_t>(t)];
          for (int c = 0; c < classes; ++c) grow[c] += g * prow[c];
          grow[y] -= g;
        }
      });
}

}  // namespace btc
