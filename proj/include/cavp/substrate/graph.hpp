#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cavp/substrate/parameter.hpp"
#include "cavp/substrate/tensor.hpp"

namespace cavp {

/// Raised when a forward or backward value is NaN or infinite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Handle to a node recorded on a Graph.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::uint32_t>::max(); }
  friend bool operator==(Var a, Var b) noexcept { return a.id == b.id; }
};

/// Tape of forward operations supporting one reverse sweep.
///
/// Nodes are immutable once recorded, so a Var may be shared by several
/// consumers (and copied into several decode hypotheses). Gradients flow into
/// Parameter::grad when backward() reaches the parameter's leaf node.
template <class T = double>
class Graph {
 public:
  using Tensor_ = Tensor<T>;
  using Backward = std::function<void(Graph&, std::uint32_t)>;

  Graph() { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void clear() {
    nodes_.clear();
    param_leaf_.clear();
    flops_ = 0;
    backward_done_ = false;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor_& value(Var v) const { return nodes_.at(v.id).value; }
  T scalar(Var v) const { return nodes_.at(v.id).value[0]; }
  const Shape& shape(Var v) const { return nodes_.at(v.id).value.shape(); }
  std::size_t dim(Var v) const { return nodes_.at(v.id).value.size(); }

  /// Upstream gradient of a node after backward(); zeros if none reached it.
  Tensor_ gradient(Var v) const {
    const auto& n = nodes_.at(v.id);
    return n.grad.empty() ? Tensor_(n.value.shape()) : Tensor_(n.value.shape(), n.grad);
  }

  void set_finite_checks(bool on) noexcept { check_finite_ = on; }

  /// Multiply-add count of the forward operations recorded so far.
  std::uint64_t flops() const noexcept { return flops_; }

  // ---- leaves -------------------------------------------------------------

  Var input(Tensor_ t) { return push(std::move(t), nullptr); }

  Var zeros(std::size_t n) { return input(Tensor_({n})); }

  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(Parameter<T>& p) {
    auto it = param_leaf_.find(&p);
    if (it != param_leaf_.end()) return Var{it->second};
    Var v = push(p.value, nullptr);
    nodes_[v.id].param = &p;
    param_leaf_[&p] = v.id;
    return v;
  }

  // ---- linear maps --------------------------------------------------------

  /// W x (+ b). W: [m x n], x: [n], b: [m].
  Var affine(Var W, Var x, Var b = Var{}) {
    const auto& w = value(W);
    const auto& xv = value(x);
    if (w.rank() != 2 || xv.rank() != 1 || w.cols() != xv.size())
      throw DimensionError("affine: matrix " + shape_string(w.shape()) + " incompatible with vector " +
                           shape_string(xv.shape()));
    const std::size_t m = w.rows(), n = w.cols();
    flops_ += m * n;
    Tensor_ out({m});
    if (b.valid()) {
      const auto& bv = value(b);
      if (bv.size() != m)
        throw DimensionError("affine: bias " + shape_string(bv.shape()) + " incompatible with matrix " +
                             shape_string(w.shape()));
      for (std::size_t i = 0; i < m; ++i) out[i] = bv[i];
    }
    for (std::size_t i = 0; i < m; ++i) {
      const T* row = w.data() + i * n;
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * xv[j];
      out[i] += acc;
    }
    return push(std::move(out), [W, x, b, m, n](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& w = g.nodes_[W.id].value;
      const auto& xv = g.nodes_[x.id].value;
      auto& gw = g.grad_of(W);
      auto& gx = g.grad_of(x);
      for (std::size_t i = 0; i < m; ++i) {
        const T gi = gy[i];
        if (gi == T(0)) continue;
        const T* row = w.data() + i * n;
        T* grow = gw.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          grow[j] += gi * xv[j];
          gx[j] += gi * row[j];
        }
      }
      if (b.valid()) {
        auto& gb = g.grad_of(b);
        for (std::size_t i = 0; i < m; ++i) gb[i] += gy[i];
      }
    });
  }

  /// Q W^T. Q: [d x n], W: [m x n] -> [d x m]. Projects every row of Q.
  Var rows_affine(Var Q, Var W) {
    const auto& q = value(Q);
    const auto& w = value(W);
    if (q.rank() != 2 || w.rank() != 2 || q.cols() != w.cols())
      throw DimensionError("rows_affine: rows " + shape_string(q.shape()) + " incompatible with matrix " +
                           shape_string(w.shape()));
    const std::size_t d = q.rows(), n = q.cols(), m = w.rows();
    flops_ += d * n * m;
    Tensor_ out({d, m});
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t i = 0; i < m; ++i) {
        T acc = T(0);
        for (std::size_t j = 0; j < n; ++j) acc += w(i, j) * q(r, j);
        out(r, i) = acc;
      }
    return push(std::move(out), [Q, W, d, n, m](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& q = g.nodes_[Q.id].value;
      const auto& w = g.nodes_[W.id].value;
      auto& gq = g.grad_of(Q);
      auto& gw = g.grad_of(W);
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t i = 0; i < m; ++i) {
          const T gi = gy[r * m + i];
          if (gi == T(0)) continue;
          for (std::size_t j = 0; j < n; ++j) {
            gw[i * n + j] += gi * q(r, j);
            gq[r * n + j] += gi * w(i, j);
          }
        }
    });
  }

  /// M + 1 v^T. M: [d x m], v: [m].
  Var add_to_rows(Var M, Var v) {
    const auto& mv = value(M);
    const auto& vv = value(v);
    if (mv.rank() != 2 || vv.size() != mv.cols())
      throw DimensionError("add_to_rows: " + shape_string(mv.shape()) + " vs " + shape_string(vv.shape()));
    Tensor_ out = mv;
    const std::size_t d = mv.rows(), m = mv.cols();
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t i = 0; i < m; ++i) out(r, i) += vv[i];
    return push(std::move(out), [M, v, d, m](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& gm = g.grad_of(M);
      auto& gv = g.grad_of(v);
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t i = 0; i < m; ++i) {
          gm[r * m + i] += gy[r * m + i];
          gv[i] += gy[r * m + i];
        }
    });
  }

  /// p^T Q: the p-weighted sum of the rows of Q. p: [d], Q: [d x n] -> [n].
  Var weighted_sum(Var p, Var Q) {
    const auto& pv = value(p);
    const auto& q = value(Q);
    if (q.rank() != 2 || pv.size() != q.rows())
      throw DimensionError("weighted_sum: weights " + shape_string(pv.shape()) + " vs rows " +
                           shape_string(q.shape()));
    const std::size_t d = q.rows(), n = q.cols();
    flops_ += d * n;
    Tensor_ out({n});
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t j = 0; j < n; ++j) out[j] += pv[r] * q(r, j);
    return push(std::move(out), [p, Q, d, n](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& pv = g.nodes_[p.id].value;
      const auto& q = g.nodes_[Q.id].value;
      auto& gp = g.grad_of(p);
      auto& gq = g.grad_of(Q);
      for (std::size_t r = 0; r < d; ++r) {
        T acc = T(0);
        for (std::size_t j = 0; j < n; ++j) {
          acc += gy[j] * q(r, j);
          gq[r * n + j] += pv[r] * gy[j];
        }
        gp[r] += acc;
      }
    });
  }

  // ---- elementwise ----------------------------------------------------------

  Var add(Var a, Var b) {
    same_shape("add", a, b);
    Tensor_ out = value(a);
    const auto& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return push(std::move(out), [a, b](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      auto& gb = g.grad_of(b);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
    });
  }

  Var sub(Var a, Var b) { return add(a, scale(b, T(-1))); }

  Var mul(Var a, Var b) {
    same_shape("mul", a, b);
    Tensor_ out = value(a);
    const auto& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return push(std::move(out), [a, b](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& av = g.nodes_[a.id].value;
      const auto& bv = g.nodes_[b.id].value;
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
      auto& gb = g.grad_of(b);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
    });
  }

  Var scale(Var a, T c) {
    Tensor_ out = value(a);
    for (auto& x : out.storage()) x *= c;
    return push(std::move(out), [a, c](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += c * gy[i];
    });
  }

  Var tanh(Var a) {
    Tensor_ out = value(a);
    for (auto& x : out.storage()) x = std::tanh(x);
    return push(std::move(out), [a](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& y = g.nodes_[self].value;
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * (T(1) - y[i] * y[i]);
    });
  }

  Var sigmoid(Var a) {
    Tensor_ out = value(a);
    for (auto& x : out.storage()) x = sigmoid_scalar(x);
    return push(std::move(out), [a](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& y = g.nodes_[self].value;
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * y[i] * (T(1) - y[i]);
    });
  }

  Var log(Var a) {
    Tensor_ out = value(a);
    for (auto& x : out.storage()) x = std::log(x);
    return push(std::move(out), [a](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& x = g.nodes_[a.id].value;
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] / x[i];
    });
  }

  // ---- normalisation --------------------------------------------------------

  /// Max-shifted softmax over a vector.
  Var softmax(Var a) {
    Tensor_ out = value(a);
    if (out.rank() != 1) throw DimensionError("softmax expects a vector, got " + shape_string(out.shape()));
    softmax_inplace(out.storage());
    return push(std::move(out), [a](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& y = g.nodes_[self].value;
      T dot = T(0);
      for (std::size_t i = 0; i < y.size(); ++i) dot += gy[i] * y[i];
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (gy[i] - dot);
    });
  }

  Var log_softmax(Var a) {
    Tensor_ out = value(a);
    if (out.rank() != 1) throw DimensionError("log_softmax expects a vector, got " + shape_string(out.shape()));
    T mx = out[0];
    for (auto x : out.storage()) mx = std::max(mx, x);
    T s = T(0);
    for (auto x : out.storage()) s += std::exp(x - mx);
    const T lse = mx + std::log(s);
    for (auto& x : out.storage()) x -= lse;
    return push(std::move(out), [a](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& y = g.nodes_[self].value;
      T total = T(0);
      for (std::size_t i = 0; i < y.size(); ++i) total += gy[i];
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += gy[i] - std::exp(y[i]) * total;
    });
  }

  // ---- structure ------------------------------------------------------------

  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat of zero vectors");
    std::size_t n = 0;
    for (auto p : parts) {
      if (value(p).rank() != 1) throw DimensionError("concat expects vectors, got " + shape_string(shape(p)));
      n += dim(p);
    }
    Tensor_ out({n});
    std::size_t off = 0;
    for (auto p : parts) {
      const auto& v = value(p);
      std::copy(v.storage().begin(), v.storage().end(), out.storage().begin() + off);
      off += v.size();
    }
    return push(std::move(out), [parts](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      std::size_t off = 0;
      for (auto p : parts) {
        auto& gp = g.grad_of(p);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[off + i];
        off += gp.size();
      }
    });
  }

  Var slice(Var a, std::size_t offset, std::size_t len) {
    const auto& av = value(a);
    if (av.rank() != 1 || offset + len > av.size() || len == 0)
      throw DimensionError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                           ") out of range for " + shape_string(av.shape()));
    Tensor_ out({len});
    for (std::size_t i = 0; i < len; ++i) out[i] = av[offset + i];
    return push(std::move(out), [a, offset, len](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& ga = g.grad_of(a);
      for (std::size_t i = 0; i < len; ++i) ga[offset + i] += gy[i];
    });
  }

  /// Stacks equally sized vectors as the rows of a matrix.
  Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw DimensionError("stack_rows of zero vectors");
    const std::size_t n = dim(rows[0]);
    for (auto r : rows)
      if (value(r).rank() != 1 || dim(r) != n)
        throw DimensionError("stack_rows: mixed feature dimensions " + shape_string(shape(rows[0])) + " and " +
                             shape_string(shape(r)));
    Tensor_ out({rows.size(), n});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& v = value(rows[r]);
      std::copy(v.storage().begin(), v.storage().end(), out.storage().begin() + r * n);
    }
    return push(std::move(out), [rows, n](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto& gr = g.grad_of(rows[r]);
        for (std::size_t j = 0; j < n; ++j) gr[j] += gy[r * n + j];
      }
    });
  }

  /// Row r of the result is concat(v, M[r]).
  Var prepend_to_rows(Var v, Var M) {
    const auto& vv = value(v);
    const auto& mv = value(M);
    if (vv.rank() != 1 || mv.rank() != 2)
      throw DimensionError("prepend_to_rows: " + shape_string(vv.shape()) + " and " + shape_string(mv.shape()));
    const std::size_t a = vv.size(), d = mv.rows(), m = mv.cols(), w = a + m;
    Tensor_ out({d, w});
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t i = 0; i < a; ++i) out(r, i) = vv[i];
      for (std::size_t j = 0; j < m; ++j) out(r, a + j) = mv(r, j);
    }
    return push(std::move(out), [v, M, a, d, m, w](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& gv = g.grad_of(v);
      auto& gm = g.grad_of(M);
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t i = 0; i < a; ++i) gv[i] += gy[r * w + i];
        for (std::size_t j = 0; j < m; ++j) gm[r * m + j] += gy[r * w + a + j];
      }
    });
  }

  /// Row `id` of an embedding table.
  Var embedding(Var table, std::size_t id) {
    const auto& t = value(table);
    if (t.rank() != 2) throw DimensionError("embedding table must be a matrix, got " + shape_string(t.shape()));
    if (id >= t.rows())
      throw std::out_of_range("token id " + std::to_string(id) + " out of range for vocabulary of " +
                              std::to_string(t.rows()));
    const std::size_t e = t.cols();
    Tensor_ out({e});
    for (std::size_t j = 0; j < e; ++j) out[j] = t(id, j);
    return push(std::move(out), [table, id, e](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& gt = g.grad_of(table);
      for (std::size_t j = 0; j < e; ++j) gt[id * e + j] += gy[j];
    });
  }

  // ---- reductions -----------------------------------------------------------

  /// Selects one entry as a scalar.
  Var pick(Var a, std::size_t i) {
    const auto& av = value(a);
    if (i >= av.size())
      throw std::out_of_range("pick index " + std::to_string(i) + " out of range for " + shape_string(av.shape()));
    return push(Tensor_({1}, std::vector<T>{av[i]}), [a, i](Graph& g, std::uint32_t self) {
      g.grad_of(a)[i] += g.nodes_[self].grad[0];
    });
  }

  Var sum(Var a) {
    T s = T(0);
    for (auto x : value(a).storage()) s += x;
    return push(Tensor_({1}, std::vector<T>{s}), [a](Graph& g, std::uint32_t self) {
      const T gy = g.nodes_[self].grad[0];
      for (auto& x : g.grad_of(a)) x += gy;
    });
  }

  /// Sum of scalars; empty input gives 0.
  Var sum(const std::vector<Var>& terms) {
    if (terms.empty()) return input(Tensor_({1}));
    T s = T(0);
    for (auto t : terms) s += scalar(t);
    return push(Tensor_({1}, std::vector<T>{s}), [terms](Graph& g, std::uint32_t self) {
      const T gy = g.nodes_[self].grad[0];
      for (auto t : terms) g.grad_of(t)[0] += gy;
    });
  }

  Var dot(Var a, Var b) { return sum(mul(a, b)); }

  // ---- recurrent cell -------------------------------------------------------

  /// Fused LSTM nonlinearity. `gates` holds the pre-activations [i; f; o; g]
  /// (4H), `c_prev` the previous cell (H). Returns [h; c] (2H).
  Var lstm_gates(Var gates, Var c_prev) {
    const auto& z = value(gates);
    const auto& cp = value(c_prev);
    const std::size_t H = cp.size();
    if (z.size() != 4 * H)
      throw DimensionError("lstm: gate pre-activations " + shape_string(z.shape()) + " incompatible with cell " +
                           shape_string(cp.shape()));
    // out: [h, c] followed by cached activations [i, f, o, g, tanh(c)] used in backward.
    Tensor_ out({2 * H});
    std::vector<T> cache(5 * H);
    for (std::size_t k = 0; k < H; ++k) {
      const T ig = sigmoid_scalar(z[k]);
      const T fg = sigmoid_scalar(z[H + k]);
      const T og = sigmoid_scalar(z[2 * H + k]);
      const T gg = std::tanh(z[3 * H + k]);
      const T c = fg * cp[k] + ig * gg;
      const T tc = std::tanh(c);
      out[k] = og * tc;
      out[H + k] = c;
      cache[k] = ig;
      cache[H + k] = fg;
      cache[2 * H + k] = og;
      cache[3 * H + k] = gg;
      cache[4 * H + k] = tc;
    }
    return push(std::move(out), [gates, c_prev, H, cache = std::move(cache)](Graph& g, std::uint32_t self) {
      const auto& gy = g.nodes_[self].grad;
      const auto& cp = g.nodes_[c_prev.id].value;
      auto& gz = g.grad_of(gates);
      auto& gc = g.grad_of(c_prev);
      for (std::size_t k = 0; k < H; ++k) {
        const T ig = cache[k], fg = cache[H + k], og = cache[2 * H + k], gg = cache[3 * H + k],
                tc = cache[4 * H + k];
        const T dh = gy[k];
        const T dc = gy[H + k] + dh * og * (T(1) - tc * tc);
        gz[k] += dc * gg * ig * (T(1) - ig);
        gz[H + k] += dc * cp[k] * fg * (T(1) - fg);
        gz[2 * H + k] += dh * tc * og * (T(1) - og);
        gz[3 * H + k] += dc * ig * (T(1) - gg * gg);
        gc[k] += dc * fg;
      }
    });
  }

  // ---- reverse sweep --------------------------------------------------------

  /// Reverse-mode sweep from a scalar node. `seed` scales the output gradient.
  /// A second call on the same recording is an error: clear() and re-run the
  /// forward pass first.
  void backward(Var loss, T seed = T(1)) {
    if (backward_done_) throw std::logic_error("backward called twice on one recording; re-run forward first");
    if (dim(loss) != 1) throw DimensionError("backward expects a scalar, got " + shape_string(shape(loss)));
    backward_done_ = true;
    grad_of(loss)[0] += seed;
    for (std::int64_t i = loss.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
      if (n.param) {
        auto& pg = n.param->grad.storage();
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      }
    }
    if (check_finite_)
      for (auto& p : param_leaf_) {
        if (!p.first->grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p.first->name);
      }
  }

  static T sigmoid_scalar(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
  }

  static void softmax_inplace(std::vector<T>& v) {
    if (v.empty()) throw DimensionError("softmax of an empty vector");
    T mx = v[0];
    for (auto x : v) mx = std::max(mx, x);
    T s = T(0);
    for (auto& x : v) {
      x = std::exp(x - mx);
      s += x;
    }
    for (auto& x : v) x /= s;
  }

 private:
  struct Node {
    Tensor_ value;
    std::vector<T> grad;  // allocated on first use
    Backward backward;
    Parameter<T>* param = nullptr;
  };

  Var push(Tensor_ value, Backward fn) {
    if (check_finite_ && !value.all_finite()) throw NumericError("non-finite value produced in forward pass");
    flops_ += value.size();
    nodes_.push_back(Node{std::move(value), {}, std::move(fn), nullptr});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<T>& grad_of(Var v) {
    auto& n = nodes_[v.id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  void same_shape(const char* op, Var a, Var b) const {
    if (shape(a) != shape(b))
      throw DimensionError(std::string(op) + ": shapes " + shape_string(shape(a)) + " and " + shape_string(shape(b)) +
                           " differ");
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> param_leaf_;
  bool backward_done_ = false;
  bool check_finite_ = true;
  std::uint64_t flops_ = 0;
};

/// Detached softmax on plain values.
template <class T>
std::vector<T> softmax(std::vector<T> v) {
  Graph<T>::softmax_inplace(v);
  return v;
}

}  // namespace cavp
