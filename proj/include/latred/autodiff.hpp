#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latred/error.hpp"
#include "latred/random.hpp"

// Reverse-mode automatic differentiation over small dense row-major tensors
// of rank <= 2. A Tape records every operation together with its local
// gradient rule; backward() replays the records in exact reverse order.
namespace latred::ad {

struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")";
}

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) throw ShapeError("data length does not match shape");
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, v); }
  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  std::size_t rows() const noexcept { return shape.rows; }
  std::size_t cols() const noexcept { return shape.cols; }
  std::size_t size() const noexcept { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * shape.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * shape.cols + c]; }
  double item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape));
    return data[0];
  }
};

// Differentiable scalar function given by value and derivative.
struct ScalarFn {
  double (*f)(double);
  double (*df)(double);
};

namespace fn {
inline const ScalarFn identity{[](double x) { return x; }, [](double) { return 1.0; }};
inline const ScalarFn one{[](double) { return 1.0; }, [](double) { return 0.0; }};
inline const ScalarFn tanh{[](double x) { return std::tanh(x); },
                           [](double x) {
                             const double t = std::tanh(x);
                             return 1.0 - t * t;
                           }};
// log cosh u, computed stably; even and smooth, grows like |u|.
inline const ScalarFn logcosh{[](double x) {
                                const double a = std::abs(x);
                                return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
                              },
                              [](double x) { return std::tanh(x); }};
inline const ScalarFn square{[](double x) { return x * x; }, [](double x) { return 2.0 * x; }};
}  // namespace fn

using NodeId = std::size_t;
class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}
  Tape* tape() const noexcept { return tape_; }
  NodeId id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, NodeId)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }
  Var variable(Tensor value) { return push(std::move(value), true, nullptr); }

  // Records a derived node; the rule is dropped when no input needs gradients.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward rule) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
    return push(std::move(value), needs, needs ? std::move(rule) : nullptr);
  }
  Var record(Tensor value, const std::vector<Var>& inputs, Backward rule) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
    return push(std::move(value), needs, needs ? std::move(rule) : nullptr);
  }

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient buffer of a node, allocated on first use.
  Tensor& grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape, 0.0);
    return n.grad;
  }
  bool has_grad(NodeId id) const { return nodes_[id].grad.size() == nodes_[id].value.size(); }

  // Accumulates d loss / d node into every node; loss must be 1x1.
  void backward(Var loss) {
    if (loss.shape().size() != 1) {
      throw ShapeError("backward needs a scalar loss, got " + to_string(loss.shape()));
    }
    for (auto& n : nodes_) n.grad = Tensor();
    grad(loss.id()).data[0] = 1.0;
    for (NodeId id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.rule || !has_grad(id)) continue;
      n.rule(*this, id);
    }
  }

  // Gradient of the last backward() w.r.t. v; zeros if v did not influence it.
  Tensor gradient(Var v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.size() == n.value.size()) return n.grad;
    return Tensor(n.value.shape, 0.0);
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward rule;
  };

  Var push(Tensor value, bool requires_grad, Backward rule) {
    nodes_.push_back({std::move(value), Tensor(), requires_grad, std::move(rule)});
    return {this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;  // stable references while the tape grows
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Shape& Var::shape() const { return tape_->value(id_).shape; }

namespace detail {

inline void require_same(const Var& a, const Var& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

inline void accumulate(Tape& t, const Var& v, const std::vector<double>& g, double scale = 1.0) {
  if (!t.requires_grad(v.id())) return;
  auto& dst = t.grad(v.id()).data;
  for (std::size_t k = 0; k < g.size(); ++k) dst[k] += scale * g[k];
}

// C = A B (+= when accumulate); A is (m x k), B is (k x n).
inline void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C += A^T B; A is (k x m), B is (k x n).
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = arow[i];
      if (api == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

// C += A B^T; A is (m x k), B is (n x k).
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

template <class F, class DF>
Var unary(const Var& x, F f, DF df) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  Tensor out(xv.shape);
  for (std::size_t k = 0; k < xv.size(); ++k) out.data[k] = f(xv.data[k]);
  return t.record(std::move(out), {x}, [x, df](Tape& tp, NodeId self) {
    const Tensor& xv = tp.value(x.id());
    const Tensor& yv = tp.value(self);
    const Tensor& gy = tp.grad(self);
    if (!tp.requires_grad(x.id())) return;
    auto& gx = tp.grad(x.id()).data;
    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += gy.data[k] * df(xv.data[k], yv.data[k]);
  });
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  detail::require_same(a, b, "add");
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += b.value().data[k];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, NodeId self) {
    const auto& g = t.grad(self).data;
    detail::accumulate(t, a, g);
    detail::accumulate(t, b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= b.value().data[k];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, NodeId self) {
    const auto& g = t.grad(self).data;
    detail::accumulate(t, a, g);
    detail::accumulate(t, b, g, -1.0);
  });
}

// Elementwise (Hadamard) product.
inline Var mul(const Var& a, const Var& b) {
  detail::require_same(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= b.value().data[k];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, NodeId self) {
    const auto& g = t.grad(self).data;
    const auto& av = t.value(a.id()).data;
    const auto& bv = t.value(b.id()).data;
    if (t.requires_grad(a.id())) {
      auto& ga = t.grad(a.id()).data;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * bv[k];
    }
    if (t.requires_grad(b.id())) {
      auto& gb = t.grad(b.id()).data;
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * av[k];
    }
  });
}

inline Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& x : out.data) x *= c;
  return a.tape()->record(std::move(out), {a}, [a, c](Tape& t, NodeId self) {
    detail::accumulate(t, a, t.grad(self).data, c);
  });
}

// a * s with s a 1x1 tensor.
inline Var scale_by(const Var& a, const Var& s) {
  if (s.shape().size() != 1) throw ShapeError("scale_by expects a scalar factor");
  const double sv = s.value().data[0];
  Tensor out = a.value();
  for (auto& x : out.data) x *= sv;
  return a.tape()->record(std::move(out), {a, s}, [a, s](Tape& t, NodeId self) {
    const auto& g = t.grad(self).data;
    detail::accumulate(t, a, g, t.value(s.id()).data[0]);
    if (t.requires_grad(s.id())) {
      const auto& av = t.value(a.id()).data;
      double acc = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) acc += g[k] * av[k];
      t.grad(s.id()).data[0] += acc;
    }
  });
}

// X + 1 b^T: adds the row vector b (1 x c) to every row of X (r x c).
inline Var add_row(const Var& x, const Var& b) {
  if (b.shape().rows != 1 || b.shape().cols != x.shape().cols) {
    throw ShapeError("add_row: bias " + to_string(b.shape()) + " vs " + to_string(x.shape()));
  }
  Tensor out = x.value();
  const std::size_t r = out.rows(), c = out.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += b.value().data[j];
  return x.tape()->record(std::move(out), {x, b}, [x, b, r, c](Tape& t, NodeId self) {
    const auto& g = t.grad(self).data;
    detail::accumulate(t, x, g);
    if (t.requires_grad(b.id())) {
      auto& gb = t.grad(b.id()).data;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
    }
  });
}

inline Var matmul(const Var& a, const Var& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) {
    throw ShapeError("matmul: " + to_string(sa) + " x " + to_string(sb));
  }
  Tensor out({sa.rows, sb.cols});
  detail::gemm(a.value().data.data(), b.value().data.data(), out.data.data(), sa.rows, sa.cols,
               sb.cols);
  return a.tape()->record(std::move(out), {a, b}, [a, b, sa, sb](Tape& t, NodeId self) {
    const auto& g = t.grad(self).data;
    if (t.requires_grad(a.id())) {
      // dA = dC B^T
      detail::gemm_nt(g.data(), t.value(b.id()).data.data(), t.grad(a.id()).data.data(), sa.rows,
                      sb.cols, sa.cols);
    }
    if (t.requires_grad(b.id())) {
      // dB = A^T dC
      detail::gemm_tn(t.value(a.id()).data.data(), g.data(), t.grad(b.id()).data.data(), sa.cols,
                      sa.rows, sb.cols);
    }
  });
}

inline Var transpose(const Var& a) {
  const Shape s = a.shape();
  Tensor out({s.cols, s.rows});
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out(j, i) = a.value()(i, j);
  return a.tape()->record(std::move(out), {a}, [a, s](Tape& t, NodeId self) {
    if (!t.requires_grad(a.id())) return;
    const Tensor& g = t.grad(self);
    auto& ga = t.grad(a.id());
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) ga(i, j) += g(j, i);
  });
}

// out.data[k] = a.data[index[k]], reshaped to `shape`.
inline Var gather(const Var& a, std::vector<std::size_t> index, Shape shape) {
  if (index.size() != shape.size()) throw ShapeError("gather: index count does not match shape");
  const auto& av = a.value().data;
  Tensor out(shape);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= av.size()) throw ShapeError("gather: index out of range");
    out.data[k] = av[index[k]];
  }
  return a.tape()->record(std::move(out), {a},
                          [a, index = std::move(index)](Tape& t, NodeId self) {
                            if (!t.requires_grad(a.id())) return;
                            const auto& g = t.grad(self).data;
                            auto& ga = t.grad(a.id()).data;
                            for (std::size_t k = 0; k < index.size(); ++k) ga[index[k]] += g[k];
                          });
}

// Zero tensor of `shape` with out.data[index[k]] += a.data[k].
inline Var scatter(const Var& a, std::vector<std::size_t> index, Shape shape) {
  if (index.size() != a.shape().size()) throw ShapeError("scatter: index count does not match input");
  Tensor out(shape, 0.0);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= out.size()) throw ShapeError("scatter: index out of range");
    out.data[index[k]] += a.value().data[k];
  }
  return a.tape()->record(std::move(out), {a},
                          [a, index = std::move(index)](Tape& t, NodeId self) {
                            if (!t.requires_grad(a.id())) return;
                            const auto& g = t.grad(self).data;
                            auto& ga = t.grad(a.id()).data;
                            for (std::size_t k = 0; k < index.size(); ++k) ga[k] += g[index[k]];
                          });
}

// Column-wise concatenation of tensors with equal row counts.
inline Var hconcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("hconcat of nothing");
  const std::size_t r = parts.front().shape().rows;
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.shape().rows != r) throw ShapeError("hconcat: row counts differ");
    c += p.shape().cols;
  }
  Tensor out({r, c});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, offset + j) = pv(i, j);
    offset += pv.cols();
  }
  return parts.front().tape()->record(std::move(out), parts, [parts, r, c](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.shape().cols;
      if (t.requires_grad(p.id())) {
        auto& gp = t.grad(p.id());
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) gp(i, j) += g(i, offset + j);
      }
      offset += pc;
    }
  });
}

// Sum of all entries, 1x1.
inline Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return a.tape()->record(Tensor::scalar(s), {a}, [a](Tape& t, NodeId self) {
    if (!t.requires_grad(a.id())) return;
    const double g = t.grad(self).data[0];
    for (auto& x : t.grad(a.id()).data) x += g;
  });
}

// Column sums, 1 x c.
inline Var col_sum(const Var& a) {
  const Shape s = a.shape();
  Tensor out({1, s.cols}, 0.0);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out.data[j] += a.value()(i, j);
  return a.tape()->record(std::move(out), {a}, [a, s](Tape& t, NodeId self) {
    if (!t.requires_grad(a.id())) return;
    const auto& g = t.grad(self).data;
    auto& ga = t.grad(a.id());
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) ga(i, j) += g[j];
  });
}

// Row sums, r x 1.
inline Var row_sum(const Var& a) {
  const Shape s = a.shape();
  Tensor out({s.rows, 1}, 0.0);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out.data[i] += a.value()(i, j);
  return a.tape()->record(std::move(out), {a}, [a, s](Tape& t, NodeId self) {
    if (!t.requires_grad(a.id())) return;
    const auto& g = t.grad(self).data;
    auto& ga = t.grad(a.id());
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) ga(i, j) += g[i];
  });
}

// Square matrix with the entries of a column vector (r x 1) on its diagonal.
inline Var diag(const Var& v) {
  const Shape s = v.shape();
  if (s.cols != 1) throw ShapeError("diag expects a column vector");
  Tensor out({s.rows, s.rows}, 0.0);
  for (std::size_t i = 0; i < s.rows; ++i) out(i, i) = v.value().data[i];
  return v.tape()->record(std::move(out), {v}, [v, s](Tape& t, NodeId self) {
    if (!t.requires_grad(v.id())) return;
    const Tensor& g = t.grad(self);
    auto& gv = t.grad(v.id()).data;
    for (std::size_t i = 0; i < s.rows; ++i) gv[i] += g(i, i);
  });
}

inline Var log(const Var& a) {
  for (double x : a.value().data) {
    if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
  }
  return detail::unary(a, [](double x) { return std::log(x); },
                       [](double x, double) { return 1.0 / x; });
}

inline Var exp(const Var& a) {
  return detail::unary(a, [](double x) { return std::exp(x); },
                       [](double, double y) { return y; });
}

inline Var tanh(const Var& a) {
  return detail::unary(a, [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

// |x| with subgradient 0 at 0.
inline Var abs(const Var& a) {
  return detail::unary(a, [](double x) { return std::abs(x); },
                       [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Var sqrt(const Var& a) {
  for (double x : a.value().data) {
    if (x < 0.0) throw DomainError("sqrt of negative value " + std::to_string(x));
  }
  return detail::unary(a, [](double x) { return std::sqrt(x); },
                       [](double, double y) { return 0.5 / y; });
}

inline Var reciprocal(const Var& a) {
  for (double x : a.value().data) {
    if (x == 0.0) throw DomainError("reciprocal of zero");
  }
  return detail::unary(a, [](double x) { return 1.0 / x; },
                       [](double, double y) { return -y * y; });
}

// f(|x|): invariant under x -> -x.
inline Var elementwise_even(const Var& a, ScalarFn f) {
  return detail::unary(
      a, [f](double x) { return f.f(std::abs(x)); },
      [f](double x, double) {
        const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        return s * f.df(std::abs(x));
      });
}

// x g(|x|): equivariant under x -> -x.
inline Var elementwise_odd(const Var& a, ScalarFn g) {
  return detail::unary(
      a, [g](double x) { return x * g.f(std::abs(x)); },
      [g](double x, double) {
        const double ax = std::abs(x);
        return g.f(ax) + ax * g.df(ax);
      });
}

// Softmax over all entries of a (any shape).
inline Var softmax(const Var& a) {
  const auto& av = a.value().data;
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : av) mx = std::max(mx, x);
  Tensor out(a.shape());
  double z = 0.0;
  for (std::size_t k = 0; k < av.size(); ++k) {
    out.data[k] = std::exp(av[k] - mx);
    z += out.data[k];
  }
  for (auto& y : out.data) y /= z;
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, NodeId self) {
    if (!t.requires_grad(a.id())) return;
    const auto& y = t.value(self).data;
    const auto& g = t.grad(self).data;
    double dot = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) dot += g[k] * y[k];
    auto& ga = t.grad(a.id()).data;
    for (std::size_t k = 0; k < y.size(); ++k) ga[k] += y[k] * (g[k] - dot);
  });
}

// Same value as a, no gradient.
inline Var detach(const Var& a) { return a.tape()->constant(a.value()); }

// Forward value `hard`, backward passes the incoming gradient to `soft`
// unchanged (straight-through estimator). With an anchor (soft recorded at a
// reference point) the forward value is hard + soft - anchor: equal to `hard`
// at the reference and differentiable around it with the same gradient.
inline Var straight_through(Tensor hard, const Var& soft, const Tensor* anchor = nullptr) {
  if (!(hard.shape == soft.shape())) throw ShapeError("straight_through: shape mismatch");
  if (anchor) {
    if (!(anchor->shape == hard.shape)) throw ShapeError("straight_through: anchor shape mismatch");
    for (std::size_t k = 0; k < hard.size(); ++k) hard.data[k] += soft.value().data[k] - anchor->data[k];
  }
  return soft.tape()->record(std::move(hard), {soft}, [soft](Tape& t, NodeId self) {
    detail::accumulate(t, soft, t.grad(self).data);
  });
}

// Result of a Gumbel-Softmax draw over all entries of the logits tensor.
struct GumbelSample {
  std::size_t index = 0;  // flat argmax of (logits + noise) / temperature
  Tensor hard;            // one-hot at index
  Var soft;               // softmax((logits + noise) / temperature)
  Var value;              // hard forward, soft backward
};

// If `forced_index` is set the one-hot is placed there instead of the argmax
// (used to replay a recorded draw); the noise is still consumed from rng.
inline GumbelSample gumbel_softmax_sample(const Var& logits, double temperature, Rng& rng,
                                          std::optional<std::size_t> forced_index = std::nullopt,
                                          const Tensor* anchor = nullptr) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
  Tape& t = *logits.tape();
  Tensor noise(logits.shape());
  for (auto& g : noise.data) g = rng.gumbel();
  Var perturbed = scale(add(logits, t.constant(noise)), 1.0 / temperature);
  const auto& pv = perturbed.value().data;
  std::size_t best = 0;
  for (std::size_t k = 1; k < pv.size(); ++k) {
    if (pv[k] > pv[best]) best = k;
  }
  if (forced_index) best = *forced_index;
  Var soft = softmax(perturbed);
  Tensor hard(logits.shape(), 0.0);
  hard.data[best] = 1.0;
  Var value = straight_through(hard, soft, anchor);
  return {best, std::move(hard), soft, value};
}

// Elementwise stochastic rounding realized as a two-category Gumbel-Softmax
// per entry: round up with probability frac(x), down with 1 - frac(x).
struct RoundingSample {
  Tensor lower;   // floor(x) (or the replayed lower integer)
  Tensor up;      // 1 where rounded up
  Tensor soft;    // relaxed up-probability, -1 where no relaxation applies
  Var value;      // lower + up in the forward pass; relaxed gradient backward
};

struct RoundingReplay {
  const Tensor* lower = nullptr;
  const Tensor* up = nullptr;
  const Tensor* anchor = nullptr;  // recorded soft values: forward becomes hard + soft - anchor
};

inline RoundingSample stochastic_round(const Var& x, double temperature, Rng& rng,
                                       RoundingReplay replay = {}) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
  const Tensor& xv = x.value();
  for (double v : xv.data) {
    if (!std::isfinite(v)) throw DomainError("stochastic_round of non-finite value");
  }
  const std::size_t n = xv.size();
  Tensor lower(xv.shape), up(xv.shape), soft(xv.shape), out(xv.shape);
  for (std::size_t k = 0; k < n; ++k) {
    const double g_up = rng.gumbel();
    const double g_down = rng.gumbel();
    const double lo = replay.lower ? replay.lower->data[k] : std::floor(xv.data[k]);
    const double frac = xv.data[k] - lo;
    lower.data[k] = lo;
    if (frac <= 0.0 || frac >= 1.0) {
      // Integral input (or a replayed bracket the value left): no relaxation.
      up.data[k] = replay.up ? replay.up->data[k] : (frac >= 1.0 ? 1.0 : 0.0);
      soft.data[k] = -1.0;
    } else {
      const double z = (std::log(frac) - std::log1p(-frac) + g_up - g_down) / temperature;
      up.data[k] = replay.up ? replay.up->data[k] : (z > 0.0 ? 1.0 : 0.0);
      soft.data[k] = 1.0 / (1.0 + std::exp(-z));
    }
    out.data[k] = lo + up.data[k];
    if (replay.anchor && soft.data[k] >= 0.0) out.data[k] += soft.data[k] - replay.anchor->data[k];
  }
  Tape& t = *x.tape();
  Tensor soft_copy = soft;
  Var value = t.record(std::move(out), {x}, [x, soft, lower, temperature](Tape& tp, NodeId self) {
    if (!tp.requires_grad(x.id())) return;
    const auto& g = tp.grad(self).data;
    const auto& xv = tp.value(x.id()).data;
    auto& gx = tp.grad(x.id()).data;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double s = soft.data[k];
      if (s < 0.0) continue;
      const double frac = xv[k] - lower.data[k];
      // d sigmoid(z)/dx with z = (log f - log(1 - f) + noise) / T.
      gx[k] += g[k] * s * (1.0 - s) * (1.0 / frac + 1.0 / (1.0 - frac)) / temperature;
    }
  });
  return {std::move(lower), std::move(up), std::move(soft_copy), value};
}

// Central finite-difference directional derivative of f at x along dir.
template <class F>
double directional_fd(F&& f, std::vector<double> x, const std::vector<double>& dir, double h) {
  std::vector<double> xp = x, xm = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    xp[k] += h * dir[k];
    xm[k] -= h * dir[k];
  }
  return (f(xp) - f(xm)) / (2.0 * h);
}

}  // namespace latred::ad
