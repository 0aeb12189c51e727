#pragma once

// Minimal reverse-mode differentiable matrix engine. Every tensor is a dense
// row-major matrix of doubles; scalars are 1x1. Each op records a closure
// that pushes its output gradient into its parents, and backward() replays
// the recorded graph in reverse topological order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "crashsurr/error.hpp"

namespace crashsurr::ad {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

// While a probe is active, relu appends the sign of every input it sees.
// Finite-difference checks use it to spot stencils that straddle a kink.
inline std::vector<char>*& relu_probe() {
  thread_local std::vector<char>* probe = nullptr;
  return probe;
}

class ReluProbe {
 public:
  ReluProbe() : previous_(relu_probe()) { relu_probe() = &signs_; }
  ~ReluProbe() { relu_probe() = previous_; }
  ReluProbe(const ReluProbe&) = delete;
  ReluProbe& operator=(const ReluProbe&) = delete;
  const std::vector<char>& signs() const { return signs_; }

 private:
  std::vector<char> signs_;
  std::vector<char>* previous_;
};

// Disables graph recording for the current thread (inference rollouts).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return from(rows, cols, std::vector<double>(rows * cols, 0.0));
  }

  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false) {
    require(values.size() == rows * cols, ErrorKind::kShapeMismatch,
            "tensor buffer length " + std::to_string(values.size()) + " != " +
                std::to_string(rows) + "x" + std::to_string(cols));
    auto node = std::make_shared<Node>();
    node->rows = rows;
    node->cols = cols;
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from(1, 1, {v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  std::vector<std::size_t> shape() const { return {node_->rows, node_->cols}; }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> values() const { return node_->value; }
  // Direct buffer access for optimizers and weight loading. Do not use on a
  // tensor that is part of a live graph.
  std::span<double> mutable_values() { return node_->value; }

  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
  double item() const {
    require(size() == 1, ErrorKind::kShapeMismatch, "item() on non-scalar tensor");
    return node_->value[0];
  }

  bool has_grad() const { return node_->grad.size() == node_->value.size() && size() > 0; }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

  // Same values, no history.
  Tensor detach() const { return from(rows(), cols(), node_->value, false); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

using Index = std::vector<std::uint32_t>;

namespace detail {

inline void check_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kShapeMismatch,
          std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
              " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

// Builds an output node. Parents are recorded only when grad mode is on and
// at least one parent participates in differentiation.
inline std::shared_ptr<Node> make(std::size_t rows, std::size_t cols,
                                  std::initializer_list<Tensor> parents, const char* op) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value.assign(rows * cols, 0.0);
  node->op = op;
  if (grad_mode()) {
    for (const auto& p : parents) {
      if (p.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
    if (node->requires_grad) {
      for (const auto& p : parents) node->parents.push_back(p.node());
    }
  }
  return node;
}

inline std::shared_ptr<Node> make_many(std::size_t rows, std::size_t cols,
                                       const std::vector<Tensor>& parents, const char* op) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value.assign(rows * cols, 0.0);
  node->op = op;
  if (grad_mode()) {
    for (const auto& p : parents) {
      if (p.requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      for (const auto& p : parents) node->parents.push_back(p.node());
    }
  }
  return node;
}

inline bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

// C(m x n) += A(m x k) * B(k x n)
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T. B is transposed once so the inner
// loop runs over contiguous memory; each c entry still sums p = 0..k-1 in order.
inline void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = bt.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
    }
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
  }
}

// C(m x n) += A(k x m)^T * B(k x n)
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = a[p * m + i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), ErrorKind::kShapeMismatch,
          "matmul: inner dims " + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto out = detail::make(m, n, {a, b}, "matmul");
  detail::gemm_nn(m, k, n, a.values().data(), b.values().data(), out->value.data());
  if (out->requires_grad) {
    out->backward = [m, k, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) detail::gemm_nt(m, n, k, self.grad.data(), pb.value.data(), pa.ensure_grad().data());
      if (pb.requires_grad) detail::gemm_tn(k, m, n, pa.value.data(), self.grad.data(), pb.ensure_grad().data());
    };
  }
  return Tensor(out);
}

// a * b^T
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), ErrorKind::kShapeMismatch, "matmul_nt: inner dims differ");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  auto out = detail::make(m, n, {a, b}, "matmul_nt");
  detail::gemm_nt(m, k, n, a.values().data(), b.values().data(), out->value.data());
  if (out->requires_grad) {
    out->backward = [m, k, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) detail::gemm_nn(m, n, k, self.grad.data(), pb.value.data(), pa.ensure_grad().data());
      if (pb.requires_grad) detail::gemm_tn(n, m, k, self.grad.data(), pa.value.data(), pb.ensure_grad().data());
    };
  }
  return Tensor(out);
}

// a^T * b
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), ErrorKind::kShapeMismatch, "matmul_tn: inner dims differ");
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  auto out = detail::make(m, n, {a, b}, "matmul_tn");
  detail::gemm_tn(m, k, n, a.values().data(), b.values().data(), out->value.data());
  if (out->requires_grad) {
    out->backward = [m, k, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) detail::gemm_nt(k, n, m, pb.value.data(), self.grad.data(), pa.ensure_grad().data());
      if (pb.requires_grad) detail::gemm_nn(k, m, n, pa.value.data(), self.grad.data(), pb.ensure_grad().data());
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same(a, b, "add");
  auto out = detail::make(a.rows(), a.cols(), {a, b}, "add");
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + bv[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      for (int p = 0; p < 2; ++p) {
        if (!detail::wants(self, p)) continue;
        auto& g = self.parents[p]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same(a, b, "sub");
  auto out = detail::make(a.rows(), a.cols(), {a, b}, "sub");
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] - bv[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      if (detail::wants(self, 0)) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (detail::wants(self, 1)) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
      }
    };
  }
  return Tensor(out);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same(a, b, "mul");
  auto out = detail::make(a.rows(), a.cols(), {a, b}, "mul");
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * bv[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
      }
    };
  }
  return Tensor(out);
}

// a + row, row is 1 x cols and broadcast over rows.
inline Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::kShapeMismatch, "add_row: bad row shape");
  const std::size_t r = a.rows(), c = a.cols();
  auto out = detail::make(r, c, {a, row}, "add_row");
  const auto av = a.values(), rv = row.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out->value[i * c + j] = av[i * c + j] + rv[j];
  if (out->requires_grad) {
    out->backward = [r, c](Node& self) {
      if (detail::wants(self, 0)) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (detail::wants(self, 1)) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
    };
  }
  return Tensor(out);
}

// a * row, row is 1 x cols and broadcast over rows.
inline Tensor mul_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::kShapeMismatch, "mul_row: bad row shape");
  const std::size_t r = a.rows(), c = a.cols();
  auto out = detail::make(r, c, {a, row}, "mul_row");
  const auto av = a.values(), rv = row.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out->value[i * c + j] = av[i * c + j] * rv[j];
  if (out->requires_grad) {
    out->backward = [r, c](Node& self) {
      Node& pa = *self.parents[0];
      Node& pr = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j] * pr.value[j];
      }
      if (pr.requires_grad) {
        auto& g = pr.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j] * pa.value[i * c + j];
      }
    };
  }
  return Tensor(out);
}

// a * col, col is rows x 1 and broadcast over columns.
inline Tensor mul_col(const Tensor& a, const Tensor& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), ErrorKind::kShapeMismatch, "mul_col: bad column shape");
  const std::size_t r = a.rows(), c = a.cols();
  auto out = detail::make(r, c, {a, col}, "mul_col");
  const auto av = a.values(), cv = col.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out->value[i * c + j] = av[i * c + j] * cv[i];
  if (out->requires_grad) {
    out->backward = [r, c](Node& self) {
      Node& pa = *self.parents[0];
      Node& pc = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j] * pc.value[i];
      }
      if (pc.requires_grad) {
        auto& g = pc.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i] += self.grad[i * c + j] * pa.value[i * c + j];
      }
    };
  }
  return Tensor(out);
}

inline Tensor scale(const Tensor& a, double s) {
  auto out = detail::make(a.rows(), a.cols(), {a}, "scale");
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * s;
  if (out->requires_grad) {
    out->backward = [s](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
    };
  }
  return Tensor(out);
}

// a * s where s is a differentiable 1x1 tensor.
inline Tensor scale_by(const Tensor& a, const Tensor& s) {
  require(s.size() == 1, ErrorKind::kShapeMismatch, "scale_by: scale must be 1x1");
  auto out = detail::make(a.rows(), a.cols(), {a, s}, "scale_by");
  const auto av = a.values();
  const double sv = s.values()[0];
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * sv;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& ps = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * ps.value[0];
      }
      if (ps.requires_grad) {
        double acc = 0.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa.value[i];
        ps.ensure_grad()[0] += acc;
      }
    };
  }
  return Tensor(out);
}

inline Tensor add_scalar(const Tensor& a, double s) {
  auto out = detail::make(a.rows(), a.cols(), {a}, "add_scalar");
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + s;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

namespace detail {

template <typename Fwd, typename Deriv>
Tensor pointwise(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
  auto out = make(a.rows(), a.cols(), {a}, op);
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i]);
  if (out->requires_grad) {
    out->backward = [deriv](Node& self) {
      Node& pa = *self.parents[0];
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(pa.value[i], self.value[i]);
    };
  }
  return Tensor(out);
}

}  // namespace detail

inline Tensor relu(const Tensor& a) {
  if (auto* probe = relu_probe())
    for (double x : a.values()) probe->push_back(x > 0.0 ? 1 : 0);
  return detail::pointwise(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor gelu(const Tensor& a) {
  return detail::pointwise(
      a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + x * pdf;
      });
}

inline Tensor exp(const Tensor& a) {
  return detail::pointwise(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor reciprocal(const Tensor& a) {
  return detail::pointwise(
      a, "reciprocal", [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

// max(a, lo) elementwise; gradient passes only where a > lo.
inline Tensor clamp_min(const Tensor& a, double lo) {
  return detail::pointwise(
      a, "clamp_min", [lo](double x) { return x > lo ? x : lo; },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Structural ops

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), ErrorKind::kInvalidArgument, "concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == r, ErrorKind::kShapeMismatch, "concat_cols: row counts differ");
    total += p.cols();
  }
  auto out = detail::make_many(r, total, parts, "concat_cols");
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto pv = p.values();
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out->value[i * total + offset + j] = pv[i * c + j];
    offset += c;
  }
  if (out->requires_grad) {
    out->backward = [r, total](Node& self) {
      std::size_t off = 0;
      for (auto& parent : self.parents) {
        const std::size_t c = parent->cols;
        if (parent->requires_grad) {
          auto& g = parent->ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * total + off + j];
        }
        off += c;
      }
    };
  }
  return Tensor(out);
}

inline Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require(start + count <= a.cols(), ErrorKind::kShapeMismatch, "slice_cols: out of range");
  const std::size_t r = a.rows(), c = a.cols();
  auto out = detail::make(r, count, {a}, "slice_cols");
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out->value[i * count + j] = av[i * c + start + j];
  if (out->requires_grad) {
    out->backward = [r, c, start, count](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) g[i * c + start + j] += self.grad[i * count + j];
    };
  }
  return Tensor(out);
}

// out[k] = a[index[k]]
inline Tensor gather_rows(const Tensor& a, const Index& index) {
  const std::size_t c = a.cols();
  for (auto i : index)
    require(i < a.rows(), ErrorKind::kShapeMismatch, "gather_rows: index out of range");
  auto out = detail::make(index.size(), c, {a}, "gather_rows");
  const auto av = a.values();
  for (std::size_t k = 0; k < index.size(); ++k)
    std::copy_n(av.data() + index[k] * c, c, out->value.data() + k * c);
  if (out->requires_grad) {
    out->backward = [index, c](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t k = 0; k < index.size(); ++k)
        for (std::size_t j = 0; j < c; ++j) g[index[k] * c + j] += self.grad[k * c + j];
    };
  }
  return Tensor(out);
}

// out[index[k]] += a[k]; contributions are summed in list order, so the
// result is reproducible for a fixed index list.
inline Tensor scatter_add_rows(const Tensor& a, const Index& index, std::size_t out_rows) {
  require(index.size() == a.rows(), ErrorKind::kShapeMismatch, "scatter_add_rows: index length != rows");
  for (auto i : index)
    require(i < out_rows, ErrorKind::kShapeMismatch, "scatter_add_rows: index out of range");
  const std::size_t c = a.cols();
  auto out = detail::make(out_rows, c, {a}, "scatter_add_rows");
  const auto av = a.values();
  for (std::size_t k = 0; k < index.size(); ++k)
    for (std::size_t j = 0; j < c; ++j) out->value[index[k] * c + j] += av[k * c + j];
  if (out->requires_grad) {
    out->backward = [index, c](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t k = 0; k < index.size(); ++k)
        for (std::size_t j = 0; j < c; ++j) g[k * c + j] += self.grad[index[k] * c + j];
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Normalisation and reductions

inline Tensor row_softmax(const Tensor& a) {
  require(a.cols() > 0, ErrorKind::kShapeMismatch, "row_softmax: empty row");
  const std::size_t r = a.rows(), c = a.cols();
  auto out = detail::make(r, c, {a}, "row_softmax");
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data() + i * c;
    double* y = out->value.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  if (out->requires_grad) {
    out->backward = [r, c](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        const double* y = self.value.data() + i * c;
        const double* dy = self.grad.data() + i * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += dy[j] * y[j];
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (dy[j] - dot);
      }
    };
  }
  return Tensor(out);
}

inline Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
  require(gamma.rows() == 1 && gamma.cols() == a.cols() && beta.rows() == 1 && beta.cols() == a.cols(),
          ErrorKind::kShapeMismatch, "layer_norm: affine parameter shape");
  const std::size_t r = a.rows(), c = a.cols();
  auto out = detail::make(r, c, {a, gamma, beta}, "layer_norm");
  std::vector<double> xhat(r * c);
  std::vector<double> inv_std(r);
  const auto av = a.values(), gv = gamma.values(), bv = beta.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (x[j] - mean) * inv_std[i];
      out->value[i * c + j] = gv[j] * xhat[i * c + j] + bv[j];
    }
  }
  if (out->requires_grad) {
    out->backward = [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
      Node& pa = *self.parents[0];
      Node& pg = *self.parents[1];
      Node& pb = *self.parents[2];
      if (pg.requires_grad) {
        auto& g = pg.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j] * xhat[i * c + j];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        std::vector<double> dxhat(c);
        for (std::size_t i = 0; i < r; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            dxhat[j] = self.grad[i * c + j] * pg.value[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[i * c + j];
          }
          mean_d /= static_cast<double>(c);
          mean_dx /= static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j)
            g[i * c + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * c + j] * mean_dx);
        }
      }
    };
  }
  return Tensor(out);
}

// Euclidean norm of every row, as a rows x 1 column. The gradient at a zero
// row is taken as zero.
inline Tensor row_norm(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  auto out = detail::make(r, 1, {a}, "row_norm");
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += av[i * c + j] * av[i * c + j];
    out->value[i] = std::sqrt(s);
  }
  if (out->requires_grad) {
    out->backward = [r, c](Node& self) {
      Node& pa = *self.parents[0];
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        const double n = self.value[i];
        if (n == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i] * pa.value[i * c + j] / n;
      }
    };
  }
  return Tensor(out);
}

inline Tensor sum(const Tensor& a) {
  auto out = detail::make(1, 1, {a}, "sum");
  double s = 0.0;
  for (double v : a.values()) s += v;
  out->value[0] = s;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (auto& gi : g) gi += self.grad[0];
    };
  }
  return Tensor(out);
}

inline Tensor mean(const Tensor& a) {
  require(a.size() > 0, ErrorKind::kShapeMismatch, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// Mean of squared differences over all entries.
inline Tensor mse(const Tensor& a, const Tensor& b) {
  detail::check_same(a, b, "mse");
  require(a.size() > 0, ErrorKind::kShapeMismatch, "mse of empty tensor");
  auto out = detail::make(1, 1, {a, b}, "mse");
  const auto av = a.values(), bv = b.values();
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  out->value[0] = s / n;
  if (out->requires_grad) {
    out->backward = [n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      const double k = 2.0 * self.grad[0] / n;
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (pa.value[i] - pb.value[i]);
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (pa.value[i] - pb.value[i]);
      }
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Reverse pass

// Populates gradients of every requires_grad ancestor of `loss`. Leaf
// gradients accumulate across calls; interior gradients are recomputed.
inline void backward(const Tensor& loss) {
  require(loss.size() == 1, ErrorKind::kShapeMismatch, "backward: loss must be scalar");
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace crashsurr::ad
