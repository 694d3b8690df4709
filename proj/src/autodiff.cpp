#include "hypercurv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hypercurv::ad {

namespace {

constexpr double kCoshClampHigh = 1e8;
constexpr double kCoshGradFloor = 1.0 + 1e-7;

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operation on an unbound Var");
  return *a.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw std::invalid_argument("operands belong to different tapes");
  return t;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a rank-2 operand, got " +
                                t.shape_string());
  }
}

void require_axis(int axis, const char* op) {
  if (axis != 0 && axis != 1) {
    throw std::invalid_argument(std::string(op) + ": axis must be 0 or 1");
  }
}

// Broadcast result shape for rank-2 operands.
std::vector<std::size_t> broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_matrix(a, op);
  require_matrix(b, op);
  std::vector<std::size_t> out(2);
  for (int d = 0; d < 2; ++d) {
    const std::size_t x = a.shape()[d];
    const std::size_t y = b.shape()[d];
    if (x != y && x != 1 && y != 1) {
      throw std::invalid_argument(std::string(op) + ": cannot broadcast " +
                                  a.shape_string() + " with " + b.shape_string());
    }
    out[d] = std::max(x, y);
  }
  return out;
}

// Element of `t` addressed by an output position under broadcasting.
inline double bc_at(const Tensor& t, std::size_t r, std::size_t c) {
  const std::size_t rr = t.shape()[0] == 1 ? 0 : r;
  const std::size_t cc = t.shape()[1] == 1 ? 0 : c;
  return t.values()[rr * t.shape()[1] + cc];
}

// Sums a broadcast gradient back down to `shape`.
Tensor reduce_to(const Tensor& g, const std::vector<std::size_t>& shape) {
  if (g.shape() == shape) return g;
  Tensor out(shape);
  const std::size_t rows = g.shape()[0];
  const std::size_t cols = g.shape()[1];
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t rr = shape[0] == 1 ? 0 : r;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t cc = shape[1] == 1 ? 0 : c;
      out.values()[rr * shape[1] + cc] += g.values()[r * cols + c];
    }
  }
  return out;
}

template <typename Fwd>
Tensor map_unary(const Tensor& x, Fwd fwd) {
  Tensor out = x;
  for (double& v : out.values()) v = fwd(v);
  return out;
}

// Unary elementwise primitive whose local derivative depends on (x, y).
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  Tensor y = map_unary(a.value(), fwd);
  const std::size_t ia = a.id();
  const std::size_t iy = t.size();
  const Tape* tp = &t;
  return t.record(std::move(y), {a}, [tp, ia, iy, deriv](const Tensor& g, GradientBuffer& grads) {
    const Tensor& x = tp->value(ia);
    const Tensor& yv = tp->value(iy);
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= deriv(x[i], yv[i]);
    grads.accumulate(ia, gx);
  });
}

// Broadcasting binary primitive; dfa/dfb are the local partials at (x, y).
template <typename Fwd, typename DA, typename DB>
Var binary(Var a, Var b, const char* op, Fwd fwd, DA dfa, DB dfb) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  auto shape = broadcast_shape(x, y, op);
  Tensor out(shape);
  for (std::size_t r = 0; r < shape[0]; ++r) {
    for (std::size_t c = 0; c < shape[1]; ++c) {
      out(r, c) = fwd(bc_at(x, r, c), bc_at(y, r, c));
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  const Tape* tp = &t;
  return t.record(std::move(out), {a, b}, [tp, ia, ib, dfa, dfb](const Tensor& g, GradientBuffer& grads) {
    const Tensor& x = tp->value(ia);
    const Tensor& y = tp->value(ib);
    const std::size_t rows = g.shape()[0], cols = g.shape()[1];
    Tensor gx(g.shape()), gy(g.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double xv = bc_at(x, r, c), yv = bc_at(y, r, c);
        gx(r, c) = g(r, c) * dfa(xv, yv);
        gy(r, c) = g(r, c) * dfb(xv, yv);
      }
    }
    if (tp->requires_grad(ia)) grads.accumulate(ia, reduce_to(gx, x.shape()));
    if (tp->requires_grad(ib)) grads.accumulate(ib, reduce_to(gy, y.shape()));
  });
}

}  // namespace

// ------------------------------------------------------------------- Tape

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->value(id_);
}

void GradientBuffer::accumulate(std::size_t id, const Tensor& contribution) {
  Tensor& slot = grads_[id];
  if (slot.empty() && slot.rank() == 0) {
    slot = contribution;
    return;
  }
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += contribution[i];
}

Gradients::Gradients(const Tape& tape, std::vector<Tensor> grads)
    : tape_(&tape), grads_(std::move(grads)) {}

Tensor Gradients::operator[](Var v) const {
  if (v.tape() != tape_) throw std::invalid_argument("Var is not from this tape");
  const Tensor& g = grads_[v.id()];
  if (g.rank() == 0) return Tensor::zeros_like(v.value());
  return g;
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var v : inputs) {
    if (v.tape() != this) throw std::invalid_argument("operand from a different tape");
    needs = needs || nodes_[v.id()].requires_grad;
  }
  Node node{std::move(value), recording_ && needs, nullptr};
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this) throw std::invalid_argument("loss is not from this tape");
  if (!recording_) throw std::invalid_argument("backward() on a non-recording tape");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got shape " +
                                loss.value().shape_string());
  }
  GradientBuffer buffer(nodes_.size());
  buffer.accumulate(loss.id(), Tensor(loss.value().shape(), 1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    Tensor& g = buffer.slot(i);
    if (!n.backward || g.rank() == 0) continue;
    n.backward(g, buffer);
  }
  std::vector<Tensor> grads(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) grads[i] = std::move(buffer.slot(i));
  return Gradients(*this, std::move(grads));
}

// ------------------------------------------------------------- arithmetic

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "matmul");
  require_matrix(y, "matmul");
  if (x.cols() != y.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + x.shape_string() + " x " +
                                y.shape_string());
  }
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += xv * y(p, j);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  const Tape* tp = &t;
  return t.record(std::move(out), {a, b}, [tp, ia, ib, m, k, n](const Tensor& g, GradientBuffer& grads) {
    const Tensor& x = tp->value(ia);
    const Tensor& y = tp->value(ib);
    if (tp->requires_grad(ia)) {
      Tensor gx = Tensor::matrix(m, k);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gv = g(i, j);
          if (gv == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gx(i, p) += gv * y(p, j);
        }
      grads.accumulate(ia, gx);
    }
    if (tp->requires_grad(ib)) {
      Tensor gy = Tensor::matrix(k, n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x(i, p);
          if (xv == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gy(p, j) += xv * g(i, j);
        }
      grads.accumulate(ib, gy);
    }
  });
}

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var scalar_mul(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scalar_mul(a, -1.0); }

// -------------------------------------------------------------- elementwise

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var cosh(Var a) {
  return unary(a, [](double x) { return std::cosh(x); },
               [](double x, double) { return std::sinh(x); });
}

Var sinh(Var a) {
  return unary(a, [](double x) { return std::sinh(x); },
               [](double x, double) { return std::cosh(x); });
}

Var asinh(Var a) {
  return unary(a, [](double x) { return std::asinh(x); },
               [](double x, double) { return 1.0 / std::sqrt(1.0 + x * x); });
}

Var arccosh(Var a) {
  return unary(
      a, [](double x) { return std::acosh(std::clamp(x, 1.0, kCoshClampHigh)); },
      [](double x, double) {
        if (x > kCoshClampHigh) return 0.0;
        const double z = std::max(x, kCoshGradFloor);
        return 1.0 / std::sqrt(z * z - 1.0);
      });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log_sigmoid(Var a) {
  return unary(
      a, [](double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
      [](double x, double) {
        // d/dx log sigmoid(x) = sigmoid(-x)
        if (x >= 0) {
          const double e = std::exp(-x);
          return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(x));
      });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var clamp_min(Var a, double lo) {
  return unary(a, [lo](double x) { return x > lo ? x : lo; },
               [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------- structure

Var concat(std::span<const Var> parts, int axis) {
  require_axis(axis, "concat");
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  Tape& t = tape_of(parts[0]);
  std::size_t rows = 0, cols = 0;
  for (Var p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("concat: operands on different tapes");
    const Tensor& v = p.value();
    require_matrix(v, "concat");
    if (axis == 1) {
      if (rows == 0 && cols == 0) rows = v.rows();
      if (v.rows() != rows) throw std::invalid_argument("concat: row count mismatch");
      cols += v.cols();
    } else {
      if (rows == 0 && cols == 0) cols = v.cols();
      if (v.cols() != cols) throw std::invalid_argument("concat: column count mismatch");
      rows += v.rows();
    }
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < v.rows(); ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == 1) out(r, offset + c) = v(r, c);
        else out(offset + r, c) = v(r, c);
      }
    offset += axis == 1 ? v.cols() : v.rows();
  }
  std::vector<std::size_t> ids;
  std::vector<std::vector<std::size_t>> shapes;
  for (Var p : parts) {
    ids.push_back(p.id());
    shapes.push_back(p.value().shape());
  }
  const Tape* tp = &t;
  return t.record(std::move(out), parts, [tp, ids, shapes, axis](const Tensor& g, GradientBuffer& grads) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t r_n = shapes[k][0], c_n = shapes[k][1];
      if (tp->requires_grad(ids[k])) {
        Tensor gk = Tensor::matrix(r_n, c_n);
        for (std::size_t r = 0; r < r_n; ++r)
          for (std::size_t c = 0; c < c_n; ++c)
            gk(r, c) = axis == 1 ? g(r, offset + c) : g(offset + r, c);
        grads.accumulate(ids[k], gk);
      }
      offset += axis == 1 ? c_n : r_n;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "slice_cols");
  if (begin > end || end > x.cols()) throw std::invalid_argument("slice_cols: bad range");
  const std::size_t rows = x.rows(), width = end - begin, cols = x.cols();
  Tensor out = Tensor::matrix(rows, width);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out(r, c) = x(r, begin + c);
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, rows, cols, begin, width](const Tensor& g, GradientBuffer& grads) {
    Tensor gx = Tensor::matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) gx(r, begin + c) = g(r, c);
    grads.accumulate(ia, gx);
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "transpose");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::matrix(cols, rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(c, r) = x(r, c);
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, rows, cols](const Tensor& g, GradientBuffer& grads) {
    Tensor gx = Tensor::matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gx(r, c) = g(c, r);
    grads.accumulate(ia, gx);
  });
}

// --------------------------------------------------------------- reductions

Var sum(Var a, int axis) {
  require_axis(axis, "sum");
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "sum");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out = axis == 0 ? Tensor::matrix(1, cols) : Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (axis == 0) out(0, c) += x(r, c);
      else out(r, 0) += x(r, c);
    }
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, rows, cols, axis](const Tensor& g, GradientBuffer& grads) {
    Tensor gx = Tensor::matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gx(r, c) = axis == 0 ? g(0, c) : g(r, 0);
    grads.accumulate(ia, gx);
  });
}

Var mean(Var a, int axis) {
  require_axis(axis, "mean");
  const Tensor& x = a.value();
  require_matrix(x, "mean");
  const double n = static_cast<double>(axis == 0 ? x.rows() : x.cols());
  return scalar_mul(sum(a, axis), 1.0 / n);
}

Var sum_all(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const std::size_t ia = a.id();
  const auto shape = x.shape();
  return t.record(Tensor::scalar(s), {a}, [ia, shape](const Tensor& g, GradientBuffer& grads) {
    grads.accumulate(ia, Tensor(shape, g[0]));
  });
}

Var mean_all(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scalar_mul(sum_all(a), 1.0 / n);
}

// ------------------------------------------------------------------ softmax

namespace {

// Applies f(first, stride, count) to every softmax group of a matrix.
template <typename F>
void for_each_group(std::size_t rows, std::size_t cols, int axis, F f) {
  if (axis == 1) {
    for (std::size_t r = 0; r < rows; ++r) f(r * cols, std::size_t{1}, cols);
  } else {
    for (std::size_t c = 0; c < cols; ++c) f(c, cols, rows);
  }
}

}  // namespace

Var softmax(Var a, int axis) {
  require_axis(axis, "softmax");
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "softmax");
  Tensor y = x;
  for_each_group(x.rows(), x.cols(), axis, [&](std::size_t first, std::size_t stride, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, x[first + k * stride]);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) z += (y[first + k * stride] = std::exp(x[first + k * stride] - mx));
    for (std::size_t k = 0; k < n; ++k) y[first + k * stride] /= z;
  });
  const std::size_t ia = a.id();
  const std::size_t iy = t.size();
  const Tape* tp = &t;
  return t.record(std::move(y), {a}, [tp, ia, iy, axis](const Tensor& g, GradientBuffer& grads) {
    const Tensor& yv = tp->value(iy);
    Tensor gx = g;
    for_each_group(yv.rows(), yv.cols(), axis, [&](std::size_t first, std::size_t stride, std::size_t n) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += g[first + k * stride] * yv[first + k * stride];
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = first + k * stride;
        gx[i] = yv[i] * (g[i] - dot);
      }
    });
    grads.accumulate(ia, gx);
  });
}

Var log_softmax(Var a, int axis) {
  require_axis(axis, "log_softmax");
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "log_softmax");
  Tensor y = x;
  for_each_group(x.rows(), x.cols(), axis, [&](std::size_t first, std::size_t stride, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, x[first + k * stride]);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) z += std::exp(x[first + k * stride] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t k = 0; k < n; ++k) y[first + k * stride] = x[first + k * stride] - lse;
  });
  const std::size_t ia = a.id();
  const std::size_t iy = t.size();
  const Tape* tp = &t;
  return t.record(std::move(y), {a}, [tp, ia, iy, axis](const Tensor& g, GradientBuffer& grads) {
    const Tensor& yv = tp->value(iy);
    Tensor gx = g;
    for_each_group(yv.rows(), yv.cols(), axis, [&](std::size_t first, std::size_t stride, std::size_t n) {
      double gsum = 0.0;
      for (std::size_t k = 0; k < n; ++k) gsum += g[first + k * stride];
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = first + k * stride;
        gx[i] = g[i] - std::exp(yv[i]) * gsum;
      }
    });
    grads.accumulate(ia, gx);
  });
}

// ----------------------------------------------------------------- manifold

Var lorentz_inner(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "lorentz_inner");
  if (!x.same_shape(y) || x.cols() < 2) {
    throw std::invalid_argument("lorentz_inner: shape mismatch " + x.shape_string() +
                                " vs " + y.shape_string());
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = -x(r, 0) * y(r, 0);
    for (std::size_t c = 1; c < cols; ++c) s += x(r, c) * y(r, c);
    out(r, 0) = s;
  }
  const std::size_t ia = a.id(), ib = b.id();
  const Tape* tp = &t;
  return t.record(std::move(out), {a, b}, [tp, ia, ib, rows, cols](const Tensor& g, GradientBuffer& grads) {
    const Tensor& x = tp->value(ia);
    const Tensor& y = tp->value(ib);
    Tensor gx = Tensor::matrix(rows, cols), gy = Tensor::matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const double gr = g(r, 0);
      for (std::size_t c = 0; c < cols; ++c) {
        const double sign = c == 0 ? -1.0 : 1.0;
        gx(r, c) = sign * gr * y(r, c);
        gy(r, c) = sign * gr * x(r, c);
      }
    }
    if (tp->requires_grad(ia)) grads.accumulate(ia, gx);
    if (tp->requires_grad(ib)) grads.accumulate(ib, gy);
  });
}

// ------------------------------------------------------------------ sparse

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "gather_rows");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::matrix(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw std::out_of_range("gather_rows: index out of range");
    std::copy(x.row(index[i]).begin(), x.row(index[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, rows, cols, idx = std::move(idx)](const Tensor& g, GradientBuffer& grads) {
    Tensor gx = Tensor::matrix(rows, cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) gx(idx[i], c) += g(i, c);
    grads.accumulate(ia, gx);
  });
}

Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t n_segments) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "segment_sum");
  if (segment.size() != x.rows()) throw std::invalid_argument("segment_sum: segment size mismatch");
  const std::size_t cols = x.cols();
  Tensor out = Tensor::matrix(n_segments, cols);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    if (segment[r] >= n_segments) throw std::out_of_range("segment_sum: segment id out of range");
    for (std::size_t c = 0; c < cols; ++c) out(segment[r], c) += x(r, c);
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, cols, seg = std::move(seg)](const Tensor& g, GradientBuffer& grads) {
    Tensor gx = Tensor::matrix(seg.size(), cols);
    for (std::size_t r = 0; r < seg.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c) gx(r, c) = g(seg[r], c);
    grads.accumulate(ia, gx);
  });
}

Var segment_softmax(Var scores, std::span<const std::size_t> segment, std::size_t n_segments) {
  Tape& t = tape_of(scores);
  const Tensor& x = scores.value();
  require_matrix(x, "segment_softmax");
  if (x.cols() != 1 || segment.size() != x.rows()) {
    throw std::invalid_argument("segment_softmax: expected an E x 1 column matching the segments");
  }
  std::vector<double> mx(n_segments, -std::numeric_limits<double>::infinity());
  std::vector<double> z(n_segments, 0.0);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    if (segment[r] >= n_segments) throw std::out_of_range("segment_softmax: segment id out of range");
    mx[segment[r]] = std::max(mx[segment[r]], x[r]);
  }
  Tensor y = x;
  for (std::size_t r = 0; r < segment.size(); ++r) z[segment[r]] += (y[r] = std::exp(x[r] - mx[segment[r]]));
  for (std::size_t r = 0; r < segment.size(); ++r) y[r] /= z[segment[r]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  const std::size_t ia = scores.id();
  const std::size_t iy = t.size();
  const Tape* tp = &t;
  return t.record(std::move(y), {scores}, [tp, ia, iy, n_segments, seg = std::move(seg)](const Tensor& g, GradientBuffer& grads) {
    const Tensor& yv = tp->value(iy);
    std::vector<double> dot(n_segments, 0.0);
    for (std::size_t r = 0; r < seg.size(); ++r) dot[seg[r]] += g[r] * yv[r];
    Tensor gx = g;
    for (std::size_t r = 0; r < seg.size(); ++r) gx[r] = yv[r] * (g[r] - dot[seg[r]]);
    grads.accumulate(ia, gx);
  });
}

// ------------------------------------------------------------------- checks

double finite_diff_check(const std::function<Var(Var)>& f, const Tensor& x, double h,
                         double floor) {
  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.variable(x);
    Var loss = f(xv);
    analytic = tape.backward(loss)[xv];
  }
  auto eval = [&](const Tensor& at) {
    Tape tape(false);
    return f(tape.variable(at)).value().item();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = eval(probe);
    probe[i] = orig - h;
    const double down = eval(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace hypercurv::ad
