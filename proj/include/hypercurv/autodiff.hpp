#pragma once

// Tape-based reverse-mode automatic differentiation over dense tensors.
//
// A Tape records primitive applications in creation order, so node ids are a
// topological order by construction. Primitives are free functions taking and
// returning Var handles. A non-recording tape evaluates the same primitives
// without storing backward closures; forward values are identical either way.
//
// Binary elementwise primitives broadcast over rank-2 operands: each
// dimension must either match or be 1.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "hypercurv/tensor.hpp"

namespace hypercurv::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient accumulator handed to backward closures. Slots are indexed by
/// node id; an empty tensor means "no contribution yet".
class GradientBuffer {
 public:
  explicit GradientBuffer(std::size_t n) : grads_(n) {}
  void accumulate(std::size_t id, const Tensor& contribution);
  Tensor& slot(std::size_t id) { return grads_[id]; }

 private:
  std::vector<Tensor> grads_;
};

using BackwardFn = std::function<void(const Tensor& grad_out, GradientBuffer& grads)>;

/// Gradients of a scalar with respect to every node of a tape.
class Gradients {
 public:
  Gradients(const Tape& tape, std::vector<Tensor> grads);

  /// Gradient for `v`; zeros of v's shape when v is not on the loss path.
  Tensor operator[](Var v) const;

 private:
  const Tape* tape_;
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var variable(Tensor value);
  /// Leaf treated as a constant.
  Var constant(Tensor value);

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Appends the result of a primitive. `inputs` are the operand ids; the
  /// closure is dropped when the tape is not recording or no input needs a
  /// gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  /// Reverse accumulation from a one-element loss. Throws std::invalid_argument
  /// for non-scalar losses, Vars from another tape, or a non-recording tape.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool recording_;
  std::deque<Node> nodes_;  // deque keeps value references stable
};

// ---------------------------------------------------------------- primitives

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scalar_mul(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

Var sqrt(Var a);
Var exp(Var a);
Var log(Var a);
Var cosh(Var a);
Var sinh(Var a);
Var asinh(Var a);
/// arccosh with the argument clamped to [1, 1e8]. The derivative uses
/// max(z, 1 + 1e-7) so it stays finite at the clamp boundary.
Var arccosh(Var a);
Var sigmoid(Var a);
/// log(sigmoid(x)) evaluated without overflow.
Var log_sigmoid(Var a);
Var relu(Var a);
/// max(x, lo); the gradient is passed through only where x > lo.
Var clamp_min(Var a, double lo);

/// Concatenation of rank-2 operands along axis 0 (rows) or 1 (columns).
Var concat(std::span<const Var> parts, int axis);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var transpose(Var a);

/// Reductions keep the reduced axis with extent 1.
Var sum(Var a, int axis);
Var mean(Var a, int axis);
Var sum_all(Var a);
Var mean_all(Var a);

Var softmax(Var a, int axis);
Var log_softmax(Var a, int axis);

/// Row-wise Lorentz inner product of two N x (n+1) operands -> N x 1.
Var lorentz_inner(Var a, Var b);

/// out[i] = a[index[i]]; the backward pass scatter-adds.
Var gather_rows(Var a, std::span<const std::size_t> index);
/// out[s] = sum of rows r with segment[r] == s; out has n_segments rows.
Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t n_segments);
/// Softmax of an E x 1 column within each segment.
Var segment_softmax(Var scores, std::span<const std::size_t> segment,
                    std::size_t n_segments);

// ------------------------------------------------------------------- checks

/// Largest elementwise relative error between the reverse-mode gradient of
/// `f` at `x` and the central difference with step `h`. The relative error
/// denominator is max(|a|, |b|, floor); the floor keeps round-off in
/// near-zero partials from dominating.
double finite_diff_check(const std::function<Var(Var)>& f, const Tensor& x,
                         double h = 1e-5, double floor = 1e-8);

}  // namespace hypercurv::ad
