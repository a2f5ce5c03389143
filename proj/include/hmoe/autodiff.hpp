#pragma once

#include <functional>
#include <vector>

#include "hmoe/tensor.hpp"

namespace hmoe {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
class Value {
 public:
  Value() = default;
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Tensor& tensor() const;
  const std::vector<int>& shape() const { return tensor().shape(); }
  /// Value of a single-element tensor.
  double scalar() const;

 private:
  friend class Tape;
  Value(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Ops append nodes in execution order (so the record
/// is topologically sorted by construction); backward() replays the
/// records once in reverse and accumulates gradients into the parameter
/// tensors bound by param(). One forward pass, one backward pass; build a
/// fresh tape per training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf: gradients accumulate into t.grad(). The tensor
  /// must outlive the tape.
  Value param(Tensor& t);
  /// Non-differentiable leaf.
  Value constant(Tensor t);

  /// Backpropagate from a scalar root. Every bound parameter reachable
  /// from the root receives its gradient contribution; unreachable ones
  /// are left untouched.
  void backward(Value root);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Tensor& value_of(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs; }
  /// Gradient buffer for a node, allocated zero-filled on demand.
  std::vector<double>& grad_of(int id);
  bool has_grad(int id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }

  /// Used by op implementations.
  Value emit(Tensor value, bool needs, std::function<void(Tape&)> back);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool needs = false;
    Tensor* bound = nullptr;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
  std::vector<int> leaves_;
};

// ---- Core ops -------------------------------------------------------------
// Every op computes its forward result eagerly and records the backward
// rule; shape violations throw DimensionError at call time.

Value matmul(Value a, Value b);

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);  // elementwise
Value neg(Value a);
Value exp(Value a);
Value log(Value a);  // throws DomainError on non-positive input
Value square(Value a);
Value relu(Value a);
Value silu(Value a);

Value scale(Value a, double c);
Value add_scalar(Value a, double c);

/// Matrix plus row vector, broadcast over rows.
Value add_bias(Value m, Value bias);
/// out[r, c] = m[r, c] * col[r].
Value scale_rows(Value m, Value col);
/// Column c of a matrix as a rank-1 value.
Value column(Value m, int c);

Value softmax_rows(Value m);

Value sum_all(Value a);
Value mean_all(Value a);
/// axis 0 sums over rows (result has one entry per column), axis 1 over
/// columns.
Value sum_axis(Value m, int axis);

/// Squared Euclidean distances between the rows of v [B x D] and the rows
/// of e [K x D]; result is [B x K].
Value sqdist_rows(Value v, Value e);

/// Gradient reversal: identity forward, backward multiplies the incoming
/// gradient by -lambda.
Value grl(Value a, double lambda);

/// Copy elements [offset, offset + prod(out_shape)) of row `row` of a
/// matrix into a fresh tensor of the given shape; backward scatters into
/// the source segment.
Value slice_row(Value m, int row, int offset, std::vector<int> out_shape);

/// Per-example affine map. z is [B x F]; theta is [B x P] holding, per
/// row, a weight matrix (F x out, row-major) at `offset` followed by an
/// out-vector bias. Result is [B x out].
Value per_example_affine(Value z, Value theta, int offset, int in, int out);

/// Mean cross-entropy of logits against integer class targets, fused with
/// a max-subtracted log-sum-exp.
Value cross_entropy_logits(Value logits, const std::vector<int>& targets);
/// Same, against per-row probability targets (soft labels).
Value cross_entropy_logits(Value logits, const Tensor& soft_targets);

/// Mean negative log-likelihood of probability rows against integer
/// targets: mean over rows of -log(max(p[r, t_r], floor)).
Value nll_rows(Value probs, const std::vector<int>& targets, double floor = 1e-12);

/// Mean Shannon entropy (nats) of probability rows.
Value mean_row_entropy(Value probs, double floor = 1e-12);

/// KL divergence between the column-mass distribution of probability rows
/// and the uniform distribution: with I_k = sum_r p[r, k] and
/// P = I / sum(I), returns sum_k P_k * log(K * P_k).
Value kl_balance_uniform(Value probs, double floor = 1e-12);

/// Mean squared error against a fixed target, averaged over all entries.
Value mse(Value pred, const Tensor& target);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator-(Value a) { return neg(a); }
inline Value operator*(double c, Value a) { return scale(a, c); }

}  // namespace hmoe
