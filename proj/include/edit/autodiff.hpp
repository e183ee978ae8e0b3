#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "edit/tensor.hpp"

namespace edit {

/// A trainable tensor with its accumulated gradient. Owned by a model;
/// tapes refer to it by address, so a Parameter must not move while a tape
/// that references it is alive.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value, bool weight_decay = true);

  std::string name;
  Tensor value;
  Tensor grad;
  bool weight_decay = true;

  void zero_grad() { grad.fill(0.0f); }
};

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

/// Reverse-mode computation tape. Nodes are appended in evaluation order, so
/// the node list is already topologically sorted. A tape supports exactly
/// one backward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf bound to a parameter. Repeated calls with the same parameter return
  /// the same node, so every use accumulates into one gradient.
  Var parameter(Parameter& p);
  /// Leaf that receives a gradient but is not bound to a parameter.
  Var variable(Tensor value);

  /// Appends an op result. `fn` runs during backward only when at least one
  /// input requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn);

  /// Propagates d(loss)/d(node) through the tape and adds parameter
  /// gradients into Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  bool requires_grad(Var v) const { return nodes_[v.index()].requires_grad; }
  bool backward_done() const { return backward_done_; }

  // Accessors for backward rules.
  const Tensor& value_at(std::size_t i) const { return nodes_[i].value; }
  const std::vector<Var>& inputs_at(std::size_t i) const { return nodes_[i].inputs; }
  const Tensor& grad_at(std::size_t i) const { return nodes_[i].grad; }
  /// Gradient buffer of an input, or nullptr when it needs none.
  Tensor* grad_sink(Var input);

  /// Gradient of a node after backward(); empty tensor when none reached it.
  const Tensor& grad(Var v) const { return nodes_[v.index()].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };

  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> parameter_nodes_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape_->value_at(index_); }

// Differentiable ops. Rank-1 operands are treated as a single row.

Var matmul(Var a, Var b);
Var transpose(Var x);
/// Same data, new shape (element count must match).
Var reshape(Var x, Shape shape);
Var add(Var a, Var b);
Var mul(Var a, Var b);
/// x (m×n) + bias (n) broadcast over rows.
Var add_row(Var x, Var bias);
/// x (m×n) ⊙ gain (n) broadcast over rows.
Var mul_row(Var x, Var gain);
Var scale(Var x, float factor);
Var sum(Var x);
Var softmax_rows(Var x);
Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-6f);
Var gelu(Var x);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t start, std::size_t count);
Var slice_cols(Var x, std::size_t start, std::size_t count);
/// x·W + b
Var linear(Var x, Var weight, Var bias);
/// Label-smoothed cross entropy of a single logit row against `target`.
Var cross_entropy(Var logits, std::size_t target, float smoothing);

// Plain forward kernels shared by the ops; exposed for reuse in inference
// code and tests.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-6f);
Tensor gelu(const Tensor& x);
float gelu(float x);

}  // namespace edit
