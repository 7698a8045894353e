#pragma once

// Reverse-mode differentiation over Tensor values. A Var pairs a value with
// the adjoint that maps an upstream gradient to gradients of its inputs.
// Building a graph never mutates its inputs, so distinct graphs over the same
// parameter leaves may be evaluated concurrently.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "glam/ops.hpp"
#include "glam/tensor.hpp"

namespace glam {

/// Maps the gradient of an op's output to gradients of its inputs. Entries
/// whose `needed` flag is false may be left empty.
using Adjoint =
    std::function<std::vector<Tensor>(const Tensor& grad_out, const std::vector<bool>& needed)>;

class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  /// Leaf that accumulates a gradient during backward().
  static Var parameter(Tensor value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const;
  /// Mutable access to a leaf's value, for optimizers and test fixtures.
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const noexcept;

  /// Gradient accumulated by backward(); empty if nothing reached this node.
  const Tensor& grad() const;
  void zero_grad();

  /// Output of a differentiable op. Records `adjoint` only when grad mode is
  /// on and some input requires a gradient.
  static Var from_op(Tensor value, std::vector<Var> inputs, Adjoint adjoint);

 private:
  struct Node;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend void backward(const Var& root);
};

/// Back-propagates from a single-element root, accumulating into leaves.
void backward(const Var& root);

bool grad_enabled() noexcept;

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Differentiable counterparts of the forward ops. `bias` may be undefined.
Var conv2d(const Var& input, const Var& weight, const Var& bias, ConvOptions opts = {});
Var conv1d_same(const Var& input, const Var& kernel);
Var gap(const Var& input);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var softmax_axis(const Var& x, std::size_t axis);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& m);
Var ewmul_broadcast(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var subtract(const Var& a, const Var& b);
Var scale(const Var& x, double alpha);
Var reshape(const Var& x, Shape shape);
Var concat(const std::vector<Var>& parts);
Var pad_replicate(const Var& input, std::size_t pad);
/// Element `index` of x as a [1] tensor.
Var select(const Var& x, std::size_t index);
/// Stacks B rank-1 tensors of length n into [B,n].
Var stack_rows(const std::vector<Var>& rows);
Var sum(const Var& x);
/// sum(x * weights) for a constant weight tensor of x's shape.
Var weighted_sum(const Var& x, const Tensor& weights);
/// Row-wise l2 normalization of [B,d]; rows with norm <= kNormFloor map to zero.
Var l2_normalize_rows(const Var& x);

}  // namespace glam
