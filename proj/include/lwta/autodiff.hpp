#pragma once

// Reverse-mode differentiation on a per-computation tape.
//
// A Tape owns every node created while evaluating one objective. Nodes are
// appended in creation order, so the tape is topologically sorted by
// construction and backward() is a single reverse sweep. Noise inputs enter as
// constant leaves; gradients of sampled quantities therefore follow the
// pathwise (reparameterized) route only.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "lwta/tensor.hpp"

namespace lwta::ad {

enum class OpTag : std::uint8_t {
  leaf,
  add,
  add_row,
  sub,
  mul,
  scale,
  add_scalar,
  matmul,
  block_softmax,
  block_log_softmax,
  log,
  exp,
  tanh,
  relu,
  sum,
  mean,
  concat,
  gather_rows,
  clamp_min,
  gaussian_reparam,
  gaussian_log_ratio,
  nll,
  squared_error,
};

std::string_view op_name(OpTag op);

template <class T>
class Tape;

// Lightweight handle to a node on a tape.
template <class T>
class Var {
 public:
  Var() = default;

  Tape<T>* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Tensor<T>& grad() const { return tape_->grad(id_); }
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <class T>
class Tape {
 public:
  // Called once during backward with the node's accumulated output gradient.
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool trainable = false);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  // Appends a node whose parents are `inputs`. Throws GraphError when an
  // input belongs to another tape.
  Var<T> record(OpTag op, std::initializer_list<Var<T>> inputs, Tensor<T> value,
                BackwardFn backward);

  // Resets every gradient, seeds d(loss)/d(loss) = 1 and sweeps the tape in
  // reverse. Each call starts from fresh accumulators, so repeated calls are
  // idempotent.
  void backward(Var<T> loss);

  const Tensor<T>& value(std::size_t id) const;
  const Tensor<T>& grad(std::size_t id) const;
  OpTag op(std::size_t id) const { return nodes_.at(id).op; }
  bool requires_grad(const Var<T>& v) const { return nodes_.at(v.id()).requires_grad; }
  bool trainable(const Var<T>& v) const { return nodes_.at(v.id()).trainable; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient accumulator of `v` during backward, or nullptr when `v` does not
  // need a gradient. Backward functions push contributions through this.
  Tensor<T>* grad_buffer(const Var<T>& v);

 private:
  struct Node {
    OpTag op;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owned(const Var<T>& v) const;

  std::deque<Node> nodes_;
  bool in_backward_ = false;
};

// Largest |analytic - numeric| / max(1, |numeric|) over every element of
// `params`, where numeric uses central differences with step h. `build` must
// be deterministic (freeze any noise by reseeding inside it).
using LossBuilder =
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>& params)>;

double grad_check(const LossBuilder& build, std::vector<Tensor<double>> params,
                  double h = 1e-4);

}  // namespace lwta::ad
