#include "lwta/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "lwta/error.hpp"

namespace lwta::ad {

std::string_view op_name(OpTag op) {
  static constexpr std::array<std::string_view, 23> names{
      "leaf",          "add",           "add_row",          "sub",
      "mul",           "scale",         "add_scalar",       "matmul",
      "block_softmax", "block_log_softmax", "log",          "exp",
      "tanh",          "relu",          "sum",              "mean",
      "concat",        "gather_rows",   "clamp_min",        "gaussian_reparam",
      "gaussian_log_ratio", "nll",      "squared_error"};
  return names.at(static_cast<std::size_t>(op));
}

template <class T>
void Tape<T>::check_owned(const Var<T>& v) const {
  if (v.tape() != this) throw GraphError("input node belongs to a different tape");
  if (v.id() >= nodes_.size()) throw GraphError("input node id out of range");
}

template <class T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool trainable) {
  if (in_backward_) throw GraphError("cannot record while backward is running");
  Node n;
  n.op = OpTag::leaf;
  n.value = std::move(value);
  n.trainable = trainable;
  n.requires_grad = trainable;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <class T>
Var<T> Tape<T>::record(OpTag op, std::initializer_list<Var<T>> inputs, Tensor<T> value,
                       BackwardFn backward) {
  if (in_backward_) throw GraphError("cannot record while backward is running");
  bool needs = false;
  for (const auto& in : inputs) {
    check_owned(in);
    needs = needs || nodes_[in.id()].requires_grad;
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <class T>
void Tape<T>::backward(Var<T> loss) {
  check_owned(loss);
  if (nodes_[loss.id()].value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(nodes_[loss.id()].value.shape()));
  }
  for (auto& n : nodes_) {
    n.grad = n.value.empty() ? Tensor<T>{} : Tensor<T>(n.value.shape());
  }
  nodes_[loss.id()].grad[0] = T(1);
  in_backward_ = true;
  try {
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.requires_grad && n.backward) n.backward(*this, n.grad);
    }
  } catch (...) {
    in_backward_ = false;
    throw;
  }
  in_backward_ = false;
}

template <class T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  return nodes_.at(id).value;
}

template <class T>
const Tensor<T>& Tape<T>::grad(std::size_t id) const {
  return nodes_.at(id).grad;
}

template <class T>
Tensor<T>* Tape<T>::grad_buffer(const Var<T>& v) {
  Node& n = nodes_.at(v.id());
  return n.requires_grad ? &n.grad : nullptr;
}

template class Tape<float>;
template class Tape<double>;

double grad_check(const LossBuilder& build, std::vector<Tensor<double>> params, double h) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& p : params) vars.push_back(tape.leaf(p, true));
    tape.backward(build(tape, vars));
    for (const auto& v : vars) analytic.push_back(v.grad());
  }

  auto eval = [&]() {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& p : params) vars.push_back(tape.leaf(p, true));
    return build(tape, vars).value().item();
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double orig = params[k][i];
      params[k][i] = orig + h;
      const double up = eval();
      params[k][i] = orig - h;
      const double down = eval();
      params[k][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace lwta::ad
