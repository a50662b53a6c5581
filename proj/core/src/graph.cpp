#include "cord/autodiff/graph.hpp"

#include <algorithm>

namespace cord::ad {

template <typename Real>
Var<Real> Graph<Real>::leaf(const Tensor<Real>& value, Tensor<Real>* grad_sink) {
  if (grad_sink && grad_sink->shape != value.shape) {
    throw ShapeError("gradient sink shape " + shape_string(grad_sink->shape) +
                     " does not match leaf " + shape_string(value.shape));
  }
  Node& node = nodes_.emplace_back();
  node.op = "leaf";
  node.external = &value;
  node.sink = record_ ? grad_sink : nullptr;
  node.requires_grad = node.sink != nullptr;
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
Var<Real> Graph<Real>::constant(Tensor<Real> value) {
  Node& node = nodes_.emplace_back();
  node.op = "constant";
  node.owned = std::move(value);
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
Var<Real> Graph<Real>::emit(const char* op, Tensor<Real> value,
                            std::initializer_list<Var<Real>> parents,
                            BackwardFn backward) {
  return emit(op, std::move(value),
              std::span<const Var<Real>>(parents.begin(), parents.size()),
              std::move(backward));
}

template <typename Real>
Var<Real> Graph<Real>::emit(const char* op, Tensor<Real> value,
                            std::span<const Var<Real>> parents,
                            BackwardFn backward) {
  if (!all_finite<Real>(value.data)) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  bool needs = false;
  for (const auto& p : parents) {
    if (p.graph() != this) throw Error(std::string(op) + ": operand from another graph");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  Node& node = nodes_.emplace_back();
  node.op = op;
  node.owned = std::move(value);
  node.requires_grad = record_ && needs;
  if (node.requires_grad) node.backward = std::move(backward);
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
const Tensor<Real>& Graph<Real>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

template <typename Real>
Tensor<Real>& Graph<Real>::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) n.grad = Tensor<Real>(value(id).shape);
  return n.grad;
}

template <typename Real>
void Graph<Real>::backward(Var<Real> root) {
  if (root.graph() != this) throw Error("backward: root belongs to another graph");
  if (value(root.id()).numel() != 1) {
    throw ShapeError("backward: root must be scalar, got " +
                     shape_string(value(root.id()).shape));
  }
  if (backward_done_) throw Error("backward: graph already differentiated");
  backward_done_ = true;
  if (!nodes_[root.id()].requires_grad) return;

  grad(root.id()).data[0] = Real(1);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.data.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
  }
  for (std::size_t id = 0; id <= root.id(); ++id) {
    Node& n = nodes_[id];
    if (!n.sink || n.grad.data.empty()) continue;
    if (!all_finite<Real>(n.grad.data)) throw NumericError("non-finite gradient at leaf");
    std::transform(n.sink->data.begin(), n.sink->data.end(), n.grad.data.begin(),
                   n.sink->data.begin(), std::plus<>());
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace cord::ad
