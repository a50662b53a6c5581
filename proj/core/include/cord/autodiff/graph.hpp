#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <deque>
#include <vector>

#include "cord/autodiff/tensor.hpp"

namespace cord::ad {

template <typename Real>
class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename Real>
class Var {
 public:
  Var() = default;

  const Tensor<Real>& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Real item() const { return value().item(); }
  bool requires_grad() const;

  Graph<Real>* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph<Real>;
  Var(Graph<Real>* g, std::size_t id) : graph_(g), id_(id) {}

  Graph<Real>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of op records in creation (= topological) order. backward() walks the
// tape in exact reverse order. Leaves created with leaf() accumulate their
// gradient into a caller-owned sink tensor of the same shape.
template <typename Real>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<Real>& out_grad)>;

  // record=false builds values only; no node ever requires grad.
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Parameter leaf. `value` is referenced, not copied, and must outlive the
  // graph. A null sink makes the leaf a constant.
  Var<Real> leaf(const Tensor<Real>& value, Tensor<Real>* grad_sink);
  Var<Real> constant(Tensor<Real> value);

  // Appends an op result. The backward closure runs only when the node needs
  // grad, i.e. some parent does and recording is enabled.
  Var<Real> emit(const char* op, Tensor<Real> value,
                 std::initializer_list<Var<Real>> parents, BackwardFn backward);
  Var<Real> emit(const char* op, Tensor<Real> value,
                 std::span<const Var<Real>> parents, BackwardFn backward);

  // Root must be a single-element tensor. Throws NumericError on a non-finite
  // gradient. May be called once per graph.
  void backward(Var<Real> root);

  const Tensor<Real>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, allocated on first use (zero-filled).
  Tensor<Real>& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.data.empty(); }

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_; }
  const std::string& op_name(std::size_t id) const { return nodes_[id].op; }

 private:
  struct Node {
    std::string op;
    Tensor<Real> owned;
    const Tensor<Real>* external = nullptr;
    Tensor<Real> grad;
    Tensor<Real>* sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;  // deque: node references stay valid while emitting
};

template <typename Real>
const Tensor<Real>& Var<Real>::value() const {
  return graph_->value(id_);
}

template <typename Real>
bool Var<Real>::requires_grad() const {
  return graph_->requires_grad(id_);
}

}  // namespace cord::ad
