#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fs3d/numerics/array.hpp"

namespace fs3d::numerics {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph& graph() const;
  std::size_t id() const noexcept { return id_; }
  const Array& value() const;
  const Shape& shape() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// A differentiable operation recorded on the tape.
///
/// `backward` accumulates vector-Jacobian products into the non-null entries of
/// `grad_inputs`, which are preallocated to the input shapes. `backward_graph`
/// records the same products as new graph nodes so they can be differentiated
/// again; ops outside the second-order subset keep the default, which throws.
class Op {
 public:
  virtual ~Op() = default;
  virtual std::string_view name() const = 0;

  virtual void backward(const Graph& graph, std::span<const std::size_t> inputs,
                        const Array& output, const Array& grad_output,
                        std::span<Array* const> grad_inputs) const = 0;

  virtual std::vector<Var> backward_graph(Graph& graph, std::span<const std::size_t> inputs,
                                          std::size_t output, Var grad_output,
                                          std::span<const bool> needs) const;
};

/// Eagerly evaluated reverse-mode tape. Values are computed as nodes are added,
/// so the forward pass is the sequence of construction calls.
///
/// Single-writer: one construction/backward sequence at a time.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that receives a gradient slot.
  Var parameter(std::string name, Array value);
  /// Leaf without gradient.
  Var constant(Array value);
  /// Records `op` with a precomputed output. Throws NumericError on non-finite output.
  Var apply(std::unique_ptr<Op> op, std::vector<Var> inputs, Array value);

  const Array& value(Var v) const;
  const Array& value(std::size_t id) const;
  bool requires_grad(Var v) const;
  bool requires_grad(std::size_t id) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::string& name(Var v) const;
  std::vector<Var> parameters();

  /// Fills every parameter's gradient slot with d(root)/d(parameter), replacing
  /// the results of any previous call.
  void backward(Var root);

  /// Gradient slot of a parameter; zeros if it did not influence the last root.
  const Array& gradient(Var parameter) const;

  /// d(root)/d(wrt) recorded as graph nodes, so the result can itself be
  /// differentiated. Every op between `wrt` and `root` must support second order.
  std::vector<Var> gradients(Var root, std::span<const Var> wrt);

 private:
  struct Node {
    std::unique_ptr<Op> op;
    std::vector<std::size_t> inputs;
    Array value;
    bool requires_grad = false;
    bool is_parameter = false;
    std::string name;
  };

  void check_owned(Var v) const;

  std::deque<Node> nodes_;  // stable references across growth
  std::vector<Array> gradients_;
};

}  // namespace fs3d::numerics
