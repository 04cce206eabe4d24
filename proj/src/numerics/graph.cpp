#include "fs3d/numerics/graph.hpp"

#include <optional>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/ops.hpp"

namespace fs3d::numerics {

Graph& Var::graph() const {
  if (graph_ == nullptr) throw StructuralError("use of an unbound Var");
  return *graph_;
}

const Array& Var::value() const { return graph().value(*this); }
const Shape& Var::shape() const { return value().shape(); }

std::vector<Var> Op::backward_graph(Graph&, std::span<const std::size_t>, std::size_t, Var,
                                    std::span<const bool>) const {
  throw StructuralError("op '" + std::string(name()) +
                        "' does not support second-order differentiation");
}

void Graph::check_owned(Var v) const {
  if (!v.valid() || &v.graph() != this || v.id() >= nodes_.size()) {
    throw StructuralError("Var does not belong to this graph");
  }
}

Var Graph::parameter(std::string name, Array value) {
  if (!value.all_finite()) throw NumericError("parameter '" + name + "' has non-finite entries");
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.is_parameter = true;
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Array value) {
  if (!value.all_finite()) throw NumericError("constant has non-finite entries");
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::apply(std::unique_ptr<Op> op, std::vector<Var> inputs, Array value) {
  if (!value.all_finite()) {
    throw NumericError("op '" + std::string(op->name()) + "' produced a non-finite value");
  }
  Node node;
  node.requires_grad = false;
  for (const Var& v : inputs) {
    check_owned(v);
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  node.op = std::move(op);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Array& Graph::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

const Array& Graph::value(std::size_t id) const { return nodes_.at(id).value; }

bool Graph::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].requires_grad;
}

bool Graph::requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

const std::string& Graph::name(Var v) const {
  check_owned(v);
  return nodes_[v.id()].name;
}

std::vector<Var> Graph::parameters() {
  std::vector<Var> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_parameter) out.emplace_back(this, i);
  }
  return out;
}

void Graph::backward(Var root) {
  check_owned(root);
  const std::size_t root_id = root.id();
  if (nodes_[root_id].value.size() != 1) {
    throw ContractError("backward requires a scalar root, got " +
                        format_shape(nodes_[root_id].value.shape()));
  }
  gradients_.assign(nodes_.size(), Array());

  std::vector<Array> adjoint(root_id + 1);
  if (nodes_[root_id].requires_grad) adjoint[root_id] = Array(nodes_[root_id].value.shape(), 1.0);
  std::vector<Array*> slots;
  for (std::size_t id = root_id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (adjoint[id].empty() || !node.requires_grad) continue;
    if (!node.op) {
      if (node.is_parameter) gradients_[id] = std::move(adjoint[id]);
      adjoint[id] = Array();
      continue;
    }
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (adjoint[in].empty()) adjoint[in] = Array(nodes_[in].value.shape(), 0.0);
      slots[k] = &adjoint[in];
    }
    node.op->backward(*this, node.inputs, node.value, adjoint[id], slots);
    adjoint[id] = Array();
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].is_parameter && gradients_[id].empty()) {
      gradients_[id] = Array(nodes_[id].value.shape(), 0.0);
    }
  }
}

const Array& Graph::gradient(Var parameter) const {
  check_owned(parameter);
  if (!nodes_[parameter.id()].is_parameter) {
    throw ContractError("gradient requested for a non-parameter node");
  }
  if (parameter.id() >= gradients_.size()) {
    throw ContractError("gradient requested before backward covered this parameter");
  }
  return gradients_[parameter.id()];
}

std::vector<Var> Graph::gradients(Var root, std::span<const Var> wrt) {
  check_owned(root);
  const std::size_t root_id = root.id();
  if (nodes_[root_id].value.size() != 1) {
    throw ContractError("gradients requires a scalar root, got " +
                        format_shape(nodes_[root_id].value.shape()));
  }
  std::vector<bool> depends(root_id + 1, false);
  for (const Var& w : wrt) {
    check_owned(w);
    if (w.id() <= root_id) depends[w.id()] = true;
  }
  for (std::size_t id = 0; id <= root_id; ++id) {
    if (depends[id] || !nodes_[id].op) continue;
    for (std::size_t in : nodes_[id].inputs) {
      if (depends[in]) {
        depends[id] = true;
        break;
      }
    }
  }

  std::vector<std::optional<Var>> adjoint(root_id + 1);
  if (depends[root_id]) adjoint[root_id] = constant(Array(nodes_[root_id].value.shape(), 1.0));
  for (std::size_t id = root_id + 1; id-- > 0;) {
    if (!adjoint[id] || !depends[id] || !nodes_[id].op) continue;
    // nodes_ grows while VJPs are recorded; copy what we need first. The Op
    // itself is heap-owned and does not move.
    const std::vector<std::size_t> inputs = nodes_[id].inputs;
    std::unique_ptr<bool[]> needs(new bool[inputs.size()]);
    for (std::size_t k = 0; k < inputs.size(); ++k) needs[k] = depends[inputs[k]];
    const Op& op = *nodes_[id].op;
    std::vector<Var> parts = op.backward_graph(*this, inputs, id, *adjoint[id],
                                               std::span<const bool>(needs.get(), inputs.size()));
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (!needs[k]) continue;
      const std::size_t in = inputs[k];
      adjoint[in] = adjoint[in] ? add(*adjoint[in], parts[k]) : parts[k];
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= root_id && adjoint[w.id()]) {
      out.push_back(*adjoint[w.id()]);
    } else {
      out.push_back(constant(Array(nodes_[w.id()].value.shape(), 0.0)));
    }
  }
  return out;
}

}  // namespace fs3d::numerics
