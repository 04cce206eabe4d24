#include "fs3d/numerics/parameters.hpp"

#include "fs3d/errors.hpp"

namespace fs3d::numerics {

void ParameterSet::add(std::string name, Array value) {
  if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParameterSet::contains(const std::string& name) const { return index_.count(name) > 0; }

const Array& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Array& ParameterSet::at(const std::string& name) {
  return const_cast<Array&>(static_cast<const ParameterSet&>(*this).at(name));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [name, value] : entries_) total += value.size();
  return total;
}

BoundParameters::BoundParameters(Graph& graph, const ParameterSet& params,
                                 const std::function<bool(const std::string&)>& trainable)
    : graph_(&graph) {
  for (const auto& [name, value] : params.entries()) {
    if (trainable && trainable(name)) {
      vars_.emplace(name, graph.parameter(name, value));
      trainable_.push_back(name);
    } else {
      vars_.emplace(name, graph.constant(value));
    }
  }
}

Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

}  // namespace fs3d::numerics
