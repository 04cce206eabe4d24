#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fs3d/numerics/graph.hpp"

namespace fs3d::numerics {

/// Named arrays in insertion order. The order is the serialization order.
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Array>;

  void add(std::string name, Array value);
  bool contains(const std::string& name) const;
  const Array& at(const std::string& name) const;
  Array& at(const std::string& name);

  std::size_t size() const noexcept { return entries_.size(); }
  /// Total number of scalars across all entries.
  std::size_t scalar_count() const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Graph handles for a ParameterSet. Entries for which `trainable` returns
/// false are recorded as constants and receive no gradient.
class BoundParameters {
 public:
  BoundParameters(Graph& graph, const ParameterSet& params,
                  const std::function<bool(const std::string&)>& trainable);

  Var operator[](const std::string& name) const;
  Graph& graph() const noexcept { return *graph_; }
  /// Names recorded as graph parameters, in set order.
  const std::vector<std::string>& trainable_names() const noexcept { return trainable_; }

 private:
  Graph* graph_;
  std::unordered_map<std::string, Var> vars_;
  std::vector<std::string> trainable_;
};

}  // namespace fs3d::numerics
