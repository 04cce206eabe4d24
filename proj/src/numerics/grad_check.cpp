#include "fs3d/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fs3d/errors.hpp"

namespace fs3d::numerics {

namespace {

double evaluate(const GraphFunction& function, std::span<const Array> points) {
  Graph graph;
  std::vector<Var> leaves;
  leaves.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    leaves.push_back(graph.parameter("leaf" + std::to_string(i), points[i]));
  }
  return function(graph, leaves).value().item();
}

std::vector<std::size_t> chosen_components(std::size_t size, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (limit == 0 || limit >= size) return all;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(limit);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GradCheckResult grad_check(const GraphFunction& function, std::span<const Array> points,
                           const GradCheckOptions& options) {
  if (options.step <= 0.0) throw ContractError("grad_check step must be positive");

  std::vector<Array> analytic;
  {
    Graph graph;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < points.size(); ++i) {
      leaves.push_back(graph.parameter("leaf" + std::to_string(i), points[i]));
    }
    Var root = function(graph, leaves);
    graph.backward(root);
    for (const Var& leaf : leaves) analytic.push_back(graph.gradient(leaf));
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  std::vector<Array> probe(points.begin(), points.end());
  for (std::size_t leaf = 0; leaf < points.size(); ++leaf) {
    for (std::size_t c : chosen_components(points[leaf].size(), options.max_components_per_leaf, rng)) {
      const double original = probe[leaf][c];
      probe[leaf][c] = original + options.step;
      const double up = evaluate(function, probe);
      probe[leaf][c] = original - options.step;
      const double down = evaluate(function, probe);
      probe[leaf][c] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[leaf][c];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.components_checked;
    }
  }
  return result;
}

double grad_check(const std::function<Var(Graph&, Var)>& function, const Array& point, double step) {
  GradCheckOptions options;
  options.step = step;
  const GraphFunction wrapped = [&](Graph& g, std::span<const Var> leaves) { return function(g, leaves[0]); };
  return grad_check(wrapped, std::span<const Array>(&point, 1), options).max_relative_error;
}

GradCheckResult parameter_grad_check(const ParameterFunction& function, const ParameterSet& params,
                                     const GradCheckOptions& options) {
  if (options.step <= 0.0) throw ContractError("grad_check step must be positive");

  std::vector<std::pair<std::string, Array>> analytic;
  {
    Graph graph;
    const Var root = function(graph, params);
    graph.backward(root);
    for (const Var& leaf : graph.parameters()) {
      const std::string& name = graph.name(leaf);
      if (params.contains(name)) analytic.emplace_back(name, graph.gradient(leaf));
    }
  }
  auto evaluate_set = [&](const ParameterSet& values) {
    Graph graph;
    return function(graph, values).value().item();
  };

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  ParameterSet probe = params;
  for (const auto& [name, gradient] : analytic) {
    Array& entry = probe.at(name);
    for (std::size_t c : chosen_components(entry.size(), options.max_components_per_leaf, rng)) {
      const double original = entry[c];
      entry[c] = original + options.step;
      const double up = evaluate_set(probe);
      entry[c] = original - options.step;
      const double down = evaluate_set(probe);
      entry[c] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = gradient[c];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.components_checked;
    }
  }
  return result;
}

}  // namespace fs3d::numerics
