#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fs3d/numerics/graph.hpp"
#include "fs3d/numerics/parameters.hpp"

namespace fs3d::numerics {

/// Builds a scalar function of the given parameter leaves inside `graph`.
using GraphFunction = std::function<Var(Graph& graph, std::span<const Var> leaves)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Components tested per leaf; 0 tests every component. Larger leaves are
  /// subsampled at seeded positions.
  std::size_t max_components_per_leaf = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t components_checked = 0;
};

/// Central finite differences against the analytic leaf gradients. The
/// component error is |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const GraphFunction& function, std::span<const Array> points,
                           const GradCheckOptions& options = {});

/// Single-leaf convenience form.
double grad_check(const std::function<Var(Graph&, Var)>& function, const Array& point,
                  double step = 1e-5);

/// Builds a scalar loss in `graph` from parameter values, recording each entry
/// it differentiates as a graph parameter under the entry's name.
using ParameterFunction = std::function<Var(Graph& graph, const ParameterSet& values)>;

/// As grad_check, over the entries of `params` the function records as
/// parameters. Entries it binds as constants are not checked.
GradCheckResult parameter_grad_check(const ParameterFunction& function, const ParameterSet& params,
                                     const GradCheckOptions& options = {});

}  // namespace fs3d::numerics
