#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fs3d/numerics/graph.hpp"

namespace fs3d::numerics {

/// Guard used by norms and guarded division.
inline constexpr double kEpsilon = 1e-8;
inline constexpr double kLeakySlope = 0.2;

// Ops marked (2nd) also record their vector-Jacobian products as graph nodes and
// may therefore appear between an R1-style input gradient and its root.

/// op(a) * op(b) for 2-D operands, op = transpose when the flag is set. (2nd)
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
/// x[r, c] + bias[c]. (2nd)
Var add_bias(Var x, Var bias);
/// Column sums of a 2-D array. (2nd)
Var sum_rows(Var x);
/// Repeats a 1-D array as `rows` identical rows. (2nd)
Var broadcast_rows(Var v, std::size_t rows);
/// Repeats a scalar into `shape`. (2nd)
Var broadcast_scalar(Var s, const Shape& shape);

Var add(Var a, Var b);                    // (2nd)
Var sub(Var a, Var b);                    // (2nd)
Var mul(Var a, Var b);                    // (2nd)
Var scale(Var x, double factor);          // (2nd)
Var add_scalar(Var x, double offset);     // (2nd)
Var leaky_relu(Var x, double slope = kLeakySlope);  // (2nd)
Var tanh(Var x);
Var sigmoid(Var x);
/// log(1 + exp(x)), stable at both tails.
Var softplus(Var x);
Var exp(Var x);

Var sum(Var x);   // (2nd)
Var mean(Var x);  // (2nd)

/// 2x2 average pooling of [B, H, W, C]. (2nd)
Var avg_pool2(Var x);
/// Nearest 2x upsampling of [B, H, W, C]; adjoint partner of avg_pool2. (2nd)
Var upsample2(Var x);

Var reshape(Var x, Shape shape);  // (2nd)
/// Concatenation of 2-D arrays along axis 0 (rows) or 1 (columns), or of 1-D arrays.
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
/// Stacks scalars into a 1-D array.
Var stack(std::span<const Var> scalars);
/// Elements of a flattened x at `indices`, as a 1-D array.
Var gather(Var x, std::vector<std::size_t> indices);

/// Log-softmax of a 1-D array.
Var log_softmax(Var x);
/// Full contraction of two same-shaped arrays.
Var dot(Var a, Var b);
/// sqrt(sum x^2 + eps^2); smooth at the origin.
Var l2_norm(Var x);
/// a / max(b, eps), elementwise over same-shaped arrays.
Var div_guarded(Var a, Var b);
/// features[p, c] * mask[p]: applies a per-pixel mask to every channel.
Var mask_multiply(Var features, Var mask);
/// Elementwise minimum; ties route the gradient to `a`.
Var minimum(Var a, Var b);

}  // namespace fs3d::numerics
