#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "fs3d/errors.hpp"
#include "fs3d/numerics/grad_check.hpp"
#include "fs3d/numerics/ops.hpp"
#include "test_support.hpp"

using namespace fs3d::numerics;
using fs3d::testing::project;
using fs3d::testing::random_array;

TEST_CASE("affine map with identity weights and zero bias is the identity") {
  Graph g;
  Var x = g.constant(Array(Shape{2, 3}, {1.0, -2.0, 3.5, 0.25, 7.0, -1.0}));
  Array eye(Shape{3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  Var y = add_bias(matmul(x, g.constant(eye)), g.constant(Array(Shape{3}, 0.0)));
  CHECK(y.value() == x.value());
}

TEST_CASE("sum of a 2x2 array of ones is 4") {
  Graph g;
  CHECK(sum(g.constant(Array(Shape{2, 2}, 1.0))).value().item() == 4.0);
}

TEST_CASE("log_softmax of (0, ln 2)") {
  Graph g;
  Var y = log_softmax(g.constant(Array::vector({0.0, std::log(2.0)})));
  CHECK(y.value()[0] == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-12));
  CHECK(y.value()[1] == doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("backward of sum gives all ones") {
  Graph g;
  std::mt19937_64 rng(3);
  Var x = g.parameter("x", random_array({3, 4}, rng));
  g.backward(sum(x));
  for (double v : g.gradient(x).values()) CHECK(v == 1.0);
}

TEST_CASE("backward of dot(x, x) at (1, 2) is (2, 4)") {
  Graph g;
  Var x = g.parameter("x", Array::vector({1.0, 2.0}));
  g.backward(dot(x, x));
  CHECK(g.gradient(x)[0] == 2.0);
  CHECK(g.gradient(x)[1] == 4.0);
}

TEST_CASE("backward rejects a non-scalar root") {
  Graph g;
  Var x = g.parameter("x", Array(Shape{2}, 1.0));
  CHECK_THROWS_AS(g.backward(scale(x, 2.0)), fs3d::ContractError);
}

TEST_CASE("shape mismatch is a structural error naming the op") {
  Graph g;
  Var a = g.constant(Array(Shape{2, 3}, 1.0));
  Var b = g.constant(Array(Shape{2, 2}, 1.0));
  try {
    add(a, b);
    FAIL("expected StructuralError");
  } catch (const fs3d::StructuralError& e) {
    const std::string what = e.what();
    CHECK(what.find("add") != std::string::npos);
    CHECK(what.find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, a), fs3d::StructuralError);
}

TEST_CASE("non-finite intermediate is a numeric error") {
  Graph g;
  Var x = g.constant(Array::vector({800.0}));
  CHECK_THROWS_AS(exp(x), fs3d::NumericError);
}

TEST_CASE("second order through an unsupported op is a structural error") {
  Graph g;
  Var x = g.parameter("x", Array::vector({0.3, -0.2}));
  Var root = sum(tanh(x));
  std::vector<Var> wrt{x};
  CHECK_THROWS_AS(g.gradients(root, wrt), fs3d::StructuralError);
}

TEST_CASE("input-gradient penalty of a one-layer affine map: parameter gradient matches finite differences") {
  // f(W, b) = || d/dx sum(leaky(x W + b)) ||^2 over a fixed batch x.
  std::mt19937_64 rng(11);
  const Array x = random_array({3, 5}, rng);
  const Array w = random_array({5, 4}, rng);
  const Array b = random_array({4}, rng, -0.1, 0.1);
  const GraphFunction penalty = [&](Graph& g, std::span<const Var> leaves) {
    Var input = g.parameter("x", x);
    Var d = add_bias(matmul(input, leaves[0]), leaves[1]);
    Var score = sum(leaky_relu(d));
    std::vector<Var> wrt{input};
    Var grad = g.gradients(score, wrt)[0];
    return sum(mul(grad, grad));
  };
  const std::vector<Array> points{w, b};
  const GradCheckResult result = grad_check(penalty, points);
  CHECK(result.max_relative_error <= 1e-4);

  // For a linear map the input gradient of sum(x W) is the row sums of W for every sample.
  Graph g;
  Var input = g.parameter("x", x);
  Var weights = g.parameter("w", w);
  std::vector<Var> wrt{input};
  Var grad = g.gradients(sum(matmul(input, weights)), wrt)[0];
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t k = 0; k < 5; ++k) {
      double row = 0.0;
      for (std::size_t j = 0; j < 4; ++j) row += w[k * 4 + j];
      CHECK(grad.value()[r * 5 + k] == doctest::Approx(row).epsilon(1e-12));
    }
  }
}

TEST_CASE("grad_check is exact for a linear map") {
  std::mt19937_64 rng(5);
  const Array point = random_array({6}, rng);
  const double error = grad_check([](Graph&, Var x) { return project(x, 9); }, point);
  CHECK(error <= 1e-10);
}

TEST_CASE("grad_check on a softmax + KL composition") {
  std::mt19937_64 rng(8);
  const Array point = random_array({4, 8}, rng, -2.0, 2.0);
  const Array reference = random_array({8}, rng, -2.0, 2.0);
  const double error = grad_check(
      [&](Graph& g, Var x) {
        Var q = log_softmax(g.constant(reference));
        Var total = g.constant(Array::scalar(0.0));
        for (std::size_t r = 0; r < 4; ++r) {
          Var p = log_softmax(reshape(slice_rows(x, r, r + 1), {8}));
          total = add(total, sum(mul(exp(p), sub(p, q))));
        }
        return total;
      },
      point);
  CHECK(error <= 1e-5);
}

namespace {

// Identity whose backward flips the sign, for fault injection.
class FlippedIdentity final : public Op {
 public:
  std::string_view name() const override { return "flipped_identity"; }
  void backward(const Graph&, std::span<const std::size_t>, const Array&, const Array& grad,
                std::span<Array* const> out) const override {
    if (!out[0]) return;
    for (std::size_t i = 0; i < grad.size(); ++i) (*out[0])[i] -= grad[i];
  }
};

}  // namespace

TEST_CASE("grad_check detects a sign-flipped gradient") {
  const Array point = Array::vector({0.5, -0.25, 1.0});
  const double error = grad_check(
      [](Graph& g, Var x) {
        Var y = g.apply(std::make_unique<FlippedIdentity>(), {x}, x.value());
        return sum(y);
      },
      point);
  CHECK(error == doctest::Approx(2.0).epsilon(1e-6));
}

namespace {

struct OpCase {
  std::string name;
  std::vector<Shape> shapes;
  std::function<Var(Graph&, std::span<const Var>)> build;
  double lo = -1.0;
  double hi = 1.0;
};

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      cases.push_back({"matmul" + std::to_string(ta) + std::to_string(tb),
                       {ta ? Shape{3, 2} : Shape{2, 3}, tb ? Shape{4, 3} : Shape{3, 4}},
                       [ta, tb](Graph&, std::span<const Var> v) {
                         return project(matmul(v[0], v[1], ta != 0, tb != 0), 1);
                       }});
    }
  }
  cases.push_back({"add_bias", {{3, 4}, {4}}, [](Graph&, auto v) { return project(add_bias(v[0], v[1]), 2); }});
  cases.push_back({"sum_rows", {{3, 4}}, [](Graph&, auto v) { return project(sum_rows(v[0]), 3); }});
  cases.push_back({"broadcast_rows", {{4}}, [](Graph&, auto v) { return project(broadcast_rows(v[0], 3), 4); }});
  cases.push_back({"broadcast_scalar", {{}}, [](Graph&, auto v) { return project(broadcast_scalar(v[0], {2, 2}), 5); }});
  cases.push_back({"add", {{5}, {5}}, [](Graph&, auto v) { return project(add(v[0], v[1]), 6); }});
  cases.push_back({"sub", {{5}, {5}}, [](Graph&, auto v) { return project(sub(v[0], v[1]), 7); }});
  cases.push_back({"mul", {{5}, {5}}, [](Graph&, auto v) { return project(mul(v[0], v[1]), 8); }});
  cases.push_back({"scale", {{5}}, [](Graph&, auto v) { return project(scale(v[0], -1.7), 9); }});
  cases.push_back({"add_scalar", {{5}}, [](Graph&, auto v) { return project(add_scalar(v[0], 0.3), 10); }});
  cases.push_back({"leaky_relu", {{6}}, [](Graph&, auto v) { return project(leaky_relu(v[0]), 11); }});
  cases.push_back({"tanh", {{6}}, [](Graph&, auto v) { return project(tanh(v[0]), 12); }});
  cases.push_back({"sigmoid", {{6}}, [](Graph&, auto v) { return project(sigmoid(v[0]), 13); }});
  cases.push_back({"softplus", {{6}}, [](Graph&, auto v) { return project(softplus(v[0]), 14); }, -40.0, 40.0});
  cases.push_back({"exp", {{6}}, [](Graph&, auto v) { return project(exp(v[0]), 15); }});
  cases.push_back({"sum", {{2, 3}}, [](Graph&, auto v) { return sum(mul(v[0], v[0])); }});
  cases.push_back({"mean", {{2, 3}}, [](Graph&, auto v) { return mean(mul(v[0], v[0])); }});
  cases.push_back({"avg_pool2", {{2, 4, 4, 2}}, [](Graph&, auto v) { return project(avg_pool2(v[0]), 16); }});
  cases.push_back({"upsample2", {{1, 2, 2, 3}}, [](Graph&, auto v) { return project(upsample2(v[0]), 17); }});
  cases.push_back({"reshape", {{2, 3}}, [](Graph&, auto v) { return project(reshape(v[0], {3, 2}), 18); }});
  cases.push_back({"concat_rows", {{2, 3}, {1, 3}}, [](Graph&, auto v) {
                     std::vector<Var> parts{v[0], v[1]};
                     return project(concat(parts, 0), 19);
                   }});
  cases.push_back({"concat_cols", {{2, 3}, {2, 1}}, [](Graph&, auto v) {
                     std::vector<Var> parts{v[0], v[1]};
                     return project(concat(parts, 1), 20);
                   }});
  cases.push_back({"slice_rows", {{4, 3}}, [](Graph&, auto v) { return project(slice_rows(v[0], 1, 3), 21); }});
  cases.push_back({"slice_cols", {{4, 3}}, [](Graph&, auto v) { return project(slice_cols(v[0], 1, 3), 22); }});
  cases.push_back({"stack", {{}, {}}, [](Graph&, auto v) {
                     std::vector<Var> parts{v[0], v[1], v[0]};
                     return project(stack(parts), 23);
                   }});
  cases.push_back({"gather", {{5}}, [](Graph&, auto v) { return project(gather(v[0], {4, 0, 4, 2}), 24); }});
  cases.push_back({"log_softmax", {{5}}, [](Graph&, auto v) { return project(log_softmax(v[0]), 25); }, -3.0, 3.0});
  cases.push_back({"dot", {{5}, {5}}, [](Graph&, auto v) { return dot(v[0], v[1]); }});
  cases.push_back({"l2_norm", {{5}}, [](Graph&, auto v) { return l2_norm(v[0]); }});
  cases.push_back({"div_guarded", {{4}, {4}}, [](Graph&, auto v) {
                     return project(div_guarded(v[0], add_scalar(mul(v[1], v[1]), 0.5)), 26);
                   }});
  cases.push_back({"mask_multiply", {{4, 3}, {4}}, [](Graph&, auto v) { return project(mask_multiply(v[0], v[1]), 27); }});
  cases.push_back({"minimum", {{6}, {6}}, [](Graph&, auto v) { return project(minimum(v[0], v[1]), 28); }});
  return cases;
}

}  // namespace

TEST_CASE("every op passes grad_check on 50 random inputs") {
  std::mt19937_64 rng(2024);
  for (const OpCase& op : op_cases()) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Array> points;
      for (const Shape& s : op.shapes) points.push_back(random_array(s, rng, op.lo, op.hi));
      worst = std::max(worst, grad_check(op.build, points).max_relative_error);
    }
    INFO(op.name);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(77);
  const Array a = random_array({6, 7}, rng);
  const Array b = random_array({7, 5}, rng);
  auto run = [&] {
    Graph g;
    Var y = log_softmax(reshape(tanh(matmul(g.constant(a), g.constant(b))), {30}));
    return y.value();
  };
  CHECK(run() == run());
}

TEST_CASE("backward of a sum of roots equals the sum of separate backward passes") {
  std::mt19937_64 rng(31);
  const Array point = random_array({3, 3}, rng);
  auto first = [](Var x) { return sum(mul(x, x)); };
  auto second = [](Var x) { return project(tanh(x), 3); };
  Array separate(point.shape(), 0.0);
  for (int which = 0; which < 2; ++which) {
    Graph g;
    Var x = g.parameter("x", point);
    g.backward(which == 0 ? first(x) : second(x));
    for (std::size_t i = 0; i < point.size(); ++i) separate[i] += g.gradient(x)[i];
  }
  Graph g;
  Var x = g.parameter("x", point);
  g.backward(add(first(x), second(x)));
  for (std::size_t i = 0; i < point.size(); ++i) {
    CHECK(g.gradient(x)[i] == doctest::Approx(separate[i]).epsilon(1e-14));
  }
}

TEST_CASE("second-order subset covers the discriminator path") {
  // pool -> affine -> leaky -> affine, differentiated twice.
  std::mt19937_64 rng(99);
  const Array images = random_array({2, 4, 4, 1}, rng, 0.0, 1.0);
  const GraphFunction penalty = [&](Graph& g, std::span<const Var> p) {
    Var x = g.parameter("x", images);
    Var flat = reshape(avg_pool2(x), {2, 4});
    Var h = leaky_relu(add_bias(matmul(flat, p[0]), p[1]));
    Var score = mean(add_bias(matmul(h, p[2]), p[3]));
    std::vector<Var> wrt{x};
    Var grad = g.gradients(score, wrt)[0];
    return scale(sum(mul(grad, grad)), 0.5);
  };
  const std::vector<Array> points{random_array({4, 3}, rng), random_array({3}, rng),
                                  random_array({3, 1}, rng), random_array({1}, rng)};
  CHECK(grad_check(penalty, points).max_relative_error <= 1e-4);
}
