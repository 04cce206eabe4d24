#include "fs3d/trainer/optimizer.hpp"

#include <cmath>

#include "fs3d/errors.hpp"

namespace fs3d::trainer {

Adam::Adam(AdamSettings settings) : settings_(settings) {
  const auto& s = settings_;
  if (!(s.learning_rate >= 0.0) || !(s.beta1 >= 0.0 && s.beta1 < 1.0) || !(s.beta2 >= 0.0 && s.beta2 < 1.0) ||
      !(s.epsilon > 0.0)) {
    throw ConfigError("invalid Adam settings");
  }
}

void Adam::step(numerics::ParameterSet& params, const NamedGradients& gradients) {
  ++steps_;
  const auto& s = settings_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);
  for (const auto& [name, grad] : gradients) {
    numerics::Array& value = params.at(name);
    if (grad.shape() != value.shape()) {
      throw StructuralError("gradient of " + name + " has shape " + numerics::format_shape(grad.shape()));
    }
    auto [m_it, m_new] = first_.try_emplace(name, value.shape());
    auto [v_it, v_new] = second_.try_emplace(name, value.shape());
    (void)m_new;
    (void)v_new;
    numerics::Array& m = m_it->second;
    numerics::Array& v = v_it->second;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  }
}

}  // namespace fs3d::trainer
