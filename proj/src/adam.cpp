#include "bigraph/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace bigraph {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != state.size() || grads.size() != state.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state sizes differ");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace bigraph
