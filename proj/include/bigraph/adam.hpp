#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bigraph {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n, double lr = 0.01)
      : first_moment(n, 0.0), second_moment(n, 0.0), learning_rate(lr) {}

  std::size_t size() const noexcept { return first_moment.size(); }
};

/// One bias-corrected ADAM update of `params` in place.
/// Throws std::invalid_argument on size mismatch or non-finite gradients.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace bigraph
