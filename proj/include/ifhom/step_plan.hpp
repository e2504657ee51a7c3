#pragma once

/// @file step_plan.hpp
/// @brief Shared step-grid layout for the path simulators: the horizon is cut
///        into steps that are an exact multiple of the thinning stride, so
///        stored states sit on a uniform time grid ending exactly at T.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ifhom {

struct StepPlan {
  double dt = 0;
  std::int64_t steps = 0;
  int stride = 0;
  std::int64_t stored = 0;
};

inline StepPlan plan_steps(double T, double dt0, int stored_states) {
  if (!(T > 0)) throw std::invalid_argument("horizon T must be positive");
  if (!(dt0 > 0)) throw std::invalid_argument("step size must be positive");
  if (stored_states < 2) throw std::invalid_argument("need at least 2 stored states");
  StepPlan p;
  std::int64_t steps = static_cast<std::int64_t>(std::ceil(T / dt0 - 1e-9));
  steps = std::max<std::int64_t>(steps, 1);
  p.stride = static_cast<int>((steps + stored_states - 2) / (stored_states - 1));
  const std::int64_t chunks = (steps + p.stride - 1) / p.stride;
  p.steps = chunks * p.stride;
  p.dt = T / static_cast<double>(p.steps);
  p.stored = chunks + 1;
  return p;
}

}  // namespace ifhom
