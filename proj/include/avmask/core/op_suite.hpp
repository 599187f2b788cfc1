// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "avmask/core/gradcheck.hpp"

namespace avmask {

// One finite-difference check: a named op applied to seeded random inputs.
struct NamedGradCheck {
  std::string name;
  std::function<GradCheckResult(const GradCheckOptions&)> run;
};

// Every differentiable op in ops.hpp, each listed once, with inputs drawn
// from `seed`. The scalar loss is a fixed random projection of the op output
// so every output coordinate contributes.
template <class T>
std::vector<NamedGradCheck> op_gradient_checks(std::uint64_t seed = 7);

}  // namespace avmask
