// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "avmask/core/tensor.hpp"

namespace avmask {

struct GradCheckResult {
  // max over coordinates of |analytic - fd| / max(|analytic|, |fd|, 1e-8)
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  // Location of the worst coordinate: index into the checked tensor list,
  // then the flat element index.
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  double eps = 1e-3;
  // Negates the analytic gradient before comparison. Used to prove the
  // harness actually catches a wrong gradient.
  bool flip_analytic_sign = false;
  // Combine central differences at eps and eps/2 as (4 D(eps/2) - D(eps)) / 3,
  // cancelling the O(eps^2) truncation term. Plain central differences leave
  // that term visible on coordinates whose gradient nearly cancels.
  bool richardson = false;
};

// Compares reverse-mode gradients of a scalar-valued `loss_fn` against central
// differences with respect to every element of `inputs`. `loss_fn` must read
// the inputs through the given handles so in-place perturbation is visible.
template <class T>
GradCheckResult grad_check(const std::function<BasicTensor<T>()>& loss_fn, std::span<BasicTensor<T>> inputs,
                           GradCheckOptions options = {});

// Single-tensor convenience form: checks d f(x) / dx at `point`.
template <class T>
GradCheckResult grad_check(const std::function<BasicTensor<T>(const BasicTensor<T>&)>& f, const BasicTensor<T>& point,
                           GradCheckOptions options = {});

}  // namespace avmask
