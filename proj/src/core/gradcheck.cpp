// SPDX-License-Identifier: Apache-2.0
#include "avmask/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "avmask/core/errors.hpp"
#include "avmask/core/tape.hpp"

namespace avmask {

template <class T>
GradCheckResult grad_check(const std::function<BasicTensor<T>()>& loss_fn, std::span<BasicTensor<T>> inputs,
                           GradCheckOptions options) {
  std::vector<bool> previous(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    previous[t] = inputs[t].requires_grad();
    inputs[t].zero_grad();
    inputs[t].set_requires_grad(true);
  }

  std::vector<std::vector<T>> analytic(inputs.size());
  {
    Tape tape;
    TapeScope scope(tape);
    BasicTensor<T> loss = loss_fn();
    tape.backward(loss);
  }
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto g = inputs[t].has_grad() ? inputs[t].grad() : std::span<const T>{};
    analytic[t].assign(inputs[t].numel(), T{0});
    std::copy(g.begin(), g.end(), analytic[t].begin());
    inputs[t].zero_grad();
  }

  auto evaluate = [&] {
    NoGradScope no_grad;
    return static_cast<double>(loss_fn().item());
  };

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto values = inputs[t].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T original = values[i];
      auto central = [&](double step) {
        const T up = static_cast<T>(original + step);
        const T down = static_cast<T>(original - step);
        values[i] = up;
        const double f_up = evaluate();
        values[i] = down;
        const double f_down = evaluate();
        values[i] = original;
        // Divide by the step actually taken in float, not the nominal 2*step.
        return (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
      };
      const double coarse = central(options.eps);
      const double numeric = options.richardson ? (4.0 * central(options.eps / 2.0) - coarse) / 3.0 : coarse;
      double exact = analytic[t][i];
      if (options.flip_analytic_sign) exact = -exact;
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double rel = std::abs(exact - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = rel;
        result.worst_tensor = t;
        result.worst_index = i;
        result.worst_analytic = exact;
        result.worst_numeric = numeric;
      }
    }
  }

  for (std::size_t t = 0; t < inputs.size(); ++t) inputs[t].set_requires_grad(previous[t]);
  return result;
}

template <class T>
GradCheckResult grad_check(const std::function<BasicTensor<T>(const BasicTensor<T>&)>& f, const BasicTensor<T>& point,
                           GradCheckOptions options) {
  BasicTensor<T> inputs[] = {point.detach()};
  return grad_check<T>([&] { return f(inputs[0]); }, std::span<BasicTensor<T>>(inputs), options);
}

template GradCheckResult grad_check<float>(const std::function<Tensor()>&, std::span<Tensor>, GradCheckOptions);
template GradCheckResult grad_check<double>(const std::function<Tensor64()>&, std::span<Tensor64>, GradCheckOptions);
template GradCheckResult grad_check<float>(const std::function<Tensor(const Tensor&)>&, const Tensor&,
                                           GradCheckOptions);
template GradCheckResult grad_check<double>(const std::function<Tensor64(const Tensor64&)>&, const Tensor64&,
                                            GradCheckOptions);

}  // namespace avmask
