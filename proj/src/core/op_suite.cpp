// SPDX-License-Identifier: Apache-2.0
#include "avmask/core/op_suite.hpp"

#include <memory>
#include <vector>

#include "avmask/core/ops.hpp"
#include "avmask/core/rng.hpp"

namespace avmask {

namespace {

template <class T>
BasicTensor<T> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(scale * rng.normal());
  return BasicTensor<T>::from(std::move(shape), std::move(v));
}

// Builds a check whose loss is sum(op(inputs) * R) for a fixed random R.
template <class T, class Op>
NamedGradCheck make_check(std::string name, std::vector<BasicTensor<T>> inputs, Op op, std::uint64_t seed) {
  auto held = std::make_shared<std::vector<BasicTensor<T>>>(std::move(inputs));
  auto projection = std::make_shared<BasicTensor<T>>();
  return {std::move(name), [held, projection, op, seed](const GradCheckOptions& opts) {
            auto loss = [&]() {
              BasicTensor<T> out = op(std::span<const BasicTensor<T>>(*held));
              if (!projection->defined() || projection->shape() != out.shape()) {
                Rng r(mix_seed(seed, 0x70726f6a));
                *projection = random_tensor<T>(r, out.shape());
              }
              return sum(mul(out, *projection));
            };
            return grad_check<T>(loss, std::span<BasicTensor<T>>(*held), opts);
          }};
}

}  // namespace

template <class T>
std::vector<NamedGradCheck> op_gradient_checks(std::uint64_t seed) {
  Rng rng(seed);
  using In = std::span<const BasicTensor<T>>;
  std::vector<NamedGradCheck> checks;
  std::uint64_t salt = 0;
  auto add_check = [&](std::string name, std::vector<BasicTensor<T>> inputs, auto op) {
    checks.push_back(make_check<T>(std::move(name), std::move(inputs), op, mix_seed(seed, ++salt)));
  };

  add_check("matmul", {random_tensor<T>(rng, {3, 4}), random_tensor<T>(rng, {4, 5})},
            [](In x) { return matmul(x[0], x[1]); });
  add_check("matmul_nt", {random_tensor<T>(rng, {3, 4}), random_tensor<T>(rng, {5, 4})},
            [](In x) { return matmul_nt(x[0], x[1]); });
  add_check("transpose", {random_tensor<T>(rng, {3, 4})}, [](In x) { return transpose(x[0]); });
  add_check("linear",
            {random_tensor<T>(rng, {2, 3, 4}), random_tensor<T>(rng, {4, 5}), random_tensor<T>(rng, {5})},
            [](In x) { return linear(x[0], x[1], x[2]); });
  add_check("add", {random_tensor<T>(rng, {3, 4}), random_tensor<T>(rng, {4})},
            [](In x) { return add(x[0], x[1]); });
  add_check("sub", {random_tensor<T>(rng, {3, 4}), random_tensor<T>(rng, {3, 4})},
            [](In x) { return sub(x[0], x[1]); });
  add_check("mul", {random_tensor<T>(rng, {3, 4}), random_tensor<T>(rng, {4})},
            [](In x) { return mul(x[0], x[1]); });
  add_check("scale", {random_tensor<T>(rng, {3, 4})}, [](In x) { return scale(x[0], -1.75); });
  add_check("gelu", {random_tensor<T>(rng, {4, 5}, 2.0)}, [](In x) { return gelu(x[0]); });
  add_check("sigmoid", {random_tensor<T>(rng, {4, 5}, 2.0)}, [](In x) { return sigmoid(x[0]); });
  add_check("softmax_rows", {random_tensor<T>(rng, {3, 6}, 2.0)}, [](In x) { return softmax_rows(x[0]); });
  add_check("layer_norm",
            {random_tensor<T>(rng, {3, 6}), random_tensor<T>(rng, {6}), random_tensor<T>(rng, {6})},
            [](In x) { return layer_norm(x[0], x[1], x[2]); });
  add_check("conv2d", {random_tensor<T>(rng, {2, 5, 6}), random_tensor<T>(rng, {3, 2, 3, 3}, 0.5)},
            [](In x) { return conv2d(x[0], x[1]); });
  add_check("conv2d[stride=2]", {random_tensor<T>(rng, {2, 5, 6}), random_tensor<T>(rng, {3, 2, 3, 3}, 0.5)},
            [](In x) { return conv2d(x[0], x[1], {.stride = 2, .dilation = 1}); });
  add_check("conv2d[dilation=2]", {random_tensor<T>(rng, {2, 6, 5}), random_tensor<T>(rng, {2, 2, 3, 3}, 0.5)},
            [](In x) { return conv2d(x[0], x[1], {.stride = 1, .dilation = 2}); });
  add_check("reshape", {random_tensor<T>(rng, {3, 4})}, [](In x) { return reshape(x[0], {2, 6}); });
  add_check("slice_cols", {random_tensor<T>(rng, {3, 6})}, [](In x) { return slice_cols(x[0], 1, 3); });
  add_check("concat_cols", {random_tensor<T>(rng, {3, 2}), random_tensor<T>(rng, {3, 4})},
            [](In x) { return concat_cols<T>(x); });
  add_check("gather_rows", {random_tensor<T>(rng, {5, 3})}, [](In x) {
    const std::size_t rows[] = {4, 0, 2};
    return gather_rows(x[0], rows);
  });
  add_check("scatter_rows", {random_tensor<T>(rng, {2, 3})}, [](In x) {
    const std::size_t rows[] = {3, 1};
    return scatter_rows(x[0], rows, 5);
  });
  add_check("repeat_rows", {random_tensor<T>(rng, {4})}, [](In x) { return repeat_rows(x[0], 3); });
  add_check("gather_elements", {random_tensor<T>(rng, {2, 3})}, [](In x) {
    const std::size_t src[] = {5, 3, 1, 4, 2, 0};
    return gather_elements(x[0], src, {3, 2});
  });
  add_check("sum", {random_tensor<T>(rng, {3, 4})}, [](In x) { return sum(x[0]); });
  add_check("mean", {random_tensor<T>(rng, {3, 4})}, [](In x) { return mean(x[0]); });
  add_check("mean_rows", {random_tensor<T>(rng, {4, 3})}, [](In x) { return mean_rows(x[0]); });
  add_check("adaptive_avg_pool_rows", {random_tensor<T>(rng, {7, 3})},
            [](In x) { return adaptive_avg_pool_rows(x[0], 3); });
  add_check("channel_mean", {random_tensor<T>(rng, {3, 4, 5})}, [](In x) { return channel_mean(x[0]); });
  add_check("mean_last_axis", {random_tensor<T>(rng, {3, 4, 5})}, [](In x) { return mean_last_axis(x[0]); });
  add_check("channel_scale", {random_tensor<T>(rng, {3, 4, 5}), random_tensor<T>(rng, {3})},
            [](In x) { return channel_scale(x[0], x[1]); });
  add_check("mse_loss", {random_tensor<T>(rng, {3, 4}), random_tensor<T>(rng, {3, 4})},
            [](In x) { return mse_loss(x[0], x[1]); });
  add_check("mse_loss[masked]", {random_tensor<T>(rng, {3, 4}), random_tensor<T>(rng, {3, 4})}, [](In x) {
    const std::uint8_t keep[] = {1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 0};
    return mse_loss(x[0], x[1], keep);
  });
  add_check("cross_entropy", {random_tensor<T>(rng, {4, 5})}, [](In x) {
    const std::size_t labels[] = {0, 4, 2, 2};
    return cross_entropy(x[0], labels);
  });
  return checks;
}

template std::vector<NamedGradCheck> op_gradient_checks<float>(std::uint64_t);
template std::vector<NamedGradCheck> op_gradient_checks<double>(std::uint64_t);

}  // namespace avmask
