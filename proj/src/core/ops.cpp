// SPDX-License-Identifier: Apache-2.0
#include "avmask/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "avmask/core/errors.hpp"
#include "avmask/core/tape.hpp"
#include "gemm.hpp"

namespace avmask {

namespace {

template <class T>
bool tracking(std::initializer_list<const BasicTensor<T>*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const BasicTensor<T>* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Wraps the forward values into a tensor, checks them, and registers the
// backward closure when any input participates in differentiation.
template <class T, class Backward>
BasicTensor<T> finish(const char* name, Shape shape, std::vector<T> values, std::initializer_list<const BasicTensor<T>*> inputs,
              Backward&& backward) {
  check_finite<T>(values, name);
  BasicTensor<T> out = BasicTensor<T>::from(std::move(shape), std::move(values));
  if (tracking(inputs)) {
    out.set_requires_grad();
    Tape::active()->record(name, [out, fn = std::forward<Backward>(backward)]() mutable {
      if (!out.has_grad()) return;
      fn(out.grad());
    });
  }
  return out;
}

template <class T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

// Number of times `b` repeats when broadcast against `a`; throws if the
// shapes are incompatible.
template <class T>
std::size_t broadcast_repeats(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) {
    return a.numel() / b.numel();
  }
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
}

template <class T, class Fwd, class Dfn>
BasicTensor<T> unary(const char* name, const BasicTensor<T>& x, Fwd f, Dfn df) {
  auto xs = x.data();
  std::vector<T> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = static_cast<T>(f(static_cast<double>(xs[i])));
  return finish(name, x.shape(), std::move(out), {&x}, [x, df](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto xs = x.data();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < xs.size(); ++i) gx[i] += static_cast<T>(g[i] * df(static_cast<double>(xs[i])));
  });
}

}  // namespace

// --- linear algebra -------------------------------------------------------

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  detail::gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n, false);
  return finish("matmul", {m, n}, std::move(out), {&a, &b}, [a, b, m, k, n](std::span<const T> g) mutable {
    if (a.requires_grad()) detail::gemm_nt(g.data(), b.data().data(), a.mutable_grad().data(), m, n, k, true);
    if (b.requires_grad()) detail::gemm_tn(a.data().data(), g.data(), b.mutable_grad().data(), k, m, n, true);
  });
}

template <class T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         "^T");
  }
  std::vector<T> out(m * n);
  detail::gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n, false);
  return finish("matmul_nt", {m, n}, std::move(out), {&a, &b}, [a, b, m, k, n](std::span<const T> g) mutable {
    // dA = G . B, dB = G^T . A
    if (a.requires_grad()) detail::gemm_nn(g.data(), b.data().data(), a.mutable_grad().data(), m, n, k, true);
    if (b.requires_grad()) detail::gemm_tn(g.data(), a.data().data(), b.mutable_grad().data(), n, m, k, true);
  });
}

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto xs = x.data();
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xs[i * c + j];
  }
  return finish("transpose", {c, r}, std::move(out), {&x}, [x, r, c](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
}

template <class T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b) {
  require_rank(w, 2, "linear");
  require_rank(b, 1, "linear");
  const std::size_t in = w.dim(0), out_dim = w.dim(1);
  if (x.shape().back() != in || b.dim(0) != out_dim) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + ", weight " + shape_str(w.shape()) + ", bias " +
                         shape_str(b.shape()));
  }
  const std::size_t rows = x.numel() / in;
  std::vector<T> out(rows * out_dim);
  auto bs = b.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bs.begin(), bs.end(), out.begin() + r * out_dim);
  detail::gemm_nn(x.data().data(), w.data().data(), out.data(), rows, in, out_dim, true);
  Shape shape = x.shape();
  shape.back() = out_dim;
  return finish("linear", std::move(shape), std::move(out), {&x, &w, &b},
                [x, w, b, rows, in, out_dim](std::span<const T> g) mutable {
                  if (x.requires_grad()) {
                    detail::gemm_nt(g.data(), w.data().data(), x.mutable_grad().data(), rows, out_dim, in, true);
                  }
                  if (w.requires_grad()) {
                    detail::gemm_tn(x.data().data(), g.data(), w.mutable_grad().data(), in, rows, out_dim, true);
                  }
                  if (b.requires_grad()) {
                    auto gb = b.mutable_grad();
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[r * out_dim + j];
                    }
                  }
                });
}

// --- elementwise ----------------------------------------------------------

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t reps = broadcast_repeats(a, b, "add");
  const std::size_t nb = b.numel();
  auto as = a.data();
  auto bs = b.data();
  std::vector<T> out(as.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = as[r * nb + j] + bs[j];
  }
  return finish("add", a.shape(), std::move(out), {&a, &b}, [a, b, reps, nb](std::span<const T> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t j = 0; j < nb; ++j) gb[j] += g[r * nb + j];
      }
    }
  });
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t reps = broadcast_repeats(a, b, "sub");
  const std::size_t nb = b.numel();
  auto as = a.data();
  auto bs = b.data();
  std::vector<T> out(as.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = as[r * nb + j] - bs[j];
  }
  return finish("sub", a.shape(), std::move(out), {&a, &b}, [a, b, reps, nb](std::span<const T> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t j = 0; j < nb; ++j) gb[j] -= g[r * nb + j];
      }
    }
  });
}

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t reps = broadcast_repeats(a, b, "mul");
  const std::size_t nb = b.numel();
  auto as = a.data();
  auto bs = b.data();
  std::vector<T> out(as.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = as[r * nb + j] * bs[j];
  }
  return finish("mul", a.shape(), std::move(out), {&a, &b}, [a, b, reps, nb](std::span<const T> g) mutable {
    auto as = a.data();
    auto bs = b.data();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t j = 0; j < nb; ++j) ga[r * nb + j] += g[r * nb + j] * bs[j];
      }
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t j = 0; j < nb; ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < reps; ++r) acc += static_cast<double>(g[r * nb + j]) * as[r * nb + j];
        gb[j] += static_cast<T>(acc);
      }
    }
  });
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor) {
  auto xs = x.data();
  std::vector<T> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] * factor;
  return finish("scale", x.shape(), std::move(out), {&x}, [x, factor](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

template <class T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v))); },
      [](double v) {
        const double t = std::tanh(kC * (v + kA * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
      });
}

template <class T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  auto sig = [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return unary("sigmoid", x, sig, [sig](double v) {
    const double s = sig(v);
    return s * (1.0 - s);
  });
}

// --- normalisation --------------------------------------------------------

template <class T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xs = x.data();
  check_finite<T>(xs, "softmax_rows input");
  std::vector<T> out(xs.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xs.data() + r * cols;
    T* o = out.data() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += std::exp(static_cast<double>(in[j]) - mx);
    for (std::size_t j = 0; j < cols; ++j) o[j] = static_cast<T>(std::exp(static_cast<double>(in[j]) - mx) / total);
  }
  BasicTensor<T> y = BasicTensor<T>::from({rows, cols}, out);
  return finish("softmax_rows", {rows, cols}, std::move(out), {&x}, [x, y, rows, cols](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto ys = y.data();
    auto gx = x.mutable_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += static_cast<double>(g[r * cols + j]) * ys[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j) {
        gx[r * cols + j] += static_cast<T>(ys[r * cols + j] * (g[r * cols + j] - dot));
      }
    }
  });
}

template <class T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias) {
  require_rank(gain, 1, "layer_norm");
  require_rank(bias, 1, "layer_norm");
  const std::size_t d = x.shape().back();
  if (d < 2) throw DimensionError("layer_norm: normalised extent must be >= 2, got " + shape_str(x.shape()));
  if (gain.dim(0) != d || bias.dim(0) != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                         " do not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  auto xs = x.data();
  auto gs = gain.data();
  auto bs = bias.data();
  std::vector<T> xhat(xs.size());
  std::vector<T> inv_std(rows);
  std::vector<T> out(xs.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xs.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = static_cast<T>(is);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mu) * is;
      xhat[r * d + j] = static_cast<T>(h);
      out[r * d + j] = static_cast<T>(h * gs[j] + bs[j]);
    }
  }
  return finish("layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                 d](std::span<const T> g) mutable {
                  auto gs = gain.data();
                  if (gain.requires_grad() || bias.requires_grad()) {
                    std::vector<double> dg(d, 0.0), db(d, 0.0);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t j = 0; j < d; ++j) {
                        dg[j] += static_cast<double>(g[r * d + j]) * xhat[r * d + j];
                        db[j] += g[r * d + j];
                      }
                    }
                    if (gain.requires_grad()) {
                      auto gg = gain.mutable_grad();
                      for (std::size_t j = 0; j < d; ++j) gg[j] += static_cast<T>(dg[j]);
                    }
                    if (bias.requires_grad()) {
                      auto gb = bias.mutable_grad();
                      for (std::size_t j = 0; j < d; ++j) gb[j] += static_cast<T>(db[j]);
                    }
                  }
                  if (!x.requires_grad()) return;
                  auto gx = x.mutable_grad();
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double gh = static_cast<double>(g[r * d + j]) * gs[j];
                      s1 += gh;
                      s2 += gh * xhat[r * d + j];
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                      const double gh = static_cast<double>(g[r * d + j]) * gs[j];
                      gx[r * d + j] +=
                          static_cast<T>(inv_std[r] * (gh - inv_d * s1 - xhat[r * d + j] * inv_d * s2));
                    }
                  }
                });
}

// --- convolution ----------------------------------------------------------

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, oh, ow, stride, dil;
  std::ptrdiff_t pad_top, pad_left;
};

std::ptrdiff_t same_pad_before(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t dil) {
  const std::ptrdiff_t needed = static_cast<std::ptrdiff_t>((out - 1) * stride + (k - 1) * dil + 1) -
                                static_cast<std::ptrdiff_t>(in);
  return std::max<std::ptrdiff_t>(needed, 0) / 2;
}

// cols[(c*kh*kw) x (oh*ow)]
template <class T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oi = 0; oi < g.oh; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * g.stride + ki * g.dil) - g.pad_top;
          for (std::size_t oj = 0; oj < g.ow; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * g.stride + kj * g.dil) - g.pad_left;
            const bool inside = ii >= 0 && jj >= 0 && ii < static_cast<std::ptrdiff_t>(g.h) &&
                                jj < static_cast<std::ptrdiff_t>(g.w);
            row[oi * g.ow + oj] = inside ? x[(c * g.h + ii) * g.w + jj] : T{0};
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, const ConvGeometry& g, T* gx) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oi = 0; oi < g.oh; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * g.stride + ki * g.dil) - g.pad_top;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t oj = 0; oj < g.ow; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * g.stride + kj * g.dil) - g.pad_left;
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(g.w)) continue;
            gx[(c * g.h + ii) * g.w + jj] += row[oi * g.ow + oj];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernels, Conv2dParams params) {
  if (params.stride < 1 || params.dilation < 1) {
    throw ParameterError("conv2d: stride and dilation must be >= 1 (stride " + std::to_string(params.stride) +
                         ", dilation " + std::to_string(params.dilation) + ")");
  }
  require_rank(x, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  if (kernels.dim(1) != x.dim(0)) {
    throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) + " expects " + std::to_string(kernels.dim(1)) +
                         " input channels, input is " + shape_str(x.shape()));
  }
  ConvGeometry g{};
  g.cin = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.cout = kernels.dim(0);
  g.kh = kernels.dim(2);
  g.kw = kernels.dim(3);
  g.stride = params.stride;
  g.dil = params.dilation;
  g.oh = (g.h + g.stride - 1) / g.stride;
  g.ow = (g.w + g.stride - 1) / g.stride;
  g.pad_top = same_pad_before(g.h, g.oh, g.kh, g.stride, g.dil);
  g.pad_left = same_pad_before(g.w, g.ow, g.kw, g.stride, g.dil);

  const std::size_t patch = g.cin * g.kh * g.kw;
  const std::size_t plane = g.oh * g.ow;
  std::vector<T> cols(patch * plane);
  im2col(x.data().data(), g, cols.data());
  std::vector<T> out(g.cout * plane);
  detail::gemm_nn(kernels.data().data(), cols.data(), out.data(), g.cout, patch, plane, false);

  return finish("conv2d", {g.cout, g.oh, g.ow}, std::move(out), {&x, &kernels},
                [x, kernels, g, cols = std::move(cols), patch, plane](std::span<const T> gy) mutable {
                  if (kernels.requires_grad()) {
                    detail::gemm_nt(gy.data(), cols.data(), kernels.mutable_grad().data(), g.cout, plane, patch, true);
                  }
                  if (x.requires_grad()) {
                    std::vector<T> gcols(patch * plane);
                    detail::gemm_tn(kernels.data().data(), gy.data(), gcols.data(), patch, g.cout, plane, false);
                    col2im_add(gcols.data(), g, x.mutable_grad().data());
                  }
                });
}

// --- shape plumbing -------------------------------------------------------

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return finish("reshape", std::move(shape), std::move(out), {&x}, [x](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <class T>
BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t count) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || begin + count > cols) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_str(x.shape()));
  }
  auto xs = x.data();
  std::vector<T> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xs.begin() + r * cols + begin, count, out.begin() + r * count);
  }
  return finish("slice_cols", {rows, count}, std::move(out), {&x},
                [x, rows, cols, begin, count](std::span<const T> g) mutable {
                  if (!x.requires_grad()) return;
                  auto gx = x.mutable_grad();
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < count; ++j) gx[r * cols + begin + j] += g[r * count + j];
                  }
                });
}

template <class T>
BasicTensor<T> concat_cols(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts[0].dim(0);
  std::size_t total = 0;
  for (const BasicTensor<T>& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row counts differ (" + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()) + ")");
    }
    total += p.dim(1);
  }
  std::vector<T> out(rows * total);
  std::size_t offset = 0;
  for (const BasicTensor<T>& p : parts) {
    const std::size_t c = p.dim(1);
    auto ps = p.data();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(ps.begin() + r * c, c, out.begin() + r * total + offset);
    offset += c;
  }
  std::vector<BasicTensor<T>> inputs(parts.begin(), parts.end());
  check_finite<T>(out, "concat_cols");
  BasicTensor<T> result = BasicTensor<T>::from({rows, total}, std::move(out));
  bool any = false;
  if (Tape::active() != nullptr) {
    for (const BasicTensor<T>& p : inputs) any = any || p.requires_grad();
  }
  if (any) {
    result.set_requires_grad();
    Tape::active()->record("concat_cols", [result, inputs, rows, total]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      std::size_t offset = 0;
      for (BasicTensor<T>& p : inputs) {
        const std::size_t c = p.dim(1);
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += g[r * total + offset + j];
          }
        }
        offset += c;
      }
    });
  }
  return result;
}

template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (rows.empty()) throw DimensionError("gather_rows: empty row list");
  auto xs = x.data();
  std::vector<T> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " >= " + std::to_string(n));
    std::copy_n(xs.begin() + rows[i] * d, d, out.begin() + i * d);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return finish("gather_rows", {rows.size(), d}, std::move(out), {&x},
                [x, idx = std::move(idx), d](std::span<const T> g) mutable {
                  if (!x.requires_grad()) return;
                  auto gx = x.mutable_grad();
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    for (std::size_t j = 0; j < d; ++j) gx[idx[i] * d + j] += g[i * d + j];
                  }
                });
}

template <class T>
BasicTensor<T> scatter_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows, std::size_t total_rows) {
  require_rank(x, 2, "scatter_rows");
  const std::size_t d = x.dim(1);
  if (rows.size() != x.dim(0)) {
    throw DimensionError("scatter_rows: " + std::to_string(rows.size()) + " indices for " + shape_str(x.shape()));
  }
  auto xs = x.data();
  std::vector<T> out(total_rows * d, T{0});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= total_rows) {
      throw DimensionError("scatter_rows: row " + std::to_string(rows[i]) + " >= " + std::to_string(total_rows));
    }
    std::copy_n(xs.begin() + i * d, d, out.begin() + rows[i] * d);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return finish("scatter_rows", {total_rows, d}, std::move(out), {&x},
                [x, idx = std::move(idx), d](std::span<const T> g) mutable {
                  if (!x.requires_grad()) return;
                  auto gx = x.mutable_grad();
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[idx[i] * d + j];
                  }
                });
}

template <class T>
BasicTensor<T> repeat_rows(const BasicTensor<T>& row, std::size_t n) {
  if (!(row.rank() == 1 || (row.rank() == 2 && row.dim(0) == 1))) {
    throw DimensionError("repeat_rows: expected [d] or [1 x d], got " + shape_str(row.shape()));
  }
  if (n == 0) throw DimensionError("repeat_rows: zero repetitions");
  const std::size_t d = row.numel();
  auto rs = row.data();
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy(rs.begin(), rs.end(), out.begin() + i * d);
  return finish("repeat_rows", {n, d}, std::move(out), {&row}, [row, n, d](std::span<const T> g) mutable {
    if (!row.requires_grad()) return;
    auto gr = row.mutable_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
    }
  });
}

template <class T>
BasicTensor<T> gather_elements(const BasicTensor<T>& x, std::span<const std::size_t> source, Shape out_shape) {
  if (shape_numel(out_shape) != source.size()) {
    throw DimensionError("gather_elements: " + std::to_string(source.size()) + " indices for output " +
                         shape_str(out_shape));
  }
  auto xs = x.data();
  std::vector<T> out(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] >= xs.size()) throw DimensionError("gather_elements: index out of range");
    out[i] = xs[source[i]];
  }
  std::vector<std::size_t> idx(source.begin(), source.end());
  return finish("gather_elements", std::move(out_shape), std::move(out), {&x},
                [x, idx = std::move(idx)](std::span<const T> g) mutable {
                  if (!x.requires_grad()) return;
                  auto gx = x.mutable_grad();
                  for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
                });
}

// --- reductions -----------------------------------------------------------

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  auto xs = x.data();
  double acc = 0.0;
  for (T v : xs) acc += v;
  return finish("sum", {1}, {static_cast<T>(acc)}, {&x}, [x](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    for (T& v : gx) v += g[0];
  });
}

template <class T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  auto xs = x.data();
  double acc = 0.0;
  for (T v : xs) acc += v;
  const double n = static_cast<double>(xs.size());
  return finish("mean", {1}, {static_cast<T>(acc / n)}, {&x}, [x, n](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    const T share = static_cast<T>(g[0] / n);
    for (T& v : gx) v += share;
  });
}

template <class T>
BasicTensor<T> mean_rows(const BasicTensor<T>& x) {
  require_rank(x, 2, "mean_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  auto xs = x.data();
  std::vector<T> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += xs[i * d + j];
    out[j] = static_cast<T>(acc / static_cast<double>(n));
  }
  return finish("mean_rows", {d}, std::move(out), {&x}, [x, n, d](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] / static_cast<T>(n);
    }
  });
}

template <class T>
BasicTensor<T> adaptive_avg_pool_rows(const BasicTensor<T>& x, std::size_t target_rows) {
  require_rank(x, 2, "adaptive_avg_pool_rows");
  if (target_rows < 1) throw ParameterError("adaptive_avg_pool_rows: target row count must be >= 1");
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<std::pair<std::size_t, std::size_t>> windows(target_rows);
  for (std::size_t i = 0; i < target_rows; ++i) {
    windows[i] = {(i * n) / target_rows, ((i + 1) * n + target_rows - 1) / target_rows};
  }
  auto xs = x.data();
  std::vector<T> out(target_rows * d);
  for (std::size_t i = 0; i < target_rows; ++i) {
    const auto [lo, hi] = windows[i];
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = lo; r < hi; ++r) acc += xs[r * d + j];
      out[i * d + j] = static_cast<T>(acc / static_cast<double>(hi - lo));
    }
  }
  return finish("adaptive_avg_pool_rows", {target_rows, d}, std::move(out), {&x},
                [x, windows = std::move(windows), d](std::span<const T> g) mutable {
                  if (!x.requires_grad()) return;
                  auto gx = x.mutable_grad();
                  for (std::size_t i = 0; i < windows.size(); ++i) {
                    const auto [lo, hi] = windows[i];
                    const T share = T{1} / static_cast<T>(hi - lo);
                    for (std::size_t r = lo; r < hi; ++r) {
                      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[i * d + j] * share;
                    }
                  }
                });
}

template <class T>
BasicTensor<T> channel_mean(const BasicTensor<T>& x) {
  require_rank(x, 3, "channel_mean");
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  auto xs = x.data();
  std::vector<T> out(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += xs[ch * plane + i];
    out[ch] = static_cast<T>(acc / static_cast<double>(plane));
  }
  return finish("channel_mean", {c}, std::move(out), {&x}, [x, c, plane](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T share = g[ch] / static_cast<T>(plane);
      for (std::size_t i = 0; i < plane; ++i) gx[ch * plane + i] += share;
    }
  });
}

template <class T>
BasicTensor<T> mean_last_axis(const BasicTensor<T>& x) {
  require_rank(x, 3, "mean_last_axis");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto xs = x.data();
  std::vector<T> out(c * h);
  for (std::size_t i = 0; i < c * h; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w; ++j) acc += xs[i * w + j];
    out[i] = static_cast<T>(acc / static_cast<double>(w));
  }
  return finish("mean_last_axis", {c, h}, std::move(out), {&x}, [x, c, h, w](std::span<const T> g) mutable {
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < c * h; ++i) {
      const T share = g[i] / static_cast<T>(w);
      for (std::size_t j = 0; j < w; ++j) gx[i * w + j] += share;
    }
  });
}

template <class T>
BasicTensor<T> channel_scale(const BasicTensor<T>& x, const BasicTensor<T>& gates) {
  require_rank(x, 3, "channel_scale");
  require_rank(gates, 1, "channel_scale");
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  if (gates.dim(0) != c) {
    throw DimensionError("channel_scale: " + shape_str(gates.shape()) + " gates for " + shape_str(x.shape()));
  }
  auto xs = x.data();
  auto gs = gates.data();
  std::vector<T> out(xs.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = xs[ch * plane + i] * gs[ch];
  }
  return finish("channel_scale", x.shape(), std::move(out), {&x, &gates},
                [x, gates, c, plane](std::span<const T> g) mutable {
                  auto xs = x.data();
                  auto gs = gates.data();
                  if (x.requires_grad()) {
                    auto gx = x.mutable_grad();
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      for (std::size_t i = 0; i < plane; ++i) gx[ch * plane + i] += g[ch * plane + i] * gs[ch];
                    }
                  }
                  if (gates.requires_grad()) {
                    auto gg = gates.mutable_grad();
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      double acc = 0.0;
                      for (std::size_t i = 0; i < plane; ++i) {
                        acc += static_cast<double>(g[ch * plane + i]) * xs[ch * plane + i];
                      }
                      gg[ch] += static_cast<T>(acc);
                    }
                  }
                });
}

// --- losses ---------------------------------------------------------------

namespace {

template <class T>
BasicTensor<T> mse_impl(const BasicTensor<T>& prediction, const BasicTensor<T>& target, const std::uint8_t* include) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_str(prediction.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  auto ps = prediction.data();
  auto ts = target.data();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (include != nullptr && include[i] == 0) continue;
    const double diff = static_cast<double>(ps[i]) - ts[i];
    acc += diff * diff;
    ++count;
  }
  if (count == 0) throw DimensionError("mse_loss: no elements selected");
  const double n = static_cast<double>(count);
  std::vector<std::uint8_t> keep;
  if (include != nullptr) keep.assign(include, include + ps.size());
  return finish("mse_loss", {1}, {static_cast<T>(acc / n)}, {&prediction, &target},
                [prediction, target, keep = std::move(keep), n](std::span<const T> g) mutable {
                  auto ps = prediction.data();
                  auto ts = target.data();
                  const double coeff = 2.0 * g[0] / n;
                  const bool all = keep.empty();
                  if (prediction.requires_grad()) {
                    auto gp = prediction.mutable_grad();
                    for (std::size_t i = 0; i < ps.size(); ++i) {
                      if (all || keep[i]) gp[i] += static_cast<T>(coeff * (static_cast<double>(ps[i]) - ts[i]));
                    }
                  }
                  if (target.requires_grad()) {
                    auto gt = target.mutable_grad();
                    for (std::size_t i = 0; i < ps.size(); ++i) {
                      if (all || keep[i]) gt[i] -= static_cast<T>(coeff * (static_cast<double>(ps[i]) - ts[i]));
                    }
                  }
                });
}

}  // namespace

template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target) { return mse_impl(prediction, target, nullptr); }

template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target, std::span<const std::uint8_t> include) {
  if (include.size() != prediction.numel()) {
    throw DimensionError("mse_loss: include mask has " + std::to_string(include.size()) + " entries for " +
                         shape_str(prediction.shape()));
  }
  return mse_impl(prediction, target, include.data());
}

template <class T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::size_t> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         shape_str(logits.shape()));
  }
  auto ls = logits.data();
  std::vector<T> probs(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) throw DimensionError("cross_entropy: label " + std::to_string(labels[i]) + " >= " + std::to_string(k));
    const T* row = ls.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    const double log_z = mx + std::log(total);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = static_cast<T>(std::exp(row[j] - log_z));
    loss -= row[labels[i]] - log_z;
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return finish("cross_entropy", {1}, {static_cast<T>(loss / static_cast<double>(n))}, {&logits},
                [logits, probs = std::move(probs), lab = std::move(lab), n, k](std::span<const T> g) mutable {
                  if (!logits.requires_grad()) return;
                  auto gl = logits.mutable_grad();
                  const T coeff = g[0] / static_cast<T>(n);
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < k; ++j) {
                      const T onehot = j == lab[i] ? T{1} : T{0};
                      gl[i * k + j] += coeff * (probs[i * k + j] - onehot);
                    }
                  }
                });
}

#define AVMASK_INSTANTIATE_OPS(T)                                                                            \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                             \
  template BasicTensor<T> matmul_nt(const BasicTensor<T>&, const BasicTensor<T>&);                          \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                             \
  template BasicTensor<T> gelu(const BasicTensor<T>&);                                                      \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                   \
  template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                                              \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, Conv2dParams);               \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                            \
  template BasicTensor<T> slice_cols(const BasicTensor<T>&, std::size_t, std::size_t);                      \
  template BasicTensor<T> concat_cols(std::span<const BasicTensor<T>>);                                     \
  template BasicTensor<T> gather_rows(const BasicTensor<T>&, std::span<const std::size_t>);                 \
  template BasicTensor<T> scatter_rows(const BasicTensor<T>&, std::span<const std::size_t>, std::size_t);   \
  template BasicTensor<T> repeat_rows(const BasicTensor<T>&, std::size_t);                                  \
  template BasicTensor<T> gather_elements(const BasicTensor<T>&, std::span<const std::size_t>, Shape);      \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                       \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                                      \
  template BasicTensor<T> mean_rows(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> adaptive_avg_pool_rows(const BasicTensor<T>&, std::size_t);                       \
  template BasicTensor<T> channel_mean(const BasicTensor<T>&);                                              \
  template BasicTensor<T> mean_last_axis(const BasicTensor<T>&);                                            \
  template BasicTensor<T> channel_scale(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&, std::span<const std::uint8_t>); \
  template BasicTensor<T> cross_entropy(const BasicTensor<T>&, std::span<const std::size_t>);

AVMASK_INSTANTIATE_OPS(float)
AVMASK_INSTANTIATE_OPS(double)

}  // namespace avmask
