#include <algorithm>
#include <cmath>
#include <vector>

#include "direcnet/error.hpp"
#include "direcnet/ops.hpp"
#include "gemm.hpp"

namespace direcnet::ops {
namespace {

// Target column count of one im2col band; keeps the band inside L2.
constexpr std::int64_t kBandColumns = 512;

struct ConvGeometry {
  std::int64_t n, c_in, h, w;
  std::int64_t c_out, k;
  std::int64_t stride, pad;
  std::int64_t h_out, w_out;
};

void require_nchw(const Shape& s, const char* what) {
  if (s.size() != 4) {
    throw ShapeError(std::string(what) + " expects a 4-d NCHW tensor, got " + shape_str(s));
  }
}

template <typename T>
void require_bias(const BasicTensor<T>& bias, std::int64_t channels, const char* what) {
  if (bias.rank() != 1 || bias.dim(0) != channels) {
    throw ShapeError(std::string(what) + ": bias shape " + shape_str(bias.shape()) +
                     " does not match " + std::to_string(channels) + " output channels");
  }
}

// Rows [oh0, oh0 + rows) of the im2col matrix for image `x` (one image,
// all channels). Layout: [c_in * k * k, rows * w_out].
template <typename T>
void im2col_band(const ConvGeometry& g, const T* x, std::int64_t oh0, std::int64_t rows, T* col) {
  const std::int64_t cols = rows * g.w_out;
  for (std::int64_t ci = 0; ci < g.c_in; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        T* dst = col + ((ci * g.k + ki) * g.k + kj) * cols;
        for (std::int64_t r = 0; r < rows; ++r) {
          const std::int64_t ih = (oh0 + r) * g.stride - g.pad + ki;
          T* drow = dst + r * g.w_out;
          if (ih < 0 || ih >= g.h) {
            std::fill(drow, drow + g.w_out, T(0));
            continue;
          }
          const T* srow = plane + ih * g.w;
          for (std::int64_t ow = 0; ow < g.w_out; ++ow) {
            const std::int64_t iw = ow * g.stride - g.pad + kj;
            drow[ow] = (iw >= 0 && iw < g.w) ? srow[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_band(const ConvGeometry& g, const T* col, std::int64_t oh0, std::int64_t rows, T* dx) {
  const std::int64_t cols = rows * g.w_out;
  for (std::int64_t ci = 0; ci < g.c_in; ++ci) {
    T* plane = dx + ci * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        const T* src = col + ((ci * g.k + ki) * g.k + kj) * cols;
        for (std::int64_t r = 0; r < rows; ++r) {
          const std::int64_t ih = (oh0 + r) * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.h) continue;
          const T* srow = src + r * g.w_out;
          T* drow = plane + ih * g.w;
          for (std::int64_t ow = 0; ow < g.w_out; ++ow) {
            const std::int64_t iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.w) drow[iw] += srow[ow];
          }
        }
      }
    }
  }
}

// Copies dL/dy and zeroes entries where a fused ReLU clipped the output.
template <typename T>
std::vector<T> relu_masked_grad(const BasicTensor<T>& out, bool relu) {
  auto g = out.grad();
  std::vector<T> dy(g.begin(), g.end());
  if (relu) {
    auto y = out.data();
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!(y[i] > T(0))) dy[i] = T(0);
    }
  }
  return dy;
}

template <typename T>
void bias_relu(BasicTensor<T>& out, const BasicTensor<T>& bias, std::int64_t n, std::int64_t c,
               std::int64_t plane, bool relu) {
  T* y = out.ptr();
  const T* b = bias.ptr();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      T* p = y + (i * c + ch) * plane;
      const T bv = b[ch];
      if (relu) {
        for (std::int64_t j = 0; j < plane; ++j) p[j] = std::max(p[j] + bv, T(0));
      } else {
        for (std::int64_t j = 0; j < plane; ++j) p[j] += bv;
      }
    }
  }
}

template <typename T>
void bias_grad(const std::vector<T>& dy, std::int64_t n, std::int64_t c, std::int64_t plane,
               std::span<T> db) {
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const T* p = dy.data() + (i * c + ch) * plane;
      for (std::int64_t j = 0; j < plane; ++j) acc += p[j];
    }
    db[ch] += static_cast<T>(acc);
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(BasicTape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, Conv2dOptions options) {
  require_nchw(input.shape(), "conv2d input");
  require_nchw(weight.shape(), "conv2d weight");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c_in = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.c_out = weight.dim(0);
  g.k = weight.dim(2);
  g.stride = options.stride;
  g.pad = options.padding;
  if (weight.dim(1) != g.c_in) {
    throw ShapeError("conv2d: input has " + std::to_string(g.c_in) + " channels but weight " +
                     shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(3) != g.k) throw ShapeError("conv2d: kernel must be square");
  if (g.stride < 1 || g.pad < 0) throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
  require_bias(bias, g.c_out, "conv2d");
  const std::int64_t span_h = g.h + 2 * g.pad - g.k;
  const std::int64_t span_w = g.w + 2 * g.pad - g.k;
  if (span_h < 0 || span_w < 0) {
    throw ConfigError("conv2d: padding " + std::to_string(g.pad) + " leaves no output for input " +
                      shape_str(input.shape()) + " and kernel " + std::to_string(g.k));
  }
  g.h_out = span_h / g.stride + 1;
  g.w_out = span_w / g.stride + 1;

  const std::int64_t kdim = g.c_in * g.k * g.k;
  const std::int64_t plane_out = g.h_out * g.w_out;
  const std::int64_t band_rows = std::max<std::int64_t>(1, kBandColumns / g.w_out);

  BasicTensor<T> out({g.n, g.c_out, g.h_out, g.w_out});
  std::vector<T> col(static_cast<std::size_t>(kdim * band_rows * g.w_out));
  for (std::int64_t i = 0; i < g.n; ++i) {
    const T* x = input.ptr() + i * g.c_in * g.h * g.w;
    T* y = out.ptr() + i * g.c_out * plane_out;
    for (std::int64_t oh0 = 0; oh0 < g.h_out; oh0 += band_rows) {
      const std::int64_t rows = std::min(band_rows, g.h_out - oh0);
      const std::int64_t cols = rows * g.w_out;
      im2col_band(g, x, oh0, rows, col.data());
      detail::gemm<T>(false, false, int(g.c_out), int(cols), int(kdim), T(1), weight.ptr(),
                      int(kdim), col.data(), int(cols), T(0), y + oh0 * g.w_out, int(plane_out));
    }
  }
  bias_relu(out, bias, g.n, g.c_out, plane_out, options.relu);

  if (tape.wants({&input, &weight, &bias})) {
    tape.record(out, [input, weight, bias, out, g, options, kdim, plane_out, band_rows]() mutable {
      const auto dy = relu_masked_grad(out, options.relu);
      if (bias.requires_grad()) bias_grad(dy, g.n, g.c_out, plane_out, bias.grad());
      const bool need_w = weight.requires_grad();
      const bool need_x = input.requires_grad();
      if (!need_w && !need_x) return;
      std::vector<T> col(static_cast<std::size_t>(kdim * band_rows * g.w_out));
      std::vector<T> dcol(need_x ? col.size() : 0);
      T* dw = need_w ? weight.grad().data() : nullptr;
      T* dx_all = need_x ? input.grad().data() : nullptr;
      for (std::int64_t i = 0; i < g.n; ++i) {
        const T* x = input.ptr() + i * g.c_in * g.h * g.w;
        const T* dyi = dy.data() + i * g.c_out * plane_out;
        for (std::int64_t oh0 = 0; oh0 < g.h_out; oh0 += band_rows) {
          const std::int64_t rows = std::min(band_rows, g.h_out - oh0);
          const std::int64_t cols = rows * g.w_out;
          const T* dyb = dyi + oh0 * g.w_out;
          if (need_w) {
            im2col_band(g, x, oh0, rows, col.data());
            detail::gemm<T>(false, true, int(g.c_out), int(kdim), int(cols), T(1), dyb,
                            int(plane_out), col.data(), int(cols), T(1), dw, int(kdim));
          }
          if (need_x) {
            detail::gemm<T>(true, false, int(kdim), int(cols), int(g.c_out), T(1), weight.ptr(),
                            int(kdim), dyb, int(plane_out), T(0), dcol.data(), int(cols));
            col2im_band(g, dcol.data(), oh0, rows, dx_all + i * g.c_in * g.h * g.w);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> depthwise_conv2d(BasicTape<T>& tape, const BasicTensor<T>& input,
                                const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                                bool relu) {
  require_nchw(input.shape(), "depthwise_conv2d input");
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (weight.shape() != Shape{c, 1, 3, 3}) {
    throw ShapeError("depthwise_conv2d: weight " + shape_str(weight.shape()) +
                     " does not match input channels " + std::to_string(c) + " (want [C, 1, 3, 3])");
  }
  require_bias(bias, c, "depthwise_conv2d");
  const std::int64_t pw = w + 2, ph = h + 2, plane = h * w;

  BasicTensor<T> out({n, c, h, w});
  std::vector<T> padded(static_cast<std::size_t>(ph * pw), T(0));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const T* x = input.ptr() + (i * c + ch) * plane;
      for (std::int64_t r = 0; r < h; ++r) std::copy(x + r * w, x + r * w + w, &padded[(r + 1) * pw + 1]);
      const T* k = weight.ptr() + ch * 9;
      T* y = out.ptr() + (i * c + ch) * plane;
      for (std::int64_t r = 0; r < h; ++r) {
        T* yrow = y + r * w;
        std::fill(yrow, yrow + w, T(0));
        for (int ki = 0; ki < 3; ++ki) {
          const T* prow = &padded[(r + ki) * pw];
          for (int kj = 0; kj < 3; ++kj) {
            const T kv = k[ki * 3 + kj];
            const T* src = prow + kj;
            for (std::int64_t col = 0; col < w; ++col) yrow[col] += kv * src[col];
          }
        }
      }
    }
  }
  bias_relu(out, bias, n, c, plane, relu);

  if (tape.wants({&input, &weight, &bias})) {
    tape.record(out, [input, weight, bias, out, n, c, h, w, relu]() mutable {
      const std::int64_t pw = w + 2, ph = h + 2, plane = h * w;
      const auto dy = relu_masked_grad(out, relu);
      if (bias.requires_grad()) bias_grad(dy, n, c, plane, bias.grad());
      const bool need_w = weight.requires_grad();
      const bool need_x = input.requires_grad();
      std::vector<T> padded(static_cast<std::size_t>(ph * pw), T(0));
      std::vector<T> dpad(static_cast<std::size_t>(ph * pw));
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const T* x = input.ptr() + (i * c + ch) * plane;
          const T* g = dy.data() + (i * c + ch) * plane;
          const T* k = weight.ptr() + ch * 9;
          if (need_w) {
            for (std::int64_t r = 0; r < h; ++r) std::copy(x + r * w, x + r * w + w, &padded[(r + 1) * pw + 1]);
            T* dk = weight.grad().data() + ch * 9;
            for (int ki = 0; ki < 3; ++ki) {
              for (int kj = 0; kj < 3; ++kj) {
                double acc = 0;
                for (std::int64_t r = 0; r < h; ++r) {
                  const T* src = &padded[(r + ki) * pw + kj];
                  const T* grow = g + r * w;
                  T partial = 0;
                  for (std::int64_t col = 0; col < w; ++col) partial += grow[col] * src[col];
                  acc += partial;
                }
                dk[ki * 3 + kj] += static_cast<T>(acc);
              }
            }
          }
          if (need_x) {
            std::fill(dpad.begin(), dpad.end(), T(0));
            for (std::int64_t r = 0; r < h; ++r) {
              const T* grow = g + r * w;
              for (int ki = 0; ki < 3; ++ki) {
                T* drow = &dpad[(r + ki) * pw];
                for (int kj = 0; kj < 3; ++kj) {
                  const T kv = k[ki * 3 + kj];
                  T* dst = drow + kj;
                  for (std::int64_t col = 0; col < w; ++col) dst[col] += kv * grow[col];
                }
              }
            }
            T* dx = input.grad().data() + (i * c + ch) * plane;
            for (std::int64_t r = 0; r < h; ++r) {
              const T* src = &dpad[(r + 1) * pw + 1];
              for (std::int64_t col = 0; col < w; ++col) dx[r * w + col] += src[col];
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> pointwise_conv2d(BasicTape<T>& tape, const BasicTensor<T>& input,
                                const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                                bool relu) {
  require_nchw(input.shape(), "pointwise_conv2d input");
  const std::int64_t n = input.dim(0), c_in = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (weight.rank() != 4 || weight.dim(1) != c_in || weight.dim(2) != 1 || weight.dim(3) != 1) {
    throw ShapeError("pointwise_conv2d: weight " + shape_str(weight.shape()) +
                     " does not match input channels " + std::to_string(c_in));
  }
  const std::int64_t c_out = weight.dim(0);
  require_bias(bias, c_out, "pointwise_conv2d");

  BasicTensor<T> out({n, c_out, input.dim(2), input.dim(3)});
  for (std::int64_t i = 0; i < n; ++i) {
    detail::gemm<T>(false, false, int(c_out), int(plane), int(c_in), T(1), weight.ptr(), int(c_in),
                    input.ptr() + i * c_in * plane, int(plane), T(0),
                    out.ptr() + i * c_out * plane, int(plane));
  }
  bias_relu(out, bias, n, c_out, plane, relu);

  if (tape.wants({&input, &weight, &bias})) {
    tape.record(out, [input, weight, bias, out, n, c_in, c_out, plane, relu]() mutable {
      const auto dy = relu_masked_grad(out, relu);
      if (bias.requires_grad()) bias_grad(dy, n, c_out, plane, bias.grad());
      for (std::int64_t i = 0; i < n; ++i) {
        const T* g = dy.data() + i * c_out * plane;
        if (weight.requires_grad()) {
          detail::gemm<T>(false, true, int(c_out), int(c_in), int(plane), T(1), g, int(plane),
                          input.ptr() + i * c_in * plane, int(plane), T(1),
                          weight.grad().data(), int(c_in));
        }
        if (input.requires_grad()) {
          detail::gemm<T>(true, false, int(c_in), int(plane), int(c_out), T(1), weight.ptr(),
                          int(c_in), g, int(plane), T(1),
                          input.grad().data() + i * c_in * plane, int(plane));
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> max_pool2d(BasicTape<T>& tape, const BasicTensor<T>& input) {
  require_nchw(input.shape(), "max_pool2d input");
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("max_pool2d: unsupported odd spatial extent " + shape_str(input.shape()));
  }
  const std::int64_t ho = h / 2, wo = w / 2;
  BasicTensor<T> out({n, c, ho, wo});
  // Offset (0..3) of the winning element inside its window.
  std::vector<std::uint8_t> winner(out.numel());
  const T* x = input.ptr();
  T* y = out.ptr();
  std::size_t o = 0;
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    const T* p = x + plane * h * w;
    for (std::int64_t r = 0; r < ho; ++r) {
      const T* row0 = p + (2 * r) * w;
      const T* row1 = row0 + w;
      for (std::int64_t col = 0; col < wo; ++col, ++o) {
        const T cand[4] = {row0[2 * col], row0[2 * col + 1], row1[2 * col], row1[2 * col + 1]};
        std::uint8_t best = 0;
        for (std::uint8_t q = 1; q < 4; ++q) {
          if (cand[q] > cand[best]) best = q;
        }
        winner[o] = best;
        y[o] = cand[best];
      }
    }
  }
  if (tape.wants({&input})) {
    tape.record(out, [input, out, winner = std::move(winner), n, c, h, w]() mutable {
      const std::int64_t ho = h / 2, wo = w / 2;
      auto dy = out.grad();
      T* dx = input.grad().data();
      std::size_t o = 0;
      for (std::int64_t plane = 0; plane < n * c; ++plane) {
        T* p = dx + plane * h * w;
        for (std::int64_t r = 0; r < ho; ++r) {
          for (std::int64_t col = 0; col < wo; ++col, ++o) {
            const std::uint8_t q = winner[o];
            p[(2 * r + q / 2) * w + 2 * col + q % 2] += dy[o];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> batch_norm2d(BasicTape<T>& tape, const BasicTensor<T>& input,
                            BatchNormState<T>& state, Mode mode) {
  require_nchw(input.shape(), "batch_norm2d input");
  const std::int64_t n = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (c != state.channels()) {
    throw ShapeError("batch_norm2d: input has " + std::to_string(c) + " channels, state has " +
                     std::to_string(state.channels()));
  }
  const std::int64_t m = n * plane;
  std::vector<T> mean(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  const T* x = input.ptr();

  if (mode == Mode::train) {
    if (m < 2) throw ContractError("batch_norm2d: train mode needs at least 2 values per channel");
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double s = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = x + (i * c + ch) * plane;
        for (std::int64_t j = 0; j < plane; ++j) s += p[j];
      }
      const double mu = s / double(m);
      double ss = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = x + (i * c + ch) * plane;
        for (std::int64_t j = 0; j < plane; ++j) {
          const double d = p[j] - mu;
          ss += d * d;
        }
      }
      const double var = ss / double(m);
      mean[ch] = static_cast<T>(mu);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + state.eps));
      const double unbiased = ss / double(m - 1);
      auto& rm = state.running_mean[ch];
      auto& rv = state.running_var[ch];
      if (!state.has_running_stats) {
        rm = T(0);
        rv = T(1);
      }
      rm = static_cast<T>((1.0 - state.momentum) * rm + state.momentum * mu);
      rv = static_cast<T>((1.0 - state.momentum) * rv + state.momentum * unbiased);
    }
    state.has_running_stats = true;
  } else {
    if (!state.has_running_stats) {
      throw StateError("batch_norm2d: eval mode before any running statistics exist");
    }
    for (std::int64_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(double(state.running_var[ch]) + state.eps));
    }
  }

  BasicTensor<T> out(input.shape());
  T* y = out.ptr();
  const T* g = state.gamma.ptr();
  const T* b = state.beta.ptr();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const T* p = x + (i * c + ch) * plane;
      T* q = y + (i * c + ch) * plane;
      const T scale = g[ch] * inv_std[ch];
      const T shift = b[ch] - mean[ch] * scale;
      for (std::int64_t j = 0; j < plane; ++j) q[j] = p[j] * scale + shift;
    }
  }

  BasicTensor<T> gamma = state.gamma, beta = state.beta;
  if (tape.wants({&input, &gamma, &beta})) {
    tape.record(out, [input, gamma, beta, out, mean = std::move(mean), inv_std = std::move(inv_std),
                      n, c, plane, m, mode]() mutable {
      auto dy = out.grad();
      const T* x = input.ptr();
      const T* gm = gamma.ptr();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0, sum_dy_xhat = 0;
        for (std::int64_t i = 0; i < n; ++i) {
          const T* p = x + (i * c + ch) * plane;
          const T* d = dy.data() + (i * c + ch) * plane;
          for (std::int64_t j = 0; j < plane; ++j) {
            sum_dy += d[j];
            sum_dy_xhat += double(d[j]) * (double(p[j]) - mean[ch]) * inv_std[ch];
          }
        }
        if (gamma.requires_grad()) gamma.grad()[ch] += static_cast<T>(sum_dy_xhat);
        if (beta.requires_grad()) beta.grad()[ch] += static_cast<T>(sum_dy);
        if (!input.requires_grad()) continue;
        T* dx = input.grad().data();
        const double k = double(gm[ch]) * inv_std[ch];
        if (mode == Mode::train) {
          const double mean_dy = sum_dy / double(m);
          const double mean_dy_xhat = sum_dy_xhat / double(m);
          for (std::int64_t i = 0; i < n; ++i) {
            const T* p = x + (i * c + ch) * plane;
            const T* d = dy.data() + (i * c + ch) * plane;
            T* q = dx + (i * c + ch) * plane;
            for (std::int64_t j = 0; j < plane; ++j) {
              const double xhat = (double(p[j]) - mean[ch]) * inv_std[ch];
              q[j] += static_cast<T>(k * (d[j] - mean_dy - xhat * mean_dy_xhat));
            }
          }
        } else {
          for (std::int64_t i = 0; i < n; ++i) {
            const T* d = dy.data() + (i * c + ch) * plane;
            T* q = dx + (i * c + ch) * plane;
            for (std::int64_t j = 0; j < plane; ++j) q[j] += static_cast<T>(k * d[j]);
          }
        }
      }
    });
  }
  return out;
}

#define DIRECNET_INSTANTIATE(T)                                                               \
  template BasicTensor<T> conv2d(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                 const BasicTensor<T>&, Conv2dOptions);                       \
  template BasicTensor<T> depthwise_conv2d(BasicTape<T>&, const BasicTensor<T>&,              \
                                           const BasicTensor<T>&, const BasicTensor<T>&, bool); \
  template BasicTensor<T> pointwise_conv2d(BasicTape<T>&, const BasicTensor<T>&,              \
                                           const BasicTensor<T>&, const BasicTensor<T>&, bool); \
  template BasicTensor<T> max_pool2d(BasicTape<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> batch_norm2d(BasicTape<T>&, const BasicTensor<T>&,                  \
                                       BatchNormState<T>&, Mode);

DIRECNET_INSTANTIATE(float)
DIRECNET_INSTANTIATE(double)
#undef DIRECNET_INSTANTIATE

}  // namespace direcnet::ops

namespace direcnet {

template <typename T>
BatchNormState<T> BatchNormState<T>::create(std::int64_t channels) {
  BatchNormState s;
  s.gamma = BasicTensor<T>::full({channels}, T(1));
  s.gamma.set_requires_grad(true);
  s.beta = BasicTensor<T>({channels}, true);
  s.running_mean.assign(static_cast<std::size_t>(channels), T(0));
  s.running_var.assign(static_cast<std::size_t>(channels), T(1));
  return s;
}

template <typename T>
void BatchNormState<T>::reset_running_stats() {
  std::fill(running_mean.begin(), running_mean.end(), T(0));
  std::fill(running_var.begin(), running_var.end(), T(1));
  has_running_stats = true;
}

template struct BatchNormState<float>;
template struct BatchNormState<double>;

}  // namespace direcnet
