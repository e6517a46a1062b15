#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "direcnet/error.hpp"
#include "direcnet/ops.hpp"
#include "gemm.hpp"

namespace direcnet::ops {
namespace {

std::int64_t last_extent(const Shape& s) { return s.back(); }

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename T>
void accumulate(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
BasicTensor<T> linear(BasicTape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  if (weight.rank() != 2) throw ShapeError("linear: weight must be 2-d, got " + shape_str(weight.shape()));
  const std::int64_t d_out = weight.dim(0), d_in = weight.dim(1);
  if (last_extent(input.shape()) != d_in) {
    throw ShapeError("linear: trailing extent of " + shape_str(input.shape()) +
                     " does not match weight " + shape_str(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != d_out) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(d_out) + " outputs");
  }
  const std::int64_t rows = static_cast<std::int64_t>(input.numel()) / d_in;
  Shape out_shape = input.shape();
  out_shape.back() = d_out;
  BasicTensor<T> out(out_shape);
  T* y = out.ptr();
  const T* b = bias.ptr();
  for (std::int64_t r = 0; r < rows; ++r) std::copy(b, b + d_out, y + r * d_out);
  detail::gemm<T>(false, true, int(rows), int(d_out), int(d_in), T(1), input.ptr(), int(d_in),
                  weight.ptr(), int(d_in), T(1), y, int(d_out));

  if (tape.wants({&input, &weight, &bias})) {
    tape.record(out, [input, weight, bias, out, rows, d_in, d_out]() mutable {
      const T* dy = out.grad().data();
      if (input.requires_grad()) {
        detail::gemm<T>(false, false, int(rows), int(d_in), int(d_out), T(1), dy, int(d_out),
                        weight.ptr(), int(d_in), T(1), input.grad().data(), int(d_in));
      }
      if (weight.requires_grad()) {
        detail::gemm<T>(true, false, int(d_out), int(d_in), int(rows), T(1), dy, int(d_out),
                        input.ptr(), int(d_in), T(1), weight.grad().data(), int(d_in));
      }
      if (bias.requires_grad()) {
        auto db = bias.grad();
        for (std::int64_t j = 0; j < d_out; ++j) {
          double acc = 0;
          for (std::int64_t r = 0; r < rows; ++r) acc += dy[r * d_out + j];
          db[j] += static_cast<T>(acc);
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> layer_norm(BasicTape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, double eps) {
  const std::int64_t d = last_extent(input.shape());
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + " do not match last extent " +
                     std::to_string(d));
  }
  const std::int64_t rows = static_cast<std::int64_t>(input.numel()) / d;
  BasicTensor<T> out(input.shape());
  std::vector<T> mean(static_cast<std::size_t>(rows)), inv_std(static_cast<std::size_t>(rows));
  const T* x = input.ptr();
  T* y = out.ptr();
  const T* g = gamma.ptr();
  const T* b = beta.ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* p = x + r * d;
    double s = 0;
    for (std::int64_t j = 0; j < d; ++j) s += p[j];
    const double mu = s / double(d);
    double ss = 0;
    for (std::int64_t j = 0; j < d; ++j) ss += (p[j] - mu) * (p[j] - mu);
    const double inv = 1.0 / std::sqrt(ss / double(d) + eps);
    mean[r] = static_cast<T>(mu);
    inv_std[r] = static_cast<T>(inv);
    T* q = y + r * d;
    for (std::int64_t j = 0; j < d; ++j) q[j] = static_cast<T>((p[j] - mu) * inv) * g[j] + b[j];
  }

  if (tape.wants({&input, &gamma, &beta})) {
    tape.record(out, [input, gamma, beta, out, mean = std::move(mean), inv_std = std::move(inv_std),
                      rows, d]() mutable {
      const T* dy = out.grad().data();
      const T* x = input.ptr();
      const T* g = gamma.ptr();
      T* dg = gamma.requires_grad() ? gamma.grad().data() : nullptr;
      T* db = beta.requires_grad() ? beta.grad().data() : nullptr;
      T* dx = input.requires_grad() ? input.grad().data() : nullptr;
      std::vector<double> xhat(static_cast<std::size_t>(d));
      for (std::int64_t r = 0; r < rows; ++r) {
        const T* p = x + r * d;
        const T* dyr = dy + r * d;
        double mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (std::int64_t j = 0; j < d; ++j) {
          xhat[j] = (double(p[j]) - mean[r]) * inv_std[r];
          const double dxh = double(dyr[j]) * g[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xhat[j];
          if (dg) dg[j] += static_cast<T>(dyr[j] * xhat[j]);
          if (db) db[j] += dyr[j];
        }
        if (!dx) continue;
        mean_dxhat /= double(d);
        mean_dxhat_xhat /= double(d);
        T* q = dx + r * d;
        for (std::int64_t j = 0; j < d; ++j) {
          const double dxh = double(dyr[j]) * g[j];
          q[j] += static_cast<T>(inv_std[r] * (dxh - mean_dxhat - xhat[j] * mean_dxhat_xhat));
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> softmax(BasicTape<T>& tape, const BasicTensor<T>& logits) {
  const std::int64_t k = last_extent(logits.shape());
  const std::int64_t rows = static_cast<std::int64_t>(logits.numel()) / k;
  BasicTensor<T> out(logits.shape());
  const T* z = logits.ptr();
  T* p = out.ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* zr = z + r * k;
    T* pr = p + r * k;
    T mx = zr[0];
    for (std::int64_t j = 0; j < k; ++j) {
      if (!std::isfinite(zr[j])) throw ValueError("softmax: non-finite logit");
      mx = std::max(mx, zr[j]);
    }
    double s = 0;
    for (std::int64_t j = 0; j < k; ++j) {
      const double e = std::exp(double(zr[j]) - double(mx));
      pr[j] = static_cast<T>(e);
      s += e;
    }
    for (std::int64_t j = 0; j < k; ++j) pr[j] = static_cast<T>(pr[j] / s);
  }
  if (tape.wants({&logits})) {
    tape.record(out, [logits, out, rows, k]() mutable {
      const T* dp = out.grad().data();
      const T* p = out.ptr();
      T* dz = logits.grad().data();
      for (std::int64_t r = 0; r < rows; ++r) {
        double dot = 0;
        for (std::int64_t j = 0; j < k; ++j) dot += double(dp[r * k + j]) * p[r * k + j];
        for (std::int64_t j = 0; j < k; ++j) {
          dz[r * k + j] += static_cast<T>(p[r * k + j] * (dp[r * k + j] - dot));
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sigmoid(BasicTape<T>& tape, const BasicTensor<T>& logits) {
  BasicTensor<T> out(logits.shape());
  auto z = logits.data();
  auto s = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] >= T(0)) {
      s[i] = T(1) / (T(1) + std::exp(-z[i]));
    } else {
      const T e = std::exp(z[i]);
      s[i] = e / (T(1) + e);
    }
  }
  if (tape.wants({&logits})) {
    tape.record(out, [logits, out]() mutable {
      auto ds = out.grad();
      auto s = out.data();
      auto dz = logits.grad();
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += ds[i] * s[i] * (T(1) - s[i]);
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(BasicTape<T>& tape, const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], T(0));
  if (tape.wants({&input})) {
    tape.record(out, [input, out]() mutable {
      auto dy = out.grad();
      auto x = input.data();
      auto dx = input.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (x[i] > T(0)) dx[i] += dy[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
  }
  if (tape.wants({&input})) {
    tape.record(out, [input, out, inv_sqrt2]() mutable {
      auto dy = out.grad();
      auto x = input.data();
      auto dx = input.grad();
      const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
        const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x[i] * x[i]);
        dx[i] += dy[i] * (cdf + x[i] * pdf);
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> dropout(BasicTape<T>& tape, const BasicTensor<T>& input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return input;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::uint8_t> keep(input.numel());
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    keep[i] = uniform(rng) >= rate ? 1 : 0;
    y[i] = keep[i] ? x[i] * scale : T(0);
  }
  if (tape.wants({&input})) {
    tape.record(out, [input, out, keep = std::move(keep), scale]() mutable {
      auto dy = out.grad();
      auto dx = input.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (keep[i]) dx[i] += dy[i] * scale;
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  BasicTensor<T> out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out]() mutable {
      auto dz = std::span<const T>(out.grad());
      if (a.requires_grad()) accumulate(a.grad(), dz);
      if (b.requires_grad()) accumulate(b.grad(), dz);
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  BasicTensor<T> out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out]() mutable {
      auto dz = out.grad();
      if (a.requires_grad()) {
        auto da = a.grad();
        auto y = b.data();
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += dz[i] * y[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad();
        auto x = a.data();
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += dz[i] * x[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& input) {
  double acc = 0;
  for (T v : input.data()) acc += v;
  auto out = BasicTensor<T>::scalar(static_cast<T>(acc));
  if (tape.wants({&input})) {
    tape.record(out, [input, out]() mutable {
      const T g = out.grad()[0];
      for (auto& d : input.grad()) d += g;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> reshape(BasicTape<T>& tape, const BasicTensor<T>& input, Shape shape) {
  BasicTensor<T> out = input.reshaped(std::move(shape));
  out.set_requires_grad(false);
  if (tape.wants({&input})) {
    tape.record(out, [input, out]() mutable { accumulate(input.grad(), std::span<const T>(out.grad())); });
  }
  return out;
}

template <typename T>
BasicTensor<T> tokenize(BasicTape<T>& tape, const BasicTensor<T>& features, const BasicTensor<T>& cls,
                        const BasicTensor<T>& pos) {
  if (features.rank() != 4) throw ShapeError("tokenize: features must be [N, D, H, W], got " + shape_str(features.shape()));
  const std::int64_t n = features.dim(0), d = features.dim(1), plane = features.dim(2) * features.dim(3);
  const std::int64_t t = plane + 1;
  if (cls.shape() != Shape{1, 1, d}) throw ShapeError("tokenize: class token " + shape_str(cls.shape()) + " does not match embedding " + std::to_string(d));
  if (pos.shape() != Shape{1, t, d}) throw ShapeError("tokenize: positional embedding " + shape_str(pos.shape()) + " does not match [1, " + std::to_string(t) + ", " + std::to_string(d) + "]");
  BasicTensor<T> out({n, t, d});
  const T* f = features.ptr();
  const T* c = cls.ptr();
  const T* p = pos.ptr();
  T* y = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) {
    T* yi = y + i * t * d;
    for (std::int64_t j = 0; j < d; ++j) yi[j] = c[j] + p[j];
    for (std::int64_t j = 0; j < d; ++j) {
      const T* fj = f + (i * d + j) * plane;
      for (std::int64_t s = 0; s < plane; ++s) yi[(s + 1) * d + j] = fj[s] + p[(s + 1) * d + j];
    }
  }
  if (tape.wants({&features, &cls, &pos})) {
    tape.record(out, [features, cls, pos, out, n, d, plane, t]() mutable {
      const T* dy = out.grad().data();
      if (cls.requires_grad()) {
        auto dc = cls.grad();
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < d; ++j) dc[j] += dy[i * t * d + j];
      }
      if (pos.requires_grad()) {
        auto dp = pos.grad();
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t q = 0; q < t * d; ++q) dp[q] += dy[i * t * d + q];
      }
      if (features.requires_grad()) {
        T* df = features.grad().data();
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < d; ++j) {
            T* dfj = df + (i * d + j) * plane;
            for (std::int64_t s = 0; s < plane; ++s) dfj[s] += dy[i * t * d + (s + 1) * d + j];
          }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> select_token(BasicTape<T>& tape, const BasicTensor<T>& tokens, std::int64_t index) {
  if (tokens.rank() != 3) throw ShapeError("select_token: tokens must be [N, T, D], got " + shape_str(tokens.shape()));
  const std::int64_t n = tokens.dim(0), t = tokens.dim(1), d = tokens.dim(2);
  if (index < 0 || index >= t) throw ShapeError("select_token: index out of range");
  BasicTensor<T> out({n, d});
  for (std::int64_t i = 0; i < n; ++i) {
    const T* src = tokens.ptr() + (i * t + index) * d;
    std::copy(src, src + d, out.ptr() + i * d);
  }
  if (tape.wants({&tokens})) {
    tape.record(out, [tokens, out, n, t, d, index]() mutable {
      const T* dy = out.grad().data();
      T* dx = tokens.grad().data();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j) dx[(i * t + index) * d + j] += dy[i * d + j];
    });
  }
  return out;
}

namespace {

template <typename T>
void require_probs_2d(const BasicTensor<T>& y_true, const BasicTensor<T>& probs, const char* what) {
  if (probs.rank() != 2) throw ShapeError(std::string(what) + ": predictions must be [N, K], got " + shape_str(probs.shape()));
  require_same_shape(y_true.shape(), probs.shape(), what);
}

}  // namespace

template <typename T>
BasicTensor<T> categorical_cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& y_true,
                                         const BasicTensor<T>& probs) {
  require_probs_2d(y_true, probs, "categorical_cross_entropy");
  const std::int64_t n = probs.dim(0), k = probs.dim(1);
  const T* y = y_true.ptr();
  const T* p = probs.ptr();
  double total = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    int hot = 0;
    for (std::int64_t j = 0; j < k; ++j) {
      const T v = y[i * k + j];
      if (v == T(1)) {
        ++hot;
      } else if (v != T(0)) {
        hot = -1;
        break;
      }
    }
    if (hot != 1) throw ContractError("categorical_cross_entropy: row " + std::to_string(i) + " of y_true is not one-hot");
    for (std::int64_t j = 0; j < k; ++j) {
      if (y[i * k + j] == T(1)) {
        total -= std::log(std::clamp(double(p[i * k + j]), kProbClamp, 1.0 - kProbClamp));
      }
    }
  }
  auto out = BasicTensor<T>::scalar(static_cast<T>(total / double(n)));
  if (tape.wants({&probs})) {
    tape.record(out, [y_true, probs, out, n, k]() mutable {
      const double g = out.grad()[0] / double(n);
      const T* y = y_true.ptr();
      const T* p = probs.ptr();
      T* dp = probs.grad().data();
      for (std::int64_t q = 0; q < n * k; ++q) {
        const double pv = p[q];
        if (y[q] == T(0) || pv < kProbClamp || pv > 1.0 - kProbClamp) continue;
        dp[q] += static_cast<T>(-g * y[q] / pv);
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> binary_cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& y_true,
                                    const BasicTensor<T>& probs) {
  require_probs_2d(y_true, probs, "binary_cross_entropy");
  const std::size_t count = probs.numel();
  auto y = y_true.data();
  auto p = probs.data();
  double total = 0;
  for (std::size_t q = 0; q < count; ++q) {
    if (y[q] < T(0) || y[q] > T(1)) throw ContractError("binary_cross_entropy: y_true outside [0, 1]");
    const double pv = std::clamp(double(p[q]), kProbClamp, 1.0 - kProbClamp);
    total -= y[q] * std::log(pv) + (1.0 - y[q]) * std::log(1.0 - pv);
  }
  auto out = BasicTensor<T>::scalar(static_cast<T>(total / double(count)));
  if (tape.wants({&probs})) {
    tape.record(out, [y_true, probs, out, count]() mutable {
      const double g = out.grad()[0] / double(count);
      auto y = y_true.data();
      auto p = probs.data();
      auto dp = probs.grad();
      for (std::size_t q = 0; q < count; ++q) {
        const double pv = p[q];
        if (pv < kProbClamp || pv > 1.0 - kProbClamp) continue;
        dp[q] += static_cast<T>(g * (-double(y[q]) / pv + (1.0 - y[q]) / (1.0 - pv)));
      }
    });
  }
  return out;
}

#define DIRECNET_INSTANTIATE(T)                                                                     \
  template BasicTensor<T> linear(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,       \
                                 const BasicTensor<T>&);                                            \
  template BasicTensor<T> layer_norm(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,   \
                                     const BasicTensor<T>&, double);                                \
  template BasicTensor<T> softmax(BasicTape<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> sigmoid(BasicTape<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> relu(BasicTape<T>&, const BasicTensor<T>&);                               \
  template BasicTensor<T> gelu(BasicTape<T>&, const BasicTensor<T>&);                               \
  template BasicTensor<T> dropout(BasicTape<T>&, const BasicTensor<T>&, double, Mode, Rng&);        \
  template BasicTensor<T> add(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> mul(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> sum(BasicTape<T>&, const BasicTensor<T>&);                                \
  template BasicTensor<T> reshape(BasicTape<T>&, const BasicTensor<T>&, Shape);                     \
  template BasicTensor<T> tokenize(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
                                   const BasicTensor<T>&);                                          \
  template BasicTensor<T> select_token(BasicTape<T>&, const BasicTensor<T>&, std::int64_t);         \
  template BasicTensor<T> categorical_cross_entropy(BasicTape<T>&, const BasicTensor<T>&,           \
                                                    const BasicTensor<T>&);                         \
  template BasicTensor<T> binary_cross_entropy(BasicTape<T>&, const BasicTensor<T>&,                \
                                               const BasicTensor<T>&);

DIRECNET_INSTANTIATE(float)
DIRECNET_INSTANTIATE(double)
#undef DIRECNET_INSTANTIATE

}  // namespace direcnet::ops
