#include <algorithm>
#include <cmath>
#include <vector>

#include "direcnet/error.hpp"
#include "direcnet/ops.hpp"
#include "gemm.hpp"

namespace direcnet::ops {

template <typename T>
BasicTensor<T> attention(BasicTape<T>& tape, const BasicTensor<T>& q, const BasicTensor<T>& k,
                         const BasicTensor<T>& v, std::int64_t heads) {
  if (q.rank() != 3) throw ShapeError("attention: expects [N, T, D] projections, got " + shape_str(q.shape()));
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw ShapeError("attention: q/k/v shapes differ: " + shape_str(q.shape()) + ", " +
                     shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const std::int64_t n = q.dim(0), t = q.dim(1), d = q.dim(2);
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("attention: embedding " + std::to_string(d) + " is not divisible into " +
                      std::to_string(heads) + " heads");
  }
  const std::int64_t dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(double(dh)));

  BasicTensor<T> out(q.shape());
  // Attention weights per (sample, head), kept for the backward pass.
  std::vector<T> probs(static_cast<std::size_t>(n * heads * t * t));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t h = 0; h < heads; ++h) {
      const std::int64_t off = i * t * d + h * dh;
      T* p = probs.data() + (i * heads + h) * t * t;
      detail::gemm<T>(false, true, int(t), int(t), int(dh), scale, q.ptr() + off, int(d),
                      k.ptr() + off, int(d), T(0), p, int(t));
      for (std::int64_t r = 0; r < t; ++r) {
        T* row = p + r * t;
        const T mx = *std::max_element(row, row + t);
        double s = 0;
        for (std::int64_t c = 0; c < t; ++c) {
          row[c] = std::exp(row[c] - mx);
          s += row[c];
        }
        for (std::int64_t c = 0; c < t; ++c) row[c] = static_cast<T>(row[c] / s);
      }
      detail::gemm<T>(false, false, int(t), int(dh), int(t), T(1), p, int(t), v.ptr() + off, int(d),
                      T(0), out.ptr() + off, int(d));
    }
  }

  if (tape.wants({&q, &k, &v})) {
    tape.record(out, [q, k, v, out, probs = std::move(probs), n, t, d, heads, dh, scale]() mutable {
      const T* dout = out.grad().data();
      T* dq = q.requires_grad() ? q.grad().data() : nullptr;
      T* dk = k.requires_grad() ? k.grad().data() : nullptr;
      T* dv = v.requires_grad() ? v.grad().data() : nullptr;
      std::vector<T> dp(static_cast<std::size_t>(t * t));
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t h = 0; h < heads; ++h) {
          const std::int64_t off = i * t * d + h * dh;
          const T* p = probs.data() + (i * heads + h) * t * t;
          if (dv) {
            detail::gemm<T>(true, false, int(t), int(dh), int(t), T(1), p, int(t), dout + off, int(d),
                            T(1), dv + off, int(d));
          }
          if (!dq && !dk) continue;
          detail::gemm<T>(false, true, int(t), int(t), int(dh), T(1), dout + off, int(d),
                          v.ptr() + off, int(d), T(0), dp.data(), int(t));
          // dS = P * (dP - rowsum(dP * P))
          for (std::int64_t r = 0; r < t; ++r) {
            T* dpr = dp.data() + r * t;
            const T* pr = p + r * t;
            double dot = 0;
            for (std::int64_t c = 0; c < t; ++c) dot += double(dpr[c]) * pr[c];
            for (std::int64_t c = 0; c < t; ++c) dpr[c] = static_cast<T>(pr[c] * (dpr[c] - dot));
          }
          if (dq) {
            detail::gemm<T>(false, false, int(t), int(dh), int(t), scale, dp.data(), int(t),
                            k.ptr() + off, int(d), T(1), dq + off, int(d));
          }
          if (dk) {
            detail::gemm<T>(true, false, int(t), int(dh), int(t), scale, dp.data(), int(t),
                            q.ptr() + off, int(d), T(1), dk + off, int(d));
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> multi_head_self_attention(BasicTape<T>& tape, const BasicTensor<T>& tokens,
                                         const AttentionParams<T>& params, std::int64_t heads) {
  if (tokens.rank() != 3) throw ShapeError("multi_head_self_attention: expects [N, T, D], got " + shape_str(tokens.shape()));
  const std::int64_t d = tokens.dim(2);
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("multi_head_self_attention: embedding " + std::to_string(d) +
                      " is not divisible into " + std::to_string(heads) + " heads");
  }
  auto q = linear(tape, tokens, params.wq, params.bq);
  auto k = linear(tape, tokens, params.wk, params.bk);
  auto v = linear(tape, tokens, params.wv, params.bv);
  auto mixed = attention(tape, q, k, v, heads);
  return linear(tape, mixed, params.wo, params.bo);
}

#define DIRECNET_INSTANTIATE(T)                                                                    \
  template BasicTensor<T> attention(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,   \
                                    const BasicTensor<T>&, std::int64_t);                          \
  template BasicTensor<T> multi_head_self_attention(BasicTape<T>&, const BasicTensor<T>&,          \
                                                    const AttentionParams<T>&, std::int64_t);

DIRECNET_INSTANTIATE(float)
DIRECNET_INSTANTIATE(double)
#undef DIRECNET_INSTANTIATE

}  // namespace direcnet::ops
