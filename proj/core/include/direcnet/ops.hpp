#pragma once

#include <cstdint>
#include <random>

#include "direcnet/tape.hpp"
#include "direcnet/tensor.hpp"

namespace direcnet {

enum class Mode { train, eval };

using Rng = std::mt19937_64;

/// Learnable and running state of one BatchNorm2d layer.
template <typename T>
struct BatchNormState {
  BasicTensor<T> gamma;  // [C]
  BasicTensor<T> beta;   // [C]
  std::vector<T> running_mean;
  std::vector<T> running_var;
  bool has_running_stats = false;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormState create(std::int64_t channels);
  std::int64_t channels() const { return gamma.dim(0); }
  // Running stats become mean 0 / variance 1 and are marked initialized.
  void reset_running_stats();
};

namespace ops {

// ---- convolution family (input layout NCHW) --------------------------------

struct Conv2dOptions {
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  // Apply ReLU to the output inside the op (saves one stored activation).
  bool relu = false;
};

/// Cross-correlation plus per-channel bias. weight: [C_out, C_in, k, k].
template <typename T>
BasicTensor<T> conv2d(BasicTape<T>& tape, const BasicTensor<T>& input,
                      const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      Conv2dOptions options = {});

/// Per-channel 3x3 convolution, stride 1, padding 1. weight: [C, 1, 3, 3].
template <typename T>
BasicTensor<T> depthwise_conv2d(BasicTape<T>& tape, const BasicTensor<T>& input,
                                const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                                bool relu = false);

/// 1x1 convolution. weight: [C_out, C_in, 1, 1].
template <typename T>
BasicTensor<T> pointwise_conv2d(BasicTape<T>& tape, const BasicTensor<T>& input,
                                const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                                bool relu = false);

template <typename T>
BasicTensor<T> batch_norm2d(BasicTape<T>& tape, const BasicTensor<T>& input,
                            BatchNormState<T>& state, Mode mode);

/// 2x2 window, stride 2. Gradient goes to the first maximum in row-major
/// order within each window.
template <typename T>
BasicTensor<T> max_pool2d(BasicTape<T>& tape, const BasicTensor<T>& input);

// ---- dense ------------------------------------------------------------------

/// Affine map over the last axis. weight: [D_out, D_in].
template <typename T>
BasicTensor<T> linear(BasicTape<T>& tape, const BasicTensor<T>& input,
                      const BasicTensor<T>& weight, const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> layer_norm(BasicTape<T>& tape, const BasicTensor<T>& input,
                          const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps = 1e-6);

// ---- activations --------------------------------------------------------------

/// Softmax over the last axis (max-subtracted). Throws ValueError on
/// non-finite input.
template <typename T>
BasicTensor<T> softmax(BasicTape<T>& tape, const BasicTensor<T>& logits);

template <typename T>
BasicTensor<T> sigmoid(BasicTape<T>& tape, const BasicTensor<T>& logits);

template <typename T>
BasicTensor<T> relu(BasicTape<T>& tape, const BasicTensor<T>& input);

/// Exact (erf) GELU.
template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& input);

/// Inverted dropout. Eval mode and rate 0 return the input handle itself.
template <typename T>
BasicTensor<T> dropout(BasicTape<T>& tape, const BasicTensor<T>& input, double rate, Mode mode,
                       Rng& rng);

// ---- attention ----------------------------------------------------------------

/// Scaled dot-product attention on [N, T, D] projections split into `heads`
/// contiguous column groups of D / heads. Scale is 1/sqrt(D / heads).
template <typename T>
BasicTensor<T> attention(BasicTape<T>& tape, const BasicTensor<T>& q, const BasicTensor<T>& k,
                         const BasicTensor<T>& v, std::int64_t heads);

template <typename T>
struct AttentionParams {
  BasicTensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Q/K/V projections, per-head attention, output projection.
template <typename T>
BasicTensor<T> multi_head_self_attention(BasicTape<T>& tape, const BasicTensor<T>& tokens,
                                         const AttentionParams<T>& params, std::int64_t heads);

// ---- structure --------------------------------------------------------------

template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> reshape(BasicTape<T>& tape, const BasicTensor<T>& input, Shape shape);

/// [N, D, H, W] feature map -> [N, H*W + 1, D] tokens: class token at
/// position 0, then one D-vector per spatial position in row-major order,
/// plus the positional embedding. cls: [1, 1, D]; pos: [1, H*W + 1, D].
template <typename T>
BasicTensor<T> tokenize(BasicTape<T>& tape, const BasicTensor<T>& features,
                        const BasicTensor<T>& cls, const BasicTensor<T>& pos);

/// [N, T, D] -> [N, D] at token `index`.
template <typename T>
BasicTensor<T> select_token(BasicTape<T>& tape, const BasicTensor<T>& tokens, std::int64_t index);

// ---- losses (inputs are probabilities, clamped to [1e-7, 1 - 1e-7]) -----------

inline constexpr double kProbClamp = 1e-7;

/// Batch mean of -sum_i y_i log(p_i). y_true rows must be exactly one-hot.
template <typename T>
BasicTensor<T> categorical_cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& y_true,
                                         const BasicTensor<T>& probs);

/// Mean over all N*K terms of -[y log p + (1 - y) log(1 - p)].
template <typename T>
BasicTensor<T> binary_cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& y_true,
                                    const BasicTensor<T>& probs);

}  // namespace ops
}  // namespace direcnet
