#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "direcnet/ops.hpp"
#include "direcnet/optim.hpp"
#include "direcnet/tape.hpp"
#include "direcnet/tensor.hpp"

namespace direcnet {

enum class HeadMode { single, multi };

std::string to_string(HeadMode mode);
HeadMode parse_head_mode(std::string_view text);

struct ModelConfig {
  std::int64_t input_height = 224;
  std::int64_t input_width = 224;
  std::int64_t input_channels = 3;
  std::int64_t embed_dim = 192;
  std::int64_t num_heads = 12;
  std::int64_t num_encoder_blocks = 2;
  std::int64_t num_classes = 4;
  std::int64_t mlp_dim = 192;
  HeadMode head_mode = HeadMode::single;
  double dropout_embed = 0.5;
  double dropout_head = 0.5;
  // Output widths of the convolutions before the final projection to
  // embed_dim: conv7x7, conv5x5, conv3x3, conv3x3, pw, pw, pw.
  std::array<std::int64_t, 7> conv_widths{16, 16, 32, 64, 128, 256, 512};
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  double ln_eps = 1e-6;
  // Nonlinearity after every convolution. Only "relu" is supported.
  std::string cnn_activation = "relu";

  // Throws ConfigError.
  void validate() const;
  std::int64_t grid_height() const { return input_height / 16; }
  std::int64_t grid_width() const { return input_width / 16; }
  std::int64_t token_count() const { return grid_height() * grid_width() + 1; }
};

/// One row of the layer table: a layer or a grouping node, its depth in
/// the hierarchy, the shapes it maps between and its own parameter count
/// (nullopt where the table prints "--").
struct ShapeTraceRow {
  std::string layer;
  int depth = 0;
  Shape input;
  Shape output;
  std::optional<std::int64_t> params;

  bool operator==(const ShapeTraceRow&) const = default;
};

using ShapeTrace = std::vector<ShapeTraceRow>;

template <typename T>
struct ConvParams {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
struct NormParams {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <typename T>
struct EncoderBlockParams {
  NormParams<T> attn_norm;
  ops::AttentionParams<T> attn;
  NormParams<T> mlp_norm;
  ConvParams<T> fc1;  // [mlp_dim, embed_dim]
  ConvParams<T> fc2;  // [embed_dim, mlp_dim]
};

/// Pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)) with a
/// GELU between the two affine maps.
template <typename T>
BasicTensor<T> encoder_block(BasicTape<T>& tape, const BasicTensor<T>& tokens,
                             const EncoderBlockParams<T>& block, std::int64_t heads,
                             double ln_eps);

/// The hybrid CNN + transformer classifier.
///
/// Parameters are registered under hierarchical names ("features.block3.pw1.weight",
/// "encoder.0.attn.q.weight", ...) so per-layer counts are prefix sums.
/// Not copyable: tensors are shared handles. Use clone() for a deep copy.
template <typename T>
class BasicModel {
 public:
  BasicModel(BasicModel&&) noexcept = default;
  BasicModel& operator=(BasicModel&&) noexcept = default;
  BasicModel(const BasicModel&) = delete;
  BasicModel& operator=(const BasicModel&) = delete;

  static BasicModel build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  const std::vector<BasicParameter<T>>& parameters() const { return params_; }
  // Throws ConfigError for unknown names.
  const BasicParameter<T>& parameter(std::string_view name) const;
  std::int64_t parameter_count() const;
  std::int64_t parameter_count(std::string_view prefix) const;

  // Named batch-norm layers in forward order.
  std::vector<std::pair<std::string, BatchNormState<T>*>> batch_norms();
  std::vector<std::pair<std::string, const BatchNormState<T>*>> batch_norms() const;
  void reset_running_stats();

  Rng& dropout_rng() { return dropout_rng_; }

  /// [N, C, H, W] images -> [N, embed_dim, H/16, W/16].
  BasicTensor<T> forward_features(BasicTape<T>& tape, const BasicTensor<T>& images,
                                  ShapeTrace* trace = nullptr);

  /// [N, C, H, W] images -> [N, classes] probabilities (softmax or sigmoid
  /// by head mode).
  BasicTensor<T> classify(BasicTape<T>& tape, const BasicTensor<T>& images,
                          ShapeTrace* trace = nullptr);

  /// Inference without recording history.
  BasicTensor<T> classify(const BasicTensor<T>& images);

  BasicModel clone() const;
  void zero_grad();

  BasicTensor<T>& cls_token() { return cls_token_; }
  BasicTensor<T>& positional_embedding() { return pos_embedding_; }
  std::vector<EncoderBlockParams<T>>& encoder_blocks() { return blocks_; }

 private:
  BasicModel() = default;
  void register_all();

  ModelConfig config_;
  Mode mode_ = Mode::train;
  std::uint64_t seed_ = 0;
  Rng dropout_rng_;

  // Feature extractor.
  ConvParams<T> b1_conv1_, b1_conv2_;
  ConvParams<T> b2_conv1_, b2_conv2_;
  ConvParams<T> b3_dw1_, b3_pw1_, b3_dw2_, b3_pw2_;
  ConvParams<T> b4_dw1_, b4_pw1_, b4_dw2_, b4_pw2_;
  std::array<BatchNormState<T>, 4> bn_;

  BasicTensor<T> cls_token_;
  BasicTensor<T> pos_embedding_;
  std::vector<EncoderBlockParams<T>> blocks_;
  NormParams<T> head_norm_;
  ConvParams<T> head_linear_;

  std::vector<BasicParameter<T>> params_;
};

using DiRecNetV2 = BasicModel<float>;
using DiRecNetV2Double = BasicModel<double>;

extern template class BasicModel<float>;
extern template class BasicModel<double>;

/// Replays a forward pass at the given batch size and returns every row of
/// the layer table. Running statistics and the dropout stream are left as
/// they were.
ShapeTrace shape_trace(DiRecNetV2& model, std::int64_t batch_size);

}  // namespace direcnet
