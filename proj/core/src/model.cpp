#include "direcnet/model.hpp"

#include <cmath>

#include "direcnet/error.hpp"

namespace direcnet {

std::string to_string(HeadMode mode) { return mode == HeadMode::single ? "single" : "multi"; }

HeadMode parse_head_mode(std::string_view text) {
  if (text == "single") return HeadMode::single;
  if (text == "multi") return HeadMode::multi;
  throw ConfigError("unknown head mode '" + std::string(text) + "' (expected single or multi)");
}

void ModelConfig::validate() const {
  auto positive = [](std::int64_t v, const char* what) {
    if (v <= 0) throw ConfigError(std::string("model config: ") + what + " must be positive");
  };
  positive(input_height, "input_height");
  positive(input_width, "input_width");
  positive(input_channels, "input_channels");
  positive(embed_dim, "embed_dim");
  positive(num_heads, "num_heads");
  positive(num_encoder_blocks, "num_encoder_blocks");
  positive(num_classes, "num_classes");
  positive(mlp_dim, "mlp_dim");
  for (auto w : conv_widths) positive(w, "conv width");
  if (input_height % 16 != 0 || input_width % 16 != 0) {
    throw ConfigError("model config: input extents must be divisible by 16 (four 2x poolings), got " +
                      std::to_string(input_height) + "x" + std::to_string(input_width));
  }
  if (embed_dim % num_heads != 0) {
    throw ConfigError("model config: embed_dim " + std::to_string(embed_dim) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (!(dropout_embed >= 0 && dropout_embed < 1) || !(dropout_head >= 0 && dropout_head < 1)) {
    throw ConfigError("model config: dropout rates must be in [0, 1)");
  }
  if (cnn_activation != "relu") {
    throw ConfigError("model config: unsupported cnn_activation '" + cnn_activation + "'");
  }
}

template <typename T>
BasicTensor<T> encoder_block(BasicTape<T>& tape, const BasicTensor<T>& tokens,
                             const EncoderBlockParams<T>& block, std::int64_t heads, double ln_eps) {
  auto normed = ops::layer_norm(tape, tokens, block.attn_norm.gamma, block.attn_norm.beta, ln_eps);
  auto attended = ops::multi_head_self_attention(tape, normed, block.attn, heads);
  auto x = ops::add(tape, tokens, attended);
  auto normed2 = ops::layer_norm(tape, x, block.mlp_norm.gamma, block.mlp_norm.beta, ln_eps);
  auto hidden = ops::gelu(tape, ops::linear(tape, normed2, block.fc1.weight, block.fc1.bias));
  auto mlp = ops::linear(tape, hidden, block.fc2.weight, block.fc2.bias);
  return ops::add(tape, x, mlp);
}

namespace {

template <typename T>
BasicTensor<T> uniform_fan_in(Shape shape, std::int64_t fan_in, Rng& rng) {
  BasicTensor<T> t(std::move(shape), true);
  const double bound = 1.0 / std::sqrt(double(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
BasicTensor<T> normal_init(Shape shape, double stddev, Rng& rng) {
  BasicTensor<T> t(std::move(shape), true);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
ConvParams<T> conv_init(std::int64_t c_out, std::int64_t c_in_per_group, std::int64_t k, Rng& rng) {
  return {uniform_fan_in<T>({c_out, c_in_per_group, k, k}, c_in_per_group * k * k, rng),
          BasicTensor<T>({c_out}, true)};
}

template <typename T>
ConvParams<T> linear_init(std::int64_t d_out, std::int64_t d_in, Rng& rng) {
  return {uniform_fan_in<T>({d_out, d_in}, d_in, rng), BasicTensor<T>({d_out}, true)};
}

template <typename T>
NormParams<T> norm_init(std::int64_t d) {
  return {BasicTensor<T>::full({d}, T(1)), BasicTensor<T>({d})};
}

}  // namespace

template <typename T>
BasicModel<T> BasicModel<T>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  BasicModel m;
  m.config_ = config;
  m.seed_ = seed;
  Rng rng(seed);
  // Separate stream so dropout draws never perturb initialization.
  m.dropout_rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);

  const auto& w = config.conv_widths;
  const std::int64_t c = config.input_channels, d = config.embed_dim;
  m.b1_conv1_ = conv_init<T>(w[0], c, 7, rng);
  m.b1_conv2_ = conv_init<T>(w[1], w[0], 5, rng);
  m.b2_conv1_ = conv_init<T>(w[2], w[1], 3, rng);
  m.b2_conv2_ = conv_init<T>(w[3], w[2], 3, rng);
  m.b3_dw1_ = conv_init<T>(w[3], 1, 3, rng);
  m.b3_pw1_ = conv_init<T>(w[4], w[3], 1, rng);
  m.b3_dw2_ = conv_init<T>(w[4], 1, 3, rng);
  m.b3_pw2_ = conv_init<T>(w[5], w[4], 1, rng);
  m.b4_dw1_ = conv_init<T>(w[5], 1, 3, rng);
  m.b4_pw1_ = conv_init<T>(w[6], w[5], 1, rng);
  m.b4_dw2_ = conv_init<T>(w[6], 1, 3, rng);
  m.b4_pw2_ = conv_init<T>(d, w[6], 1, rng);
  const std::array<std::int64_t, 4> bn_channels{w[1], w[3], w[5], d};
  for (std::size_t i = 0; i < 4; ++i) {
    m.bn_[i] = BatchNormState<T>::create(bn_channels[i]);
    m.bn_[i].eps = config.bn_eps;
    m.bn_[i].momentum = config.bn_momentum;
  }

  m.cls_token_ = normal_init<T>({1, 1, d}, 0.02, rng);
  m.pos_embedding_ = normal_init<T>({1, config.token_count(), d}, 0.02, rng);

  for (std::int64_t b = 0; b < config.num_encoder_blocks; ++b) {
    EncoderBlockParams<T> blk;
    blk.attn_norm = norm_init<T>(d);
    auto q = linear_init<T>(d, d, rng);
    auto k = linear_init<T>(d, d, rng);
    auto v = linear_init<T>(d, d, rng);
    auto o = linear_init<T>(d, d, rng);
    blk.attn = {q.weight, q.bias, k.weight, k.bias, v.weight, v.bias, o.weight, o.bias};
    blk.mlp_norm = norm_init<T>(d);
    blk.fc1 = linear_init<T>(config.mlp_dim, d, rng);
    blk.fc2 = linear_init<T>(d, config.mlp_dim, rng);
    m.blocks_.push_back(std::move(blk));
  }
  m.head_norm_ = norm_init<T>(d);
  m.head_linear_ = linear_init<T>(config.num_classes, d, rng);
  m.register_all();
  return m;
}

template <typename T>
void BasicModel<T>::register_all() {
  params_.clear();
  auto add = [this](std::string name, BasicTensor<T>& t) {
    t.set_requires_grad(true);
    params_.push_back({std::move(name), t});
  };
  auto add_conv = [&](const std::string& prefix, ConvParams<T>& p) {
    add(prefix + ".weight", p.weight);
    add(prefix + ".bias", p.bias);
  };
  auto add_norm = [&](const std::string& prefix, BasicTensor<T>& g, BasicTensor<T>& b) {
    add(prefix + ".gamma", g);
    add(prefix + ".beta", b);
  };
  add("cls_token", cls_token_);
  add("pos_embedding", pos_embedding_);
  add_conv("features.block1.conv1", b1_conv1_);
  add_conv("features.block1.conv2", b1_conv2_);
  add_norm("features.block1.bn", bn_[0].gamma, bn_[0].beta);
  add_conv("features.block2.conv1", b2_conv1_);
  add_conv("features.block2.conv2", b2_conv2_);
  add_norm("features.block2.bn", bn_[1].gamma, bn_[1].beta);
  add_conv("features.block3.dw1", b3_dw1_);
  add_conv("features.block3.pw1", b3_pw1_);
  add_conv("features.block3.dw2", b3_dw2_);
  add_conv("features.block3.pw2", b3_pw2_);
  add_norm("features.block3.bn", bn_[2].gamma, bn_[2].beta);
  add_conv("features.block4.dw1", b4_dw1_);
  add_conv("features.block4.pw1", b4_pw1_);
  add_conv("features.block4.dw2", b4_dw2_);
  add_conv("features.block4.pw2", b4_pw2_);
  add_norm("features.block4.bn", bn_[3].gamma, bn_[3].beta);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& blk = blocks_[b];
    const std::string p = "encoder." + std::to_string(b);
    add_norm(p + ".attn.norm", blk.attn_norm.gamma, blk.attn_norm.beta);
    add(p + ".attn.q.weight", blk.attn.wq);
    add(p + ".attn.q.bias", blk.attn.bq);
    add(p + ".attn.k.weight", blk.attn.wk);
    add(p + ".attn.k.bias", blk.attn.bk);
    add(p + ".attn.v.weight", blk.attn.wv);
    add(p + ".attn.v.bias", blk.attn.bv);
    add(p + ".attn.out.weight", blk.attn.wo);
    add(p + ".attn.out.bias", blk.attn.bo);
    add_norm(p + ".mlp.norm", blk.mlp_norm.gamma, blk.mlp_norm.beta);
    add_conv(p + ".mlp.fc1", blk.fc1);
    add_conv(p + ".mlp.fc2", blk.fc2);
  }
  add_norm("head.norm", head_norm_.gamma, head_norm_.beta);
  add_conv("head.linear", head_linear_);
}

template <typename T>
const BasicParameter<T>& BasicModel<T>::parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
std::int64_t BasicModel<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += static_cast<std::int64_t>(p.tensor.numel());
  return n;
}

template <typename T>
std::int64_t BasicModel<T>::parameter_count(std::string_view prefix) const {
  std::int64_t n = 0;
  for (const auto& p : params_) {
    const bool match = p.name == prefix ||
                       (p.name.size() > prefix.size() && p.name.compare(0, prefix.size(), prefix) == 0 &&
                        p.name[prefix.size()] == '.');
    if (match) n += static_cast<std::int64_t>(p.tensor.numel());
  }
  return n;
}

template <typename T>
std::vector<std::pair<std::string, BatchNormState<T>*>> BasicModel<T>::batch_norms() {
  std::vector<std::pair<std::string, BatchNormState<T>*>> out;
  for (std::size_t i = 0; i < bn_.size(); ++i) {
    out.emplace_back("features.block" + std::to_string(i + 1) + ".bn", &bn_[i]);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const BatchNormState<T>*>> BasicModel<T>::batch_norms() const {
  std::vector<std::pair<std::string, const BatchNormState<T>*>> out;
  for (std::size_t i = 0; i < bn_.size(); ++i) {
    out.emplace_back("features.block" + std::to_string(i + 1) + ".bn", &bn_[i]);
  }
  return out;
}

template <typename T>
void BasicModel<T>::reset_running_stats() {
  for (auto& bn : bn_) bn.reset_running_stats();
}

namespace {

class TraceWriter {
 public:
  explicit TraceWriter(ShapeTrace* trace) : trace_(trace) {}

  std::size_t row(std::string layer, int depth, Shape in, Shape out, std::optional<std::int64_t> params) {
    if (!trace_) return 0;
    trace_->push_back({std::move(layer), depth, std::move(in), std::move(out), params});
    return trace_->size() - 1;
  }
  void set_output(std::size_t index, Shape out) {
    if (trace_) (*trace_)[index].output = std::move(out);
  }
  bool active() const { return trace_ != nullptr; }

 private:
  ShapeTrace* trace_;
};

}  // namespace

template <typename T>
BasicTensor<T> BasicModel<T>::forward_features(BasicTape<T>& tape, const BasicTensor<T>& images,
                                               ShapeTrace* trace) {
  const Shape want{config_.input_channels, config_.input_height, config_.input_width};
  if (images.rank() != 4 || Shape(images.shape().begin() + 1, images.shape().end()) != want) {
    throw ShapeError("forward_features: expected [N, " + std::to_string(want[0]) + ", " +
                     std::to_string(want[1]) + ", " + std::to_string(want[2]) + "] images, got " +
                     shape_str(images.shape()));
  }
  TraceWriter tw(trace);
  const std::int64_t n = images.dim(0);
  const std::size_t group = tw.row("DiRecNet Feature Extractor", 1, images.shape(), {}, std::nullopt);

  auto count = [this](const std::string& prefix) { return parameter_count(prefix); };
  BasicTensor<T> x = images;
  auto conv = [&](ConvParams<T>& p, std::int64_t pad, const std::string& name) {
    auto y = ops::conv2d(tape, x, p.weight, p.bias, {1, pad, true});
    tw.row("Conv2d", 2, x.shape(), y.shape(), count(name));
    x = std::move(y);
  };
  auto dw = [&](ConvParams<T>& p, const std::string& name) {
    auto y = ops::depthwise_conv2d(tape, x, p.weight, p.bias, true);
    tw.row("DepthwiseConv2d", 2, x.shape(), y.shape(), count(name));
    x = std::move(y);
  };
  auto pw = [&](ConvParams<T>& p, const std::string& name) {
    auto y = ops::pointwise_conv2d(tape, x, p.weight, p.bias, true);
    tw.row("PointwiseConv2d", 2, x.shape(), y.shape(), count(name));
    x = std::move(y);
  };
  auto bn_pool = [&](std::size_t i) {
    auto y = ops::batch_norm2d(tape, x, bn_[i], mode_);
    tw.row("BatchNorm2d", 2, x.shape(), y.shape(), count("features.block" + std::to_string(i + 1) + ".bn"));
    auto z = ops::max_pool2d(tape, y);
    tw.row("MaxPool2d", 2, y.shape(), z.shape(), std::nullopt);
    x = std::move(z);
  };

  conv(b1_conv1_, 3, "features.block1.conv1");
  conv(b1_conv2_, 2, "features.block1.conv2");
  bn_pool(0);
  conv(b2_conv1_, 1, "features.block2.conv1");
  conv(b2_conv2_, 1, "features.block2.conv2");
  bn_pool(1);
  dw(b3_dw1_, "features.block3.dw1");
  pw(b3_pw1_, "features.block3.pw1");
  dw(b3_dw2_, "features.block3.dw2");
  pw(b3_pw2_, "features.block3.pw2");
  bn_pool(2);
  dw(b4_dw1_, "features.block4.dw1");
  pw(b4_pw1_, "features.block4.pw1");
  dw(b4_dw2_, "features.block4.dw2");
  pw(b4_pw2_, "features.block4.pw2");
  bn_pool(3);
  tw.set_output(group, {n, x.dim(2) * x.dim(3), x.dim(1)});
  return x;
}

template <typename T>
BasicTensor<T> BasicModel<T>::classify(BasicTape<T>& tape, const BasicTensor<T>& images, ShapeTrace* trace) {
  TraceWriter tw(trace);
  const std::size_t top = tw.row("DiRecNetV2", 0, images.shape(), {}, parameter_count("cls_token") +
                                                                          parameter_count("pos_embedding"));
  auto features = forward_features(tape, images, trace);
  auto tokens = ops::tokenize(tape, features, cls_token_, pos_embedding_);
  tw.row("Flatten", 2, features.shape(), tokens.shape(), std::nullopt);
  auto dropped = ops::dropout(tape, tokens, config_.dropout_embed, mode_, dropout_rng_);
  tw.row("Dropout", 1, tokens.shape(), dropped.shape(), std::nullopt);

  const std::size_t enc = tw.row("Transformer Encoder Blocks", 1, dropped.shape(), {}, std::nullopt);
  BasicTensor<T> x = dropped;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string prefix = "encoder." + std::to_string(b);
    tw.row("TransformerEncoderBlock (" + std::to_string(b + 1) + ")", 2, x.shape(), x.shape(), std::nullopt);
    if (tw.active()) {
      tw.row("MultiheadSelfAttentionBlock", 3, x.shape(), x.shape(), parameter_count(prefix + ".attn"));
      tw.row("MLPBlock", 3, x.shape(), x.shape(), parameter_count(prefix + ".mlp"));
    }
    x = encoder_block(tape, x, blocks_[b], config_.num_heads, config_.ln_eps);
  }
  tw.set_output(enc, x.shape());

  const std::size_t head = tw.row("Classifier Head", 1, x.shape(), {}, std::nullopt);
  auto cls = ops::select_token(tape, x, 0);
  auto normed = ops::layer_norm(tape, cls, head_norm_.gamma, head_norm_.beta, config_.ln_eps);
  tw.row("LayerNorm", 2, cls.shape(), normed.shape(), parameter_count("head.norm"));
  auto dropped_head = ops::dropout(tape, normed, config_.dropout_head, mode_, dropout_rng_);
  tw.row("Dropout", 2, normed.shape(), dropped_head.shape(), std::nullopt);
  auto logits = ops::linear(tape, dropped_head, head_linear_.weight, head_linear_.bias);
  tw.row("Linear", 2, dropped_head.shape(), logits.shape(), parameter_count("head.linear"));
  auto probs = config_.head_mode == HeadMode::single ? ops::softmax(tape, logits) : ops::sigmoid(tape, logits);
  tw.row("Softmax/Sigmoid", 2, logits.shape(), probs.shape(), std::nullopt);
  tw.set_output(head, probs.shape());
  tw.set_output(top, probs.shape());
  return probs;
}

template <typename T>
BasicTensor<T> BasicModel<T>::classify(const BasicTensor<T>& images) {
  BasicTape<T> tape(false);
  return classify(tape, images);
}

template <typename T>
BasicModel<T> BasicModel<T>::clone() const {
  BasicModel copy = build(config_, seed_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto src = params_[i].tensor.data();
    auto dst = copy.params_[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  for (std::size_t i = 0; i < bn_.size(); ++i) {
    copy.bn_[i].running_mean = bn_[i].running_mean;
    copy.bn_[i].running_var = bn_[i].running_var;
    copy.bn_[i].has_running_stats = bn_[i].has_running_stats;
  }
  copy.mode_ = mode_;
  copy.dropout_rng_ = dropout_rng_;
  return copy;
}

template <typename T>
void BasicModel<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

ShapeTrace shape_trace(DiRecNetV2& model, std::int64_t batch_size) {
  if (batch_size < 1) throw ConfigError("shape_trace: batch size must be >= 1");
  const auto& cfg = model.config();
  // Train mode works regardless of running-stat state; snapshot what a
  // train-mode pass mutates and put it back afterwards.
  std::vector<BatchNormState<float>> saved;
  for (auto& [name, bn] : model.batch_norms()) saved.push_back(*bn);
  const Rng saved_rng = model.dropout_rng();
  const Mode saved_mode = model.mode();

  ShapeTrace trace;
  model.set_mode(Mode::train);
  Tape tape(false);
  Tensor images({batch_size, cfg.input_channels, cfg.input_height, cfg.input_width});
  model.classify(tape, images, &trace);

  auto bns = model.batch_norms();
  for (std::size_t i = 0; i < bns.size(); ++i) *bns[i].second = saved[i];
  model.dropout_rng() = saved_rng;
  model.set_mode(saved_mode);
  return trace;
}

template BasicTensor<float> encoder_block(BasicTape<float>&, const BasicTensor<float>&,
                                          const EncoderBlockParams<float>&, std::int64_t, double);
template BasicTensor<double> encoder_block(BasicTape<double>&, const BasicTensor<double>&,
                                           const EncoderBlockParams<double>&, std::int64_t, double);
template class BasicModel<float>;
template class BasicModel<double>;

}  // namespace direcnet
