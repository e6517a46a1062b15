#include "direcnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "direcnet/bench.hpp"
#include "direcnet/error.hpp"
#include "direcnet/io.hpp"
#include "direcnet/optim.hpp"

namespace direcnet {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning rate must be finite and >= 0");
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("train: Adam betas must be in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("train: Adam eps must be positive");
  if (clip_norm && !(*clip_norm > 0)) throw ConfigError("train: clip norm must be positive");
  if (stop_at_train_accuracy && !(*stop_at_train_accuracy > 0 && *stop_at_train_accuracy <= 1)) {
    throw ConfigError("train: stop-at train accuracy must be in (0, 1]");
  }
  if (cache_limit < 0) throw ConfigError("train: cache limit must be >= 0");
  if (first_epoch < 1) throw ConfigError("train: first epoch must be >= 1");
  augmentation.validate();
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds,best\n";
  char buf[256];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%lld,%.6f,%.6f,%.6f,%.6f,%.3f,%d\n", static_cast<long long>(e.epoch),
                  e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.seconds, e.epoch == best_epoch);
    out += buf;
  }
  return out;
}

ImageStore::ImageStore(const DatasetManifest& manifest, ChannelStats stats, std::int64_t cache_limit,
                       std::int64_t size)
    : manifest_(&manifest), stats_(std::move(stats)), cache_limit_(cache_limit), size_(size) {}

Tensor ImageStore::load(std::size_t sample) {
  if (auto it = cache_.find(sample); it != cache_.end()) return it->second;
  if (sample >= manifest_->samples.size()) throw ContractError("image store: sample index out of range");
  Tensor t = preprocess(decode_image(manifest_->resolve(manifest_->samples[sample])), stats_, size_);
  if (static_cast<std::int64_t>(cache_.size()) < cache_limit_) cache_.emplace(sample, t);
  return t;
}

Tensor ImageStore::batch(std::span<const std::size_t> samples) {
  std::vector<Tensor> images;
  images.reserve(samples.size());
  for (auto s : samples) images.push_back(load(s));
  return stack_images(images);
}

ChannelStats compute_channel_stats(const DatasetManifest& manifest, std::vector<std::size_t>& samples,
                                   std::int64_t size, const TrainLogger& logger) {
  ChannelStatsAccumulator acc;
  std::vector<std::size_t> kept;
  for (auto i : samples) {
    const auto path = manifest.resolve(manifest.samples[i]);
    try {
      acc.add(prepare_unstandardized(decode_image(path), size));
      kept.push_back(i);
    } catch (const Error& e) {
      if (logger) logger("skipping undecodable image (manifest line " + std::to_string(manifest.samples[i].line) +
                         "): " + e.what());
    }
  }
  samples = std::move(kept);
  if (acc.images() == 0) throw ConfigError("channel statistics: no decodable images in the split");
  DatasetManifest view{manifest.root, manifest.vocabulary, {}};
  for (auto i : samples) view.samples.push_back(manifest.samples[i]);
  for (auto& s : view.samples) s.split = Split::train;
  return acc.finish(split_fingerprint(view, Split::train));
}

ChannelStats compute_channel_stats(const DatasetManifest& manifest, Split split, std::int64_t size) {
  auto idx = manifest.indices(split);
  if (idx.empty()) throw ConfigError("channel statistics: split '" + to_string(split) + "' is empty");
  const std::size_t before = idx.size();
  ChannelStats stats = compute_channel_stats(manifest, idx, size);
  if (idx.size() != before) throw IoError("channel statistics: split contains undecodable images");
  return stats;
}

double prediction_accuracy(std::span<const float> probs, std::span<const std::uint8_t> labels, std::size_t classes) {
  if (classes == 0 || labels.empty() || labels.size() % classes != 0 || probs.size() != labels.size()) {
    throw ContractError("prediction_accuracy: probabilities and labels must both be non-empty [N, K]");
  }
  const std::size_t n = labels.size() / classes;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = probs.subspan(i * classes, classes);
    const auto lab = labels.subspan(i * classes, classes);
    const auto hot = std::count(lab.begin(), lab.end(), std::uint8_t{1});
    if (hot == 1) {
      correct += lab[argmax(row)] == 1;
    } else {
      bool match = true;
      for (std::size_t k = 0; k < classes; ++k) match = match && ((row[k] > 0.5f) == (lab[k] == 1));
      correct += match;
    }
  }
  return double(correct) / double(n);
}

namespace {

class ModeGuard {
 public:
  ModeGuard(DiRecNetV2& model, Mode mode) : model_(model), previous_(model.mode()) { model.set_mode(mode); }
  ~ModeGuard() { model_.set_mode(previous_); }
  ModeGuard(const ModeGuard&) = delete;
  ModeGuard& operator=(const ModeGuard&) = delete;

 private:
  DiRecNetV2& model_;
  Mode previous_;
};

std::vector<std::uint8_t> gather_labels(const DatasetManifest& m, std::span<const std::size_t> samples) {
  std::vector<std::uint8_t> out;
  out.reserve(samples.size() * m.vocabulary.size());
  for (auto i : samples) out.insert(out.end(), m.samples[i].labels.begin(), m.samples[i].labels.end());
  return out;
}

Tensor label_tensor(const std::vector<std::uint8_t>& labels, std::int64_t rows, std::int64_t classes) {
  Tensor y({rows, classes});
  for (std::size_t i = 0; i < labels.size(); ++i) y.data()[i] = labels[i];
  return y;
}

double mean_loss(HeadMode mode, std::span<const float> probs, std::span<const std::uint8_t> labels,
                 std::size_t classes) {
  const double lo = ops::kProbClamp, hi = 1 - ops::kProbClamp;
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(double(probs[i]), lo, hi);
    if (mode == HeadMode::single) {
      if (labels[i]) total -= std::log(p);
    } else {
      total -= labels[i] ? std::log(p) : std::log(1 - p);
    }
  }
  const double rows = double(probs.size() / classes);
  return mode == HeadMode::single ? total / rows : total / double(probs.size());
}

}  // namespace

std::vector<float> predict_probabilities(DiRecNetV2& model, ImageStore& store, std::span<const std::size_t> samples,
                                         std::int64_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  ModeGuard guard(model, Mode::eval);
  std::vector<float> out;
  for (std::size_t start = 0; start < samples.size(); start += std::size_t(batch_size)) {
    const auto chunk = samples.subspan(start, std::min<std::size_t>(std::size_t(batch_size), samples.size() - start));
    const Tensor probs = model.classify(store.batch(chunk));
    out.insert(out.end(), probs.data().begin(), probs.data().end());
  }
  return out;
}

double validation_accuracy(DiRecNetV2& model, ImageStore& store, const DatasetManifest& manifest,
                           std::span<const std::size_t> samples, std::int64_t batch_size) {
  if (samples.empty()) throw ConfigError("validation accuracy: empty split");
  const auto probs = predict_probabilities(model, store, samples, batch_size);
  return prediction_accuracy(probs, gather_labels(manifest, samples), manifest.vocabulary.size());
}

TrainResult train(DiRecNetV2& model, const DatasetManifest& manifest, const TrainConfig& config,
                  const TrainLogger& logger) {
  config.validate();
  auto note = [&](TrainResult& r, const std::string& msg) {
    r.log.notes.push_back(msg);
    if (logger) logger(msg);
  };
  if (model.config().head_mode != config.head_mode) {
    throw ConfigError("train: model head mode is " + to_string(model.config().head_mode) + " but training asks for " +
                      to_string(config.head_mode));
  }
  const std::size_t classes = manifest.vocabulary.size();
  if (static_cast<std::size_t>(model.config().num_classes) != classes) {
    throw ConfigError("train: model has " + std::to_string(model.config().num_classes) + " outputs but the manifest has " +
                      std::to_string(classes) + " classes");
  }
  auto train_idx = manifest.indices(Split::train);
  auto val_idx = manifest.indices(Split::val);
  if (train_idx.empty()) throw ConfigError("train: the train split is empty");
  if (val_idx.empty()) throw ConfigError("train: the validation split is empty");
  if (config.head_mode == HeadMode::single) {
    for (auto i : train_idx) (void)manifest.samples[i].class_index();
  }

  TrainResult result;
  if (config.channel_stats) {
    result.channel_stats = *config.channel_stats;
  } else {
    result.channel_stats = compute_channel_stats(manifest, train_idx, model.config().input_height,
                                                 [&](const std::string& m) { note(result, m); });
  }
  ImageStore store(manifest, result.channel_stats, config.cache_limit, model.config().input_height);
  {
    std::vector<std::size_t> ok;
    for (auto i : val_idx) {
      try {
        (void)store.load(i);
        ok.push_back(i);
      } catch (const Error& e) {
        note(result, std::string("skipping undecodable validation image: ") + e.what());
      }
    }
    val_idx = std::move(ok);
    if (val_idx.empty()) throw ConfigError("train: no decodable validation images");
  }
  if (train_idx.size() < 2) throw ConfigError("train: batch norm needs at least two training images");
  const auto val_labels = gather_labels(manifest, val_idx);

  std::vector<std::string> class_names = manifest.vocabulary.names();
  AdamOptions adam{config.learning_rate, config.beta1, config.beta2, config.adam_eps, config.clip_norm};
  Adam optimizer(model.parameters(), adam);
  Rng shuffle_rng(config.seed ^ 0x5bd1e9955bd1e995ULL);
  Rng augment_rng(config.seed ^ 0xc2b2ae3d27d4eb4fULL);

  std::optional<std::filesystem::path> dir = config.checkpoint_dir;
  if (dir) {
    std::filesystem::create_directories(*dir);
    save_channel_stats(*dir / "channel_stats.txt", result.channel_stats);
  }
  double best_acc = -1;
  const std::int64_t n_classes = static_cast<std::int64_t>(classes);

  for (std::int64_t e = 0; e < config.epochs; ++e) {
    const std::int64_t epoch = config.first_epoch + e;
    const double t0 = steady_seconds();
    model.set_mode(Mode::train);
    std::vector<std::size_t> order = train_idx;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0;
    std::int64_t seen = 0, correct = 0, batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch_size)) {
      ++batch_no;
      const std::size_t count = std::min<std::size_t>(std::size_t(config.batch_size), order.size() - start);
      const std::span<const std::size_t> chunk(order.data() + start, count);
      if (count == 1) {
        note(result, "epoch " + std::to_string(epoch) + ": skipping a final batch of one image");
        continue;
      }
      std::vector<Tensor> images;
      for (auto i : chunk) {
        Tensor img = store.load(i);
        images.push_back(config.augment ? augment(img, config.augmentation, augment_rng) : img);
      }
      const auto labels = gather_labels(manifest, chunk);
      const Tensor x = stack_images(images);
      const Tensor y = label_tensor(labels, std::int64_t(count), n_classes);

      Tape tape;
      const Tensor probs = model.classify(tape, x);
      const Tensor loss = config.head_mode == HeadMode::single ? ops::categorical_cross_entropy(tape, y, probs)
                                                               : ops::binary_cross_entropy(tape, y, probs);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw ValueError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      }
      tape.backward(loss);
      optimizer.step();
      optimizer.zero_grad();

      loss_sum += lv * double(count);
      seen += std::int64_t(count);
      correct += std::llround(prediction_accuracy(probs.data(), labels, classes) * double(count));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = seen ? loss_sum / double(seen) : 0.0;
    rec.train_accuracy = seen ? double(correct) / double(seen) : 0.0;
    const auto val_probs = predict_probabilities(model, store, val_idx, config.batch_size);
    rec.val_accuracy = prediction_accuracy(val_probs, val_labels, classes);
    rec.val_loss = mean_loss(config.head_mode, val_probs, val_labels, classes);
    rec.seconds = steady_seconds() - t0;
    result.log.epochs.push_back(rec);

    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      result.log.best_epoch = epoch;
      result.best = make_archive(model, {class_names, result.channel_stats, epoch, rec.val_accuracy});
      if (dir) {
        write_archive(*dir / "best.ckpt", result.best);
        result.best_checkpoint = *dir / "best.ckpt";
      }
    }
    if (logger) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "epoch %lld  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f  (%.1fs)",
                    static_cast<long long>(epoch), rec.train_loss, rec.train_accuracy, rec.val_loss,
                    rec.val_accuracy, rec.seconds);
      logger(buf);
    }
    if (dir) write_file_atomic(*dir / "train_log.csv", result.log.to_csv());
    if (config.stop_at_train_accuracy && rec.train_accuracy >= *config.stop_at_train_accuracy) {
      note(result, "epoch " + std::to_string(epoch) + ": train accuracy reached the stop target");
      break;
    }
  }
  result.best_validation_accuracy = best_acc;
  if (dir) {
    const auto& last = result.log.epochs.back();
    save_checkpoint(model, {class_names, result.channel_stats, last.epoch, last.val_accuracy}, *dir / "last.ckpt");
    result.last_checkpoint = *dir / "last.ckpt";
    write_file_atomic(*dir / "train_log.csv", result.log.to_csv());
  }
  model.set_mode(Mode::eval);
  return result;
}

MetricsReport evaluate(LoadedCheckpoint& checkpoint, const DatasetManifest& manifest, const EvaluateOptions& options) {
  if (checkpoint.info.class_names != manifest.vocabulary.names()) {
    std::string ck, mf;
    for (const auto& n : checkpoint.info.class_names) ck += (ck.empty() ? "" : ";") + n;
    for (const auto& n : manifest.vocabulary.names()) mf += (mf.empty() ? "" : ";") + n;
    throw ConfigError("vocabulary mismatch: checkpoint has [" + ck + "], manifest has [" + mf + "]");
  }
  if (!checkpoint.info.channel_stats) throw StateError("checkpoint has no channel statistics");
  const auto idx = manifest.indices(options.split);
  if (idx.empty()) throw ConfigError("evaluate: split '" + to_string(options.split) + "' is empty");
  ImageStore store(manifest, *checkpoint.info.channel_stats, 0, checkpoint.model.config().input_height);
  const auto probs = predict_probabilities(checkpoint.model, store, idx, options.batch_size);
  const std::size_t k = manifest.vocabulary.size();
  const auto& names = manifest.vocabulary.names();
  if (options.mode == HeadMode::single) {
    std::vector<std::int64_t> truth;
    for (auto i : idx) truth.push_back(manifest.samples[i].class_index());
    return single_label_metrics<float>(truth, probs, k, names);
  }
  std::vector<std::size_t> subset;
  if (options.classes.empty()) {
    subset.resize(k);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
  } else {
    for (const auto& c : options.classes) subset.push_back(manifest.vocabulary.index(c));
  }
  return multilabel_metrics<float>(gather_labels(manifest, idx), probs, k, options.threshold, subset, names);
}

}  // namespace direcnet
