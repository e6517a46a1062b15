#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "direcnet/augment.hpp"
#include "direcnet/checkpoint.hpp"
#include "direcnet/manifest.hpp"
#include "direcnet/metrics.hpp"
#include "direcnet/model.hpp"
#include "direcnet/preprocess.hpp"

namespace direcnet {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::int64_t batch_size = 32;
  std::int64_t epochs = 300;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> clip_norm;
  std::uint64_t seed = 0;
  HeadMode head_mode = HeadMode::single;
  bool augment = true;
  AugmentationConfig augmentation;
  // best.ckpt, last.ckpt, train_log.csv and channel_stats.txt are written
  // here when set.
  std::optional<std::filesystem::path> checkpoint_dir;
  // Ends the run after the first epoch whose running train accuracy
  // reaches this value. Off unless set.
  std::optional<double> stop_at_train_accuracy;
  // Decoded, resized images kept in memory.
  std::int64_t cache_limit = 4096;
  // Continue numbering from here (used when resuming).
  std::int64_t first_epoch = 1;
  // Use these instead of computing statistics over the training split.
  std::optional<ChannelStats> channel_stats;

  // Throws ConfigError.
  void validate() const;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double train_loss = 0;
  // Running accuracy over the epoch's training batches (train mode).
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double seconds = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  // Epoch number (not index) with the highest validation accuracy, earliest
  // on ties; -1 before any epoch completes.
  std::int64_t best_epoch = -1;
  std::vector<std::string> notes;

  // epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds,best
  std::string to_csv() const;
};

using TrainLogger = std::function<void(const std::string&)>;

struct TrainResult {
  TrainLog log;
  ChannelStats channel_stats;
  double best_validation_accuracy = 0;
  // The retained model in archive form (also written as best.ckpt).
  Archive best;
  std::optional<std::filesystem::path> best_checkpoint;
  std::optional<std::filesystem::path> last_checkpoint;
};

/// Decodes, resizes and standardizes manifest samples, keeping up to
/// `cache_limit` of them in memory.
class ImageStore {
 public:
  ImageStore(const DatasetManifest& manifest, ChannelStats stats, std::int64_t cache_limit = 4096,
             std::int64_t size = kInputSize);

  const ChannelStats& stats() const { return stats_; }
  // [3, size, size]; throws IoError / FormatError for unreadable images.
  Tensor load(std::size_t sample);
  Tensor batch(std::span<const std::size_t> samples);

 private:
  const DatasetManifest* manifest_;
  ChannelStats stats_;
  std::int64_t cache_limit_;
  std::int64_t size_;
  std::map<std::size_t, Tensor> cache_;
};

/// Statistics over the given samples; undecodable images are reported
/// through `logger` and removed from `samples`.
ChannelStats compute_channel_stats(const DatasetManifest& manifest, std::vector<std::size_t>& samples,
                                   std::int64_t size = kInputSize, const TrainLogger& logger = {});
ChannelStats compute_channel_stats(const DatasetManifest& manifest, Split split,
                                   std::int64_t size = kInputSize);

/// Fraction of rows counted correct. A single-label row is correct when its
/// argmax (lowest index on ties) is the hot index; a multi-label row when
/// the set of probabilities strictly above 0.5 equals its label set.
/// probs and labels are [N, K]. Throws ContractError for empty input.
double prediction_accuracy(std::span<const float> probs, std::span<const std::uint8_t> labels,
                           std::size_t classes);

/// Eval-mode class probabilities [N * K] for the given samples. The model's
/// mode is restored afterwards.
std::vector<float> predict_probabilities(DiRecNetV2& model, ImageStore& store,
                                         std::span<const std::size_t> samples, std::int64_t batch_size = 32);

double validation_accuracy(DiRecNetV2& model, ImageStore& store, const DatasetManifest& manifest,
                           std::span<const std::size_t> samples, std::int64_t batch_size = 32);

/// Adam training with per-epoch validation and best-model retention (see
/// TrainConfig). Throws ConfigError for empty splits or mismatched head
/// mode / class count, ValueError for a non-finite loss.
TrainResult train(DiRecNetV2& model, const DatasetManifest& manifest, const TrainConfig& config,
                  const TrainLogger& logger = {});

struct EvaluateOptions {
  Split split = Split::test;
  HeadMode mode = HeadMode::single;
  double threshold = 0.5;
  // Multi mode: class names to score; empty means all.
  std::vector<std::string> classes;
  std::int64_t batch_size = 32;
};

/// Eval-mode inference over one split, scored with single_label_metrics or
/// multilabel_metrics. Throws ConfigError when the checkpoint's class names
/// differ from the manifest vocabulary.
MetricsReport evaluate(LoadedCheckpoint& checkpoint, const DatasetManifest& manifest,
                       const EvaluateOptions& options);

}  // namespace direcnet
