#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "direcnet/model.hpp"
#include "direcnet/preprocess.hpp"

namespace direcnet {

/// Raw archive contents. Byte layout (all integers little-endian):
///
///   magic    8 bytes  "DRN2CKPT"
///   version  u32
///   meta_len u64, then meta_len bytes of "key=value\n" lines
///   count    u32, then `count` records:
///              name_len u32, name bytes, dtype u8 (0 = f32, 1 = f64),
///              rank u8, rank x u64 extents, byte_count u64, raw values
///   checksum u64  FNV-1a over every preceding byte
struct ArchiveRecord {
  std::string name;
  DType dtype = DType::f32;
  Shape shape;
  std::string bytes;
};

struct Archive {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<ArchiveRecord> records;

  // nullptr when absent.
  const std::string* find_metadata(std::string_view key) const;
  const ArchiveRecord* find_record(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_archive(const Archive& archive);
// Throws FormatError on bad magic, unsupported version, truncation or a
// checksum mismatch.
Archive decode_archive(const std::string& bytes);
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Everything stored next to the weights.
struct CheckpointInfo {
  std::vector<std::string> class_names;
  std::optional<ChannelStats> channel_stats;
  std::int64_t epoch = -1;
  std::optional<double> validation_accuracy;
};

struct LoadedCheckpoint {
  DiRecNetV2 model;
  CheckpointInfo info;
};

Archive make_archive(const DiRecNetV2& model, const CheckpointInfo& info);
/// Rebuilds the model from the stored config and seed, then overwrites
/// every parameter and running statistic. Missing, unexpected or
/// mis-shaped records raise FormatError naming the record.
LoadedCheckpoint restore_archive(const Archive& archive);

// Atomic (write-then-rename).
void save_checkpoint(const DiRecNetV2& model, const CheckpointInfo& info,
                     const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace direcnet
