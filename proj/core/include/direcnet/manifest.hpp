#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace direcnet {

/// Ordered class names. The position of a name is the index of the output
/// unit it binds to.
class LabelVocabulary {
 public:
  // Throws ConfigError on an empty list, empty names, duplicates or names
  // containing ';', tab or newline.
  explicit LabelVocabulary(std::vector<std::string> names);

  // Earthquakes, Floods, Wildfire/Fire, Normal.
  static LabelVocabulary disaster_default();
  // The three disaster classes scored in multi-label evaluation.
  static std::vector<std::string> disaster_subset();

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::optional<std::size_t> find(std::string_view name) const;
  // Throws ConfigError naming the unknown class.
  std::size_t index(std::string_view name) const;

  bool operator==(const LabelVocabulary&) const = default;

 private:
  std::vector<std::string> names_;
};

enum class Split : std::uint8_t { unassigned, train, val, test };

std::string to_string(Split split);
// Accepts train, val, validation, test.
Split parse_split(std::string_view text);

struct Sample {
  // As written in the manifest (relative paths are resolved against the
  // manifest root).
  std::filesystem::path path;
  // Multi-hot over the vocabulary.
  std::vector<std::uint8_t> labels;
  Split split = Split::unassigned;
  std::int64_t line = 0;

  std::int64_t label_count() const;
  // Index of the single positive label; throws ContractError when the
  // sample is not single-label.
  std::int64_t class_index() const;
};

struct DatasetManifest {
  std::filesystem::path root;
  LabelVocabulary vocabulary = LabelVocabulary::disaster_default();
  std::vector<Sample> samples;

  std::filesystem::path resolve(const Sample& sample) const;
  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const;
  bool fully_assigned() const;
  bool all_single_label() const;
};

enum class ImageCheck { none, exists, decode };

struct ManifestOptions {
  // Defaults to the directory containing the manifest file.
  std::optional<std::filesystem::path> root;
  LabelVocabulary vocabulary = LabelVocabulary::disaster_default();
  ImageCheck check = ImageCheck::decode;
};

/// Parses `path<TAB>label[;label...][<TAB>train|val|test]` lines; blank
/// lines and lines starting with '#' are skipped. Errors carry the line
/// number: FormatError for malformed lines, unknown labels and duplicate
/// paths, IoError for missing or undecodable images.
DatasetManifest parse_manifest(std::string_view text, const ManifestOptions& options);
DatasetManifest load_manifest(const std::filesystem::path& path, ManifestOptions options = {});

std::string format_manifest(const DatasetManifest& manifest);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Stratified assignment. Samples are grouped by their label set; within a
/// group they are ranked by a hash of (path, seed) and the first
/// round(train * n) go to train, the next round(val * n) to val, the rest to
/// test. Returns warnings for groups that leave a split empty. Throws
/// ConfigError when the fractions are negative or do not sum to 1.
std::vector<std::string> assign_splits(DatasetManifest& manifest, const SplitFractions& fractions,
                                       std::uint64_t seed);

// Stable identifier of the samples in one split (order independent).
std::string split_fingerprint(const DatasetManifest& manifest, Split split);

}  // namespace direcnet
