#include "direcnet/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "direcnet/error.hpp"
#include "direcnet/image_io.hpp"
#include "direcnet/io.hpp"

namespace direcnet {

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("label vocabulary is empty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ConfigError("label vocabulary contains an empty name");
    if (n.find_first_of(";\t\n\r,") != std::string::npos) {
      throw ConfigError("label name '" + n + "' contains a reserved character");
    }
    if (!seen.insert(n).second) throw ConfigError("label vocabulary repeats '" + n + "'");
  }
}

LabelVocabulary LabelVocabulary::disaster_default() {
  return LabelVocabulary({"Earthquakes", "Floods", "Wildfire/Fire", "Normal"});
}

std::vector<std::string> LabelVocabulary::disaster_subset() {
  return {"Earthquakes", "Floods", "Wildfire/Fire"};
}

std::optional<std::size_t> LabelVocabulary::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t LabelVocabulary::index(std::string_view name) const {
  if (auto i = find(name)) return *i;
  std::string known;
  for (const auto& n : names_) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown class '" + std::string(name) + "' (vocabulary: " + known + ")");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: break;
  }
  return "unassigned";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val" || text == "validation") return Split::val;
  if (text == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

std::int64_t Sample::label_count() const {
  return std::count(labels.begin(), labels.end(), std::uint8_t{1});
}

std::int64_t Sample::class_index() const {
  if (label_count() != 1) {
    throw ContractError("sample '" + path.string() + "' has " + std::to_string(label_count()) +
                        " labels; a single label is required");
  }
  return std::find(labels.begin(), labels.end(), std::uint8_t{1}) - labels.begin();
}

std::filesystem::path DatasetManifest::resolve(const Sample& sample) const {
  return sample.path.is_absolute() ? sample.path : root / sample.path;
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == split) out.push_back(i);
  }
  return out;
}

std::size_t DatasetManifest::count(Split split) const { return indices(split).size(); }

bool DatasetManifest::fully_assigned() const {
  return std::none_of(samples.begin(), samples.end(),
                      [](const Sample& s) { return s.split == Split::unassigned; });
}

bool DatasetManifest::all_single_label() const {
  return std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.label_count() == 1; });
}

namespace {

std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void check_image(const std::filesystem::path& path, ImageCheck check, std::int64_t line) {
  const std::string where = "manifest line " + std::to_string(line) + ": ";
  if (check == ImageCheck::none) return;
  if (!std::filesystem::is_regular_file(path)) throw IoError(where + "image '" + path.string() + "' does not exist");
  if (check == ImageCheck::exists) return;
  try {
    (void)decode_image(path);
  } catch (const Error& e) {
    throw IoError(where + "image does not decode: " + e.what());
  }
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, const ManifestOptions& options) {
  DatasetManifest m;
  m.root = options.root.value_or(std::filesystem::current_path());
  m.vocabulary = options.vocabulary;
  std::map<std::string, std::int64_t> seen;
  std::int64_t line_no = 0;
  for (auto raw : split_on(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (trim(raw).empty() || trim(raw).front() == '#') continue;
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    const auto fields = split_on(raw, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw FormatError(where + "expected 'path<TAB>labels[<TAB>split]'");
    }
    Sample s;
    s.line = line_no;
    const std::string path(trim(fields[0]));
    if (path.empty()) throw FormatError(where + "empty path");
    s.path = path;
    if (auto [it, inserted] = seen.emplace(path, line_no); !inserted) {
      throw FormatError(where + "duplicate path '" + path + "' (first seen on line " +
                        std::to_string(it->second) + ")");
    }
    s.labels.assign(m.vocabulary.size(), 0);
    for (auto label : split_on(fields[1], ';')) {
      label = trim(label);
      if (label.empty()) throw FormatError(where + "empty label");
      const auto idx = m.vocabulary.find(label);
      if (!idx) throw FormatError(where + "unknown label '" + std::string(label) + "'");
      if (s.labels[*idx]) throw FormatError(where + "label '" + std::string(label) + "' listed twice");
      s.labels[*idx] = 1;
    }
    if (fields.size() == 3) {
      try {
        s.split = parse_split(trim(fields[2]));
      } catch (const ConfigError& e) {
        throw FormatError(where + e.what());
      }
    }
    check_image(m.resolve(s), options.check, line_no);
    m.samples.push_back(std::move(s));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, ManifestOptions options) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("manifest '" + path.string() + "' does not exist");
  if (!options.root) options.root = path.parent_path().empty() ? std::filesystem::current_path() : path.parent_path();
  try {
    return parse_manifest(read_file(path), options);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& s : manifest.samples) {
    out += s.path.string() + "\t";
    bool first = true;
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      if (!s.labels[i]) continue;
      out += (first ? "" : ";") + manifest.vocabulary.names()[i];
      first = false;
    }
    if (s.split != Split::unassigned) out += "\t" + to_string(s.split);
    out += "\n";
  }
  return out;
}

std::vector<std::string> assign_splits(DatasetManifest& manifest, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::map<std::vector<std::uint8_t>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) strata[manifest.samples[i].labels].push_back(i);

  const std::string seed_text = std::to_string(seed) + ":";
  std::vector<std::string> warnings;
  for (auto& [labels, members] : strata) {
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    for (auto idx : members) {
      const auto h = fnv1a(manifest.samples[idx].path.generic_string(), fnv1a(seed_text));
      ranked.emplace_back(h, idx);
    }
    // Ties on the hash fall back to the path, keeping the order total.
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return manifest.samples[a.second].path < manifest.samples[b.second].path;
    });
    const auto n = static_cast<std::int64_t>(ranked.size());
    const auto n_train = std::min<std::int64_t>(n, std::llround(f.train * double(n)));
    const auto n_val = std::min<std::int64_t>(n - n_train, std::llround(f.val * double(n)));
    for (std::int64_t r = 0; r < n; ++r) {
      manifest.samples[ranked[std::size_t(r)].second].split =
          r < n_train ? Split::train : (r < n_train + n_val ? Split::val : Split::test);
    }
    const std::int64_t counts[3] = {n_train, n_val, n - n_train - n_val};
    const double wanted[3] = {f.train, f.val, f.test};
    const char* names[3] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s) {
      if (counts[s] == 0 && wanted[s] > 0) {
        std::string set;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (labels[i]) set += (set.empty() ? "" : ";") + manifest.vocabulary.names()[i];
        }
        warnings.push_back("label set '" + set + "' (" + std::to_string(n) + " samples) leaves the " +
                           names[s] + " split empty");
      }
    }
  }
  return warnings;
}

std::string split_fingerprint(const DatasetManifest& manifest, Split split) {
  std::vector<std::string> paths;
  for (auto i : manifest.indices(split)) paths.push_back(manifest.samples[i].path.generic_string());
  std::sort(paths.begin(), paths.end());
  std::uint64_t h = fnv1a(to_string(split));
  for (const auto& p : paths) h = fnv1a(p + "\n", h);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx-%zu", static_cast<unsigned long long>(h), paths.size());
  return buf;
}

}  // namespace direcnet
