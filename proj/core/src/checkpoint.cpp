#include "direcnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <set>
#include <sstream>

#include "direcnet/error.hpp"
#include "direcnet/io.hpp"

namespace direcnet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'R', 'N', '2', 'C', 'K', 'P', 'T'};

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    U value;
    std::memcpy(&value, take(sizeof(U), what).data(), sizeof(U));
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
ArchiveRecord record_from(std::string name, const Shape& shape, std::span<const T> values) {
  ArchiveRecord r{std::move(name), dtype_of<T>::value, shape, {}};
  r.bytes.assign(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  return r;
}

void copy_into(const ArchiveRecord& r, const Shape& expected, std::span<float> dst) {
  if (r.dtype != DType::f32) {
    throw FormatError("checkpoint record '" + r.name + "' has a 64-bit dtype; expected f32");
  }
  if (r.shape != expected) {
    throw FormatError("checkpoint record '" + r.name + "' has shape " + shape_str(r.shape) +
                      ", model expects " + shape_str(expected));
  }
  if (r.bytes.size() != dst.size_bytes()) {
    throw FormatError("checkpoint record '" + r.name + "' holds " + std::to_string(r.bytes.size()) +
                      " bytes, expected " + std::to_string(dst.size_bytes()));
  }
  std::memcpy(dst.data(), r.bytes.data(), r.bytes.size());
}

const std::string& require(const Archive& a, const std::string& key) {
  const std::string* v = a.find_metadata(key);
  if (!v) throw FormatError("checkpoint metadata is missing '" + key + "'");
  return *v;
}

}  // namespace

const std::string* Archive::find_metadata(std::string_view key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return &v;
  }
  return nullptr;
}

const ArchiveRecord* Archive::find_record(std::string_view name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::string encode_archive(const Archive& archive) {
  std::string meta;
  for (const auto& [k, v] : archive.metadata) {
    if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw FormatError("checkpoint metadata entry '" + k + "' cannot be encoded");
    }
    meta += k + "=" + v + "\n";
  }
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, meta.size());
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.records.size()));
  for (const auto& r : archive.records) {
    if (r.shape.size() > 255) throw FormatError("checkpoint record '" + r.name + "' has too many axes");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.dtype));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.shape.size()));
    for (auto e : r.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    put<std::uint64_t>(out, r.bytes.size());
    out += r.bytes;
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

Archive decode_archive(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof kMagic, "magic") != std::string_view(kMagic, sizeof kMagic)) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < sizeof(std::uint64_t)) throw FormatError("checkpoint truncated");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);

  Archive archive;
  const auto meta_len = in.get<std::uint64_t>("metadata length");
  std::istringstream meta{std::string(in.take(meta_len, "metadata"))};
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint metadata line without '=': " + line);
    archive.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto count = in.get<std::uint32_t>("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchiveRecord r;
    const auto name_len = in.get<std::uint32_t>("record name length");
    r.name = std::string(in.take(name_len, "record name"));
    const auto dtype = in.get<std::uint8_t>("record dtype");
    if (dtype > 1) throw FormatError("checkpoint record '" + r.name + "' has unknown dtype tag");
    r.dtype = static_cast<DType>(dtype);
    const auto rank = in.get<std::uint8_t>("record rank");
    for (int a = 0; a < rank; ++a) r.shape.push_back(static_cast<std::int64_t>(in.get<std::uint64_t>("extent")));
    const auto n = in.get<std::uint64_t>("record size");
    r.bytes = std::string(in.take(n, ("values of '" + r.name + "'").c_str()));
    archive.records.push_back(std::move(r));
  }
  if (in.remaining() != sizeof(std::uint64_t)) {
    throw FormatError(in.remaining() < sizeof(std::uint64_t) ? "checkpoint truncated before checksum"
                                                             : "checkpoint has trailing bytes");
  }
  if (fnv1a(std::string_view(bytes.data(), body)) != stored) {
    throw FormatError("checkpoint checksum mismatch (file is corrupted)");
  }
  return archive;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  write_file_atomic(path, encode_archive(archive));
}

Archive read_archive(const std::filesystem::path& path) {
  try {
    return decode_archive(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Archive make_archive(const DiRecNetV2& model, const CheckpointInfo& info) {
  const ModelConfig& c = model.config();
  Archive a;
  auto meta = [&](std::string key, std::string value) { a.metadata.emplace_back(std::move(key), std::move(value)); };
  meta("format_version", std::to_string(kCheckpointVersion));
  meta("parameter_count", std::to_string(model.parameter_count()));
  meta("seed", std::to_string(model.seed()));
  meta("input_height", std::to_string(c.input_height));
  meta("input_width", std::to_string(c.input_width));
  meta("input_channels", std::to_string(c.input_channels));
  meta("embed_dim", std::to_string(c.embed_dim));
  meta("num_heads", std::to_string(c.num_heads));
  meta("num_encoder_blocks", std::to_string(c.num_encoder_blocks));
  meta("num_classes", std::to_string(c.num_classes));
  meta("mlp_dim", std::to_string(c.mlp_dim));
  meta("head_mode", to_string(c.head_mode));
  meta("dropout_embed", format_exact(c.dropout_embed));
  meta("dropout_head", format_exact(c.dropout_head));
  std::vector<std::string> widths;
  for (auto w : c.conv_widths) widths.push_back(std::to_string(w));
  meta("conv_widths", join(widths, ','));
  meta("bn_eps", format_exact(c.bn_eps));
  meta("bn_momentum", format_exact(c.bn_momentum));
  meta("ln_eps", format_exact(c.ln_eps));
  meta("cnn_activation", c.cnn_activation);
  meta("class_names", join(info.class_names, ';'));
  if (info.channel_stats) {
    const auto& s = *info.channel_stats;
    meta("channel_mean", format_exact(s.mean[0]) + "," + format_exact(s.mean[1]) + "," + format_exact(s.mean[2]));
    meta("channel_std", format_exact(s.stddev[0]) + "," + format_exact(s.stddev[1]) + "," +
                            format_exact(s.stddev[2]));
    meta("channel_fingerprint", s.fingerprint);
  }
  meta("epoch", std::to_string(info.epoch));
  if (info.validation_accuracy) meta("validation_accuracy", format_exact(*info.validation_accuracy));

  bool have_stats = true;
  for (const auto& [name, bn] : model.batch_norms()) have_stats = have_stats && bn->has_running_stats;
  meta("running_stats", have_stats ? "present" : "absent");

  for (const auto& p : model.parameters()) {
    a.records.push_back(record_from<float>(p.name, p.tensor.shape(), p.tensor.data()));
  }
  for (const auto& [name, bn] : model.batch_norms()) {
    const Shape s{bn->channels()};
    a.records.push_back(record_from<float>(name + ".running_mean", s, std::span<const float>(bn->running_mean)));
    a.records.push_back(record_from<float>(name + ".running_var", s, std::span<const float>(bn->running_var)));
  }
  return a;
}

LoadedCheckpoint restore_archive(const Archive& a) {
  auto int_of = [&](const char* key) { return parse_int(require(a, key), key); };
  auto double_of = [&](const char* key) { return parse_double(require(a, key), key); };

  if (require(a, "format_version") != std::to_string(kCheckpointVersion)) {
    throw FormatError("unsupported checkpoint format_version " + require(a, "format_version"));
  }
  ModelConfig c;
  c.input_height = int_of("input_height");
  c.input_width = int_of("input_width");
  c.input_channels = int_of("input_channels");
  c.embed_dim = int_of("embed_dim");
  c.num_heads = int_of("num_heads");
  c.num_encoder_blocks = int_of("num_encoder_blocks");
  c.num_classes = int_of("num_classes");
  c.mlp_dim = int_of("mlp_dim");
  c.head_mode = parse_head_mode(require(a, "head_mode"));
  c.dropout_embed = double_of("dropout_embed");
  c.dropout_head = double_of("dropout_head");
  const auto widths = split_list(require(a, "conv_widths"), ',');
  if (widths.size() != c.conv_widths.size()) throw FormatError("checkpoint conv_widths needs 7 entries");
  for (std::size_t i = 0; i < widths.size(); ++i) c.conv_widths[i] = parse_int(widths[i], "conv_widths");
  c.bn_eps = double_of("bn_eps");
  c.bn_momentum = double_of("bn_momentum");
  c.ln_eps = double_of("ln_eps");
  c.cnn_activation = require(a, "cnn_activation");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid model config: ") + e.what());
  }
  const auto seed = static_cast<std::uint64_t>(std::stoull(require(a, "seed")));

  LoadedCheckpoint out{DiRecNetV2::build(c, seed), {}};
  CheckpointInfo& info = out.info;
  info.class_names = split_list(require(a, "class_names"), ';');
  if (!info.class_names.empty() && static_cast<std::int64_t>(info.class_names.size()) != c.num_classes) {
    throw FormatError("checkpoint lists " + std::to_string(info.class_names.size()) +
                      " class names for a " + std::to_string(c.num_classes) + "-class head");
  }
  if (const auto* mean = a.find_metadata("channel_mean")) {
    ChannelStats s;
    const auto m = split_list(*mean, ','), d = split_list(require(a, "channel_std"), ',');
    if (m.size() != 3 || d.size() != 3) throw FormatError("checkpoint channel statistics need three values");
    for (int i = 0; i < 3; ++i) {
      s.mean[i] = parse_double(m[i], "channel_mean");
      s.stddev[i] = parse_double(d[i], "channel_std");
    }
    if (const auto* fp = a.find_metadata("channel_fingerprint")) s.fingerprint = *fp;
    info.channel_stats = s;
  }
  info.epoch = int_of("epoch");
  if (a.find_metadata("validation_accuracy")) info.validation_accuracy = double_of("validation_accuracy");

  std::set<std::string> expected;
  for (const auto& p : out.model.parameters()) {
    expected.insert(p.name);
    const ArchiveRecord* r = a.find_record(p.name);
    if (!r) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
    Tensor handle = p.tensor;
    copy_into(*r, handle.shape(), handle.data());
  }
  const bool have_stats = require(a, "running_stats") == "present";
  for (auto& [name, bn] : out.model.batch_norms()) {
    for (const char* suffix : {".running_mean", ".running_var"}) {
      const std::string key = name + suffix;
      expected.insert(key);
      const ArchiveRecord* r = a.find_record(key);
      if (!r) throw FormatError("checkpoint is missing running statistic '" + key + "'");
      auto& dst = std::string_view(suffix) == ".running_mean" ? bn->running_mean : bn->running_var;
      dst.assign(static_cast<std::size_t>(bn->channels()), 0.0f);
      copy_into(*r, Shape{bn->channels()}, std::span<float>(dst));
    }
    bn->has_running_stats = have_stats;
  }
  for (const auto& r : a.records) {
    if (!expected.count(r.name)) throw FormatError("checkpoint has unexpected record '" + r.name + "'");
  }
  if (a.records.size() != expected.size()) throw FormatError("checkpoint has duplicate records");
  const auto count = int_of("parameter_count");
  if (count != out.model.parameter_count()) {
    throw FormatError("checkpoint parameter_count " + std::to_string(count) + " does not match the model (" +
                      std::to_string(out.model.parameter_count()) + ")");
  }
  out.model.set_mode(Mode::eval);
  return out;
}

void save_checkpoint(const DiRecNetV2& model, const CheckpointInfo& info, const std::filesystem::path& path) {
  write_archive(path, make_archive(model, info));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  try {
    return restore_archive(archive);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace direcnet
