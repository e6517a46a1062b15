#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "direcnet/checkpoint.hpp"
#include "direcnet/error.hpp"
#include "direcnet/io.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace direcnet {
namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.input_height = 32;
  cfg.input_width = 32;
  cfg.embed_dim = 8;
  cfg.num_heads = 2;
  cfg.num_encoder_blocks = 1;
  cfg.mlp_dim = 8;
  cfg.conv_widths = {4, 4, 4, 4, 4, 4, 4};
  return cfg;
}

CheckpointInfo sample_info() {
  CheckpointInfo info;
  info.class_names = {"Earthquakes", "Floods", "Wildfire", "Normal"};
  info.channel_stats = ChannelStats{{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, "abc123"};
  info.epoch = 17;
  info.validation_accuracy = 0.8125;
  return info;
}

// A model whose running statistics and parameters are no longer at their
// initial values.
DiRecNetV2 trained_like_model(std::uint64_t seed) {
  auto m = DiRecNetV2::build(small_config(), seed);
  std::mt19937_64 rng(seed);
  Tape tape(false);
  m.set_mode(Mode::train);
  m.classify(tape, oracle::random_tensor<float>({4, 3, 32, 32}, rng));
  for (const auto& p : m.parameters()) {
    auto h = p.tensor;
    for (auto& v : h.data()) v += 0.01f;
  }
  return m;
}

TEST(Archive, EncodeDecodeRoundTrip) {
  Archive a;
  a.metadata = {{"alpha", "1"}, {"beta", "two words"}};
  a.records.push_back({"w", DType::f32, {2, 1}, std::string("\x01\x02\x03\x04\x05\x06\x07\x08", 8)});
  const auto bytes = encode_archive(a);
  const auto b = decode_archive(bytes);
  ASSERT_EQ(b.metadata, a.metadata);
  ASSERT_EQ(b.records.size(), 1u);
  EXPECT_EQ(b.records[0].name, "w");
  EXPECT_EQ(b.records[0].shape, (Shape{2, 1}));
  EXPECT_EQ(b.records[0].bytes, a.records[0].bytes);
  EXPECT_EQ(encode_archive(b), bytes);
  ASSERT_NE(b.find_metadata("beta"), nullptr);
  EXPECT_EQ(*b.find_metadata("beta"), "two words");
  EXPECT_EQ(b.find_record("nope"), nullptr);
}

TEST(Archive, DetectsCorruption) {
  Archive a;
  a.metadata = {{"k", "v"}};
  a.records.push_back({"w", DType::f32, {1}, std::string(4, '\0')});
  const auto bytes = encode_archive(a);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_archive(bad_magic), FormatError);

  for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{10}}) {
    EXPECT_THROW(decode_archive(bytes.substr(0, cut)), FormatError) << cut;
  }
  EXPECT_THROW(decode_archive(bytes + "x"), FormatError);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  EXPECT_THROW(decode_archive(flipped), FormatError);

  auto version = bytes;
  version[8] = 99;
  try {
    decode_archive(version);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  testing::TempDir dir("ckpt");
  auto model = trained_like_model(3);
  const auto info = sample_info();
  save_checkpoint(model, info, dir / "m.ckpt");
  auto loaded = load_checkpoint(dir / "m.ckpt");

  ASSERT_EQ(loaded.model.parameters().size(), model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto a = model.parameters()[i].tensor.data();
    const auto b = loaded.model.parameters()[i].tensor.data();
    EXPECT_EQ(loaded.model.parameters()[i].name, model.parameters()[i].name);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size_bytes()), 0) << model.parameters()[i].name;
  }
  auto bn_a = model.batch_norms();
  auto bn_b = loaded.model.batch_norms();
  for (std::size_t i = 0; i < bn_a.size(); ++i) {
    EXPECT_EQ(bn_a[i].second->running_mean, bn_b[i].second->running_mean);
    EXPECT_EQ(bn_a[i].second->running_var, bn_b[i].second->running_var);
  }
  EXPECT_EQ(loaded.info.class_names, info.class_names);
  EXPECT_EQ(loaded.info.channel_stats, info.channel_stats);
  EXPECT_EQ(loaded.info.epoch, 17);
  EXPECT_EQ(loaded.info.validation_accuracy, 0.8125);
  EXPECT_EQ(loaded.model.seed(), model.seed());
  EXPECT_EQ(loaded.model.mode(), Mode::eval);

  model.set_mode(Mode::eval);
  std::mt19937_64 rng(4);
  auto x = oracle::random_tensor<float>({2, 3, 32, 32}, rng);
  const auto ya = model.classify(x);
  const auto yb = loaded.model.classify(x);
  EXPECT_EQ(std::memcmp(ya.ptr(), yb.ptr(), ya.numel() * sizeof(float)), 0);

  // Saving the loaded model reproduces the file byte for byte.
  save_checkpoint(loaded.model, loaded.info, dir / "again.ckpt");
  EXPECT_EQ(read_file(dir / "m.ckpt"), read_file(dir / "again.ckpt"));
}

TEST(Checkpoint, MetadataReportsParameterCount) {
  auto model = DiRecNetV2::build({}, 1);
  const auto archive = make_archive(model, sample_info());
  ASSERT_NE(archive.find_metadata("parameter_count"), nullptr);
  EXPECT_EQ(*archive.find_metadata("parameter_count"), "799380");
}

TEST(Checkpoint, MissingRecordIsNamed) {
  auto model = trained_like_model(5);
  auto archive = make_archive(model, sample_info());
  auto& recs = archive.records;
  recs.erase(std::find_if(recs.begin(), recs.end(),
                          [](const ArchiveRecord& r) { return r.name == "encoder.0.attn.k.bias"; }));
  try {
    restore_archive(archive);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.0.attn.k.bias"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, ShapeMismatchAndExtraRecordAreRejected) {
  auto model = trained_like_model(6);
  auto archive = make_archive(model, sample_info());
  auto extra = archive;
  extra.records.push_back({"bogus.weight", DType::f32, {1}, std::string(4, '\0')});
  EXPECT_THROW(restore_archive(extra), FormatError);

  auto reshaped = archive;
  for (auto& r : reshaped.records) {
    if (r.name == "head.linear.bias") r.shape = {2, 2};
  }
  EXPECT_THROW(restore_archive(reshaped), FormatError);
}

TEST(Checkpoint, TruncatedFileFailsToLoad) {
  testing::TempDir dir("ckpt");
  auto model = trained_like_model(7);
  save_checkpoint(model, sample_info(), dir / "m.ckpt");
  const auto bytes = read_file(dir / "m.ckpt");
  write_file_atomic(dir / "cut.ckpt", std::string_view(bytes).substr(0, bytes.size() - 100));
  EXPECT_THROW(load_checkpoint(dir / "cut.ckpt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), IoError);
}

}  // namespace
}  // namespace direcnet
