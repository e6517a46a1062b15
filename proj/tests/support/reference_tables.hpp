#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "direcnet/tensor.hpp"

// Reference values used by the unit and acceptance tests. Numbers are
// copied verbatim, including their rounding to three decimals.
namespace direcnet::reference {

struct LayerRow {
  const char* layer;
  int depth;
  Shape input;
  Shape output;
  std::optional<std::int64_t> params;
};

// Layer table at batch size 32.
inline const std::vector<LayerRow>& layer_table() {
  static const std::vector<LayerRow> rows = {
      {"DiRecNetV2", 0, {32, 3, 224, 224}, {32, 4}, 38016},
      {"DiRecNet Feature Extractor", 1, {32, 3, 224, 224}, {32, 196, 192}, std::nullopt},
      {"Conv2d", 2, {32, 3, 224, 224}, {32, 16, 224, 224}, 2368},
      {"Conv2d", 2, {32, 16, 224, 224}, {32, 16, 224, 224}, 6416},
      {"BatchNorm2d", 2, {32, 16, 224, 224}, {32, 16, 224, 224}, 32},
      {"MaxPool2d", 2, {32, 16, 224, 224}, {32, 16, 112, 112}, std::nullopt},
      {"Conv2d", 2, {32, 16, 112, 112}, {32, 32, 112, 112}, 4640},
      {"Conv2d", 2, {32, 32, 112, 112}, {32, 64, 112, 112}, 18496},
      {"BatchNorm2d", 2, {32, 64, 112, 112}, {32, 64, 112, 112}, 128},
      {"MaxPool2d", 2, {32, 64, 112, 112}, {32, 64, 56, 56}, std::nullopt},
      {"DepthwiseConv2d", 2, {32, 64, 56, 56}, {32, 64, 56, 56}, 640},
      {"PointwiseConv2d", 2, {32, 64, 56, 56}, {32, 128, 56, 56}, 8320},
      {"DepthwiseConv2d", 2, {32, 128, 56, 56}, {32, 128, 56, 56}, 1280},
      {"PointwiseConv2d", 2, {32, 128, 56, 56}, {32, 256, 56, 56}, 33024},
      {"BatchNorm2d", 2, {32, 256, 56, 56}, {32, 256, 56, 56}, 512},
      {"MaxPool2d", 2, {32, 256, 56, 56}, {32, 256, 28, 28}, std::nullopt},
      {"DepthwiseConv2d", 2, {32, 256, 28, 28}, {32, 256, 28, 28}, 2560},
      {"PointwiseConv2d", 2, {32, 256, 28, 28}, {32, 512, 28, 28}, 131584},
      {"DepthwiseConv2d", 2, {32, 512, 28, 28}, {32, 512, 28, 28}, 5120},
      {"PointwiseConv2d", 2, {32, 512, 28, 28}, {32, 192, 28, 28}, 98496},
      {"BatchNorm2d", 2, {32, 192, 28, 28}, {32, 192, 28, 28}, 384},
      {"MaxPool2d", 2, {32, 192, 28, 28}, {32, 192, 14, 14}, std::nullopt},
      {"Flatten", 2, {32, 192, 14, 14}, {32, 197, 192}, std::nullopt},
      {"Dropout", 1, {32, 197, 192}, {32, 197, 192}, std::nullopt},
      {"Transformer Encoder Blocks", 1, {32, 197, 192}, {32, 197, 192}, std::nullopt},
      {"TransformerEncoderBlock (1)", 2, {32, 197, 192}, {32, 197, 192}, std::nullopt},
      {"MultiheadSelfAttentionBlock", 3, {32, 197, 192}, {32, 197, 192}, 148608},
      {"MLPBlock", 3, {32, 197, 192}, {32, 197, 192}, 74496},
      {"TransformerEncoderBlock (2)", 2, {32, 197, 192}, {32, 197, 192}, std::nullopt},
      {"MultiheadSelfAttentionBlock", 3, {32, 197, 192}, {32, 197, 192}, 148608},
      {"MLPBlock", 3, {32, 197, 192}, {32, 197, 192}, 74496},
      {"Classifier Head", 1, {32, 197, 192}, {32, 4}, std::nullopt},
      {"LayerNorm", 2, {32, 192}, {32, 192}, 384},
      {"Dropout", 2, {32, 192}, {32, 192}, std::nullopt},
      {"Linear", 2, {32, 192}, {32, 4}, 772},
      {"Softmax/Sigmoid", 2, {32, 4}, {32, 4}, std::nullopt},
  };
  return rows;
}

inline constexpr std::int64_t kTotalParameters = 799380;

// Throughput table: model name and frames per second.
struct FpsRow {
  const char* model;
  double fps;
};

inline const std::vector<FpsRow>& fps_table() {
  static const std::vector<FpsRow> rows = {
      {"Convit Tiny", 54.34},      {"GCVit XXtiny", 31.06},      {"MobileViT s", 30.71},
      {"MobileViT xs", 26.07},     {"MobileViT xxs", 33.05},     {"MobileVitV2 050", 33.42},
      {"MobileVitV2 100", 37.65},  {"Vit Tiny", 74.88},          {"ConvNeXt Tiny", 89.09},
      {"EfficientNet-B0", 55.74},  {"MnasNet", 90.98},           {"MobileNetV2", 87.23},
      {"MobileNetV3 Small", 89.72}, {"ShuffleNetV2", 75.73},     {"SqueezeNet", 183.08},
      {"DiRecNetV2", 176.13},
  };
  return rows;
}

// Score table: weighted F1, Score1 at lambda 0.5 / 0.7 / 0.3, Score2.
struct ScoreRowRef {
  const char* model;
  double weighted_f1;
  std::array<double, 3> score1;
  double score2;
};

inline const std::vector<ScoreRowRef>& score_table() {
  static const std::vector<ScoreRowRef> rows = {
      {"ConvNeXt Tiny", 0.940, {0.646, 0.720, 0.572}, 1764.609},
      {"EfficientNet-B0", 0.862, {0.281, 0.285, 0.277}, 4.988},
      {"MnasNet", 0.897, {0.502, 0.513, 0.490}, 89.600},
      {"MobileNetV2", 0.893, {0.479, 0.490, 0.467}, 67.401},
      {"MobileNetV3 Small", 0.868, {0.398, 0.372, 0.425}, 12.003},
      {"ShuffleNetV2", 0.852, {0.304, 0.272, 0.336}, 3.436},
      {"SqueezeNet", 0.845, {0.586, 0.421, 0.752}, 4.974},
      {"Convit Tiny", 0.871, {0.307, 0.324, 0.289}, 8.827},
      {"GCVit XXtiny", 0.932, {0.452, 0.582, 0.323}, 355.801},
      {"MobileVitV2 050", 0.834, {0.113, 0.108, 0.119}, 0.403},
      {"MobileVitV2 100", 0.875, {0.240, 0.297, 0.184}, 5.705},
      {"MobileViT s", 0.855, {0.190, 0.210, 0.170}, 1.759},
      {"MobileViT xs", 0.837, {0.131, 0.126, 0.135}, 0.532},
      {"MobileViT xxs", 0.859, {0.219, 0.241, 0.198}, 2.775},
      {"Vit Tiny", 0.873, {0.375, 0.373, 0.377}, 14.666},
      {"DiRecNetV2", 0.964, {0.980, 0.988, 0.972}, 18982.892},
  };
  return rows;
}

inline double fps_of(const std::string& model) {
  for (const auto& r : fps_table()) {
    if (model == r.model) return r.fps;
  }
  return -1;
}

// Multi-label table: (precision, recall, F1) for Earthquakes, Fires, Flood,
// then the average F1.
struct MultiLabelRow {
  const char* model;
  std::array<std::array<double, 3>, 3> classes;
  double average;
};

inline const std::vector<MultiLabelRow>& multilabel_table() {
  static const std::vector<MultiLabelRow> rows = {
      {"ConvNext Tiny", {{{1.000, 0.485, 0.653}, {1.000, 0.695, 0.820}, {1.000, 0.180, 0.305}}}, 0.593},
      {"EfficientNet-B0", {{{1.000, 0.590, 0.742}, {1.000, 0.100, 0.182}, {1.000, 0.355, 0.524}}}, 0.483},
      {"MnasNet", {{{0.982, 0.560, 0.713}, {1.000, 0.195, 0.326}, {1.000, 0.260, 0.413}}}, 0.484},
      {"MobileNetV2", {{{1.000, 0.440, 0.611}, {1.000, 0.270, 0.425}, {1.000, 0.195, 0.326}}}, 0.454},
      {"MobileNetV3", {{{1.000, 0.585, 0.738}, {1.000, 0.285, 0.444}, {1.000, 0.285, 0.444}}}, 0.542},
      {"ShuffleNetV2", {{{1.000, 0.285, 0.444}, {1.000, 0.050, 0.095}, {1.000, 0.110, 0.198}}}, 0.246},
      {"SqueezeNet", {{{1.000, 0.550, 0.710}, {1.000, 0.165, 0.283}, {1.000, 0.290, 0.450}}}, 0.481},
      {"Convit Tiny", {{{1.000, 0.350, 0.519}, {1.000, 0.665, 0.799}, {1.000, 0.145, 0.253}}}, 0.524},
      {"GCVit XXtiny", {{{1.000, 0.325, 0.591}, {1.000, 0.650, 0.788}, {0.960, 0.120, 0.213}}}, 0.497},
      {"MobileViT s", {{{0.920, 0.630, 0.748}, {0.984, 0.305, 0.466}, {0.977, 0.430, 0.597}}}, 0.604},
      {"MobileViT xs", {{{0.780, 0.640, 0.703}, {1.000, 0.285, 0.444}, {0.925, 0.430, 0.587}}}, 0.578},
      {"MobileViT xxs", {{{0.862, 0.685, 0.763}, {1.000, 0.185, 0.312}, {0.940, 0.625, 0.751}}}, 0.609},
      {"MobileVitV2 050", {{{0.850, 0.735, 0.788}, {1.000, 0.305, 0.467}, {1.000, 0.270, 0.425}}}, 0.560},
      {"MobileVitV2 0100", {{{0.916, 0.655, 0.764}, {1.000, 0.255, 0.406}, {0.976, 0.200, 0.332}}}, 0.501},
      {"Vit Tiny", {{{1.000, 0.460, 0.630}, {1.000, 0.640, 0.780}, {0.872, 0.205, 0.332}}}, 0.581},
      {"DiRecNetV2", {{{1.000, 0.605, 0.754}, {1.000, 0.280, 0.438}, {0.926, 0.500, 0.649}}}, 0.614},
  };
  return rows;
}

// Dataset split counts per class (Earthquakes, Floods, Wildfire/Fire,
// Normal) for train, validation, test and the class totals.
inline constexpr std::array<std::array<std::int64_t, 4>, 4> kSplitCounts = {{
    {1927, 4063, 3509, 3900},
    {239, 505, 439, 487},
    {239, 502, 436, 477},
    {2405, 5070, 4384, 4864},
}};
inline constexpr std::int64_t kSplitTrainTotal = 13399;

}  // namespace direcnet::reference
