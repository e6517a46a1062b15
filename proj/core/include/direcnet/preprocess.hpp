#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "direcnet/image_io.hpp"
#include "direcnet/tensor.hpp"

namespace direcnet {

inline constexpr std::int64_t kInputSize = 224;
// Lower bound applied to per-channel standard deviations.
inline constexpr double kStdFloor = 1e-6;

/// Per-channel mean and (floored, population) standard deviation of pixel
/// values scaled to [0, 1].
struct ChannelStats {
  std::array<double, 3> mean{0, 0, 0};
  std::array<double, 3> stddev{1, 1, 1};
  // Identifies the sample set the statistics were computed from.
  std::string fingerprint;

  bool operator==(const ChannelStats&) const = default;
};

/// Single-pass accumulation. Each image contributes its own mean and sum of
/// squared deviations, merged with the pairwise update, so the result does
/// not depend on the order images are added (up to rounding).
class ChannelStatsAccumulator {
 public:
  // chw: [3, H, W].
  void add(const Tensor& chw);
  std::int64_t images() const { return images_; }
  // Throws StateError when nothing has been added.
  ChannelStats finish(std::string fingerprint = {}) const;

 private:
  std::array<double, 3> count_{0, 0, 0};
  std::array<double, 3> mean_{0, 0, 0};
  std::array<double, 3> m2_{0, 0, 0};
  std::int64_t images_ = 0;
};

/// [3, H, W] with values in [0, 1].
Tensor image_to_tensor(const Image& image);

/// Bilinear resampling with half-pixel centers and clamped borders. Returns
/// an unchanged copy when the extents already match.
Tensor resize_bilinear(const Tensor& chw, std::int64_t height, std::int64_t width);

// In place: x <- (x - mean_c) / stddev_c.
void standardize(Tensor& chw, const ChannelStats& stats);

/// Decoded image -> [3, size, size] standardized network input.
Tensor preprocess(const Image& image, const ChannelStats& stats, std::int64_t size = kInputSize);

/// Same as preprocess without the standardization step.
Tensor prepare_unstandardized(const Image& image, std::int64_t size = kInputSize);

/// [3, H, W] tensors of equal shape -> [N, 3, H, W].
Tensor stack_images(const std::vector<Tensor>& images);

// Cache file: "mean m0 m1 m2", "std s0 s1 s2" and "fingerprint <text>" lines.
std::string format_channel_stats(const ChannelStats& stats);
ChannelStats parse_channel_stats(const std::string& text);
void save_channel_stats(const std::filesystem::path& path, const ChannelStats& stats);
ChannelStats load_channel_stats(const std::filesystem::path& path);

}  // namespace direcnet
