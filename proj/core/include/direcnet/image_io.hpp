#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace direcnet {

/// 8-bit RGB pixels, row-major, interleaved (HWC).
struct Image {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> pixels;

  static Image filled(std::int64_t height, std::int64_t width, std::uint8_t r, std::uint8_t g,
                      std::uint8_t b);
  std::uint8_t& at(std::int64_t row, std::int64_t col, int channel) {
    return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
  }
  std::uint8_t at(std::int64_t row, std::int64_t col, int channel) const {
    return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
  }
};

/// Decodes PNG or baseline JPEG (detected from the leading bytes). Grayscale
/// and palette inputs are expanded to RGB; alpha is dropped. Throws IoError
/// for unreadable files and FormatError for undecodable content.
Image decode_image(const std::filesystem::path& path);
Image decode_image(std::span<const std::uint8_t> bytes);

// Cheap signature check without decoding the pixel data.
bool looks_like_image(std::span<const std::uint8_t> bytes);

// Atomic write.
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace direcnet
