#pragma once

#include <string>

#include "direcnet/ops.hpp"
#include "direcnet/tensor.hpp"

namespace direcnet {

/// Random geometric augmentation. Every range is symmetric around the
/// identity; disabling a transform or zeroing its range removes it.
struct AugmentationConfig {
  double rotation_degrees = 15;  // angle ~ U(-r, r)
  double zoom_min = 0.9;         // scale ~ U(zoom_min, zoom_max)
  double zoom_max = 1.1;
  double shift_x = 0.1;          // fraction of the width, ~ U(-s, s)
  double shift_y = 0.1;
  double flip_probability = 0.5; // horizontal flip
  double shear_degrees = 10;     // angle ~ U(-s, s)
  bool enable_rotation = true;
  bool enable_zoom = true;
  bool enable_shift = true;
  bool enable_flip = true;
  bool enable_shear = true;

  static AugmentationConfig identity();
  // Throws ConfigError.
  void validate() const;
};

/// `key=value` lines with the field names above ('#' comments allowed).
AugmentationConfig parse_augmentation_config(const std::string& text);
std::string format_augmentation_config(const AugmentationConfig& config);

/// One realization of the random transform.
struct AugmentationDraw {
  bool flip = false;
  double rotation_degrees = 0;
  double shear_degrees = 0;
  double zoom = 1;
  double shift_x = 0;  // fraction of the width
  double shift_y = 0;  // fraction of the height

  bool is_identity() const;
};

// Draws each parameter in a fixed order (flip, rotation, shear, zoom,
// shift x, shift y) so streams stay aligned regardless of enabled flags.
AugmentationDraw sample_augmentation(const AugmentationConfig& config, Rng& rng);

/// Applies flip, then rotation, shear, zoom and shift about the image
/// center, as one affine map. Positive angles rotate counter-clockwise as
/// displayed (rows growing downward). Output pixels sample the input
/// bilinearly with edge replication. The identity draw returns an exact
/// copy. chw: [C, H, W].
Tensor apply_augmentation(const Tensor& chw, const AugmentationDraw& draw);

Tensor augment(const Tensor& chw, const AugmentationConfig& config, Rng& rng);

}  // namespace direcnet
