#include "direcnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "direcnet/error.hpp"
#include "direcnet/io.hpp"

namespace direcnet {

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig c;
  c.enable_rotation = c.enable_zoom = c.enable_shift = c.enable_flip = c.enable_shear = false;
  return c;
}

void AugmentationConfig::validate() const {
  auto finite_nonneg = [](double v, const char* what) {
    if (!std::isfinite(v) || v < 0) throw ConfigError(std::string("augmentation: ") + what + " must be finite and >= 0");
  };
  finite_nonneg(rotation_degrees, "rotation_degrees");
  finite_nonneg(shift_x, "shift_x");
  finite_nonneg(shift_y, "shift_y");
  finite_nonneg(shear_degrees, "shear_degrees");
  if (shear_degrees >= 90) throw ConfigError("augmentation: shear_degrees must be below 90");
  if (!(zoom_min > 0) || !(zoom_max >= zoom_min) || !std::isfinite(zoom_max)) {
    throw ConfigError("augmentation: zoom range must satisfy 0 < zoom_min <= zoom_max");
  }
  if (!(flip_probability >= 0 && flip_probability <= 1)) {
    throw ConfigError("augmentation: flip_probability must be in [0, 1]");
  }
}

namespace {

bool parse_bool(std::string_view v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw FormatError("augmentation config: '" + key + "' expects a boolean, got '" + std::string(v) + "'");
}

}  // namespace

AugmentationConfig parse_augmentation_config(const std::string& text) {
  AugmentationConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("augmentation config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(view.substr(0, eq)));
    const auto value = trim(view.substr(eq + 1));
    if (key == "rotation_degrees") c.rotation_degrees = parse_double(value, key);
    else if (key == "zoom_min") c.zoom_min = parse_double(value, key);
    else if (key == "zoom_max") c.zoom_max = parse_double(value, key);
    else if (key == "shift_x") c.shift_x = parse_double(value, key);
    else if (key == "shift_y") c.shift_y = parse_double(value, key);
    else if (key == "flip_probability") c.flip_probability = parse_double(value, key);
    else if (key == "shear_degrees") c.shear_degrees = parse_double(value, key);
    else if (key == "enable_rotation") c.enable_rotation = parse_bool(value, key);
    else if (key == "enable_zoom") c.enable_zoom = parse_bool(value, key);
    else if (key == "enable_shift") c.enable_shift = parse_bool(value, key);
    else if (key == "enable_flip") c.enable_flip = parse_bool(value, key);
    else if (key == "enable_shear") c.enable_shear = parse_bool(value, key);
    else throw FormatError("augmentation config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

std::string format_augmentation_config(const AugmentationConfig& c) {
  std::ostringstream out;
  out << "rotation_degrees=" << format_exact(c.rotation_degrees) << "\n"
      << "zoom_min=" << format_exact(c.zoom_min) << "\n"
      << "zoom_max=" << format_exact(c.zoom_max) << "\n"
      << "shift_x=" << format_exact(c.shift_x) << "\n"
      << "shift_y=" << format_exact(c.shift_y) << "\n"
      << "flip_probability=" << format_exact(c.flip_probability) << "\n"
      << "shear_degrees=" << format_exact(c.shear_degrees) << "\n"
      << "enable_rotation=" << c.enable_rotation << "\n"
      << "enable_zoom=" << c.enable_zoom << "\n"
      << "enable_shift=" << c.enable_shift << "\n"
      << "enable_flip=" << c.enable_flip << "\n"
      << "enable_shear=" << c.enable_shear << "\n";
  return out.str();
}

bool AugmentationDraw::is_identity() const {
  return !flip && rotation_degrees == 0 && shear_degrees == 0 && zoom == 1 && shift_x == 0 && shift_y == 0;
}

AugmentationDraw sample_augmentation(const AugmentationConfig& c, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto symmetric = [&](double range) {
    const double u = unit(rng);
    return range * (2 * u - 1);
  };
  AugmentationDraw d;
  const double flip_u = unit(rng);
  const double rot = symmetric(c.rotation_degrees);
  const double shear = symmetric(c.shear_degrees);
  const double zoom_u = unit(rng);
  const double sx = symmetric(c.shift_x);
  const double sy = symmetric(c.shift_y);
  if (c.enable_flip) d.flip = flip_u < c.flip_probability;
  if (c.enable_rotation) d.rotation_degrees = rot;
  if (c.enable_shear) d.shear_degrees = shear;
  if (c.enable_zoom) d.zoom = c.zoom_min + (c.zoom_max - c.zoom_min) * zoom_u;
  if (c.enable_shift) {
    d.shift_x = sx;
    d.shift_y = sy;
  }
  return d;
}

namespace {

// Snaps coordinates within rounding noise of a grid point so that exact
// quarter-turn rotations reproduce pixel values bit for bit.
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

Tensor apply_augmentation(const Tensor& chw, const AugmentationDraw& d) {
  if (chw.rank() != 3) throw ShapeError("augmentation expects [C, H, W], got " + shape_str(chw.shape()));
  if (d.is_identity()) return chw.clone();
  if (!(d.zoom > 0)) throw ConfigError("augmentation zoom must be positive");
  const std::int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);

  // Forward map on centered (x right, y down) coordinates:
  //   p' = Z * Sh * R * F * p + t
  // with R the on-screen counter-clockwise rotation.
  const double deg = std::numbers::pi / 180.0;
  const double th = d.rotation_degrees * deg;
  const double ct = std::cos(th), st = std::sin(th);
  const double f = d.flip ? -1.0 : 1.0;
  const double k = std::tan(d.shear_degrees * deg);
  // R * F
  double a00 = ct * f, a01 = st, a10 = -st * f, a11 = ct;
  // Sh: x' = x + k y
  double b00 = a00 + k * a10, b01 = a01 + k * a11, b10 = a10, b11 = a11;
  // Z
  b00 *= d.zoom, b01 *= d.zoom, b10 *= d.zoom, b11 *= d.zoom;
  const double tx = d.shift_x * double(w), ty = d.shift_y * double(h);
  const double det = b00 * b11 - b01 * b10;
  const double i00 = b11 / det, i01 = -b01 / det, i10 = -b10 / det, i11 = b00 / det;

  const double cx = (double(w) - 1) / 2, cy = (double(h) - 1) / 2;
  Tensor out(chw.shape());
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const double px = double(x) - cx - tx, py = double(y) - cy - ty;
      const double sx = std::clamp(snap(i00 * px + i01 * py + cx), 0.0, double(w - 1));
      const double sy = std::clamp(snap(i10 * px + i11 * py + cy), 0.0, double(h - 1));
      const auto x0 = static_cast<std::int64_t>(std::floor(sx));
      const auto y0 = static_cast<std::int64_t>(std::floor(sy));
      const auto x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - double(x0), fy = sy - double(y0);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const float* src = chw.ptr() + ch * h * w;
        const double v00 = src[y0 * w + x0], v01 = src[y0 * w + x1];
        const double v10 = src[y1 * w + x0], v11 = src[y1 * w + x1];
        double v;
        if (fx == 0 && fy == 0) {
          v = v00;
        } else {
          const double top = v00 + (v01 - v00) * fx;
          const double bottom = v10 + (v11 - v10) * fx;
          v = top + (bottom - top) * fy;
        }
        out.ptr()[ch * h * w + y * w + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& chw, const AugmentationConfig& config, Rng& rng) {
  return apply_augmentation(chw, sample_augmentation(config, rng));
}

}  // namespace direcnet
