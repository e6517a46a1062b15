#include "direcnet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "direcnet/error.hpp"
#include "direcnet/io.hpp"

namespace direcnet {

void ChannelStatsAccumulator::add(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw ShapeError("channel statistics expect [3, H, W], got " + shape_str(chw.shape()));
  }
  const std::int64_t plane = chw.dim(1) * chw.dim(2);
  for (int c = 0; c < 3; ++c) {
    const float* p = chw.ptr() + c * plane;
    double mean = 0;
    for (std::int64_t i = 0; i < plane; ++i) mean += p[i];
    mean /= double(plane);
    double m2 = 0;
    for (std::int64_t i = 0; i < plane; ++i) {
      const double d = p[i] - mean;
      m2 += d * d;
    }
    const double n_a = count_[c], n_b = double(plane), n = n_a + n_b;
    const double delta = mean - mean_[c];
    mean_[c] += delta * n_b / n;
    m2_[c] += m2 + delta * delta * n_a * n_b / n;
    count_[c] = n;
  }
  ++images_;
}

ChannelStats ChannelStatsAccumulator::finish(std::string fingerprint) const {
  if (images_ == 0) throw StateError("channel statistics: no images were added");
  ChannelStats stats;
  for (int c = 0; c < 3; ++c) {
    stats.mean[c] = mean_[c];
    stats.stddev[c] = std::max(std::sqrt(m2_[c] / count_[c]), kStdFloor);
  }
  stats.fingerprint = std::move(fingerprint);
  return stats;
}

Tensor image_to_tensor(const Image& image) {
  if (image.height <= 0 || image.width <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.height * image.width * 3)) {
    throw ShapeError("image pixel buffer does not match its extents");
  }
  const std::int64_t plane = image.height * image.width;
  Tensor out({3, image.height, image.width});
  float* o = out.ptr();
  for (std::int64_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) o[c * plane + i] = image.pixels[std::size_t(i * 3 + c)] / 255.0f;
  }
  return out;
}

Tensor resize_bilinear(const Tensor& chw, std::int64_t height, std::int64_t width) {
  if (chw.rank() != 3) throw ShapeError("resize expects [C, H, W], got " + shape_str(chw.shape()));
  if (height <= 0 || width <= 0) throw ShapeError("resize target extents must be positive");
  const std::int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == height && w == width) return chw.clone();

  // Precompute the two source taps and weights per output row and column.
  struct Tap {
    std::int64_t i0, i1;
    float frac;
  };
  auto taps = [](std::int64_t in, std::int64_t out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = double(in) / double(out);
    for (std::int64_t o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, double(in - 1));
      const auto i0 = static_cast<std::int64_t>(std::floor(src));
      const auto i1 = std::min(i0 + 1, in - 1);
      t[std::size_t(o)] = {i0, i1, static_cast<float>(src - double(i0))};
    }
    return t;
  };
  const auto ty = taps(h, height), tx = taps(w, width);

  Tensor out({c, height, width});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const float* src = chw.ptr() + ch * h * w;
    float* dst = out.ptr() + ch * height * width;
    for (std::int64_t y = 0; y < height; ++y) {
      const Tap& a = ty[std::size_t(y)];
      const float* r0 = src + a.i0 * w;
      const float* r1 = src + a.i1 * w;
      for (std::int64_t x = 0; x < width; ++x) {
        const Tap& b = tx[std::size_t(x)];
        const float top = r0[b.i0] + (r0[b.i1] - r0[b.i0]) * b.frac;
        const float bottom = r1[b.i0] + (r1[b.i1] - r1[b.i0]) * b.frac;
        dst[y * width + x] = top + (bottom - top) * a.frac;
      }
    }
  }
  return out;
}

void standardize(Tensor& chw, const ChannelStats& stats) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw ShapeError("standardize expects [3, H, W], got " + shape_str(chw.shape()));
  }
  const std::int64_t plane = chw.dim(1) * chw.dim(2);
  for (int c = 0; c < 3; ++c) {
    const double inv = 1.0 / std::max(stats.stddev[c], kStdFloor);
    float* p = chw.ptr() + c * plane;
    for (std::int64_t i = 0; i < plane; ++i) p[i] = static_cast<float>((p[i] - stats.mean[c]) * inv);
  }
}

Tensor prepare_unstandardized(const Image& image, std::int64_t size) {
  return resize_bilinear(image_to_tensor(image), size, size);
}

Tensor preprocess(const Image& image, const ChannelStats& stats, std::int64_t size) {
  Tensor t = prepare_unstandardized(image, size);
  standardize(t, stats);
  return t;
}

Tensor stack_images(const std::vector<Tensor>& images) {
  if (images.empty()) throw ShapeError("stack_images: empty batch");
  const Shape& s = images.front().shape();
  Shape out_shape{static_cast<std::int64_t>(images.size())};
  out_shape.insert(out_shape.end(), s.begin(), s.end());
  Tensor out(out_shape);
  const std::size_t each = images.front().numel();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != s) {
      throw ShapeError("stack_images: shape " + shape_str(images[i].shape()) + " differs from " +
                       shape_str(s));
    }
    std::memcpy(out.ptr() + i * each, images[i].ptr(), each * sizeof(float));
  }
  return out;
}

std::string format_channel_stats(const ChannelStats& stats) {
  std::string out = "mean";
  for (double m : stats.mean) out += " " + format_exact(m);
  out += "\nstd";
  for (double s : stats.stddev) out += " " + format_exact(s);
  out += "\nfingerprint " + stats.fingerprint + "\n";
  return out;
}

ChannelStats parse_channel_stats(const std::string& text) {
  ChannelStats stats;
  bool have_mean = false, have_std = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto space = view.find(' ');
    const std::string key(view.substr(0, space));
    const std::string rest(space == std::string_view::npos ? "" : trim(view.substr(space + 1)));
    if (key == "fingerprint") {
      stats.fingerprint = rest;
      continue;
    }
    if (key != "mean" && key != "std") throw FormatError("channel statistics: unknown key '" + key + "'");
    std::istringstream values(rest);
    std::array<double, 3> v{};
    for (auto& x : v) {
      std::string token;
      if (!(values >> token)) throw FormatError("channel statistics: '" + key + "' needs three values");
      x = parse_double(token, key);
    }
    (key == "mean" ? stats.mean : stats.stddev) = v;
    (key == "mean" ? have_mean : have_std) = true;
  }
  if (!have_mean || !have_std) throw FormatError("channel statistics: missing mean or std line");
  for (double s : stats.stddev) {
    if (!(s > 0)) throw FormatError("channel statistics: std values must be positive");
  }
  return stats;
}

void save_channel_stats(const std::filesystem::path& path, const ChannelStats& stats) {
  write_file_atomic(path, format_channel_stats(stats));
}

ChannelStats load_channel_stats(const std::filesystem::path& path) {
  return parse_channel_stats(read_file(path));
}

}  // namespace direcnet
