#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "reid/binary.hpp"
#include "reid/error.hpp"
#include "reid/rng.hpp"

namespace reid::augment {

/// Row-major interleaved 8-bit image with 1 or 3 channels.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch) {
    return pixels[(y * width + x) * channels + ch];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch) const {
    return pixels[(y * width + x) * channels + ch];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

/// Foreground flags (1 = vehicle, 0 = background).
struct MaskBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> flags;

  MaskBuffer() = default;
  MaskBuffer(std::size_t w, std::size_t h, bool fill = false) : width(w), height(h), flags(w * h, fill) {}

  bool foreground(std::size_t x, std::size_t y) const { return flags[y * width + x] != 0; }
  void set(std::size_t x, std::size_t y, bool fg) { flags[y * width + x] = fg ? 1 : 0; }

  friend bool operator==(const MaskBuffer&, const MaskBuffer&) = default;
};

inline void validate(const ImageBuffer& img) {
  require(img.width >= 1 && img.height >= 1, ErrorCode::DegenerateImage,
          "image has zero dimension (" + std::to_string(img.width) + "x" +
              std::to_string(img.height) + ")");
  require(img.channels == 1 || img.channels == 3, ErrorCode::InvalidArgument,
          "images must have 1 or 3 channels");
  require(img.pixels.size() == img.width * img.height * img.channels, ErrorCode::DimensionMismatch,
          "pixel count does not equal width * height * channels");
}

inline void validate(const MaskBuffer& mask) {
  require(mask.width >= 1 && mask.height >= 1, ErrorCode::DegenerateImage, "mask has zero dimension");
  require(mask.flags.size() == mask.width * mask.height, ErrorCode::DimensionMismatch,
          "mask flag count does not equal width * height");
}

/// Bilinear resampling with pixel centers at (i + 0.5); samples outside the
/// source clamp to the border. Results are rounded to nearest.
inline ImageBuffer resize_bilinear(const ImageBuffer& src, std::size_t width, std::size_t height) {
  validate(src);
  require(width >= 1 && height >= 1, ErrorCode::DegenerateImage, "resize target has zero dimension");
  if (width == src.width && height == src.height) return src;

  // Per-axis source taps and weights.
  auto taps = [](std::size_t dst, std::size_t srcn) {
    std::vector<std::pair<std::size_t, double>> out(dst);
    const double scale = static_cast<double>(srcn) / static_cast<double>(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(srcn - 1));
      const auto lo = static_cast<std::size_t>(std::floor(s));
      out[i] = {std::min(lo, srcn - 1), s - static_cast<double>(lo)};
    }
    return out;
  };
  const auto xt = taps(width, src.width);
  const auto yt = taps(height, src.height);

  ImageBuffer out(width, height, src.channels);
  for (std::size_t y = 0; y < height; ++y) {
    const auto [y0, fy] = yt[y];
    const std::size_t y1 = std::min(y0 + 1, src.height - 1);
    for (std::size_t x = 0; x < width; ++x) {
      const auto [x0, fx] = xt[x];
      const std::size_t x1 = std::min(x0 + 1, src.width - 1);
      for (std::size_t c = 0; c < src.channels; ++c) {
        const double top = src.at(x0, y0, c) + fx * (src.at(x1, y0, c) - src.at(x0, y0, c));
        const double bottom = src.at(x0, y1, c) + fx * (src.at(x1, y1, c) - src.at(x0, y1, c));
        const double v = top + fy * (bottom - top);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

inline MaskBuffer resize_nearest(const MaskBuffer& src, std::size_t width, std::size_t height) {
  validate(src);
  MaskBuffer out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(src.height - 1, y * src.height / height);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(src.width - 1, x * src.width / width);
      out.set(x, y, src.foreground(sx, sy));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct ShrinkOptions {
  double probability = 0.5;
  double factor_min = 0.4;
  double factor_max = 0.6;
};

/// What random_shrink decided, for inspection.
struct ShrinkTrace {
  bool eligible = false;  // source larger than target on both axes
  bool applied = false;
  double factor = 1.0;
};

/// Resizes to the target size. When the source exceeds the target on both
/// axes, with the given probability it is first scaled down by a factor
/// drawn uniformly from [factor_min, factor_max].
inline ImageBuffer random_shrink(const ImageBuffer& img, std::size_t target_width,
                                 std::size_t target_height, std::uint64_t seed,
                                 const ShrinkOptions& options = {}, ShrinkTrace* trace = nullptr) {
  validate(img);
  require(target_width >= 1 && target_height >= 1, ErrorCode::DegenerateImage,
          "target has zero dimension");
  require(options.factor_min > 0.0 && options.factor_min <= options.factor_max &&
              options.factor_max <= 1.0,
          ErrorCode::InvalidArgument, "shrink factor range must lie in (0, 1]");

  ShrinkTrace local;
  local.eligible = img.width > target_width && img.height > target_height;
  Rng rng(seed);
  if (local.eligible && rng.bernoulli(options.probability)) {
    local.applied = true;
    local.factor = rng.uniform(options.factor_min, options.factor_max);
  }
  if (trace) *trace = local;
  if (!local.applied) return resize_bilinear(img, target_width, target_height);

  auto scaled = [&](std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(n * local.factor)));
  };
  const ImageBuffer small = resize_bilinear(img, scaled(img.width), scaled(img.height));
  return resize_bilinear(small, target_width, target_height);
}

/// With the given probability, keeps `a` where the mask is foreground and
/// takes `b` elsewhere. `b` is resized to `a`'s size first if they differ.
inline ImageBuffer background_substitute(const ImageBuffer& a, const MaskBuffer& mask_a,
                                         const ImageBuffer& b, std::uint64_t seed,
                                         double probability = 0.5, bool* applied = nullptr) {
  validate(a);
  validate(b);
  validate(mask_a);
  require(mask_a.width == a.width && mask_a.height == a.height, ErrorCode::DimensionMismatch,
          "mask is " + std::to_string(mask_a.width) + "x" + std::to_string(mask_a.height) +
              " but image is " + std::to_string(a.width) + "x" + std::to_string(a.height));
  require(a.channels == b.channels, ErrorCode::DimensionMismatch,
          "images have different channel counts");

  Rng rng(seed);
  const bool apply = rng.bernoulli(probability);
  if (applied) *applied = apply;
  if (!apply) return a;

  const ImageBuffer background = resize_bilinear(b, a.width, a.height);
  ImageBuffer out = a;
  for (std::size_t y = 0; y < a.height; ++y) {
    for (std::size_t x = 0; x < a.width; ++x) {
      if (mask_a.foreground(x, y)) continue;
      for (std::size_t c = 0; c < a.channels; ++c) out.at(x, y, c) = background.at(x, y, c);
    }
  }
  return out;
}

/// Zero-pads every border by `pad` and cuts a uniformly placed window.
/// The chosen top-left offset in padded coordinates is reported if asked.
inline ImageBuffer pad_and_random_crop(const ImageBuffer& img, std::size_t pad, std::size_t crop_width,
                                       std::size_t crop_height, std::uint64_t seed,
                                       std::pair<std::size_t, std::size_t>* offset = nullptr) {
  validate(img);
  const std::size_t pw = img.width + 2 * pad;
  const std::size_t ph = img.height + 2 * pad;
  if (crop_width < 1 || crop_height < 1 || crop_width > pw || crop_height > ph) {
    fail(ErrorCode::CropTooLarge, "crop " + std::to_string(crop_width) + "x" +
                                      std::to_string(crop_height) + " does not fit padded " +
                                      std::to_string(pw) + "x" + std::to_string(ph));
  }
  Rng rng(seed);
  const std::size_t ox = rng.below(pw - crop_width + 1);
  const std::size_t oy = rng.below(ph - crop_height + 1);
  if (offset) *offset = {ox, oy};

  ImageBuffer out(crop_width, crop_height, img.channels, 0);
  for (std::size_t y = 0; y < crop_height; ++y) {
    const std::size_t py = oy + y;
    if (py < pad || py >= pad + img.height) continue;
    for (std::size_t x = 0; x < crop_width; ++x) {
      const std::size_t px = ox + x;
      if (px < pad || px >= pad + img.width) continue;
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(px - pad, py - pad, c);
    }
  }
  return out;
}

struct EraseOptions {
  double probability = 0.5;
  double area_min = 0.02;
  double area_max = 0.4;
  double aspect_min = 0.3;
  double aspect_max = 3.33;
  int attempts = 100;
};

struct EraseRect {
  bool applied = false;
  std::size_t x = 0, y = 0, width = 0, height = 0;
};

/// With the given probability, fills one rectangle of random area fraction
/// and aspect ratio with uniform noise. A draw that does not fit is retried
/// up to `attempts` times, after which the image is returned untouched.
inline ImageBuffer random_erase(const ImageBuffer& img, std::uint64_t seed,
                                const EraseOptions& options = {}, EraseRect* rect = nullptr) {
  validate(img);
  require(options.area_min > 0.0 && options.area_min <= options.area_max && options.area_max <= 1.0,
          ErrorCode::InvalidArgument, "erase area range must lie in (0, 1]");
  require(options.aspect_min > 0.0 && options.aspect_min <= options.aspect_max,
          ErrorCode::InvalidArgument, "erase aspect range must be positive");

  EraseRect chosen;
  Rng rng(seed);
  ImageBuffer out = img;
  if (rng.bernoulli(options.probability)) {
    const double area = static_cast<double>(img.width * img.height);
    for (int attempt = 0; attempt < options.attempts; ++attempt) {
      const double target = area * rng.uniform(options.area_min, options.area_max);
      const double aspect = rng.uniform(options.aspect_min, options.aspect_max);
      const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
      const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
      if (w < 1 || h < 1 || w > img.width || h > img.height) continue;
      chosen = {true, static_cast<std::size_t>(rng.below(img.width - w + 1)),
                static_cast<std::size_t>(rng.below(img.height - h + 1)), w, h};
      break;
    }
  }
  if (chosen.applied) {
    for (std::size_t y = chosen.y; y < chosen.y + chosen.height; ++y) {
      for (std::size_t x = chosen.x; x < chosen.x + chosen.width; ++x) {
        for (std::size_t c = 0; c < img.channels; ++c) {
          out.at(x, y, c) = static_cast<std::uint8_t>(rng.below(256));
        }
      }
    }
  }
  if (rect) *rect = chosen;
  return out;
}

// ---------------------------------------------------------------------------
// Uncompressed containers: "RIMG" u32 width, u32 height, u32 channels, then
// samples; "RMSK" u32 width, u32 height, then one 0/1 byte per pixel.

inline std::vector<std::uint8_t> encode_image(const ImageBuffer& img) {
  validate(img);
  std::vector<std::uint8_t> out;
  binary::put_bytes(out, "RIMG");
  binary::put_u32(out, static_cast<std::uint32_t>(img.width));
  binary::put_u32(out, static_cast<std::uint32_t>(img.height));
  binary::put_u32(out, static_cast<std::uint32_t>(img.channels));
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline ImageBuffer decode_image(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  binary::Reader in(bytes, source);
  if (in.bytes(4, "magic") != "RIMG") fail(ErrorCode::BadMagic, source + ": not an RIMG image");
  ImageBuffer img;
  img.width = in.u32("width");
  img.height = in.u32("height");
  img.channels = in.u32("channels");
  const std::size_t n = img.width * img.height * img.channels;
  const std::uint8_t* p = in.raw(n, "pixels");
  img.pixels.assign(p, p + n);
  validate(img);
  return img;
}

inline std::vector<std::uint8_t> encode_mask(const MaskBuffer& mask) {
  validate(mask);
  std::vector<std::uint8_t> out;
  binary::put_bytes(out, "RMSK");
  binary::put_u32(out, static_cast<std::uint32_t>(mask.width));
  binary::put_u32(out, static_cast<std::uint32_t>(mask.height));
  out.insert(out.end(), mask.flags.begin(), mask.flags.end());
  return out;
}

inline MaskBuffer decode_mask(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  binary::Reader in(bytes, source);
  if (in.bytes(4, "magic") != "RMSK") fail(ErrorCode::BadMagic, source + ": not an RMSK mask");
  MaskBuffer mask;
  mask.width = in.u32("width");
  mask.height = in.u32("height");
  const std::size_t n = mask.width * mask.height;
  const std::uint8_t* p = in.raw(n, "flags");
  mask.flags.assign(p, p + n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.flags[i] > 1) {
      fail(ErrorCode::ParseError, source + ": mask byte at offset " + std::to_string(12 + i) +
                                      " is " + std::to_string(mask.flags[i]) + ", expected 0 or 1");
    }
  }
  validate(mask);
  return mask;
}

inline void write_image(const std::string& path, const ImageBuffer& img) {
  binary::write_file(path, encode_image(img));
}
inline ImageBuffer read_image(const std::string& path) { return decode_image(binary::read_file(path), path); }
inline void write_mask(const std::string& path, const MaskBuffer& mask) {
  binary::write_file(path, encode_mask(mask));
}
inline MaskBuffer read_mask(const std::string& path) { return decode_mask(binary::read_file(path), path); }

}  // namespace reid::augment
