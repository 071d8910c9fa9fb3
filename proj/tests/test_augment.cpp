#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "reid/augment.hpp"
#include "reid/rng.hpp"
#include "test_util.hpp"

namespace reid::augment {
namespace {

using reid::testing::error_of;

ImageBuffer noise_image(std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer img(w, h, c);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

TEST(Resize, ConstantStaysConstant) {
  const ImageBuffer img(37, 23, 3, 91);
  for (auto [w, h] : {std::pair{10, 10}, std::pair{80, 5}, std::pair{1, 1}, std::pair{37, 23}}) {
    const auto out = resize_bilinear(img, w, h);
    EXPECT_EQ(out.width, static_cast<std::size_t>(w));
    EXPECT_EQ(out.height, static_cast<std::size_t>(h));
    for (auto p : out.pixels) EXPECT_EQ(p, 91);
  }
}

TEST(Resize, SameSizeIsIdentity) {
  const auto img = noise_image(13, 9, 3, 1);
  EXPECT_EQ(resize_bilinear(img, 13, 9), img);
}

TEST(Resize, NearestMask) {
  MaskBuffer m(2, 2);
  m.set(1, 1, true);
  const auto big = resize_nearest(m, 4, 4);
  EXPECT_TRUE(big.foreground(3, 3));
  EXPECT_TRUE(big.foreground(2, 2));
  EXPECT_FALSE(big.foreground(1, 1));
}

TEST(Shrink, ZeroProbabilityIsPlainResize) {
  const auto img = noise_image(64, 48, 3, 2);
  ShrinkOptions opts;
  opts.probability = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ShrinkTrace trace;
    EXPECT_EQ(random_shrink(img, 32, 24, seed, opts, &trace), resize_bilinear(img, 32, 24));
    EXPECT_TRUE(trace.eligible);
    EXPECT_FALSE(trace.applied);
  }
}

TEST(Shrink, ApplicationRateWithinThreeSigma) {
  const auto img = noise_image(40, 40, 1, 3);
  int applied = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    ShrinkTrace trace;
    random_shrink(img, 20, 20, seed, {}, &trace);
    applied += trace.applied;
    if (trace.applied) {
      EXPECT_GE(trace.factor, 0.4);
      EXPECT_LE(trace.factor, 0.6);
    }
  }
  EXPECT_NEAR(applied, 500, 3.0 * std::sqrt(1000 * 0.25));
}

TEST(Shrink, IneligibleWhenNotLargerOnBothAxes) {
  const auto img = noise_image(40, 10, 1, 4);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ShrinkTrace trace;
    const auto out = random_shrink(img, 20, 20, seed, {}, &trace);
    EXPECT_FALSE(trace.eligible);
    EXPECT_FALSE(trace.applied);
    EXPECT_EQ(out.width, 20u);
    EXPECT_EQ(out.height, 20u);
  }
}

TEST(Shrink, OutputSizeAlwaysTarget) {
  const auto img = noise_image(50, 70, 3, 5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto out = random_shrink(img, 25, 33, seed);
    EXPECT_EQ(out.width, 25u);
    EXPECT_EQ(out.height, 33u);
    EXPECT_EQ(out.channels, 3u);
  }
}

TEST(Shrink, Errors) {
  EXPECT_EQ(error_of([] { random_shrink(ImageBuffer(0, 5, 1), 2, 2, 1); }), ErrorCode::DegenerateImage);
  EXPECT_EQ(error_of([] { random_shrink(ImageBuffer(5, 5, 1), 0, 2, 1); }), ErrorCode::DegenerateImage);
}

TEST(Background, MaskSelectsSource) {
  const ImageBuffer a(8, 6, 3, 10);
  const ImageBuffer b(8, 6, 3, 200);
  EXPECT_EQ(background_substitute(a, MaskBuffer(8, 6, true), b, 1, 1.0), a);
  EXPECT_EQ(background_substitute(a, MaskBuffer(8, 6, false), b, 1, 1.0), b);
  MaskBuffer half(8, 6);
  for (std::size_t y = 0; y < 6; ++y) {
    for (std::size_t x = 0; x < 4; ++x) half.set(x, y, true);
  }
  const auto out = background_substitute(a, half, b, 1, 1.0);
  for (std::size_t y = 0; y < 6; ++y) {
    for (std::size_t x = 0; x < 8; ++x) EXPECT_EQ(out.at(x, y, 1), x < 4 ? 10 : 200);
  }
}

TEST(Background, PixelProvenance) {
  const auto a = noise_image(16, 12, 3, 6);
  const auto b = noise_image(30, 20, 3, 7);
  Rng rng(8);
  MaskBuffer mask(16, 12);
  for (auto& f : mask.flags) f = rng.bernoulli(0.5);
  const auto resized = resize_bilinear(b, 16, 12);
  const auto out = background_substitute(a, mask, b, 9, 1.0);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(out.at(x, y, c), mask.foreground(x, y) ? a.at(x, y, c) : resized.at(x, y, c));
      }
    }
  }
}

TEST(Background, ZeroProbabilityAndErrors) {
  const auto a = noise_image(4, 4, 1, 10);
  bool applied = true;
  EXPECT_EQ(background_substitute(a, MaskBuffer(4, 4), noise_image(4, 4, 1, 11), 1, 0.0, &applied), a);
  EXPECT_FALSE(applied);
  EXPECT_EQ(error_of([&] { background_substitute(a, MaskBuffer(3, 4), a, 1); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(error_of([&] { background_substitute(a, MaskBuffer(4, 4), noise_image(4, 4, 3, 1), 1); }),
            ErrorCode::DimensionMismatch);
}

TEST(Crop, NoPadFullCropIsIdentity) {
  const auto img = noise_image(10, 7, 3, 12);
  EXPECT_EQ(pad_and_random_crop(img, 0, 10, 7, 1), img);
}

TEST(Crop, OffsetRangeAndContent) {
  const auto img = noise_image(10, 8, 1, 13);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::pair<std::size_t, std::size_t> off;
    const auto out = pad_and_random_crop(img, 3, 10, 8, seed, &off);
    ASSERT_LE(off.first, 6u);
    ASSERT_LE(off.second, 6u);
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 10; ++x) {
        const long sx = static_cast<long>(off.first + x) - 3;
        const long sy = static_cast<long>(off.second + y) - 3;
        const bool inside = sx >= 0 && sx < 10 && sy >= 0 && sy < 8;
        EXPECT_EQ(out.at(x, y, 0), inside ? img.at(sx, sy, 0) : 0);
      }
    }
  }
}

TEST(Crop, DeterministicAndErrors) {
  const auto img = noise_image(10, 8, 3, 14);
  EXPECT_EQ(pad_and_random_crop(img, 4, 9, 9, 77), pad_and_random_crop(img, 4, 9, 9, 77));
  EXPECT_EQ(error_of([&] { pad_and_random_crop(img, 1, 13, 5, 1); }), ErrorCode::CropTooLarge);
  EXPECT_EQ(error_of([&] { pad_and_random_crop(img, 1, 0, 5, 1); }), ErrorCode::CropTooLarge);
}

TEST(Erase, ZeroProbabilityUnchanged) {
  const auto img = noise_image(20, 20, 3, 15);
  EraseOptions opts;
  opts.probability = 0.0;
  EraseRect rect;
  EXPECT_EQ(random_erase(img, 1, opts, &rect), img);
  EXPECT_FALSE(rect.applied);
}

TEST(Erase, RectangleInBoundsAndOutsideUntouched) {
  const auto img = noise_image(32, 24, 3, 16);
  EraseOptions opts;
  opts.probability = 1.0;
  int applied = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    EraseRect r;
    const auto out = random_erase(img, seed, opts, &r);
    if (!r.applied) {
      EXPECT_EQ(out, img);
      continue;
    }
    ++applied;
    ASSERT_GE(r.width, 1u);
    ASSERT_GE(r.height, 1u);
    ASSERT_LE(r.x + r.width, img.width);
    ASSERT_LE(r.y + r.height, img.height);
    const double frac = static_cast<double>(r.width * r.height) / (32.0 * 24.0);
    EXPECT_LE(frac, 0.6);
    if (seed % 50 == 0) {
      for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
          const bool in = x >= r.x && x < r.x + r.width && y >= r.y && y < r.y + r.height;
          if (!in) {
            for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(out.at(x, y, c), img.at(x, y, c));
          }
        }
      }
    }
  }
  EXPECT_GT(applied, 900);
}

TEST(Containers, RoundTrip) {
  const auto img = noise_image(7, 5, 3, 17);
  EXPECT_EQ(decode_image(encode_image(img), "mem"), img);
  MaskBuffer mask(7, 5);
  mask.set(2, 3, true);
  EXPECT_EQ(decode_mask(encode_mask(mask), "mem"), mask);

  const auto dir = std::filesystem::temp_directory_path() / "reid_augment_test";
  std::filesystem::create_directories(dir);
  write_image((dir / "a.rimg").string(), img);
  write_mask((dir / "a.rmsk").string(), mask);
  EXPECT_EQ(read_image((dir / "a.rimg").string()), img);
  EXPECT_EQ(read_mask((dir / "a.rmsk").string()), mask);
  std::filesystem::remove_all(dir);
}

TEST(Containers, Errors) {
  auto bytes = encode_image(noise_image(4, 4, 1, 18));
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_EQ(error_of([&] { decode_image(truncated, "t"); }), ErrorCode::TruncatedFile);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(error_of([&] { decode_image(bad, "t"); }), ErrorCode::BadMagic);
  auto mask = encode_mask(MaskBuffer(2, 2));
  mask.back() = 7;
  EXPECT_EQ(error_of([&] { decode_mask(mask, "t"); }), ErrorCode::ParseError);
  EXPECT_EQ(error_of([] { read_image("/nonexistent/dir/x.rimg"); }), ErrorCode::IoError);
}

}  // namespace
}  // namespace reid::augment
