#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "msl/geometry.hpp"
#include "oracles.hpp"
#include "synth.hpp"

namespace msl {
namespace {

using testing::raster_iou;
using testing::ref_ciou;

TEST(Iou, IdenticalBoxesGiveOne)
{
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero)
{
  EXPECT_EQ(iou({0, 0, 1, 1}, {5, 5, 6, 6}), 0.0);
}

TEST(Iou, PartialOverlapMatchesRasterCount)
{
  const PixelBox a{0, 0, 2, 2};
  const PixelBox b{1, 1, 3, 3};
  // Scaled by 100 so the raster has 40000 cells in play.
  const double raster = raster_iou({0, 0, 200, 200}, {100, 100, 300, 300});
  EXPECT_NEAR(raster, 1.0 / 7.0, 1e-12);
  EXPECT_NEAR(iou(a, b), 1.0 / 7.0, 1e-15);
}

TEST(Iou, TouchingAndDegenerateBoxes)
{
  EXPECT_EQ(iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);
  EXPECT_EQ(iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
  EXPECT_EQ(iou({0, 0, 0, 5}, {0, 0, 3, 5}), 0.0);
}

TEST(Iou, SymmetricBoundedAndAgreesWithRaster)
{
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const PixelBox a = testing::random_box(rng, 1000, 1000);
    PixelBox b = testing::random_box(rng, 1000, 1000);
    if (i % 2 == 0) {
      // Force overlap for half of the pairs.
      const double dx = a.x1 - b.x1 + (a.width() * 0.3);
      const double dy = a.y1 - b.y1 + (a.height() * 0.3);
      b = {b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy};
    }
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LE(ciou(a, b), v + 1e-12);
    EXPECT_LT(std::abs(v - raster_iou(a, b)), 1e-3) << a << " " << b;
  }
}

TEST(Ciou, IdenticalBoxesGiveExactlyOne)
{
  EXPECT_EQ(ciou({3, 4, 10, 20}, {3, 4, 10, 20}), 1.0);
  EXPECT_EQ(ciou({3, 4, 3, 20}, {3, 4, 3, 20}), 1.0);
}

TEST(Ciou, ConcentricSameShapeEqualsIou)
{
  const PixelBox a{0, 0, 4, 2};
  const PixelBox b{1, 0.5, 3, 1.5};
  EXPECT_NEAR(ciou(a, b), iou(a, b), 1e-12);
}

TEST(Ciou, AdjacentSquaresMatchReference)
{
  const PixelBox a{0, 0, 2, 2};
  const PixelBox b{2, 0, 4, 2};
  EXPECT_NEAR(ciou(a, b), static_cast<double>(ref_ciou(a, b)), 1e-12);
  EXPECT_NEAR(ciou(a, b), -0.2, 1e-12);
}

TEST(Ciou, RandomPairsMatchReference)
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const PixelBox a = testing::random_box(rng, 100, 100, 0.5);
    const PixelBox b = testing::random_box(rng, 100, 100, 0.5);
    EXPECT_NEAR(ciou(a, b), static_cast<double>(ref_ciou(a, b)), 1e-9);
  }
}

TEST(Ciou, ZeroHeightBoxStaysFinite)
{
  const double v = ciou({0, 0, 4, 0}, {0, 0, 4, 4});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, static_cast<double>(ref_ciou({0, 0, 4, 0}, {0, 0, 4, 4})), 1e-12);
}

TEST(NormPixel, FullImageBox)
{
  EXPECT_EQ(norm_to_pixel({0.5, 0.5, 1, 1}, 432, 256), (PixelBox{0, 0, 432, 256}));
}

TEST(NormPixel, CenteredHalfBox)
{
  EXPECT_EQ(norm_to_pixel({0.5, 0.5, 0.5, 0.5}, 100, 100), (PixelBox{25, 25, 75, 75}));
}

TEST(NormPixel, RoundTrip)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double w = 0.01 + 0.98 * u(rng);
    const double h = 0.01 + 0.98 * u(rng);
    const NormBox b{w / 2 + (1 - w) * u(rng), h / 2 + (1 - h) * u(rng), w, h};
    const NormBox r = pixel_to_norm(norm_to_pixel(b, 432, 256), 432, 256);
    EXPECT_NEAR(r.cx, b.cx, 1e-9);
    EXPECT_NEAR(r.cy, b.cy, 1e-9);
    EXPECT_NEAR(r.w, b.w, 1e-9);
    EXPECT_NEAR(r.h, b.h, 1e-9);
  }
}

TEST(NormBox, Validity)
{
  EXPECT_TRUE((NormBox{0.5, 0.5, 1, 1}.valid()));
  EXPECT_FALSE((NormBox{0.5, 0.5, 0, 1}.valid()));
  EXPECT_FALSE((NormBox{0.9, 0.5, 0.4, 0.2}.valid()));
  const NormBox c = clamp_unit({0.9, 0.5, 0.4, 0.2});
  EXPECT_TRUE(c.valid());
  EXPECT_NEAR(c.cx + c.w / 2, 1.0, 1e-12);
  EXPECT_NEAR(c.cx - c.w / 2, 0.7, 1e-12);
}

TEST(Clip, ClampsToImage)
{
  EXPECT_EQ(clip({-5, -1, 50, 20}, 40, 10), (PixelBox{0, 0, 40, 10}));
}

TEST(Letterbox, Identity)
{
  const auto m = letterbox_params(640, 640, 640, 640);
  EXPECT_EQ(m.scale, 1.0);
  EXPECT_EQ(m.pad_x, 0.0);
  EXPECT_EQ(m.pad_y, 0.0);
}

TEST(Letterbox, WideSource)
{
  const auto m = letterbox_params(1920, 1080, 640, 640);
  EXPECT_NEAR(m.scale, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.pad_x, 0.0, 1e-12);
  EXPECT_NEAR(m.pad_y, 140.0, 1e-12);
}

TEST(Letterbox, DatasetResolution)
{
  const auto m = letterbox_params(432, 256, 640, 640);
  const double scale = 640.0 / 432.0;
  EXPECT_NEAR(m.scale, scale, 1e-15);
  EXPECT_NEAR(m.pad_x, 0.0, 1e-12);
  EXPECT_NEAR(m.pad_y, (640.0 - 256.0 * scale) / 2.0, 1e-12);
}

TEST(Letterbox, RejectsNonPositive)
{
  EXPECT_THROW(letterbox_params(0, 10, 640, 640), std::invalid_argument);
  EXPECT_THROW(letterbox_params(10, 10, 640, -1), std::invalid_argument);
}

TEST(Unmap, IdentityMeta)
{
  const auto m = letterbox_params(640, 640, 640, 640);
  const PixelBox b{10.5, 20.25, 100, 300};
  EXPECT_EQ(unmap_box(b, m), b);
}

TEST(Unmap, WideSourceContent)
{
  const auto m = letterbox_params(1920, 1080, 640, 640);
  const PixelBox r = unmap_box({0, 140, 640, 500}, m);
  EXPECT_NEAR(r.x1, 0, 1e-9);
  EXPECT_NEAR(r.y1, 0, 1e-9);
  EXPECT_NEAR(r.x2, 1920, 1e-9);
  EXPECT_NEAR(r.y2, 1080, 1e-9);
}

TEST(Unmap, ClampsToSource)
{
  const auto m = letterbox_params(1920, 1080, 640, 640);
  EXPECT_EQ(unmap_box({-20, 0, 700, 640}, m), (PixelBox{0, 0, 1920, 1080}));
}

TEST(Unmap, InvertsMapInsideSource)
{
  std::mt19937_64 rng(9);
  const int sizes[][2] = {{1920, 1080}, {432, 256}, {256, 432}, {640, 480}, {100, 1000}};
  for (const auto& s : sizes) {
    const auto m = letterbox_params(s[0], s[1], 640, 384);
    for (int i = 0; i < 1000; ++i) {
      const PixelBox b = testing::random_box(rng, s[0], s[1]);
      const PixelBox r = unmap_box(map_box(b, m), m);
      EXPECT_NEAR(r.x1, b.x1, 1e-6);
      EXPECT_NEAR(r.y1, b.y1, 1e-6);
      EXPECT_NEAR(r.x2, b.x2, 1e-6);
      EXPECT_NEAR(r.y2, b.y2, 1e-6);
    }
  }
}

}  // namespace
}  // namespace msl
