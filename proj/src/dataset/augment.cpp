#include "msl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <opencv2/imgproc.hpp>

#include "msl/rng.hpp"

namespace msl {

void AugmentSpec::validate() const
{
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) {
    throw std::invalid_argument("noise fraction must be in [0,1]");
  }
  if (!(std::abs(rotation_degrees) <= kMaxRotationDegrees)) {
    throw std::invalid_argument("rotation magnitude must be <= 45 degrees");
  }
  if (target_w <= 0 || target_h <= 0) {
    throw std::invalid_argument("target size must be positive");
  }
}

cv::Mat augment_noise(const cv::Mat& image, double fraction, std::uint64_t seed)
{
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("augment_noise: fraction must be in [0,1]");
  }
  CV_Assert(image.depth() == CV_8U);
  cv::Mat out = image.clone();
  const auto total = static_cast<std::size_t>(image.total());
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  if (count == 0) {
    return out;
  }

  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0U);
  Rng rng(seed);
  const int channels = out.channels();
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + rng.below(total - i)]);
    const int row = static_cast<int>(order[i] / out.cols);
    const int col = static_cast<int>(order[i] % out.cols);
    std::uint8_t* px = out.ptr<std::uint8_t>(row) + static_cast<std::ptrdiff_t>(col) * channels;

    std::uint8_t value = rng.coin() ? 255 : 0;
    if (std::all_of(px, px + channels, [&](std::uint8_t v) { return v == value; })) {
      value = static_cast<std::uint8_t>(255 - value);
    }
    std::fill(px, px + channels, value);
  }
  return out;
}

cv::Point2d rotate_point(cv::Point2d p, cv::Point2d center, double angle_degrees) noexcept
{
  const double rad = angle_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double dx = p.x - center.x;
  const double dy = p.y - center.y;
  return {center.x + c * dx + s * dy, center.y - s * dx + c * dy};
}

std::vector<LabelEntry> rotate_boxes(const std::vector<LabelEntry>& boxes, int w, int h,
                                     double angle_degrees)
{
  if (angle_degrees == 0.0) {
    return boxes;
  }
  const cv::Point2d center(0.5 * w, 0.5 * h);
  std::vector<LabelEntry> out;
  for (const auto& entry : boxes) {
    const PixelBox b = norm_to_pixel(entry.box, w, h);
    const cv::Point2d corners[4] = {{b.x1, b.y1}, {b.x2, b.y1}, {b.x2, b.y2}, {b.x1, b.y2}};
    PixelBox hull{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& corner : corners) {
      const cv::Point2d r = rotate_point(corner, center, angle_degrees);
      hull.x1 = std::min(hull.x1, r.x);
      hull.y1 = std::min(hull.y1, r.y);
      hull.x2 = std::max(hull.x2, r.x);
      hull.y2 = std::max(hull.y2, r.y);
    }
    const PixelBox clipped = clip(hull, w, h);
    if (clipped.area() < kMinKeptAreaFraction * b.area() || clipped.area() <= 0.0) {
      continue;
    }
    out.push_back({entry.class_id, clamp_unit(pixel_to_norm(clipped, w, h))});
  }
  return out;
}

RotateResult augment_rotate(const cv::Mat& image, const std::vector<LabelEntry>& boxes,
                            double angle_degrees)
{
  if (!(std::abs(angle_degrees) <= kMaxRotationDegrees)) {
    throw std::invalid_argument("augment_rotate: angle magnitude must be <= 45 degrees");
  }
  if (angle_degrees == 0.0) {
    return {image.clone(), boxes};
  }
  // warpAffine works in pixel-index coordinates, where the continuous image
  // center (w/2, h/2) sits at ((w-1)/2, (h-1)/2).
  const cv::Point2f center(0.5F * static_cast<float>(image.cols - 1),
                           0.5F * static_cast<float>(image.rows - 1));
  const cv::Mat rot = cv::getRotationMatrix2D(center, angle_degrees, 1.0);
  RotateResult result;
  cv::warpAffine(image, result.image, rot, image.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                 cv::Scalar::all(0));
  result.boxes = rotate_boxes(boxes, image.cols, image.rows, angle_degrees);
  return result;
}

std::pair<cv::Mat, std::vector<LabelEntry>> resize_with_boxes(const cv::Mat& image,
                                                              const std::vector<LabelEntry>& boxes,
                                                              int target_w, int target_h)
{
  if (target_w <= 0 || target_h <= 0) {
    throw std::invalid_argument("resize_with_boxes: target size must be positive");
  }
  cv::Mat out;
  if (image.cols == target_w && image.rows == target_h) {
    out = image.clone();
  } else {
    const bool shrinking = target_w < image.cols && target_h < image.rows;
    cv::resize(image, out, cv::Size(target_w, target_h), 0, 0,
               shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  }
  return {out, boxes};
}

}  // namespace msl
