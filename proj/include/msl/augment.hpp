#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

#include "msl/dataset.hpp"

namespace msl {

inline constexpr double kMaxRotationDegrees = 45.0;
inline constexpr double kMinKeptAreaFraction = 0.2;

/// Augmentation recipe applied at dataset-build time.
struct AugmentSpec
{
  double noise_fraction = 0.05;
  double rotation_degrees = 10.0;
  int target_w = 432;
  int target_h = 256;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Salt-and-pepper noise on exactly round(fraction * W * H) distinct pixels.
/// Each chosen pixel becomes pure black or pure white with equal odds; a
/// pixel already at the drawn extreme takes the other one, so every chosen
/// pixel changes.
cv::Mat augment_noise(const cv::Mat& image, double fraction, std::uint64_t seed);

/// Applies the rotation used by augment_rotate to a single point.
cv::Point2d rotate_point(cv::Point2d p, cv::Point2d center, double angle_degrees) noexcept;

struct RotateResult
{
  cv::Mat image;
  std::vector<LabelEntry> boxes;
};

/// Rotates about the image center (counter-clockwise for positive angles),
/// keeps the canvas size and fills uncovered pixels with black. Boxes become
/// the clipped axis-aligned hull of their rotated corners; boxes whose clipped
/// hull keeps less than kMinKeptAreaFraction of the original area are dropped.
RotateResult augment_rotate(const cv::Mat& image, const std::vector<LabelEntry>& boxes,
                            double angle_degrees);

/// Box-only part of augment_rotate, for a w x h image.
std::vector<LabelEntry> rotate_boxes(const std::vector<LabelEntry>& boxes, int w, int h,
                                     double angle_degrees);

/// Direct (non-uniform) resize. Normalized boxes are unchanged.
std::pair<cv::Mat, std::vector<LabelEntry>> resize_with_boxes(const cv::Mat& image,
                                                              const std::vector<LabelEntry>& boxes,
                                                              int target_w, int target_h);

}  // namespace msl
