#pragma once

#include <ostream>

namespace msl {

/// Axis-aligned box in absolute pixel coordinates (continuous, x1 <= x2, y1 <= y2).
struct PixelBox
{
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept;
  double center_x() const noexcept { return 0.5 * (x1 + x2); }
  double center_y() const noexcept { return 0.5 * (y1 + y2); }

  /// True when coordinates are finite and width/height are non-negative.
  bool valid() const noexcept;

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// YOLO label box: center and size as fractions of image width/height.
struct NormBox
{
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  /// All edges inside [0,1] and strictly positive size.
  bool valid() const noexcept;

  friend bool operator==(const NormBox&, const NormBox&) = default;
};

/// Geometry of an aspect-preserving resize into a fixed canvas.
///
/// A source point (x, y) lands at (x * scale + pad_x, y * scale + pad_y) in
/// the destination canvas. Pads are the centered remainders and may be
/// fractional; they are never rounded.
struct LetterboxMeta
{
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;
  int src_w = 0;
  int src_h = 0;
  int dst_w = 0;
  int dst_h = 0;
};

std::ostream& operator<<(std::ostream& os, const PixelBox& b);
std::ostream& operator<<(std::ostream& os, const NormBox& b);

/// Intersection over union. Disjoint or zero-area boxes give 0.
double iou(const PixelBox& a, const PixelBox& b) noexcept;

/// Complete IoU: IoU minus the normalized center distance and the weighted
/// aspect-ratio consistency term. Identical boxes give exactly 1.
double ciou(const PixelBox& a, const PixelBox& b) noexcept;

PixelBox norm_to_pixel(const NormBox& b, int img_w, int img_h) noexcept;
NormBox pixel_to_norm(const PixelBox& b, int img_w, int img_h) noexcept;

/// Clips the box edges to the unit square, keeping the center/size form.
NormBox clamp_unit(const NormBox& b) noexcept;

/// Clips a pixel box to [0,w] x [0,h].
PixelBox clip(const PixelBox& b, double w, double h) noexcept;

/// Throws std::invalid_argument when any dimension is not positive.
LetterboxMeta letterbox_params(int src_w, int src_h, int dst_w, int dst_h);

/// Source space -> letterboxed space.
PixelBox map_box(const PixelBox& b, const LetterboxMeta& m) noexcept;

/// Letterboxed space -> source space, clamped to the source image.
PixelBox unmap_box(const PixelBox& b, const LetterboxMeta& m) noexcept;

}  // namespace msl
