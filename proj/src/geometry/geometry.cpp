#include "msl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace msl {

double PixelBox::area() const noexcept
{
  return std::max(0.0, width()) * std::max(0.0, height());
}

bool PixelBox::valid() const noexcept
{
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 <= x2 && y1 <= y2;
}

bool NormBox::valid() const noexcept
{
  if (!(std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h))) {
    return false;
  }
  if (w <= 0.0 || h <= 0.0) {
    return false;
  }
  for (double v : {cx, cy, w, h}) {
    if (v < 0.0 || v > 1.0) {
      return false;
    }
  }
  constexpr double eps = 1e-9;
  return cx - w / 2 >= -eps && cx + w / 2 <= 1.0 + eps && cy - h / 2 >= -eps &&
         cy + h / 2 <= 1.0 + eps;
}

std::ostream& operator<<(std::ostream& os, const PixelBox& b)
{
  return os << "PixelBox(" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2 << ")";
}

std::ostream& operator<<(std::ostream& os, const NormBox& b)
{
  return os << "NormBox(" << b.cx << ", " << b.cy << ", " << b.w << ", " << b.h << ")";
}

namespace {

double intersection_area(const PixelBox& a, const PixelBox& b) noexcept
{
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  return iw * ih;
}

// atan(w/h) with the zero-height limits spelled out.
double aspect_angle(double w, double h) noexcept
{
  if (h <= 0.0) {
    return w > 0.0 ? std::numbers::pi / 2.0 : 0.0;
  }
  return std::atan(w / h);
}

}  // namespace

double iou(const PixelBox& a, const PixelBox& b) noexcept
{
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

double ciou(const PixelBox& a, const PixelBox& b) noexcept
{
  if (a == b) {
    return 1.0;
  }
  const double overlap = iou(a, b);

  const double dx = a.center_x() - b.center_x();
  const double dy = a.center_y() - b.center_y();
  const double rho2 = dx * dx + dy * dy;

  const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double c2 = cw * cw + ch * ch;
  const double distance_term = c2 > 0.0 ? rho2 / c2 : 0.0;

  const double dtheta = aspect_angle(b.width(), b.height()) - aspect_angle(a.width(), a.height());
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * dtheta * dtheta;
  const double denom = (1.0 - overlap) + v;
  const double alpha = denom > 0.0 ? v / denom : 0.0;

  return overlap - distance_term - alpha * v;
}

PixelBox norm_to_pixel(const NormBox& b, int img_w, int img_h) noexcept
{
  const double w = img_w;
  const double h = img_h;
  return {(b.cx - 0.5 * b.w) * w, (b.cy - 0.5 * b.h) * h, (b.cx + 0.5 * b.w) * w,
          (b.cy + 0.5 * b.h) * h};
}

NormBox pixel_to_norm(const PixelBox& b, int img_w, int img_h) noexcept
{
  const double w = img_w;
  const double h = img_h;
  return {b.center_x() / w, b.center_y() / h, b.width() / w, b.height() / h};
}

NormBox clamp_unit(const NormBox& b) noexcept
{
  const double x1 = std::clamp(b.cx - 0.5 * b.w, 0.0, 1.0);
  const double x2 = std::clamp(b.cx + 0.5 * b.w, 0.0, 1.0);
  const double y1 = std::clamp(b.cy - 0.5 * b.h, 0.0, 1.0);
  const double y2 = std::clamp(b.cy + 0.5 * b.h, 0.0, 1.0);
  return {0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
}

PixelBox clip(const PixelBox& b, double w, double h) noexcept
{
  return {std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w),
          std::clamp(b.y2, 0.0, h)};
}

LetterboxMeta letterbox_params(int src_w, int src_h, int dst_w, int dst_h)
{
  if (src_w <= 0 || src_h <= 0 || dst_w <= 0 || dst_h <= 0) {
    throw std::invalid_argument("letterbox_params: dimensions must be positive");
  }
  LetterboxMeta m;
  m.src_w = src_w;
  m.src_h = src_h;
  m.dst_w = dst_w;
  m.dst_h = dst_h;
  m.scale = std::min(static_cast<double>(dst_w) / src_w, static_cast<double>(dst_h) / src_h);
  m.pad_x = std::max(0.0, 0.5 * (dst_w - src_w * m.scale));
  m.pad_y = std::max(0.0, 0.5 * (dst_h - src_h * m.scale));
  return m;
}

PixelBox map_box(const PixelBox& b, const LetterboxMeta& m) noexcept
{
  return {b.x1 * m.scale + m.pad_x, b.y1 * m.scale + m.pad_y, b.x2 * m.scale + m.pad_x,
          b.y2 * m.scale + m.pad_y};
}

PixelBox unmap_box(const PixelBox& b, const LetterboxMeta& m) noexcept
{
  const PixelBox src{(b.x1 - m.pad_x) / m.scale, (b.y1 - m.pad_y) / m.scale,
                     (b.x2 - m.pad_x) / m.scale, (b.y2 - m.pad_y) / m.scale};
  return clip(src, m.src_w, m.src_h);
}

}  // namespace msl
