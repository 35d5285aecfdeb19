#include <stdexcept>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "msl/pipeline.hpp"

namespace msl {

Preprocessed preprocess(const cv::Mat& image, int target_w, int target_h)
{
  if (target_w <= 0 || target_h <= 0 || target_w % 32 != 0 || target_h % 32 != 0) {
    throw std::invalid_argument(
        fmt::format("preprocess: target {}x{} must be positive multiples of 32", target_w,
                    target_h));
  }
  if (image.empty() || image.depth() != CV_8U) {
    throw std::invalid_argument("preprocess: expected a non-empty 8-bit image");
  }
  cv::Mat bgr;
  switch (image.channels()) {
    case 1:
      cv::cvtColor(image, bgr, cv::COLOR_GRAY2BGR);
      break;
    case 4:
      cv::cvtColor(image, bgr, cv::COLOR_BGRA2BGR);
      break;
    case 3:
      bgr = image;
      break;
    default:
      throw std::invalid_argument("preprocess: unsupported channel count");
  }

  Preprocessed out;
  out.meta = letterbox_params(bgr.cols, bgr.rows, target_w, target_h);
  const double s = out.meta.scale;

  // Continuous x -> s*x + pad, expressed on pixel-center indices.
  cv::Mat warp = (cv::Mat_<double>(2, 3) << s, 0.0, out.meta.pad_x + 0.5 * s - 0.5,  //
                  0.0, s, out.meta.pad_y + 0.5 * s - 0.5);
  cv::Mat canvas;
  cv::warpAffine(bgr, canvas, warp, cv::Size(target_w, target_h), cv::INTER_LINEAR,
                 cv::BORDER_CONSTANT, cv::Scalar::all(kLetterboxFill));

  const std::size_t plane = static_cast<std::size_t>(target_w) * target_h;
  out.tensor.resize(3 * plane);
  float* r = out.tensor.data();
  float* g = r + plane;
  float* b = g + plane;
  constexpr float kInv = 1.0F / 255.0F;
  for (int y = 0; y < target_h; ++y) {
    const auto* px = canvas.ptr<cv::Vec3b>(y);
    const std::size_t row = static_cast<std::size_t>(y) * target_w;
    for (int x = 0; x < target_w; ++x) {
      b[row + x] = px[x][0] * kInv;
      g[row + x] = px[x][1] * kInv;
      r[row + x] = px[x][2] * kInv;
    }
  }
  return out;
}

}  // namespace msl
