#include "msl/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace msl {

void DecodeConfig::validate() const
{
  if (!(conf_threshold > 0.0 && conf_threshold < 1.0)) {
    throw std::invalid_argument("conf threshold must be in (0,1)");
  }
  if (!(nms_iou_threshold > 0.0 && nms_iou_threshold < 1.0)) {
    throw std::invalid_argument("NMS IoU threshold must be in (0,1)");
  }
  if (max_detections < 1) {
    throw std::invalid_argument("max detections must be >= 1");
  }
}

std::vector<AnchorPoint> make_grid(int input_w, int input_h, std::span<const int> strides)
{
  std::vector<AnchorPoint> grid;
  for (int s : strides) {
    if (s <= 0 || input_w <= 0 || input_h <= 0 || input_w % s != 0 || input_h % s != 0) {
      throw DecodeError(DecodeError::Kind::NotDivisible,
                        fmt::format("input {}x{} is not divisible by stride {}", input_w,
                                    input_h, s));
    }
  }
  for (int s : strides) {
    const int gw = input_w / s;
    const int gh = input_h / s;
    grid.reserve(grid.size() + static_cast<std::size_t>(gw) * gh);
    for (int i = 0; i < gh; ++i) {
      for (int j = 0; j < gw; ++j) {
        grid.push_back({(j + 0.5F) * s, (i + 0.5F) * s, static_cast<float>(s)});
      }
    }
  }
  return grid;
}

std::size_t RawHeadOutput::anchor_count() const noexcept
{
  std::size_t n = 0;
  for (const auto& s : scales) {
    n += static_cast<std::size_t>(s.height) * s.width;
  }
  return n;
}

double sigmoid(double x) noexcept
{
  return 1.0 / (1.0 + std::exp(-x));
}

namespace {

template <class T>
double dfl_expectation_impl(std::span<const T> logits)
{
  if (logits.size() < 2) {
    throw std::invalid_argument("dfl_expectation: need at least 2 bins");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double norm = 0.0;
  double weighted = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double e = std::exp(static_cast<double>(logits[k]) - peak);
    norm += e;
    weighted += static_cast<double>(k) * e;
  }
  return weighted / norm;
}

// Expectation over `bins` logits spaced `step` floats apart.
double dfl_strided(const float* first, int bins, std::size_t step)
{
  float peak = first[0];
  for (int k = 1; k < bins; ++k) {
    peak = std::max(peak, first[k * step]);
  }
  double norm = 0.0;
  double weighted = 0.0;
  for (int k = 0; k < bins; ++k) {
    const double e = std::exp(static_cast<double>(first[k * step]) - peak);
    norm += e;
    weighted += k * e;
  }
  return weighted / norm;
}

// Smallest logit whose sigmoid can exceed `conf`, with slack for rounding.
float logit_floor(double conf)
{
  const double t = std::log(conf / (1.0 - conf));
  return static_cast<float>(t - 1e-4 * (1.0 + std::abs(t)));
}

}  // namespace

double dfl_expectation(std::span<const double> logits)
{
  return dfl_expectation_impl(logits);
}

double dfl_expectation(std::span<const float> logits)
{
  return dfl_expectation_impl(logits);
}

std::vector<Detection> decode_raw(const RawHeadOutput& raw, std::span<const AnchorPoint> grid,
                                  double conf_threshold)
{
  if (raw.reg_max < 2 || raw.nc < 1) {
    throw DecodeError(DecodeError::Kind::ShapeMismatch, "decode_raw: invalid reg_max or nc");
  }
  if (raw.anchor_count() != grid.size()) {
    throw DecodeError(DecodeError::Kind::ShapeMismatch,
                      fmt::format("decode_raw: {} anchors in tensors, {} in grid",
                                  raw.anchor_count(), grid.size()));
  }
  const int channels = raw.channels();
  const float floor = logit_floor(conf_threshold);

  std::vector<Detection> out;
  std::vector<std::uint8_t> hot;
  std::size_t base = 0;
  for (const auto& level : raw.scales) {
    const std::size_t plane = static_cast<std::size_t>(level.height) * level.width;
    if (level.data.size() != plane * channels) {
      throw DecodeError(DecodeError::Kind::ShapeMismatch,
                        fmt::format("decode_raw: stride {} tensor has {} values, expected {}",
                                    level.stride, level.data.size(), plane * channels));
    }
    if (plane > 0 && (grid[base].stride != static_cast<float>(level.stride) ||
                      grid[base + plane - 1].stride != static_cast<float>(level.stride))) {
      throw DecodeError(DecodeError::Kind::ShapeMismatch,
                        fmt::format("decode_raw: grid does not match stride {}", level.stride));
    }

    // Cheap pass over class planes; DFL decoding only runs where some class
    // logit can pass the threshold.
    hot.assign(plane, 0);
    const float* cls = level.data.data() + static_cast<std::size_t>(4 * raw.reg_max) * plane;
    for (int c = 0; c < raw.nc; ++c) {
      const float* row = cls + static_cast<std::size_t>(c) * plane;
      for (std::size_t a = 0; a < plane; ++a) {
        hot[a] |= static_cast<std::uint8_t>(row[a] > floor);
      }
    }

    for (std::size_t a = 0; a < plane; ++a) {
      if (!hot[a]) {
        continue;
      }
      const AnchorPoint& anchor = grid[base + a];
      double dist[4];
      for (int side = 0; side < 4; ++side) {
        const float* first = level.data.data() + static_cast<std::size_t>(side) * raw.reg_max * plane + a;
        dist[side] = dfl_strided(first, raw.reg_max, plane) * anchor.stride;
      }
      const PixelBox box{anchor.cx - dist[0], anchor.cy - dist[1], anchor.cx + dist[2],
                         anchor.cy + dist[3]};
      for (int c = 0; c < raw.nc; ++c) {
        const float logit = cls[static_cast<std::size_t>(c) * plane + a];
        if (logit <= floor) {
          continue;
        }
        const double score = sigmoid(logit);
        if (score > conf_threshold) {
          out.push_back({box, c, score});
        }
      }
    }
    base += plane;
  }
  return out;
}

std::vector<Detection> decode_pretransformed(const PretransformedOutput& t, double conf_threshold)
{
  if (t.nc < 1 || t.anchors < 0 ||
      t.data.size() != static_cast<std::size_t>(4 + t.nc) * static_cast<std::size_t>(t.anchors)) {
    throw DecodeError(DecodeError::Kind::ShapeMismatch,
                      fmt::format("decode_pretransformed: {} values for {}x{}", t.data.size(),
                                  4 + t.nc, t.anchors));
  }
  const auto n = static_cast<std::size_t>(t.anchors);
  const float* d = t.data.data();
  std::vector<Detection> out;
  for (std::size_t a = 0; a < n; ++a) {
    bool any = false;
    for (int c = 0; c < t.nc && !any; ++c) {
      any = d[(4 + c) * n + a] > conf_threshold;
    }
    if (!any) {
      continue;
    }
    const double cx = d[a];
    const double cy = d[n + a];
    const double w = d[2 * n + a];
    const double h = d[3 * n + a];
    const PixelBox box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    for (int c = 0; c < t.nc; ++c) {
      const double score = d[(4 + c) * n + a];
      if (score > conf_threshold) {
        out.push_back({box, c, score});
      }
    }
  }
  return out;
}

bool ranks_before(const Detection& a, const Detection& b) noexcept
{
  if (a.score != b.score) return a.score > b.score;
  if (a.class_id != b.class_id) return a.class_id < b.class_id;
  if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
  if (a.box.y1 != b.box.y1) return a.box.y1 < b.box.y1;
  if (a.box.x2 != b.box.x2) return a.box.x2 < b.box.x2;
  return a.box.y2 < b.box.y2;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, bool class_aware,
                           int max_detections)
{
  std::sort(dets.begin(), dets.end(), ranks_before);
  std::vector<Detection> kept;
  const auto limit = static_cast<std::size_t>(std::max(0, max_detections));
  for (const auto& d : dets) {
    if (kept.size() >= limit) {
      break;
    }
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return (!class_aware || k.class_id == d.class_id) && iou(k.box, d.box) >= iou_threshold;
    });
    if (!suppressed) {
      kept.push_back(d);
    }
  }
  return kept;
}

}  // namespace msl
