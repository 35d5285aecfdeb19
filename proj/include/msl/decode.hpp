#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msl/geometry.hpp"

namespace msl {

inline constexpr int kDefaultRegMax = 16;
inline const std::vector<int> kDefaultStrides = {8, 16, 32};

class DecodeError : public std::runtime_error
{
public:
  enum class Kind { NotDivisible, ShapeMismatch };

  DecodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

/// One decoded object: box (letterboxed input space until unmapped), class, score in (0,1).
struct Detection
{
  PixelBox box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DecodeConfig
{
  double conf_threshold = 0.25;
  double nms_iou_threshold = 0.45;
  int max_detections = 300;
  bool class_aware = true;

  void validate() const;
};

/// Cell center of one prediction location.
struct AnchorPoint
{
  float cx = 0.0F;
  float cy = 0.0F;
  float stride = 0.0F;
};

/// Anchor centers ((j+0.5)s, (i+0.5)s) per stride, levels in the given order,
/// row-major inside a level. Throws DecodeError::NotDivisible.
std::vector<AnchorPoint> make_grid(int input_w, int input_h, std::span<const int> strides);

/// One head level: channel-major (4*reg_max + nc) x height x width logits.
/// Box channels are side-major: [left bins, top bins, right bins, bottom bins].
struct ScaleTensor
{
  int stride = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;
};

/// Raw per-level outputs of an anchor-free, decoupled detection head.
struct RawHeadOutput
{
  int reg_max = kDefaultRegMax;
  int nc = 0;
  std::vector<ScaleTensor> scales;

  int channels() const noexcept { return 4 * reg_max + nc; }
  std::size_t anchor_count() const noexcept;
};

/// Already-decoded head output: row-major (4 + nc) x anchors; rows 0..3 are
/// cx, cy, w, h in letterboxed pixels, rows 4.. per-class probabilities.
struct PretransformedOutput
{
  int nc = 0;
  int anchors = 0;
  std::vector<float> data;
};

/// Softmax expectation sum_k k * p_k over the bins, in bin units.
double dfl_expectation(std::span<const double> logits);
double dfl_expectation(std::span<const float> logits);

double sigmoid(double x) noexcept;

/// Pre-NMS candidates: one Detection for every (anchor, class) whose sigmoid
/// score exceeds conf_threshold, ordered by anchor then class.
/// Throws DecodeError::ShapeMismatch when raw and grid disagree.
std::vector<Detection> decode_raw(const RawHeadOutput& raw, std::span<const AnchorPoint> grid,
                                  double conf_threshold);

/// Same candidate rule for pretransformed tensors; scores are used as-is.
std::vector<Detection> decode_pretransformed(const PretransformedOutput& out,
                                             double conf_threshold);

/// Greedy non-maximum suppression. Order: score descending, then class_id,
/// x1, y1, x2, y2 ascending. A detection is kept when its IoU with every kept
/// detection (of the same class when class_aware) is below iou_threshold.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, bool class_aware,
                           int max_detections);

/// Strict weak order used by nms.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

}  // namespace msl
