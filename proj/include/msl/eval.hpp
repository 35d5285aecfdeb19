#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "msl/decode.hpp"
#include "msl/geometry.hpp"

namespace msl {

/// One ground-truth object in pixel space.
struct GroundTruth
{
  PixelBox box;
  int class_id = 0;
};

/// Greedy assignment of predictions to ground truth.
struct MatchResult
{
  std::vector<int> pred_to_gt;  // -1 for a false positive
  std::vector<int> gt_to_pred;  // -1 for a missed object
  double iou_threshold = 0.5;

  std::size_t true_positives() const noexcept;
};

/// Walks `preds` in the given order (callers sort by score, descending);
/// each prediction claims the unclaimed same-class GT with the highest IoU
/// >= iou_threshold (lowest GT index on ties), else it is a false positive.
MatchResult match(std::span<const Detection> preds, std::span<const GroundTruth> gts,
                  double iou_threshold = 0.5);

/// All-points interpolated AP of a ranked TP/FP list. Returns nullopt when
/// n_gt == 0 and there are no predictions; 0 when n_gt == 0 with predictions.
std::optional<double> average_precision(std::span<const bool> tp_in_score_order,
                                        std::size_t n_gt);

/// 0.50, 0.55, ..., 0.95
std::vector<double> coco_iou_thresholds();

struct MapResult
{
  std::vector<double> thresholds;
  /// ap[t][c]; nullopt where the class has neither GT nor predictions.
  std::vector<std::vector<std::optional<double>>> ap;
  /// Mean over classes with a defined AP, per threshold (0 when none).
  std::vector<double> map;

  /// Mean over thresholds of per-class AP (nullopt if undefined).
  std::vector<std::optional<double>> class_mean_ap() const;
};

/// Per-class AP and mAP over images. Within an image, predictions are
/// ranked by score with stable ties; across images, ties keep image order.
MapResult map_at(const std::vector<std::vector<Detection>>& preds_by_image,
                 const std::vector<std::vector<GroundTruth>>& gts_by_image, int nc,
                 std::span<const double> thresholds);

/// (nc+1) x (nc+1) counts; rows are predicted class, columns GT class, index
/// nc is background.
struct ConfusionMatrix
{
  int nc = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(int pred_row, int gt_col) const;
  std::uint64_t& at(int pred_row, int gt_col);
  int background() const noexcept { return nc; }

  /// Each column divided by its sum; all-zero columns stay zero.
  std::vector<double> normalized() const;
};

/// Class-agnostic one-to-one matching (IoU >= iou_threshold, highest IoU
/// first) after dropping predictions scoring below conf_threshold.
ConfusionMatrix confusion_matrix(const std::vector<std::vector<Detection>>& preds_by_image,
                                 const std::vector<std::vector<GroundTruth>>& gts_by_image,
                                 int nc, double conf_threshold = 0.25,
                                 double iou_threshold = 0.45);

}  // namespace msl
