#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msl/eval.hpp"

namespace msl {

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Training log

struct EpochRecord
{
  int epoch = 0;
  std::optional<double> train_box_loss, train_cls_loss, train_dfl_loss;
  std::optional<double> val_box_loss, val_cls_loss, val_dfl_loss;
  std::optional<double> precision, recall, map50, map50_95;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingCurve
{
  std::vector<EpochRecord> epochs;
};

class CsvError : public std::runtime_error
{
public:
  enum class Kind { MalformedCsv, NonNumericCell };

  CsvError(Kind kind, int row, std::string column, const std::string& what);
  Kind kind() const noexcept { return kind_; }
  int row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

private:
  Kind kind_;
  int row_;
  std::string column_;
};

/// Parses a per-epoch results CSV by header name ("epoch", "train/box_loss",
/// "metrics/mAP50(B)", ...). Header cells are trimmed; unknown columns are
/// ignored and missing ones leave fields empty. Rows are 1-based data rows.
TrainingCurve parse_training_log(std::string_view csv_text);

// ---------------------------------------------------------------------------
// Report

struct EvalCounts
{
  std::size_t images = 0;
  std::size_t ground_truths = 0;
  std::size_t predictions = 0;
  std::size_t true_positives = 0;

  friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

struct EvalReport
{
  int schema_version = kReportSchemaVersion;
  int nc = 0;
  std::vector<std::string> names;
  std::vector<std::optional<double>> ap50;
  std::vector<std::optional<double>> ap50_95;
  double map50 = 0.0;
  double map50_95 = 0.0;
  /// Micro precision/recall at the operating point (conf, IoU 0.5).
  double precision = 0.0;
  double recall = 0.0;
  double conf_threshold = 0.25;
  double matrix_iou_threshold = 0.45;
  ConfusionMatrix confusion;
  EvalCounts counts;

  friend bool operator==(const EvalReport& a, const EvalReport& b);
};

/// Full evaluation of predictions against ground truth.
EvalReport evaluate(const std::vector<std::vector<Detection>>& preds_by_image,
                    const std::vector<std::vector<GroundTruth>>& gts_by_image,
                    std::vector<std::string> names, double conf_threshold = 0.25,
                    double matrix_iou_threshold = 0.45);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(std::string_view json);

/// Header row plus nc + 1 rows (background last).
std::string confusion_matrix_csv(const EvalReport& r, bool normalized = false);
std::string per_class_ap_csv(const EvalReport& r);
std::string loss_curve_csv(const TrainingCurve& c);
std::string metric_curve_csv(const TrainingCurve& c);

/// Writes report.json, confusion_matrix.csv, confusion_matrix_normalized.csv,
/// per_class_ap.csv and, with a curve, loss_curves.csv / metric_curves.csv.
/// Returns the written paths. Throws std::runtime_error on I/O failure.
std::vector<std::filesystem::path> emit_report(const EvalReport& r,
                                               const std::filesystem::path& dir,
                                               const TrainingCurve* curve = nullptr);

}  // namespace msl
