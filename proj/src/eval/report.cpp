#include "msl/report.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace msl {

using ojson = nlohmann::ordered_json;

bool operator==(const EvalReport& a, const EvalReport& b)
{
  return a.schema_version == b.schema_version && a.nc == b.nc && a.names == b.names &&
         a.ap50 == b.ap50 && a.ap50_95 == b.ap50_95 && a.map50 == b.map50 &&
         a.map50_95 == b.map50_95 && a.precision == b.precision && a.recall == b.recall &&
         a.conf_threshold == b.conf_threshold &&
         a.matrix_iou_threshold == b.matrix_iou_threshold && a.confusion.nc == b.confusion.nc &&
         a.confusion.counts == b.confusion.counts && a.counts == b.counts;
}

EvalReport evaluate(const std::vector<std::vector<Detection>>& preds_by_image,
                    const std::vector<std::vector<GroundTruth>>& gts_by_image,
                    std::vector<std::string> names, double conf_threshold,
                    double matrix_iou_threshold)
{
  EvalReport r;
  r.nc = static_cast<int>(names.size());
  r.names = std::move(names);
  r.conf_threshold = conf_threshold;
  r.matrix_iou_threshold = matrix_iou_threshold;

  const auto thresholds = coco_iou_thresholds();
  const MapResult m = map_at(preds_by_image, gts_by_image, r.nc, thresholds);
  r.ap50 = m.ap.front();
  r.ap50_95 = m.class_mean_ap();
  r.map50 = m.map.front();
  double sum = 0.0;
  for (double v : m.map) {
    sum += v;
  }
  r.map50_95 = sum / static_cast<double>(m.map.size());

  r.confusion =
      confusion_matrix(preds_by_image, gts_by_image, r.nc, conf_threshold, matrix_iou_threshold);

  r.counts.images = preds_by_image.size();
  for (std::size_t i = 0; i < preds_by_image.size(); ++i) {
    std::vector<Detection> kept;
    for (const auto& d : preds_by_image[i]) {
      if (d.score >= conf_threshold) {
        kept.push_back(d);
      }
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    r.counts.predictions += kept.size();
    r.counts.ground_truths += gts_by_image[i].size();
    r.counts.true_positives += match(kept, gts_by_image[i], 0.5).true_positives();
  }
  const auto tp = static_cast<double>(r.counts.true_positives);
  r.precision = r.counts.predictions > 0 ? tp / static_cast<double>(r.counts.predictions) : 0.0;
  r.recall = r.counts.ground_truths > 0 ? tp / static_cast<double>(r.counts.ground_truths) : 0.0;
  return r;
}

namespace {

ojson optional_list(const std::vector<std::optional<double>>& v)
{
  ojson arr = ojson::array();
  for (const auto& x : v) {
    arr.push_back(x ? ojson(*x) : ojson(nullptr));
  }
  return arr;
}

std::vector<std::optional<double>> read_optional_list(const nlohmann::json& j)
{
  std::vector<std::optional<double>> out;
  for (const auto& x : j) {
    out.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
  }
  return out;
}

std::string csv_cell(const std::optional<double>& v)
{
  return v ? fmt::format("{:.6f}", *v) : std::string();
}

std::string class_label(const EvalReport& r, int c)
{
  if (c == r.nc) return "background";
  return static_cast<std::size_t>(c) < r.names.size() ? r.names[c] : std::to_string(c);
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error(fmt::format("IoFailure: cannot write {}", path.string()));
  }
  out << content;
  if (!out) {
    throw std::runtime_error(fmt::format("IoFailure: short write to {}", path.string()));
  }
}

}  // namespace

std::string report_to_json(const EvalReport& r)
{
  ojson j;
  j["schema_version"] = r.schema_version;
  j["nc"] = r.nc;
  j["names"] = r.names;
  j["mAP50"] = r.map50;
  j["mAP50_95"] = r.map50_95;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["conf_threshold"] = r.conf_threshold;
  j["matrix_iou_threshold"] = r.matrix_iou_threshold;
  j["ap50"] = optional_list(r.ap50);
  j["ap50_95"] = optional_list(r.ap50_95);
  ojson counts;
  counts["images"] = r.counts.images;
  counts["ground_truths"] = r.counts.ground_truths;
  counts["predictions"] = r.counts.predictions;
  counts["true_positives"] = r.counts.true_positives;
  j["counts"] = counts;
  ojson matrix = ojson::array();
  const int n = r.confusion.nc + 1;
  for (int row = 0; row < n; ++row) {
    ojson cells = ojson::array();
    for (int col = 0; col < n; ++col) {
      cells.push_back(r.confusion.at(row, col));
    }
    matrix.push_back(cells);
  }
  j["confusion_matrix"] = matrix;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text)
{
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw std::runtime_error(
          fmt::format("unsupported report schema_version {}", r.schema_version));
    }
    r.nc = j.at("nc").get<int>();
    r.names = j.at("names").get<std::vector<std::string>>();
    r.map50 = j.at("mAP50").get<double>();
    r.map50_95 = j.at("mAP50_95").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.conf_threshold = j.at("conf_threshold").get<double>();
    r.matrix_iou_threshold = j.at("matrix_iou_threshold").get<double>();
    r.ap50 = read_optional_list(j.at("ap50"));
    r.ap50_95 = read_optional_list(j.at("ap50_95"));
    const auto& c = j.at("counts");
    r.counts.images = c.at("images").get<std::size_t>();
    r.counts.ground_truths = c.at("ground_truths").get<std::size_t>();
    r.counts.predictions = c.at("predictions").get<std::size_t>();
    r.counts.true_positives = c.at("true_positives").get<std::size_t>();
    r.confusion.nc = r.nc;
    for (const auto& row : j.at("confusion_matrix")) {
      for (const auto& cell : row) {
        r.confusion.counts.push_back(cell.get<std::uint64_t>());
      }
    }
    if (r.confusion.counts.size() != static_cast<std::size_t>(r.nc + 1) * (r.nc + 1)) {
      throw std::runtime_error("confusion_matrix has the wrong shape");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("report JSON: {}", e.what()));
  }
  return r;
}

std::string confusion_matrix_csv(const EvalReport& r, bool normalized)
{
  const int n = r.confusion.nc + 1;
  const auto norm = normalized ? r.confusion.normalized() : std::vector<double>{};
  std::string out = "predicted\\true";
  for (int col = 0; col < n; ++col) {
    out += "," + class_label(r, col);
  }
  out += "\n";
  for (int row = 0; row < n; ++row) {
    out += class_label(r, row);
    for (int col = 0; col < n; ++col) {
      if (normalized) {
        out += fmt::format(",{:.4f}", norm[static_cast<std::size_t>(row) * n + col]);
      } else {
        out += fmt::format(",{}", r.confusion.at(row, col));
      }
    }
    out += "\n";
  }
  return out;
}

std::string per_class_ap_csv(const EvalReport& r)
{
  std::string out = "class,name,ap50,ap50_95\n";
  for (int c = 0; c < r.nc; ++c) {
    out += fmt::format("{},{},{},{}\n", c, class_label(r, c), csv_cell(r.ap50[c]),
                       csv_cell(r.ap50_95[c]));
  }
  return out;
}

std::string loss_curve_csv(const TrainingCurve& curve)
{
  std::string out =
      "epoch,train_box_loss,train_cls_loss,train_dfl_loss,val_box_loss,val_cls_loss,val_dfl_loss\n";
  for (const auto& e : curve.epochs) {
    out += fmt::format("{},{},{},{},{},{},{}\n", e.epoch, csv_cell(e.train_box_loss),
                       csv_cell(e.train_cls_loss), csv_cell(e.train_dfl_loss),
                       csv_cell(e.val_box_loss), csv_cell(e.val_cls_loss),
                       csv_cell(e.val_dfl_loss));
  }
  return out;
}

std::string metric_curve_csv(const TrainingCurve& curve)
{
  std::string out = "epoch,precision,recall,map50,map50_95\n";
  for (const auto& e : curve.epochs) {
    out += fmt::format("{},{},{},{},{}\n", e.epoch, csv_cell(e.precision), csv_cell(e.recall),
                       csv_cell(e.map50), csv_cell(e.map50_95));
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(const EvalReport& r,
                                               const std::filesystem::path& dir,
                                               const TrainingCurve* curve)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error(fmt::format("IoFailure: cannot create {}: {}", dir.string(),
                                         ec.message()));
  }
  std::vector<std::pair<std::string, std::string>> files = {
      {"report.json", report_to_json(r)},
      {"confusion_matrix.csv", confusion_matrix_csv(r, false)},
      {"confusion_matrix_normalized.csv", confusion_matrix_csv(r, true)},
      {"per_class_ap.csv", per_class_ap_csv(r)},
  };
  if (curve != nullptr) {
    files.emplace_back("loss_curves.csv", loss_curve_csv(*curve));
    files.emplace_back("metric_curves.csv", metric_curve_csv(*curve));
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : files) {
    write_file(dir / name, content);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace msl
