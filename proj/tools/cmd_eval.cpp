#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "msl/dataset.hpp"
#include "msl/report.hpp"

namespace msl::cli {

namespace {

struct EvalArgs
{
  fs::path manifest;
  fs::path predictions;
  fs::path out = "eval";
  fs::path curves;
  std::string split = "val";
  double conf = 0.25;
  double matrix_iou = 0.45;
};

std::string read_text(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Frame records keyed by image file name; caption records are skipped.
std::map<std::string, std::vector<Detection>> read_predictions(const fs::path& path)
{
  std::map<std::string, std::vector<Detection>> by_image;
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const auto rec = nlohmann::json::parse(line);
      if (rec.contains("event")) {
        continue;
      }
      auto& dets = by_image[rec.at("image").get<std::string>()];
      for (const auto& d : rec.at("detections")) {
        const auto box = d.at("box").get<std::vector<double>>();
        if (box.size() != 4) {
          throw std::runtime_error("box must have 4 coordinates");
        }
        dets.push_back({{box[0], box[1], box[2], box[3]},
                        d.at("class").get<int>(),
                        d.at("score").get<double>()});
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(
          fmt::format("{}:{}: not a detection record: {}", path.string(), line_no, e.what()));
    }
  }
  return by_image;
}

int cmd_eval(const EvalArgs& a)
{
  const DatasetManifest m = load_manifest(a.manifest);
  auto predictions = read_predictions(a.predictions);

  std::vector<std::vector<Detection>> preds;
  std::vector<std::vector<GroundTruth>> gts;
  std::map<std::string, fs::path> seen;
  for (const auto& image : m.images(a.split)) {
    const std::string name = image.filename().string();
    if (const auto [it, fresh] = seen.emplace(name, image); !fresh) {
      throw std::runtime_error(fmt::format("image name {} is not unique: {} and {}", name,
                                           it->second.string(), image.string()));
    }
    const cv::Mat img = cv::imread(image.string(), cv::IMREAD_UNCHANGED);
    if (img.empty()) {
      throw std::runtime_error(fmt::format("cannot decode image {}", image.string()));
    }
    std::vector<GroundTruth> g;
    for (const auto& e : read_label_file(label_path_for(image), m.nc)) {
      g.push_back({norm_to_pixel(e.box, img.cols, img.rows), e.class_id});
    }
    gts.push_back(std::move(g));
    const auto it = predictions.find(name);
    if (it != predictions.end()) {
      preds.push_back(std::move(it->second));
      predictions.erase(it);
    } else {
      preds.emplace_back();
    }
  }
  for (const auto& [name, dets] : predictions) {
    spdlog::warn("predictions for {} ignored: not in split {}", name, a.split);
  }
  for (const auto& dets : preds) {
    for (const auto& d : dets) {
      if (d.class_id < 0 || d.class_id >= m.nc) {
        throw std::runtime_error(
            fmt::format("prediction class {} outside [0, {})", d.class_id, m.nc));
      }
    }
  }

  const EvalReport report = evaluate(preds, gts, m.names, a.conf, a.matrix_iou);
  TrainingCurve curve;
  if (!a.curves.empty()) {
    curve = parse_training_log(read_text(a.curves));
  }
  const auto files = emit_report(report, a.out, a.curves.empty() ? nullptr : &curve);
  for (const auto& f : files) {
    spdlog::info("wrote {}", f.string());
  }
  std::cout << fmt::format("mAP50 = {:.3f}  mAP50-95 = {:.3f}  precision = {:.3f}  recall = "
                           "{:.3f}\n",
                           report.map50, report.map50_95, report.precision, report.recall);
  return kOk;
}

}  // namespace

void register_eval(CLI::App& parent, int& status)
{
  auto a = std::make_shared<EvalArgs>();
  auto* e = parent.add_subcommand("eval", "Score detections against dataset labels");
  e->add_option("--manifest", a->manifest, "data.yaml with ground truth")->required();
  e->add_option("--predictions", a->predictions, "JSON-lines output of `msl detect`")
      ->required();
  e->add_option("--split", a->split)->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  e->add_option("--out", a->out, "report directory")->capture_default_str();
  e->add_option("--curves", a->curves, "per-epoch training log (results.csv)");
  e->add_option("--conf", a->conf, "operating-point score threshold")->capture_default_str();
  e->add_option("--matrix-iou", a->matrix_iou, "confusion-matrix IoU threshold")
      ->capture_default_str();
  e->callback([a, &status] { status = cmd_eval(*a); });
}

}  // namespace msl::cli
