#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "msl/augment.hpp"
#include "msl/dataset.hpp"
#include "msl/rng.hpp"

namespace msl::cli {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kExtractHint =
    "ffmpeg -i <clip>.mp4 -vf fps=60 <frames>/<class>/%06d.png";

cv::Mat read_image(const fs::path& path)
{
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) {
    throw std::runtime_error(fmt::format("cannot decode image {}", path.string()));
  }
  return img;
}

void write_image(const fs::path& path, const cv::Mat& img)
{
  fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) {
    throw std::runtime_error(fmt::format("cannot write image {}", path.string()));
  }
}

void write_text(const fs::path& path, const std::string& text)
{
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  }
}

// Manifest rooted at the output directory so the tree does not depend on
// where it was written.
DatasetManifest relative_manifest(const DatasetManifest& src, bool with_test)
{
  DatasetManifest m;
  m.root = ".";
  m.train = "images/train";
  m.val = "images/val";
  if (with_test) {
    m.test = "images/test";
  }
  m.nc = src.nc;
  m.names = src.names;
  m.split_seed = src.split_seed;
  m.split_ratios = src.split_ratios;
  return m;
}

void write_sample(const fs::path& out, std::string_view split, const std::string& stem,
                  const cv::Mat& img, const std::vector<LabelEntry>& boxes)
{
  write_image(out / "images" / split / (stem + ".png"), img);
  write_text(out / "labels" / split / (stem + ".txt"), write_label_file(boxes));
}

ojson split_json(const SplitStats& s)
{
  ojson j;
  j["images"] = s.images;
  j["unlabeled"] = s.unlabeled;
  j["boxes"] = s.boxes;
  j["class_images"] = s.class_images;
  j["class_boxes"] = s.class_boxes;
  return j;
}

// ---------------------------------------------------------------------------

struct BuildArgs
{
  fs::path frames;
  fs::path out;
  int stride = 3;
  int width = 432;
  int height = 256;
  std::uint64_t seed = 42;
  std::vector<double> ratios = {0.8, 0.2, 0.0};
};

int cmd_build(const BuildArgs& a)
{
  if (!fs::is_directory(a.frames)) {
    spdlog::error("{} is not a directory; extract frames first, e.g.\n  {}", a.frames.string(),
                  kExtractHint);
    return kError;
  }
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(a.frames)) {
    if (entry.is_directory()) {
      classes.push_back(entry.path().filename().string());
    }
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    spdlog::error("{} has no class subdirectories; extract frames with\n  {}",
                  a.frames.string(), kExtractHint);
    return kError;
  }

  // Known class names keep their canonical ids.
  const auto defaults = default_class_names();
  const bool canonical = std::all_of(classes.begin(), classes.end(), [&](const std::string& c) {
    return std::find(defaults.begin(), defaults.end(), c) != defaults.end();
  });
  const std::vector<std::string> names = canonical ? defaults : classes;
  const int nc = static_cast<int>(names.size());

  struct Item
  {
    fs::path frame;
    std::string stem;
    int class_id;
  };
  std::vector<Item> items;
  std::vector<int> strata;
  for (const auto& cls : classes) {
    const int id = static_cast<int>(std::find(names.begin(), names.end(), cls) - names.begin());
    const auto frames = ingest_frames(a.frames / cls, a.stride);
    for (const auto& f : frames) {
      items.push_back({f, cls + "_" + f.stem().string(), id});
      strata.push_back(id);
    }
    spdlog::info("{}: {} frames kept", cls, frames.size());
  }

  const SplitRatios ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
  const SplitIndices idx = split_indices(strata, ratios, a.seed);
  const std::pair<std::string_view, const std::vector<std::size_t>*> splits[] = {
      {"train", &idx.train}, {"val", &idx.val}, {"test", &idx.test}};
  for (const auto& [split, members] : splits) {
    for (std::size_t i : *members) {
      const Item& item = items[i];
      const fs::path label = label_path_for(item.frame);
      const auto boxes = read_label_file(label, nc);
      auto [img, kept] = resize_with_boxes(read_image(item.frame), boxes, a.width, a.height);
      write_sample(a.out, split, item.stem, img, kept);
    }
  }

  DatasetManifest m;
  m.nc = nc;
  m.names = names;
  m.split_seed = a.seed;
  m.split_ratios = ratios;
  write_text(a.out / "data.yaml", write_manifest(relative_manifest(m, ratios.test > 0.0)));
  spdlog::info("{} images: {} train, {} val, {} test -> {}", items.size(), idx.train.size(),
               idx.val.size(), idx.test.size(), (a.out / "data.yaml").string());
  return kOk;
}

// ---------------------------------------------------------------------------

struct AugmentArgs
{
  fs::path manifest;
  fs::path out;
  AugmentSpec spec;
  int copies = 2;
};

int cmd_augment(const AugmentArgs& a)
{
  a.spec.validate();
  if (a.copies < 0) {
    throw std::invalid_argument("--copies must be >= 0");
  }
  const DatasetManifest m = load_manifest(a.manifest);
  std::size_t written = 0;
  for (auto split : m.splits()) {
    std::set<std::string> stems;
    const auto images = m.images(split);
    for (std::size_t i = 0; i < images.size(); ++i) {
      const fs::path& image = images[i];
      const std::string stem = image.stem().string();
      if (!stems.insert(stem).second) {
        throw std::runtime_error(
            fmt::format("duplicate image name '{}' in split {}", stem, split));
      }
      const auto boxes = read_label_file(label_path_for(image), m.nc);
      auto [base, base_boxes] =
          resize_with_boxes(read_image(image), boxes, a.spec.target_w, a.spec.target_h);
      write_sample(a.out, split, stem, base, base_boxes);
      ++written;
      if (split != "train") {
        continue;
      }
      for (int k = 0; k < a.copies; ++k) {
        Rng rng(derive_seed(a.spec.seed, i * static_cast<std::size_t>(a.copies) + k));
        const std::uint64_t noise_seed = rng.next();
        const double angle = rng.uniform(-a.spec.rotation_degrees, a.spec.rotation_degrees);
        const cv::Mat noisy = augment_noise(base, a.spec.noise_fraction, noise_seed);
        const RotateResult rotated = augment_rotate(noisy, base_boxes, angle);
        write_sample(a.out, split, fmt::format("{}_aug{}", stem, k), rotated.image,
                     rotated.boxes);
        ++written;
      }
    }
  }
  DatasetManifest out = relative_manifest(m, m.test.has_value());
  write_text(a.out / "data.yaml", write_manifest(out));
  spdlog::info("wrote {} images to {}", written, a.out.string());
  return kOk;
}

// ---------------------------------------------------------------------------

struct SplitArgs
{
  fs::path manifest;
  fs::path out;
  std::uint64_t seed = 42;
  std::vector<double> ratios = {0.8, 0.2, 0.0};
};

int cmd_split(const SplitArgs& a)
{
  const DatasetManifest m = load_manifest(a.manifest);
  std::vector<fs::path> pool;
  for (auto split : m.splits()) {
    for (const auto& image : m.images(split)) {
      pool.push_back(fs::absolute(image));
    }
  }
  if (pool.empty()) {
    throw std::runtime_error("manifest lists no images");
  }
  std::sort(pool.begin(), pool.end());
  std::vector<int> strata;
  for (const auto& image : pool) {
    strata.push_back(stratum_of(read_label_file(label_path_for(image), m.nc)));
  }
  const SplitRatios ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
  const SplitIndices idx = split_indices(strata, ratios, a.seed);

  fs::create_directories(a.out);
  const fs::path out_abs = fs::absolute(a.out);
  auto list = [&](const std::vector<std::size_t>& members) {
    std::string text;
    for (std::size_t i : members) {
      text += pool[i].generic_string() + "\n";
    }
    return text;
  };
  write_text(a.out / "train.txt", list(idx.train));
  write_text(a.out / "val.txt", list(idx.val));
  DatasetManifest out;
  out.root = ".";
  out.train = "train.txt";
  out.val = "val.txt";
  if (ratios.test > 0.0) {
    write_text(a.out / "test.txt", list(idx.test));
    out.test = "test.txt";
  }
  out.nc = m.nc;
  out.names = m.names;
  out.split_seed = a.seed;
  out.split_ratios = ratios;
  write_text(a.out / "data.yaml", write_manifest(out));
  spdlog::info("{} images: {} train, {} val, {} test -> {}", pool.size(), idx.train.size(),
               idx.val.size(), idx.test.size(), (out_abs / "data.yaml").string());
  return kOk;
}

int cmd_stats(const fs::path& manifest)
{
  const DatasetManifest m = load_manifest(manifest);
  const DatasetStats s = dataset_stats(m);
  ojson j;
  j["nc"] = s.nc;
  j["names"] = s.names;
  ojson splits;
  for (auto split : m.splits()) {
    splits[std::string(split)] = split_json(s.splits.at(std::string(split)));
  }
  j["splits"] = splits;
  j["total"] = split_json(s.total);
  std::cout << j.dump(2) << '\n';
  spdlog::info("total {} images, {} boxes", s.total.images, s.total.boxes);
  return kOk;
}

int cmd_validate(const fs::path& manifest)
{
  const DatasetManifest m = load_manifest(manifest);
  const auto findings = validate_dataset(m);
  for (const auto& f : findings) {
    std::cout << fmt::format("{}:{}: {}\n", f.file.generic_string(), f.line, f.message);
  }
  if (!findings.empty()) {
    spdlog::warn("{} finding(s)", findings.size());
    return kFindings;
  }
  spdlog::info("dataset is valid");
  return kOk;
}

void add_ratios(CLI::App& cmd, std::vector<double>& ratios)
{
  cmd.add_option("--ratios", ratios, "train val test fractions")
      ->expected(3)
      ->capture_default_str();
}

}  // namespace

void register_dataset(CLI::App& parent, int& status)
{
  auto* dataset = parent.add_subcommand("dataset", "Build, augment, split and check datasets");
  dataset->require_subcommand(1);

  auto build = std::make_shared<BuildArgs>();
  auto* b = dataset->add_subcommand("build", "Turn per-class frame folders into a dataset");
  b->footer(fmt::format("Frames are extracted from clips beforehand, e.g.\n  {}", kExtractHint));
  b->add_option("--frames", build->frames, "directory with one subdirectory per class")
      ->required();
  b->add_option("--out", build->out, "output dataset directory")->required();
  b->add_option("--stride", build->stride, "keep every n-th frame")->capture_default_str();
  b->add_option("--width", build->width)->capture_default_str();
  b->add_option("--height", build->height)->capture_default_str();
  b->add_option("--seed", build->seed)->capture_default_str();
  add_ratios(*b, build->ratios);
  b->callback([build, &status] { status = cmd_build(*build); });

  auto aug = std::make_shared<AugmentArgs>();
  auto* a = dataset->add_subcommand("augment", "Write an augmented copy of a dataset");
  a->add_option("--manifest", aug->manifest, "data.yaml of the source dataset")->required();
  a->add_option("--out", aug->out, "output dataset directory")->required();
  a->add_option("--noise", aug->spec.noise_fraction, "salt-and-pepper pixel fraction")
      ->capture_default_str();
  a->add_option("--rotate", aug->spec.rotation_degrees, "maximum rotation in degrees")
      ->capture_default_str();
  a->add_option("--width", aug->spec.target_w)->capture_default_str();
  a->add_option("--height", aug->spec.target_h)->capture_default_str();
  a->add_option("--seed", aug->spec.seed)->capture_default_str();
  a->add_option("--copies", aug->copies, "augmented variants per training image")
      ->capture_default_str();
  a->callback([aug, &status] { status = cmd_augment(*aug); });

  auto split = std::make_shared<SplitArgs>();
  auto* s = dataset->add_subcommand("split", "Re-split a dataset into list files");
  s->add_option("--manifest", split->manifest)->required();
  s->add_option("--out", split->out, "directory for the list files and data.yaml")->required();
  s->add_option("--seed", split->seed)->capture_default_str();
  add_ratios(*s, split->ratios);
  s->callback([split, &status] { status = cmd_split(*split); });

  auto stats_manifest = std::make_shared<fs::path>();
  auto* st = dataset->add_subcommand("stats", "Per-split and per-class counts as JSON");
  st->add_option("--manifest", *stats_manifest)->required();
  st->callback([stats_manifest, &status] { status = cmd_stats(*stats_manifest); });

  auto validate_manifest = std::make_shared<fs::path>();
  auto* v = dataset->add_subcommand("validate", "List every label problem; exit 2 if any");
  v->add_option("--manifest", *validate_manifest)->required();
  v->callback([validate_manifest, &status] { status = cmd_validate(*validate_manifest); });
}

}  // namespace msl::cli
