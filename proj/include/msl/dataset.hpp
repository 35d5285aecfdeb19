#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msl/geometry.hpp"

namespace msl {

namespace fs = std::filesystem;

inline constexpr int kDefaultClassCount = 20;

struct LabelEntry
{
  int class_id = 0;
  NormBox box;

  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

struct LabeledImage
{
  fs::path image_path;
  int width = 0;
  int height = 0;
  std::vector<LabelEntry> boxes;
};

class LabelError : public std::runtime_error
{
public:
  enum class Kind { MalformedLine, ClassOutOfRange, CoordOutOfRange };

  LabelError(Kind kind, int line, const std::string& detail, fs::path file = {});

  Kind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }
  const fs::path& file() const noexcept { return file_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error attributed to a label file.
  LabelError with_file(const fs::path& file) const;

private:
  Kind kind_;
  int line_;
  std::string detail_;
  fs::path file_;
};

const char* to_string(LabelError::Kind kind) noexcept;

/// Parses a YOLO label file body ("class cx cy w h" per line). Blank lines
/// are skipped; an empty body is a valid negative sample.
std::vector<LabelEntry> parse_label_file(std::string_view text, int nc);

/// Inverse of parse_label_file with 6-decimal fixed-point coordinates.
std::string write_label_file(const std::vector<LabelEntry>& entries);

/// Reads and parses a label file; a missing file yields an empty list.
std::vector<LabelEntry> read_label_file(const fs::path& path, int nc);

class ManifestError : public std::runtime_error
{
public:
  enum class Kind { MissingKey, CountMismatch, InvalidNames, Unreadable };

  ManifestError(Kind kind, const std::string& what);
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

struct SplitRatios
{
  double train = 0.8;
  double val = 0.2;
  double test = 0.0;
};

/// Dataset layout in the common YOLO `data.yaml` form.
struct DatasetManifest
{
  fs::path root;
  fs::path train;
  fs::path val;
  std::optional<fs::path> test;
  int nc = kDefaultClassCount;
  std::vector<std::string> names;
  std::optional<std::uint64_t> split_seed;
  std::optional<SplitRatios> split_ratios;

  /// Image paths for "train", "val" or "test". Directory entries are listed
  /// and sorted; list files are read line by line.
  std::vector<fs::path> images(std::string_view split) const;
  std::vector<std::string_view> splits() const;
};

/// Placeholder transliterated names used when none are supplied.
std::vector<std::string> default_class_names();

DatasetManifest load_manifest(const fs::path& path);
std::string write_manifest(const DatasetManifest& m);

/// images/<split>/a.png -> labels/<split>/a.txt; otherwise a sibling .txt.
fs::path label_path_for(const fs::path& image);

bool is_image_file(const fs::path& p);

/// Sorted image files in `dir`, keeping indices 0, stride, 2*stride, ...
/// Throws std::runtime_error when the directory holds no images.
std::vector<fs::path> ingest_frames(const fs::path& dir, int stride);

struct SplitIndices
{
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle then contiguous partition, per stratum. `strata[i]` is the
/// group key of item i (use a single value for an unstratified split).
/// Each output list is sorted ascending.
SplitIndices split_indices(const std::vector<int>& strata, const SplitRatios& ratios,
                           std::uint64_t seed);

template <class T>
struct Split
{
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

/// Splits `items` with split_indices. Without strata all items share one
/// group. Throws std::invalid_argument on empty input.
template <class T>
Split<T> split_dataset(const std::vector<T>& items, const SplitRatios& ratios, std::uint64_t seed,
                       const std::vector<int>& strata = {})
{
  if (items.empty()) {
    throw std::invalid_argument("split_dataset: empty input");
  }
  const std::vector<int> groups = strata.empty() ? std::vector<int>(items.size(), 0) : strata;
  if (groups.size() != items.size()) {
    throw std::invalid_argument("split_dataset: strata size does not match items");
  }
  const SplitIndices idx = split_indices(groups, ratios, seed);
  Split<T> out;
  for (std::size_t i : idx.train) out.train.push_back(items[i]);
  for (std::size_t i : idx.val) out.val.push_back(items[i]);
  for (std::size_t i : idx.test) out.test.push_back(items[i]);
  return out;
}

/// Stratum of a labeled item: its most frequent class, lowest id on ties,
/// or -1 when unlabeled.
int stratum_of(const std::vector<LabelEntry>& boxes);

struct SplitStats
{
  std::size_t images = 0;
  std::size_t unlabeled = 0;
  std::size_t boxes = 0;
  std::vector<std::size_t> class_images;
  std::vector<std::size_t> class_boxes;
};

struct DatasetStats
{
  int nc = 0;
  std::vector<std::string> names;
  std::map<std::string, SplitStats> splits;
  SplitStats total;
};

/// Counts images and boxes per class. Label errors are rethrown with the
/// offending file attached.
DatasetStats dataset_stats(const DatasetManifest& m);

struct Finding
{
  fs::path file;
  int line = 0;
  std::string message;
};

/// Every label problem in the dataset, without stopping at the first one.
std::vector<Finding> validate_dataset(const DatasetManifest& m);

}  // namespace msl
