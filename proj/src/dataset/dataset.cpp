#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "msl/dataset.hpp"
#include "msl/rng.hpp"

namespace msl {

std::vector<fs::path> ingest_frames(const fs::path& dir, int stride)
{
  if (stride < 1) {
    throw std::invalid_argument("ingest_frames: stride must be >= 1");
  }
  if (!fs::is_directory(dir)) {
    throw std::runtime_error(fmt::format("{} is not a directory", dir.string()));
  }
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      frames.push_back(entry.path());
    }
  }
  if (frames.empty()) {
    throw std::runtime_error(fmt::format("EmptyDirectory: no image frames in {}", dir.string()));
  }
  std::sort(frames.begin(), frames.end());

  std::vector<fs::path> kept;
  for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(stride)) {
    kept.push_back(frames[i]);
  }
  return kept;
}

SplitIndices split_indices(const std::vector<int>& strata, const SplitRatios& ratios,
                           std::uint64_t seed)
{
  if (strata.empty()) {
    throw std::invalid_argument("split: empty input");
  }
  if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split: ratios must be non-negative and sum to 1");
  }

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    groups[strata[i]].push_back(i);
  }

  Rng rng(seed);
  SplitIndices out;
  for (auto& [key, members] : groups) {
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    const std::size_t n = members.size();
    const std::size_t n_train = std::min<std::size_t>(n, std::llround(n * ratios.train));
    const std::size_t n_val =
        std::min<std::size_t>(n - n_train, std::llround(n * ratios.val));
    // With a zero test ratio the rounding remainder goes to val.
    const std::size_t n_rest = n - n_train - n_val;
    const bool rest_to_val = ratios.test == 0.0;

    auto it = members.begin();
    out.train.insert(out.train.end(), it, it + n_train);
    it += n_train;
    out.val.insert(out.val.end(), it, it + n_val);
    it += n_val;
    auto& rest = rest_to_val ? out.val : out.test;
    rest.insert(rest.end(), it, it + n_rest);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

int stratum_of(const std::vector<LabelEntry>& boxes)
{
  if (boxes.empty()) {
    return -1;
  }
  std::map<int, int> counts;
  for (const auto& b : boxes) {
    ++counts[b.class_id];
  }
  int best = -1;
  int best_count = 0;
  for (const auto& [cls, count] : counts) {
    if (count > best_count) {
      best = cls;
      best_count = count;
    }
  }
  return best;
}

namespace {

void accumulate(SplitStats& s, const std::vector<LabelEntry>& boxes)
{
  ++s.images;
  if (boxes.empty()) {
    ++s.unlabeled;
    return;
  }
  s.boxes += boxes.size();
  std::vector<bool> present(s.class_images.size(), false);
  for (const auto& b : boxes) {
    ++s.class_boxes[b.class_id];
    present[b.class_id] = true;
  }
  for (std::size_t c = 0; c < present.size(); ++c) {
    if (present[c]) {
      ++s.class_images[c];
    }
  }
}

void merge(SplitStats& into, const SplitStats& from)
{
  into.images += from.images;
  into.unlabeled += from.unlabeled;
  into.boxes += from.boxes;
  for (std::size_t c = 0; c < into.class_images.size(); ++c) {
    into.class_images[c] += from.class_images[c];
    into.class_boxes[c] += from.class_boxes[c];
  }
}

}  // namespace

DatasetStats dataset_stats(const DatasetManifest& m)
{
  DatasetStats stats;
  stats.nc = m.nc;
  stats.names = m.names;
  const auto empty = [&] {
    SplitStats s;
    s.class_images.assign(m.nc, 0);
    s.class_boxes.assign(m.nc, 0);
    return s;
  };
  stats.total = empty();
  for (auto split : m.splits()) {
    SplitStats s = empty();
    for (const auto& image : m.images(split)) {
      accumulate(s, read_label_file(label_path_for(image), m.nc));
    }
    merge(stats.total, s);
    stats.splits.emplace(std::string(split), std::move(s));
  }
  return stats;
}

std::vector<Finding> validate_dataset(const DatasetManifest& m)
{
  std::vector<Finding> findings;
  for (auto split : m.splits()) {
    std::vector<fs::path> images;
    try {
      images = m.images(split);
    } catch (const std::exception& e) {
      findings.push_back({m.root, 0, e.what()});
      continue;
    }
    for (const auto& image : images) {
      if (!fs::exists(image)) {
        findings.push_back({image, 0, "image file does not exist"});
      }
      const fs::path label = label_path_for(image);
      std::ifstream in(label, std::ios::binary);
      if (!in) {
        continue;
      }
      std::string line;
      int line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        try {
          parse_label_file(line, m.nc);
        } catch (const LabelError& e) {
          findings.push_back(
              {label, line_no, fmt::format("{}: {}", to_string(e.kind()), e.detail())});
        }
      }
    }
  }
  return findings;
}

}  // namespace msl
