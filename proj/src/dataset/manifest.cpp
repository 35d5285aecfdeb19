#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "msl/dataset.hpp"

namespace msl {

ManifestError::ManifestError(Kind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind)
{
}

std::vector<std::string> default_class_names()
{
  return {"a",  "aa", "i",  "u",  "e",  "o",  "ka", "ga", "cha", "ja",
          "ta", "da", "na", "pa", "ba", "ma", "ya", "ra", "la",  "va"};
}

namespace {

std::vector<std::string> read_names(const YAML::Node& node)
{
  std::vector<std::string> names;
  if (node.IsSequence()) {
    for (const auto& n : node) {
      names.push_back(n.as<std::string>());
    }
  } else if (node.IsMap()) {
    // {0: a, 1: b, ...}; keys must cover 0..n-1.
    std::map<int, std::string> by_index;
    for (const auto& kv : node) {
      by_index[kv.first.as<int>()] = kv.second.as<std::string>();
    }
    int expected = 0;
    for (const auto& [idx, name] : by_index) {
      if (idx != expected++) {
        throw ManifestError(ManifestError::Kind::InvalidNames,
                            fmt::format("names map is missing index {}", expected - 1));
      }
      names.push_back(name);
    }
  } else {
    throw ManifestError(ManifestError::Kind::InvalidNames, "names must be a list or a map");
  }
  return names;
}

fs::path resolve(const fs::path& base, const fs::path& p)
{
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::string yaml_quote(const std::string& s)
{
  std::string out = "'";
  for (char c : s) {
    out += c;
    if (c == '\'') {
      out += '\'';
    }
  }
  out += '\'';
  return out;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path)
{
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ManifestError(ManifestError::Kind::Unreadable,
                        fmt::format("cannot read manifest {}: {}", path.string(), e.what()));
  }
  if (!doc.IsMap()) {
    throw ManifestError(ManifestError::Kind::Unreadable,
                        fmt::format("manifest {} is not a mapping", path.string()));
  }
  for (const char* key : {"train", "val", "names"}) {
    if (!doc[key]) {
      throw ManifestError(ManifestError::Kind::MissingKey,
                          fmt::format("manifest {} is missing key '{}'", path.string(), key));
    }
  }

  DatasetManifest m;
  try {
    const fs::path manifest_dir = fs::absolute(path).parent_path();
    m.root = doc["path"] ? resolve(manifest_dir, doc["path"].as<std::string>()) : manifest_dir;
    m.train = resolve(m.root, doc["train"].as<std::string>());
    m.val = resolve(m.root, doc["val"].as<std::string>());
    if (doc["test"] && !doc["test"].IsNull() && !doc["test"].as<std::string>().empty()) {
      m.test = resolve(m.root, doc["test"].as<std::string>());
    }
    m.names = read_names(doc["names"]);
    m.nc = doc["nc"] ? doc["nc"].as<int>() : static_cast<int>(m.names.size());
    if (doc["split_seed"]) {
      m.split_seed = doc["split_seed"].as<std::uint64_t>();
    }
    if (const auto r = doc["split_ratios"]; r && r.IsSequence() && r.size() == 3) {
      m.split_ratios = SplitRatios{r[0].as<double>(), r[1].as<double>(), r[2].as<double>()};
    }
  } catch (const YAML::Exception& e) {
    throw ManifestError(ManifestError::Kind::Unreadable,
                        fmt::format("manifest {}: {}", path.string(), e.what()));
  }

  if (m.nc != static_cast<int>(m.names.size())) {
    throw ManifestError(ManifestError::Kind::CountMismatch,
                        fmt::format("manifest {}: nc is {} but {} names are listed",
                                    path.string(), m.nc, m.names.size()));
  }
  std::set<std::string> seen;
  for (const auto& n : m.names) {
    if (n.empty() || !seen.insert(n).second) {
      throw ManifestError(ManifestError::Kind::InvalidNames,
                          fmt::format("manifest {}: class names must be unique and non-empty",
                                      path.string()));
    }
  }
  return m;
}

std::string write_manifest(const DatasetManifest& m)
{
  auto rel = [&](const fs::path& p) {
    const fs::path r = p.lexically_relative(m.root);
    return (r.empty() || *r.begin() == "..") ? p.generic_string() : r.generic_string();
  };
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) {
    fmt::format_to(std::back_inserter(out), "{}: {}\n", key, value);
  };
  line("path", yaml_quote(m.root.generic_string()));
  line("train", yaml_quote(rel(m.train)));
  line("val", yaml_quote(rel(m.val)));
  if (m.test) {
    line("test", yaml_quote(rel(*m.test)));
  }
  line("nc", std::to_string(m.nc));
  out += "names:\n";
  for (const auto& n : m.names) {
    fmt::format_to(std::back_inserter(out), "  - {}\n", yaml_quote(n));
  }
  if (m.split_seed) {
    line("split_seed", std::to_string(*m.split_seed));
  }
  if (m.split_ratios) {
    line("split_ratios", fmt::format("[{}, {}, {}]", m.split_ratios->train, m.split_ratios->val,
                                     m.split_ratios->test));
  }
  return out;
}

bool is_image_file(const fs::path& p)
{
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::set<std::string> kExts = {".png", ".jpg", ".jpeg", ".bmp",
                                              ".tif", ".tiff", ".webp"};
  return kExts.count(ext) > 0;
}

fs::path label_path_for(const fs::path& image)
{
  std::vector<fs::path> parts(image.begin(), image.end());
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (*it == "images") {
      *it = "labels";
      fs::path out;
      for (const auto& part : parts) {
        out /= part;
      }
      return out.replace_extension(".txt");
    }
  }
  return fs::path(image).replace_extension(".txt");
}

std::vector<std::string_view> DatasetManifest::splits() const
{
  std::vector<std::string_view> s = {"train", "val"};
  if (test) {
    s.push_back("test");
  }
  return s;
}

std::vector<fs::path> DatasetManifest::images(std::string_view split) const
{
  const fs::path* src = nullptr;
  if (split == "train") {
    src = &train;
  } else if (split == "val") {
    src = &val;
  } else if (split == "test" && test) {
    src = &*test;
  }
  if (src == nullptr) {
    throw std::invalid_argument(fmt::format("unknown split '{}'", split));
  }

  std::vector<fs::path> out;
  if (fs::is_directory(*src)) {
    for (const auto& entry : fs::recursive_directory_iterator(*src)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) {
        out.push_back(entry.path());
      }
    }
    std::sort(out.begin(), out.end());
  } else if (fs::is_regular_file(*src)) {
    std::ifstream in(*src);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
        line.pop_back();
      }
      if (!line.empty()) {
        out.push_back(resolve(root, line));
      }
    }
  } else {
    throw std::runtime_error(
        fmt::format("split '{}' path {} does not exist", split, src->string()));
  }
  return out;
}

}  // namespace msl
