#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "msl/dataset.hpp"

namespace msl {

LabelError::LabelError(Kind kind, int line, const std::string& detail, fs::path file)
    : std::runtime_error(file.empty()
                             ? fmt::format("line {}: {}: {}", line, to_string(kind), detail)
                             : fmt::format("{}:{}: {}: {}", file.string(), line, to_string(kind),
                                           detail)),
      kind_(kind),
      line_(line),
      detail_(detail),
      file_(std::move(file))
{
}

LabelError LabelError::with_file(const fs::path& file) const
{
  return LabelError(kind_, line_, detail_, file);
}

const char* to_string(LabelError::Kind kind) noexcept
{
  switch (kind) {
    case LabelError::Kind::MalformedLine:
      return "MalformedLine";
    case LabelError::Kind::ClassOutOfRange:
      return "ClassOutOfRange";
    case LabelError::Kind::CoordOutOfRange:
      return "CoordOutOfRange";
  }
  return "Unknown";
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line)
{
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    if (i > start) {
      tokens.push_back(line.substr(start, i - start));
    }
  }
  return tokens;
}

template <class T>
bool parse_number(std::string_view token, T& out)
{
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

LabelEntry parse_line(std::string_view line, int line_no, int nc)
{
  const auto tokens = split_ws(line);
  if (tokens.size() != 5) {
    throw LabelError(LabelError::Kind::MalformedLine, line_no,
                     fmt::format("expected 5 fields, found {}", tokens.size()));
  }
  LabelEntry entry;
  if (!parse_number(tokens[0], entry.class_id)) {
    throw LabelError(LabelError::Kind::MalformedLine, line_no,
                     fmt::format("class id '{}' is not an integer", tokens[0]));
  }
  if (entry.class_id < 0 || entry.class_id >= nc) {
    throw LabelError(LabelError::Kind::ClassOutOfRange, line_no,
                     fmt::format("class id {} not in [0,{})", entry.class_id, nc));
  }
  double values[4];
  for (int k = 0; k < 4; ++k) {
    if (!parse_number(tokens[k + 1], values[k])) {
      throw LabelError(LabelError::Kind::MalformedLine, line_no,
                       fmt::format("field {} '{}' is not numeric", k + 2, tokens[k + 1]));
    }
    if (!(values[k] >= 0.0 && values[k] <= 1.0)) {
      throw LabelError(LabelError::Kind::CoordOutOfRange, line_no,
                       fmt::format("field {} = {} outside [0,1]", k + 2, tokens[k + 1]));
    }
  }
  if (values[2] <= 0.0 || values[3] <= 0.0) {
    throw LabelError(LabelError::Kind::CoordOutOfRange, line_no, "box width and height must be > 0");
  }
  entry.box = {values[0], values[1], values[2], values[3]};
  return entry;
}

}  // namespace

std::vector<LabelEntry> parse_label_file(std::string_view text, int nc)
{
  std::vector<LabelEntry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (split_ws(line).empty()) {
      continue;
    }
    entries.push_back(parse_line(line, line_no, nc));
  }
  return entries;
}

std::string write_label_file(const std::vector<LabelEntry>& entries)
{
  std::string out;
  for (const auto& e : entries) {
    fmt::format_to(std::back_inserter(out), "{} {:.6f} {:.6f} {:.6f} {:.6f}\n", e.class_id,
                   e.box.cx, e.box.cy, e.box.w, e.box.h);
  }
  return out;
}

std::vector<LabelEntry> read_label_file(const fs::path& path, int nc)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return {};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_label_file(ss.str(), nc);
  } catch (const LabelError& e) {
    throw e.with_file(path);
  }
}

}  // namespace msl
