#include <charconv>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "msl/report.hpp"

namespace msl {

CsvError::CsvError(Kind kind, int row, std::string column, const std::string& what)
    : std::runtime_error(what), kind_(kind), row_(row), column_(std::move(column))
{
}

namespace {

std::string_view trim(std::string_view s)
{
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line)
{
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

// "metrics/mAP50(B)" and "metrics/mAP50" name the same column.
std::string canonical(std::string_view header)
{
  std::string h(trim(header));
  if (h.size() > 3 && h.compare(h.size() - 3, 3, "(B)") == 0) {
    h.resize(h.size() - 3);
  }
  return h;
}

using Field = std::optional<double> EpochRecord::*;

const std::map<std::string, Field>& field_map()
{
  static const std::map<std::string, Field> kFields = {
      {"train/box_loss", &EpochRecord::train_box_loss},
      {"train/cls_loss", &EpochRecord::train_cls_loss},
      {"train/dfl_loss", &EpochRecord::train_dfl_loss},
      {"val/box_loss", &EpochRecord::val_box_loss},
      {"val/cls_loss", &EpochRecord::val_cls_loss},
      {"val/dfl_loss", &EpochRecord::val_dfl_loss},
      {"metrics/precision", &EpochRecord::precision},
      {"metrics/recall", &EpochRecord::recall},
      {"metrics/mAP50", &EpochRecord::map50},
      {"metrics/mAP50-95", &EpochRecord::map50_95},
  };
  return kFields;
}

std::optional<double> parse_cell(std::string_view cell, int row, const std::string& column)
{
  if (cell.empty()) {
    return std::nullopt;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw CsvError(CsvError::Kind::NonNumericCell, row, column,
                   fmt::format("row {}, column '{}': '{}' is not numeric", row, column, cell));
  }
  return v;
}

}  // namespace

TrainingCurve parse_training_log(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl - pos);
    if (!trim(line).empty()) {
      lines.push_back(line);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (lines.empty()) {
    throw CsvError(CsvError::Kind::MalformedCsv, 0, {}, "training log has no header row");
  }

  const auto header = split_cells(lines.front());
  std::vector<std::string> columns;
  bool has_known = false;
  for (auto h : header) {
    columns.push_back(canonical(h));
    has_known = has_known || columns.back() == "epoch" || field_map().count(columns.back()) > 0;
  }
  if (!has_known) {
    throw CsvError(CsvError::Kind::MalformedCsv, 0, {},
                   "training log header has no recognizable column");
  }

  TrainingCurve curve;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const int row = static_cast<int>(r);
    const auto cells = split_cells(lines[r]);
    if (cells.size() > columns.size()) {
      throw CsvError(CsvError::Kind::MalformedCsv, row, {},
                     fmt::format("row {} has {} cells, header has {}", row, cells.size(),
                                 columns.size()));
    }
    EpochRecord rec;
    rec.epoch = row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& name = columns[c];
      if (name == "epoch") {
        if (const auto v = parse_cell(cells[c], row, name)) {
          rec.epoch = static_cast<int>(*v);
        }
      } else if (const auto it = field_map().find(name); it != field_map().end()) {
        rec.*(it->second) = parse_cell(cells[c], row, name);
      }
    }
    if (!curve.epochs.empty() && rec.epoch <= curve.epochs.back().epoch) {
      throw CsvError(CsvError::Kind::MalformedCsv, row, "epoch",
                     fmt::format("row {}: epoch {} does not increase", row, rec.epoch));
    }
    curve.epochs.push_back(rec);
  }
  return curve;
}

}  // namespace msl
