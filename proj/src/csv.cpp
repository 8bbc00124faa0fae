#include "mfpu/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mfpu/errors.hpp"

namespace mfpu {

namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool clean(const std::string& field) { return field.find_first_of(",\"\r\n") == std::string::npos; }

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) {
  require(row.size() == header_.size(),
          "csv row has " + std::to_string(row.size()) + " fields, header has " + std::to_string(header_.size()));
  for (const auto& f : row) require(clean(f), "csv field contains a separator: '" + f + "'");
  rows_.push_back(std::move(row));
}

bool CsvTable::has_column(std::string_view name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw FormatError("csv has no column '" + std::string(name) + "'");
}

const std::string& CsvTable::at(std::size_t row, std::string_view name) const { return rows_.at(row)[column(name)]; }

std::optional<double> CsvTable::optional_number(std::size_t row, std::string_view name) const {
  const std::string& f = at(row, name);
  if (f.empty()) return std::nullopt;
  double v = 0;
  const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || end != f.data() + f.size())
    throw FormatError("csv row " + std::to_string(row + 1) + " column '" + std::string(name) + "': '" + f +
                      "' is not a number");
  return v;
}

double CsvTable::number(std::size_t row, std::string_view name) const {
  const auto v = optional_number(row, name);
  if (!v) throw FormatError("csv row " + std::to_string(row + 1) + " column '" + std::string(name) + "' is empty");
  return *v;
}

std::string CsvTable::to_string() const {
  std::string out;
  const auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  emit(header_);
  for (const auto& r : rows_) emit(r);
  return out;
}

CsvTable CsvTable::parse(std::string_view text, std::string_view origin) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatError(std::string(origin) + ": missing csv header");
  CsvTable table(split(lines[0]));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split(lines[i]);
    if (fields.size() != table.header_.size())
      throw FormatError(std::string(origin) + " line " + std::to_string(i + 1) + ": expected " +
                        std::to_string(table.header_.size()) + " fields, got " + std::to_string(fields.size()));
    table.rows_.push_back(std::move(fields));
  }
  return table;
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_string();
  if (!out) throw IoError("failed writing " + path.string());
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& value) { return value ? format_number(*value) : ""; }

}  // namespace mfpu
