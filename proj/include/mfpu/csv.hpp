#pragma once

// Minimal CSV: comma separated, header row, no quoting. Fields must not
// contain commas, quotes or line breaks.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mfpu {

class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  // Throws ContractViolation when the width differs from the header or a
  // field contains a separator.
  void add_row(std::vector<std::string> row);

  // Throws FormatError when the column is absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  const std::string& at(std::size_t row, std::string_view name) const;
  double number(std::size_t row, std::string_view name) const;
  // Empty field -> nullopt.
  std::optional<double> optional_number(std::size_t row, std::string_view name) const;

  std::string to_string() const;
  static CsvTable parse(std::string_view text, std::string_view origin = "csv");

  void write(const std::filesystem::path& path) const;
  static CsvTable read(const std::filesystem::path& path);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Shortest text that parses back to the same double ("" for NaN).
std::string format_number(double value);
std::string format_optional(const std::optional<double>& value);

}  // namespace mfpu
