#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gridmfg {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_number(double value);

double parse_number(std::string_view text);
long parse_integer(std::string_view text);

/// Header-mandatory CSV table of string cells. No quoting support; the
/// formats in this project never carry commas inside a field.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws with the list of available columns when
  /// the column is missing.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::vector<std::string> split(std::string_view text, char delimiter);
std::string_view trim(std::string_view text);

}  // namespace gridmfg
