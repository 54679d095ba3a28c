#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rqi {

// Small RFC 4180 style CSV: first row is the header, fields containing
// separators or quotes are quoted on output.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column; throws SchemaError if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  // Throws SchemaError unless the header starts with exactly these names.
  void require_columns(const std::vector<std::string>& names) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
std::string format_csv(const CsvTable& table);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

// Shortest round-trip representation; infinities as "inf" / "-inf".
std::string format_number(double v);
// Parses decimals with '.' as separator plus "inf"/"-inf"; SchemaError on junk.
double parse_number(std::string_view text);

}  // namespace rqi
