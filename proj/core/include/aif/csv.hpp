#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace aif {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column. Throws SchemaError if absent.
  std::size_t column(const std::string& name) const;
};

// RFC 4180 style: quoted fields may contain commas, quotes ("" escape)
// and newlines. Rows must all have the header's width.
CsvTable parse_csv(const std::string& text, const std::string& origin = "csv");
CsvTable read_csv(const std::filesystem::path& path);

std::string to_csv(const CsvTable& table);
void write_csv_atomic(const std::filesystem::path& path, const CsvTable& table);

// Strict numeric parse of a whole field. Throws SchemaError otherwise.
double parse_double_field(const std::string& field, const std::string& context);

// Fixed formatting used everywhere numbers land in output files so that
// same-seed runs serialize byte-identically.
std::string format_double(double value);

}  // namespace aif
