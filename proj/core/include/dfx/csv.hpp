#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dfx {

/// Decimal form with 17 significant digits, which always round-trips the
/// exact double.
std::string format_double(double value);

/// Parses a double with full precision; throws InvalidInputError on
/// trailing garbage or empty field.
double parse_double(const std::string& field, const std::string& context);

/// A parsed numeric CSV: one header row, then all-numeric data rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reads a comma-separated numeric table. Errors name the file and line.
CsvTable read_csv(const std::filesystem::path& path);

/// Writes a numeric table with full-precision values.
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::vector<std::string> split_fields(const std::string& line);

}  // namespace dfx
