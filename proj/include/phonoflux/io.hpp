#pragma once

// CSV / JSON plumbing.  Numbers are written with 12 significant digits and
// column names carry their unit (freq_mhz, delay_us, ...).

#include <string>
#include <vector>

#include <json.hpp>

namespace phonoflux {

/// "%.12g"
std::string format_number(double v);
/// v rounded to 12 significant digits (for JSON emission).
double round12(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws LookupError when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
  std::string to_string() const;
};

/// Numeric CSV with one header line; '#' lines are skipped.
CsvTable parse_csv(const std::string& text, const std::string& origin = "<csv>");
CsvTable read_csv(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Recursively rounds every floating-point value to 12 significant digits.
nlohmann::ordered_json rounded(const nlohmann::ordered_json& j);
/// Pretty JSON text (2-space indent, trailing newline) after rounding.
std::string json_text(const nlohmann::ordered_json& j);

}  // namespace phonoflux
