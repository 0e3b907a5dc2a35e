#pragma once

// Tabular output: RFC-4180 CSV with shortest round-trip number formatting.

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace potlab {

using Cell = std::variant<double, long, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// Shortest decimal that parses back to the same double; NaN and infinities become "".
std::string format_number(double v);

/// One field, quoted when it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string& s);

std::string to_csv(const Table& t);
void write_text(const std::filesystem::path& path, const std::string& text);

/// JSON value for a double with NaN and infinities mapped to null.
nlohmann::json json_number(double v);
nlohmann::json json_numbers(const std::vector<double>& v);

}  // namespace potlab
