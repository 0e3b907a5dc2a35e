#include "potlab/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace potlab {

std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string to_csv(const Table& t) {
  std::string out;
  auto line = [&out](const auto& fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out += ',';
      first = false;
      out += f;
    }
    out += "\r\n";
  };
  std::vector<std::string> fields;
  for (const auto& c : t.columns) fields.push_back(csv_escape(c));
  line(fields);
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw std::logic_error("table '" + t.name + "' row width mismatch");
    fields.clear();
    for (const Cell& c : row) {
      if (const auto* d = std::get_if<double>(&c)) {
        fields.push_back(format_number(*d));
      } else if (const auto* l = std::get_if<long>(&c)) {
        fields.push_back(std::to_string(*l));
      } else {
        fields.push_back(csv_escape(std::get<std::string>(c)));
      }
    }
    line(fields);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json json_numbers(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

}  // namespace potlab
