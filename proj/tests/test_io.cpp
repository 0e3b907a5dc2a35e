#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "potlab/expression.hpp"
#include "potlab/report.hpp"
#include "potlab/scenario.hpp"

namespace potlab {
namespace {

using nlohmann::json;

TEST(Expression, ArithmeticAndPrecedence) {
  const Vec x{0.5, -2.0, 3.0};
  EXPECT_DOUBLE_EQ(Expression::parse("1 + 2 * 3", 2)(x), 7.0);
  EXPECT_DOUBLE_EQ(Expression::parse("(1 + 2) * 3", 2)(x), 9.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2 ^ 3 ^ 2", 2)(x), 512.0);
  EXPECT_DOUBLE_EQ(Expression::parse("-x^2", 2)(x), -0.25);
  EXPECT_DOUBLE_EQ(Expression::parse("x^2 - y^2", 2)(x), 0.25 - 4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("x1 + x2", 2)(x), -1.5);
  EXPECT_DOUBLE_EQ(Expression::parse("z * x3", 3)(x), 9.0);
  EXPECT_DOUBLE_EQ(Expression::parse("8 / 4 / 2", 2)(x), 1.0);
  EXPECT_DOUBLE_EQ(Expression::parse("1.5e2", 2)(x), 150.0);
}

TEST(Expression, FunctionsAndConstants) {
  const Vec x{0.5, -2.0, 0.0};
  EXPECT_DOUBLE_EQ(Expression::parse("abs(y)", 2)(x), 2.0);
  EXPECT_DOUBLE_EQ(Expression::parse("sqrt(4)", 2)(x), 2.0);
  EXPECT_DOUBLE_EQ(Expression::parse("exp(0) + log(e)", 2)(x), 2.0);
  EXPECT_NEAR(Expression::parse("sin(pi / 2) + cos(0) + tan(0)", 2)(x), 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(Expression::parse("min(x, y) + max(x, y)", 2)(x), -1.5);
  EXPECT_DOUBLE_EQ(Expression::parse("pow(2, 10)", 2)(x), 1024.0);
  EXPECT_DOUBLE_EQ(Expression::parse("abs(x - 1/2)", 2)(x), 0.0);
}

TEST(Expression, DistanceToCentre) {
  auto e = Expression::parse("r", 2);
  e.set_centre({1.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(e({4.0, 5.0, 0.0}), 5.0);
}

TEST(Expression, ErrorsCarryTheColumn) {
  for (const char* bad : {"1 +", "x +* 2", "foo(1)", "(1 + 2", "z", "1 2", "min(1)", ""}) {
    try {
      Expression::parse(bad, 2);
      FAIL() << "accepted '" << bad << "'";
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find("column"), std::string::npos) << e.what();
    }
  }
}

TEST(Report, FormatNumberRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = U(rng) * std::pow(10.0, 40.0 * U(rng));
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "");
  EXPECT_TRUE(json_number(std::numeric_limits<double>::quiet_NaN()).is_null());
  EXPECT_EQ(json_number(0.25).get<double>(), 0.25);
}

// RFC-4180 reader used as the round-trip oracle.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows(1);
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      rows.back().push_back(field);
      field.clear();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      rows.back().push_back(field);
      field.clear();
      rows.emplace_back();
      ++i;
    } else {
      field += c;
    }
  }
  if (!field.empty() || !rows.back().empty()) rows.back().push_back(field);
  if (rows.back().empty()) rows.pop_back();
  return rows;
}

TEST(Report, CsvRoundTrip) {
  Table t{"demo", {"name", "value", "count"}, {}};
  t.rows.push_back({std::string("plain"), 0.1, 3L});
  t.rows.push_back({std::string("with, comma"), 1e-300, -7L});
  t.rows.push_back({std::string("quote \" inside"), std::numeric_limits<double>::quiet_NaN(), 0L});
  t.rows.push_back({std::string("line\nbreak"), -2.5, 1L});
  const std::string csv = to_csv(t);
  EXPECT_NE(csv.find("\r\n"), std::string::npos);
  const auto rows = parse_csv(csv);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"name", "value", "count"}));
  EXPECT_EQ(rows[2][0], "with, comma");
  EXPECT_EQ(std::stod(rows[2][1]), 1e-300);
  EXPECT_EQ(rows[3][0], "quote \" inside");
  EXPECT_EQ(rows[3][1], "");
  EXPECT_EQ(rows[4][0], "line\nbreak");
  EXPECT_EQ(std::stol(rows[2][2]), -7);
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("ab"), "ab");
}

json minimal_dirichlet() {
  return json::parse(R"({
    "name": "tiny", "task": "dirichlet",
    "domain": {"dim": 2, "shape": {"type": "box", "lo": [0, 0], "hi": [1, 1]}},
    "operator": {"kind": "p_laplace", "t": 2},
    "params": {"h": 0.125, "boundary": "x1 + 2", "exact": "x1 + 2"}
  })");
}

std::string config_error(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Scenario, ParsesMinimalDocument) {
  const Scenario s = parse_scenario(minimal_dirichlet());
  EXPECT_EQ(s.name, "tiny");
  EXPECT_EQ(s.task, "dirichlet");
  EXPECT_DOUBLE_EQ(s.op.t, 2.0);
  const auto& task = std::get<DirichletTask>(s.params);
  EXPECT_DOUBLE_EQ(task.h, 0.125);
  EXPECT_DOUBLE_EQ(task.boundary({0.5, 0, 0}), 2.5);
}

TEST(Scenario, ErrorsNameTheOffendingField) {
  auto doc = minimal_dirichlet();
  doc["params"].erase("h");
  EXPECT_NE(config_error(doc).find("params.h"), std::string::npos) << config_error(doc);

  doc = minimal_dirichlet();
  doc["params"]["colour"] = "red";
  EXPECT_NE(config_error(doc).find("colour"), std::string::npos) << config_error(doc);

  doc = minimal_dirichlet();
  doc["task"] = "integrate";
  EXPECT_NE(config_error(doc).find("task"), std::string::npos);

  doc = minimal_dirichlet();
  doc["operator"]["t"] = 0.5;
  EXPECT_NE(config_error(doc).find("operator.t"), std::string::npos) << config_error(doc);

  doc = minimal_dirichlet();
  doc["params"]["boundary"] = "x1 +";
  EXPECT_NE(config_error(doc).find("params.boundary"), std::string::npos) << config_error(doc);

  doc = minimal_dirichlet();
  doc["domain"]["shape"]["hi"] = json::array({1, -1});
  EXPECT_NE(config_error(doc).find("domain"), std::string::npos) << config_error(doc);

  doc = minimal_dirichlet();
  doc["name"] = "has space";
  EXPECT_NE(config_error(doc).find("name"), std::string::npos);
}

TEST(Scenario, ProbeLevelsMustDecrease) {
  const json doc = json::parse(R"({
    "name": "p", "task": "wiener-probe",
    "domain": {"dim": 2, "shape": {"type": "ball", "center": [-4, 0], "radius": 4}},
    "operator": {"kind": "p_laplace", "t": 2},
    "params": {"y": [0, 0], "m": 1, "rho0": 1, "r0": 0.5, "K": 3, "h_levels": [0.0625, 0.125, 0.03125]}
  })");
  EXPECT_NE(config_error(doc).find("h_levels"), std::string::npos) << config_error(doc);
}

TEST(Scenario, EveryShippedScenarioParses) {
  std::set<std::string> names;
  for (const char* sub : {"acceptance", "examples"}) {
    for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(POTLAB_SCENARIO_DIR) / sub)) {
      if (entry.path().extension() != ".json") continue;
      const Scenario s = load_scenario(entry.path());
      EXPECT_TRUE(names.insert(s.name).second) << "duplicate " << s.name;
      EXPECT_EQ(s.name, entry.path().stem().string());
    }
  }
  EXPECT_GE(names.size(), 15u);
}

TEST(Scenario, RunReportsAndCsvIsAProjection) {
  const Scenario s = parse_scenario(minimal_dirichlet());
  const ScenarioResult r = run_scenario(s);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.passed);
  EXPECT_FALSE(r.tables.empty());

  std::set<double> numbers;
  std::function<void(const json&)> collect = [&](const json& j) {
    if (j.is_number()) numbers.insert(j.get<double>());
    if (j.is_structured()) {
      for (const auto& v : j) collect(v);
    }
  };
  collect(r.report);
  for (const auto& t : r.tables) {
    for (const auto& row : t.rows) {
      for (const auto& cell : row) {
        if (const double* d = std::get_if<double>(&cell); d && std::isfinite(*d)) {
          EXPECT_TRUE(numbers.count(*d)) << t.name << ": " << format_number(*d) << " missing from the report";
        }
        if (const long* l = std::get_if<long>(&cell)) {
          EXPECT_TRUE(numbers.count(static_cast<double>(*l))) << t.name << ": " << *l << " missing from the report";
        }
      }
    }
  }
}

TEST(Scenario, ArtifactsAndDeterministicReport) {
  const Scenario s = parse_scenario(minimal_dirichlet());
  const auto dir = std::filesystem::temp_directory_path() / "potlab_io_test";
  std::filesystem::remove_all(dir);
  write_artifacts(s, run_scenario(s), dir / "a");
  write_artifacts(s, run_scenario(s), dir / "b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  ASSERT_TRUE(std::filesystem::exists(dir / "a" / "report.json"));
  EXPECT_EQ(slurp(dir / "a" / "report.json"), slurp(dir / "b" / "report.json"));
  const json manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("config_hash").get<std::string>(), config_hash(s.source));
  EXPECT_TRUE(manifest.contains("seed"));
  std::size_t csvs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) csvs += e.path().extension() == ".csv";
  EXPECT_GE(csvs, 1u);
  std::filesystem::remove_all(dir);
}

TEST(Scenario, ConfigHashIsStable) {
  const json a = minimal_dirichlet();
  json b = minimal_dirichlet();
  EXPECT_EQ(config_hash(a), config_hash(b));
  b["seed"] = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
}

}  // namespace
}  // namespace potlab
