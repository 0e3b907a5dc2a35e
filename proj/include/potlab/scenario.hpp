#pragma once

// Scenario files: one JSON document naming a domain, an operator, a task and its
// parameters. Parsing validates everything up front; running is pure computation and
// returns the report, tables and status; writing artifacts is a separate step.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "potlab/capacity.hpp"
#include "potlab/degiorgi.hpp"
#include "potlab/expression.hpp"
#include "potlab/report.hpp"

namespace potlab {

/// Invalid or incomplete configuration. The message starts with the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RadialOracle {
  Vec center{};
  double inner = 0.0;
  double outer = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
};

struct DirichletTask {
  double h = 0.0;
  Expression boundary;
  std::optional<Expression> exact;
  int generalized_steps = 0;
  Mollifier mollifier = Mollifier::bump;
  std::optional<double> expect_max_error;
};

struct ObstacleTask {
  double h = 0.0;
  Shape e_shape{Point{}};
  double m = 1.0;
  int sign = 1;
  std::optional<RadialOracle> oracle;
  std::optional<double> expect_max_relative_error;
};

struct ProbeExtras {
  std::optional<SolidAngleOptions> solid_angle;
  std::optional<double> lambda;
  std::optional<double> C1;
};

struct ProbeTask {
  WienerProbeConfig probe;
  ProbeExtras extras;
  std::optional<Verdict> expect_verdict;
};

struct BarrierTask {
  double h = 0.0;
  Vec y{};
  double rho = 0.0;
  double m = 1.0;
  std::vector<double> deltas;
  double decay = 0.1;
  std::optional<bool> expect_condition_jj;
};

struct CaccioppoliSpec {
  double k = 0.0;
  double rho = 0.0;
  double R = 0.0;
};

struct DeGiorgiTask {
  std::vector<double> h_levels;
  Shape e_shape{Point{}};
  double m = 1.0;
  Vec y{};
  std::vector<CaccioppoliSpec> caccioppoli;
  std::optional<IterationSchedule> schedule;
  bool schedule_search = false;
  std::optional<std::pair<double, int>> oscillation;  // r0, K
  std::optional<double> envelope_C1;
  DecayOptions envelope;
  std::vector<double> envelope_sigma;
  std::optional<std::pair<double, long>> divergence;  // r0, K
  std::optional<double> expect_c_emp_ratio_max;
};

struct LocalityTask {
  ShapeSpec second{2, Shape(Point{})};
  double r = 0.0;
  WienerProbeConfig probe;
  std::optional<bool> expect_same_verdict;
};

using TaskParams = std::variant<DirichletTask, ObstacleTask, ProbeTask, BarrierTask, DeGiorgiTask, LocalityTask>;

struct Scenario {
  std::string name;
  std::string task;
  std::uint64_t seed = 0;
  ShapeSpec domain{2, Shape(Point{})};
  OperatorSpec op;
  SolveOptions solve;
  TaskParams params;
  nlohmann::json source;  ///< the document as read, for hashing
};

const std::vector<std::string>& task_names();

Scenario parse_scenario(const nlohmann::json& doc);
/// Reads and parses a file; malformed JSON raises ConfigError.
Scenario load_scenario(const std::filesystem::path& path);

struct ScenarioResult {
  nlohmann::json report;        ///< deterministic given the scenario and seed
  std::vector<Table> tables;
  nlohmann::json timings;       ///< wall times, kept out of the report
  bool converged = true;        ///< every solve met its tolerances
  bool passed = true;           ///< hard checks and expectations held
  std::vector<std::string> failures;
  std::string verdict;          ///< verdict or convergence summary for the summary table
  std::string metric_name;
  double metric = 0.0;
  double wall_time = 0.0;
};

ScenarioResult run_scenario(const Scenario& s);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Writes report.json, manifest.json and one CSV per table into dir.
void write_artifacts(const Scenario& s, const ScenarioResult& r, const std::filesystem::path& dir);

}  // namespace potlab
