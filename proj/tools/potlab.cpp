#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "potlab/scenario.hpp"

namespace fs = std::filesystem;
using namespace potlab;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfig = 2;

struct Outcome {
  std::string file;
  std::string name;
  std::string task;
  std::string status;  // ok, failed, config-error
  std::string verdict;
  std::string metric_name;
  double metric = 0.0;
  double wall_time = 0.0;
  std::string message;
};

int exit_code(const Outcome& o) {
  if (o.status == "config-error") return kConfig;
  return o.status == "ok" ? kOk : kFailed;
}

Outcome execute(Scenario s, const fs::path& out, std::optional<std::uint64_t> seed) {
  Outcome o;
  o.name = s.name;
  o.task = s.task;
  if (seed) s.seed = *seed;
  try {
    const ScenarioResult r = run_scenario(s);
    write_artifacts(s, r, out / s.name);
    o.status = r.passed && r.converged ? "ok" : "failed";
    o.verdict = r.verdict;
    o.metric_name = r.metric_name;
    o.metric = r.metric;
    o.wall_time = r.wall_time;
    for (const auto& f : r.failures) o.message += (o.message.empty() ? "" : ", ") + f;
  } catch (const ConfigError& e) {
    o.status = "config-error";
    o.message = e.what();
  } catch (const std::exception& e) {
    o.status = "failed";
    o.message = e.what();
  }
  return o;
}

void print(const Outcome& o) {
  std::printf("%-28s %-20s %-12s %-16s %s=%s  %.2fs%s%s\n", o.name.c_str(), o.task.c_str(), o.status.c_str(),
              o.verdict.c_str(), o.metric_name.c_str(), format_number(o.metric).c_str(), o.wall_time,
              o.message.empty() ? "" : "  ", o.message.c_str());
}

int cmd_run(const std::string& file, const fs::path& out, std::optional<std::uint64_t> seed) {
  Scenario s;
  try {
    s = load_scenario(file);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  }
  const Outcome o = execute(std::move(s), out, seed);
  if (o.status == "config-error") {
    std::fprintf(stderr, "config error: %s\n", o.message.c_str());
  } else {
    print(o);
  }
  return exit_code(o);
}

int cmd_suite(const fs::path& dir, const fs::path& out, std::optional<std::uint64_t> seed, unsigned threads) {
  if (!fs::is_directory(dir)) {
    std::fprintf(stderr, "error: %s is not a directory\n", dir.string().c_str());
    return kConfig;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::fprintf(stderr, "error: no scenarios in %s\n", dir.string().c_str());
    return kConfig;
  }

  std::vector<Outcome> outcomes(files.size());
  std::vector<std::optional<Scenario>> scenarios(files.size());
  std::map<std::string, std::vector<std::string>> by_name;
  for (std::size_t i = 0; i < files.size(); ++i) {
    outcomes[i].file = files[i].filename().string();
    try {
      scenarios[i] = load_scenario(files[i]);
      outcomes[i].name = scenarios[i]->name;
      outcomes[i].task = scenarios[i]->task;
      by_name[scenarios[i]->name].push_back(outcomes[i].file);
    } catch (const ConfigError& e) {
      outcomes[i].name = files[i].stem().string();
      outcomes[i].status = "config-error";
      outcomes[i].message = e.what();
    }
  }
  std::string dupes;
  for (const auto& [name, where] : by_name) {
    if (where.size() < 2) continue;
    dupes += (dupes.empty() ? "" : "; ") + name + " (";
    for (std::size_t k = 0; k < where.size(); ++k) dupes += (k ? ", " : "") + where[k];
    dupes += ")";
  }
  if (!dupes.empty()) {
    std::fprintf(stderr, "error: duplicate scenario names: %s\n", dupes.c_str());
    return kConfig;
  }

  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      if (scenarios[i]) {
        const std::string file = outcomes[i].file;
        outcomes[i] = execute(std::move(*scenarios[i]), out, seed);
        outcomes[i].file = file;
      }
      const std::lock_guard<std::mutex> lock(io);
      print(outcomes[i]);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < std::max(1u, threads); ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  Table summary{"summary", {"scenario", "task", "status", "verdict", "metric", "value", "wall_time", "message"}, {}};
  int code = kOk;
  for (const Outcome& o : outcomes) {
    summary.rows.push_back({o.name, o.task, o.status, o.verdict, o.metric_name, o.metric, o.wall_time, o.message});
    code = std::max(code, exit_code(o));
  }
  fs::create_directories(out);
  write_text(out / "summary.csv", to_csv(summary));
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear potential-theory workbench"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  unsigned threads = 1;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool list_tasks = false;
  app.add_option("--threads", threads, "Scenarios run in parallel (suite)")->check(CLI::Range(1u, 256u));
  app.add_option("--out", out, "Output directory");
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_flag("--list-tasks", list_tasks, "List scenario tasks and exit");

  std::string file;
  auto* run = app.add_subcommand("run", "Run one scenario file");
  run->add_option("file", file, "Scenario JSON")->required();
  std::string dir;
  auto* suite = app.add_subcommand("suite", "Run every *.json scenario in a directory");
  suite->add_option("dir", dir, "Scenario directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  if (list_tasks) {
    for (const auto& t : task_names()) std::printf("%s\n", t.c_str());
    return kOk;
  }
  try {
    if (*run) return cmd_run(file, out, seed);
    if (*suite) return cmd_suite(dir, out, seed, threads);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  std::fprintf(stderr, "%s", app.help().c_str());
  return kConfig;
}
