// ms2mp_cli: plan single scenarios, run benchmark suites, dump SDFs, generate suites.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ms2mp/ms2mp.hpp"

namespace fs = std::filesystem;
using namespace ms2mp;

namespace {

std::vector<PlannerKind> parsePlanners(const std::string& list) {
  std::vector<PlannerKind> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const auto k = plannerFromString(item);
    if (!k) throw ScenarioError("--planners", "unknown planner \"" + item + "\"");
    out.push_back(*k);
  }
  if (out.empty()) throw ScenarioError("--planners", "empty planner list");
  return out;
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

void ensureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
}

/// A directory of scenario files (sorted by name), or a template file whose
/// "suite" block drives the generator; the template's planner block applies
/// to every generated scenario.
std::vector<Scenario> loadSuite(const fs::path& path, std::optional<std::uint64_t> seed) {
  std::vector<Scenario> suite;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) suite.push_back(loadScenario(f));
    if (suite.empty()) throw IoError(path.string(), "no .json scenarios in directory");
    return suite;
  }
  const Scenario tmpl = loadScenario(path);
  if (!tmpl.suite) return {tmpl};
  SuiteDescriptor desc = *tmpl.suite;
  if (seed) desc.seed = *seed;
  suite = generateSuite(desc);
  for (auto& s : suite) {
    s.planner = tmpl.planner;
    s.validate();
  }
  return suite;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Min-sum message passing motion planner"};
  app.require_subcommand(1);

  std::string scenario_path, planner_name = "ms2mp", out_dir = "out";
  std::size_t upsample = 1;
  auto* plan_cmd = app.add_subcommand("plan", "Plan one scenario and export the result");
  plan_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  plan_cmd->add_option("--planner", planner_name, "ms2mp | ms2mp_no_comp | batch | batch_no_intp");
  plan_cmd->add_option("--out", out_dir, "Output directory");
  plan_cmd->add_option("--upsample", upsample, "Also write the GP-interpolated trajectory at this factor")
      ->check(CLI::PositiveNumber);

  std::string suite_path, planner_list = "ms2mp,ms2mp_no_comp,batch,batch_no_intp";
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  auto* bench_cmd = app.add_subcommand("bench", "Run every planner on a suite");
  bench_cmd->add_option("suite", suite_path, "Directory of scenarios, or a template file with a suite block")
      ->required();
  bench_cmd->add_option("--planners", planner_list, "Comma-separated planner list");
  bench_cmd->add_option("--seed", seed, "Override the template's suite seed");
  bench_cmd->add_option("--out", out_dir, "Output directory");
  bench_cmd->add_option("--jobs", jobs, "Concurrent plans")->check(CLI::PositiveNumber);

  std::string sdf_out;
  auto* sdf_cmd = app.add_subcommand("sdf", "Write the scenario's signed distance field");
  sdf_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  sdf_cmd->add_option("--out", sdf_out, "Output file")->required();

  SuiteDescriptor gen;
  std::vector<std::size_t> obstacle_range{gen.min_obstacles, gen.max_obstacles};
  auto* gen_cmd = app.add_subcommand("gen-suite", "Write a generated suite as scenario files");
  gen_cmd->add_option("--count", gen.count, "Number of scenarios")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Suite seed");
  gen_cmd->add_option("--obstacles", obstacle_range, "Clutter count range: MIN MAX")->expected(2);
  gen_cmd->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan_cmd) {
      const auto kind = plannerFromString(planner_name);
      if (!kind) throw ScenarioError("--planner", "unknown planner \"" + planner_name + "\"");
      const PlanningProblem problem = PlanningProblem::build(loadScenario(scenario_path));
      const PlanResult r = plan(*kind, problem, SolverConfig::fromScenario(problem.scenario));
      const std::string stem = problem.scenario.name + "." + planner_name;
      exportResult(r, out_dir, stem, upsample);
      std::cout << planner_name << ": converged=" << r.converged << " collision_free=" << r.collision_free
                << " iterations=" << r.iterations << " wall_time=" << r.wall_time
                << " min_clearance=" << r.min_clearance << '\n'
                << "wrote " << (fs::path(out_dir) / stem).string() << ".*\n";
    } else if (*bench_cmd) {
      const auto planners = parsePlanners(planner_list);
      const auto suite = loadSuite(suite_path, seed);
      const BenchmarkReport rep = runBenchmark(suite, planners, jobs);
      ensureDir(out_dir);
      const std::string table = rep.table();
      writeText(fs::path(out_dir) / "report.txt", table);
      writeText(fs::path(out_dir) / "report.json", rep.toJson(true).dump(2) + "\n");
      writeText(fs::path(out_dir) / "report_deterministic.json", rep.toJson(false).dump(2) + "\n");
      std::cout << suite.size() << " scenarios\n" << table << "wrote " << out_dir << "/report.{txt,json}\n";
    } else if (*sdf_cmd) {
      const Scenario s = loadScenario(scenario_path);
      const SignedDistanceField sdf = buildSdf(s.workspace, s.planner.cell_size);
      std::ofstream out(sdf_out);
      if (!out) throw IoError(sdf_out, "cannot open for writing");
      writeSdf(out, sdf);
      if (!out) throw IoError(sdf_out, "write failed");
      std::cout << "wrote " << sdf.rows() << "x" << sdf.cols() << " grid to " << sdf_out << '\n';
    } else if (*gen_cmd) {
      gen.min_obstacles = obstacle_range[0];
      gen.max_obstacles = obstacle_range[1];
      if (gen.min_obstacles > gen.max_obstacles) throw ScenarioError("--obstacles", "min exceeds max");
      ensureDir(out_dir);
      for (const Scenario& s : generateSuite(gen)) saveScenario(s, fs::path(out_dir) / (s.name + ".json"));
      std::cout << "wrote " << gen.count << " scenarios to " << out_dir << '\n';
    }
  } catch (const ScenarioError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
