#pragma once

// Suite runner: every planner on every scenario, aggregated per planner.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ms2mp/planner.hpp"

namespace ms2mp {

struct ScenarioOutcome {
  std::string scenario;
  bool converged = false;
  bool collision_free = false;
  bool in_bounds = false;
  std::size_t iterations = 0;
  double wall_time = 0.0;
  double min_clearance = 0.0;
  double final_objective = 0.0;
  std::string error;

  bool success() const { return converged && collision_free; }
};

struct PlannerRow {
  PlannerKind planner = PlannerKind::kMs2mp;
  std::vector<ScenarioOutcome> outcomes;

  std::size_t successes() const {
    return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(),
                                                  [](const ScenarioOutcome& o) { return o.success(); }));
  }
  double successPercent() const {
    return outcomes.empty() ? 0.0 : 100.0 * static_cast<double>(successes()) / static_cast<double>(outcomes.size());
  }
  double averageTime() const {
    double s = 0.0;
    for (const auto& o : outcomes) s += o.wall_time;
    return outcomes.empty() ? 0.0 : s / static_cast<double>(outcomes.size());
  }
  double maxTime() const {
    double m = 0.0;
    for (const auto& o : outcomes) m = std::max(m, o.wall_time);
    return m;
  }
};

struct BenchmarkReport {
  std::vector<PlannerRow> rows;

  const PlannerRow* row(PlannerKind k) const {
    for (const auto& r : rows) {
      if (r.planner == k) return &r;
    }
    return nullptr;
  }

  std::string table() const {
    std::ostringstream os;
    os << std::left << std::setw(16) << "planner" << std::right << std::setw(12) << "success(%)" << std::setw(14)
       << "avg time(s)" << std::setw(14) << "max time(s)" << '\n';
    for (const auto& r : rows) {
      os << std::left << std::setw(16) << toString(r.planner) << std::right << std::fixed << std::setprecision(1)
         << std::setw(12) << r.successPercent() << std::setprecision(4) << std::setw(14) << r.averageTime()
         << std::setw(14) << r.maxTime() << '\n';
    }
    return os.str();
  }

  /// With include_times = false the output depends only on the inputs, so
  /// repeated runs compare byte for byte.
  nlohmann::json toJson(bool include_times = true) const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row;
      row["planner"] = toString(r.planner);
      row["success_percent"] = r.successPercent();
      row["successes"] = r.successes();
      row["total"] = r.outcomes.size();
      if (include_times) {
        row["average_time"] = r.averageTime();
        row["max_time"] = r.maxTime();
      }
      nlohmann::json outs = nlohmann::json::array();
      for (const auto& o : r.outcomes) {
        nlohmann::json oj = {{"scenario", o.scenario},
                             {"converged", o.converged},
                             {"collision_free", o.collision_free},
                             {"in_bounds", o.in_bounds},
                             {"success", o.success()},
                             {"iterations", o.iterations},
                             {"min_clearance", o.min_clearance},
                             {"final_objective", o.final_objective}};
        if (include_times) oj["wall_time"] = o.wall_time;
        if (!o.error.empty()) oj["error"] = o.error;
        outs.push_back(std::move(oj));
      }
      row["outcomes"] = std::move(outs);
      j.push_back(std::move(row));
    }
    return {{"rows", j}};
  }
};

/// A throwing plan is recorded as a failed outcome; the suite always completes.
inline ScenarioOutcome runCell(PlannerKind kind, const PlanningProblem& p) {
  ScenarioOutcome o;
  o.scenario = p.scenario.name;
  try {
    const PlanResult r = plan(kind, p, SolverConfig::fromScenario(p.scenario));
    o.converged = r.converged;
    o.collision_free = r.collision_free;
    o.in_bounds = r.in_bounds;
    o.iterations = r.iterations;
    o.wall_time = r.wall_time;
    o.min_clearance = r.min_clearance;
    o.final_objective = r.objective_history.empty() ? 0.0 : r.objective_history.back();
    o.error = r.error;
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

/// SDFs are built before timing starts (inside `problems`). `jobs` > 1 runs
/// cells on worker threads; results land in fixed slots, so the report does
/// not depend on scheduling apart from the measured times.
inline BenchmarkReport runBenchmark(const std::vector<PlanningProblem>& problems,
                                   const std::vector<PlannerKind>& planners, unsigned jobs = 1) {
  if (problems.empty()) throw std::invalid_argument("runBenchmark: empty suite");
  if (planners.empty()) throw std::invalid_argument("runBenchmark: no planners");
  BenchmarkReport rep;
  for (auto k : planners) rep.rows.push_back({k, std::vector<ScenarioOutcome>(problems.size())});
  const std::size_t cells = planners.size() * problems.size();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t row = c / problems.size();
      const std::size_t col = c % problems.size();
      rep.rows[row].outcomes[col] = runCell(planners[row], problems[col]);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rep;
}

inline BenchmarkReport runBenchmark(const std::vector<Scenario>& suite, const std::vector<PlannerKind>& planners,
                                    unsigned jobs = 1) {
  std::vector<PlanningProblem> problems;
  problems.reserve(suite.size());
  for (const auto& s : suite) problems.push_back(PlanningProblem::build(s));
  return runBenchmark(problems, planners, jobs);
}

}  // namespace ms2mp
