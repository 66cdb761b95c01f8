#pragma once

// Trajectory text files and per-plan summary records.
//
// Trajectory format: a '#' header line "index time p0 .. p{d-1} v0 .. v{d-1}",
// then one whitespace-delimited row per state at 17 significant digits, which
// round-trips doubles exactly.

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "ms2mp/errors.hpp"
#include "ms2mp/gp_prior.hpp"
#include "ms2mp/planner.hpp"

namespace ms2mp {

inline void writeTrajectory(std::ostream& out, const Trajectory& traj) {
  const Eigen::Index d = traj.stateDim() / 2;
  out << "# index time";
  for (Eigen::Index k = 0; k < d; ++k) out << " p" << k;
  for (Eigen::Index k = 0; k < d; ++k) out << " v" << k;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out << i << ' ' << traj.times[i];
    for (Eigen::Index k = 0; k < traj.states[i].size(); ++k) out << ' ' << traj.states[i][k];
    out << '\n';
  }
}

/// `upsample` > 1 writes the GP-interpolated trajectory with N*upsample+1 rows.
inline void writeTrajectory(const std::filesystem::path& path, const Trajectory& traj, std::size_t upsample = 1) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  writeTrajectory(out, upsample > 1 ? upsampleTrajectory(traj, upsample) : traj);
  if (!out) throw IoError(path.string(), "write failed");
}

inline Trajectory readTrajectory(std::istream& in, const std::string& origin = "<stream>") {
  Trajectory traj;
  std::string line;
  Eigen::Index dim = -1;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::size_t index = 0;
    double t = 0.0;
    std::vector<double> values;
    if (!(row >> index >> t)) throw IoError(origin, "malformed row at line " + std::to_string(line_no));
    for (double v; row >> v;) values.push_back(v);
    if (!row.eof()) throw IoError(origin, "non-numeric value at line " + std::to_string(line_no));
    if (dim < 0) dim = static_cast<Eigen::Index>(values.size());
    if (static_cast<Eigen::Index>(values.size()) != dim || dim == 0 || dim % 2 != 0) {
      throw IoError(origin, "inconsistent column count at line " + std::to_string(line_no));
    }
    if (index != traj.size()) throw IoError(origin, "non-sequential index at line " + std::to_string(line_no));
    traj.times.push_back(t);
    traj.states.push_back(Eigen::Map<const Vector>(values.data(), dim));
  }
  return traj;
}

inline Trajectory readTrajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return readTrajectory(in, path.string());
}

inline nlohmann::json summaryJson(const PlanResult& r) {
  nlohmann::json j;
  j["planner"] = r.planner;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["wall_time"] = r.wall_time;
  j["collision_free"] = r.collision_free;
  j["success"] = r.success();
  j["min_clearance"] = r.min_clearance;
  j["objective_history"] = r.objective_history;
  j["support_states"] = r.trajectory.size();
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

/// Writes <dir>/<stem>.traj.txt, <dir>/<stem>.summary.json and, when
/// upsample > 1, <dir>/<stem>.dense.txt.
inline void exportResult(const PlanResult& r, const std::filesystem::path& dir, const std::string& stem,
                         std::size_t upsample = 1) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
  writeTrajectory(dir / (stem + ".traj.txt"), r.trajectory);
  if (upsample > 1) writeTrajectory(dir / (stem + ".dense.txt"), r.trajectory, upsample);
  const auto summary_path = dir / (stem + ".summary.json");
  std::ofstream out(summary_path);
  if (!out) throw IoError(summary_path.string(), "cannot open for writing");
  out << summaryJson(r).dump(2) << '\n';
  if (!out) throw IoError(summary_path.string(), "write failed");
}

}  // namespace ms2mp
