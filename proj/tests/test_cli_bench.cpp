#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "ms2mp/ms2mp.hpp"

using namespace ms2mp;
namespace fs = std::filesystem;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

const char* kMinimal = R"({
  "workspace": {"bounds": {"min": [0, 0], "max": [2, 2]}},
  "robot": {"kind": "point", "radius": 0.05},
  "start": [0.2, 0.2],
  "goal": [1.8, 1.5]
})";

std::string withPlanner(const std::string& planner_block) {
  std::string s = kMinimal;
  s.insert(s.rfind('}'), ",\n  \"planner\": " + planner_block + "\n");
  return s;
}

fs::path scratchDir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ms2mp_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int runCli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MS2MP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string scenarioError(const std::string& text) {
  try {
    parseScenario(text);
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadScenario, MinimalFileGetsDefaults) {
  const Scenario s = parseScenario(kMinimal);
  EXPECT_EQ(s.name, "scenario");
  EXPECT_EQ(s.planner.eps, 0.2);
  EXPECT_EQ(s.planner.sigma_obs, 0.001);
  EXPECT_EQ(s.planner.support_states, 11u);
  EXPECT_EQ(s.planner.n_ip, 4u);
  EXPECT_FALSE(s.suite.has_value());
  EXPECT_EQ(s.startState(), vec({0.2, 0.2, 1.6, 1.3}));
}

TEST(LoadScenario, OmittedNMeansElevenSupportStates) {
  EXPECT_EQ(parseScenario(withPlanner(R"({"eps": 0.1})")).planner.support_states, 11u);
  EXPECT_EQ(parseScenario(withPlanner(R"({"N": 6})")).planner.support_states, 6u);
}

TEST(LoadScenario, ValidationErrorsNameTheField) {
  EXPECT_NE(scenarioError(withPlanner(R"({"eps": -1})")).find("planner.eps"), std::string::npos);
  EXPECT_NE(scenarioError(withPlanner(R"({"N": 2.5})")).find("planner.N"), std::string::npos);
  EXPECT_NE(scenarioError(withPlanner(R"({"epsilon": 0.2})")).find("planner.epsilon"), std::string::npos);
  std::string bad_radius = kMinimal;
  bad_radius.replace(bad_radius.find("0.05"), 4, "\"x\"");
  EXPECT_NE(scenarioError(bad_radius).find("robot.radius"), std::string::npos);
}

TEST(LoadScenario, StartInCollision) {
  std::string s = kMinimal;
  s.replace(s.find("\"bounds\""), 0, R"("obstacles": [{"type": "circle", "center": [0.2, 0.25], "radius": 0.1}], )");
  const std::string err = scenarioError(s);
  EXPECT_NE(err.find("start"), std::string::npos);
  EXPECT_NE(err.find("collision"), std::string::npos);
}

TEST(LoadScenario, ParseErrorAndMissingFile) {
  EXPECT_NE(scenarioError("{\"workspace\": ").find("parse error"), std::string::npos);
  EXPECT_THROW(loadScenario("/nonexistent/ms2mp/scenario.json"), IoError);
  const fs::path dir = scratchDir("load");
  std::ofstream(dir / "bad.json") << withPlanner(R"({"eps": -1})");
  try {
    loadScenario(dir / "bad.json");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("planner.eps"), std::string::npos);
  }
}

TEST(LoadScenario, SampleFilesLoad) {
  for (const char* f : {"minimal_point.json", "planar_arm.json", "suite_template.json"}) {
    EXPECT_NO_THROW(loadScenario(fs::path(MS2MP_SCENARIO_DIR) / f)) << f;
  }
  EXPECT_EQ(loadScenario(fs::path(MS2MP_SCENARIO_DIR) / "planar_arm.json").configDim(), 2);
}

TEST(LoadScenario, SaveRoundTrip) {
  Scenario s = loadScenario(fs::path(MS2MP_SCENARIO_DIR) / "planar_arm.json");
  s.start_velocity = vec({0.1, -0.2});
  const fs::path dir = scratchDir("save");
  saveScenario(s, dir / "arm.json");
  const Scenario back = loadScenario(dir / "arm.json");
  EXPECT_EQ(scenarioToJson(back), scenarioToJson(s));
  EXPECT_THROW(saveScenario(s, "/nonexistent/ms2mp/out.json"), IoError);
}

TEST(ExportTrajectory, ThreeStateOneDimensional) {
  Trajectory t;
  t.times = {0.0, 0.5, 1.0};
  t.states = {vec({0.0, 1.0}), vec({0.5, 1.0}), vec({1.0, 1.0})};
  std::stringstream ss;
  writeTrajectory(ss, t);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "# index time p0 v0");
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(ExportTrajectory, UpsampledRowCount) {
  const Trajectory t = priorMeanTrajectory(makeState(vec({0, 0}), vec({0, 0})), makeState(vec({1, 2}), vec({0, 0})), 10, 1.0);
  const fs::path dir = scratchDir("upsample");
  writeTrajectory(dir / "dense.txt", t, 5);
  EXPECT_EQ(readTrajectory(dir / "dense.txt").size(), 51u);
}

TEST(ExportTrajectory, RoundTripIsExact) {
  Trajectory t = priorMeanTrajectory(makeState(vec({0.1, 0.3}), vec({0, 0})), makeState(vec({1.7, 2.9}), vec({0, 0})), 7, 1.3);
  t.states[3] += vec({1.0 / 3.0, -std::sqrt(2.0), 1e-300, 12345.678901234567});
  std::stringstream ss;
  writeTrajectory(ss, t);
  const Trajectory back = readTrajectory(ss);
  ASSERT_EQ(back.size(), t.size());
  EXPECT_EQ(back.times, t.times);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(back.states[i], t.states[i]);
}

TEST(ExportTrajectory, MalformedInput) {
  std::stringstream gap("0 0 1 2\n2 1 1 2\n");
  EXPECT_THROW(readTrajectory(gap), IoError);
  std::stringstream ragged("0 0 1 2\n1 1 1 2 3 4\n");
  EXPECT_THROW(readTrajectory(ragged), IoError);
  std::stringstream junk("0 0 1 x\n");
  EXPECT_THROW(readTrajectory(junk), IoError);
}

TEST(ExportResult, WritesFilesAndSummary) {
  const PlanningProblem p = PlanningProblem::build(parseScenario(kMinimal));
  const PlanResult r = ms2mpPlan(p, SolverConfig::fromScenario(p.scenario));
  const fs::path dir = scratchDir("export") / "nested";
  exportResult(r, dir, "run", 4);
  EXPECT_EQ(readTrajectory(dir / "run.traj.txt").size(), 11u);
  EXPECT_EQ(readTrajectory(dir / "run.dense.txt").size(), 41u);
  const auto summary = nlohmann::json::parse(slurp(dir / "run.summary.json"));
  for (const char* key : {"converged", "iterations", "wall_time", "objective_history", "collision_free"}) {
    EXPECT_TRUE(summary.contains(key)) << key;
  }
  EXPECT_EQ(summary["collision_free"], r.collision_free);
  EXPECT_THROW(exportResult(r, "/proc/ms2mp_denied", "run"), IoError);
}

TEST(Benchmark, EmptyScenarioAllPlannersSucceed) {
  const std::vector<PlannerKind> all = {PlannerKind::kMs2mp, PlannerKind::kMs2mpNoComp, PlannerKind::kBatch,
                                        PlannerKind::kBatchNoIntp};
  const BenchmarkReport rep = runBenchmark(std::vector<Scenario>{parseScenario(kMinimal)}, all);
  ASSERT_EQ(rep.rows.size(), 4u);
  for (const auto& row : rep.rows) EXPECT_EQ(row.successPercent(), 100.0) << toString(row.planner);
  const std::string table = rep.table();
  for (auto k : all) EXPECT_NE(table.find(toString(k)), std::string::npos);
}

TEST(Benchmark, FailingCellDoesNotAbortSuite) {
  std::vector<PlanningProblem> problems{PlanningProblem::build(parseScenario(kMinimal)),
                                        PlanningProblem::build(parseScenario(kMinimal))};
  problems[0].scenario.planner.support_states = 1;  // rejected by the solver config
  const BenchmarkReport rep = runBenchmark(problems, {PlannerKind::kMs2mp, PlannerKind::kBatch}, 2);
  for (const auto& row : rep.rows) {
    EXPECT_FALSE(row.outcomes[0].success());
    EXPECT_FALSE(row.outcomes[0].error.empty());
    EXPECT_TRUE(row.outcomes[1].success());
    EXPECT_EQ(row.successPercent(), 50.0);
  }
  EXPECT_THROW(runBenchmark(std::vector<PlanningProblem>{}, {PlannerKind::kMs2mp}), std::invalid_argument);
}

TEST(Benchmark, ParallelMatchesSerial) {
  SuiteDescriptor d;
  d.count = 4;
  d.seed = 11;
  const auto suite = generateSuite(d);
  const std::vector<PlannerKind> planners = {PlannerKind::kMs2mp, PlannerKind::kBatch};
  EXPECT_EQ(runBenchmark(suite, planners, 1).toJson(false), runBenchmark(suite, planners, 4).toJson(false));
}

TEST(Suite, SameSeedSameScenarios) {
  SuiteDescriptor d;
  d.seed = 5;
  const auto a = generateSuite(d), b = generateSuite(d);
  ASSERT_EQ(a.size(), 24u);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(scenarioToJson(a[k]), scenarioToJson(b[k]));
  d.seed = 6;
  EXPECT_NE(scenarioToJson(generateSuite(d)[0]), scenarioToJson(a[0]));
}

TEST(Suite, GeneratedScenesMeetTheirContract) {
  SuiteDescriptor d;
  d.seed = 3;
  for (const Scenario& s : generateSuite(d)) {
    const double start_clearance = configurationClearance(s.workspace, s.robot, s.start);
    EXPECT_GE(start_clearance, 0.01 - 1e-12) << s.name;
    EXPECT_LE(start_clearance, 0.05 + 1e-12) << s.name;
    EXPECT_GT((s.goal - s.start).norm(), 1.0);
    EXPECT_GE(s.workspace.obstacles.size(), 3u + d.min_obstacles);
    EXPECT_NO_THROW(s.validate());
  }
}

TEST(Cli, PlanWritesOutputs) {
  const fs::path dir = scratchDir("cli_plan");
  const std::string scenario = (fs::path(MS2MP_SCENARIO_DIR) / "minimal_point.json").string();
  EXPECT_EQ(runCli("plan " + scenario + " --planner batch --upsample 3 --out " + dir.string(), dir / "log"), 0);
  EXPECT_TRUE(fs::exists(dir / "minimal_point.batch.traj.txt"));
  EXPECT_TRUE(fs::exists(dir / "minimal_point.batch.summary.json"));
  EXPECT_EQ(readTrajectory(dir / "minimal_point.batch.dense.txt").size(), 31u);
}

TEST(Cli, InputAndIoErrorsExitNonzero) {
  const fs::path dir = scratchDir("cli_err");
  std::ofstream(dir / "bad.json") << withPlanner(R"({"eps": -1})");
  EXPECT_EQ(runCli("plan " + (dir / "bad.json").string() + " --out " + dir.string(), dir / "log1"), 1);
  EXPECT_NE(slurp(dir / "log1").find("planner.eps"), std::string::npos);
  EXPECT_EQ(runCli("plan " + (dir / "missing.json").string(), dir / "log2"), 1);
  EXPECT_NE(slurp(dir / "log2").find("io error"), std::string::npos);
  const std::string scenario = (fs::path(MS2MP_SCENARIO_DIR) / "minimal_point.json").string();
  EXPECT_EQ(runCli("plan " + scenario + " --planner nope --out " + dir.string(), dir / "log3"), 1);
  EXPECT_NE(runCli("frobnicate", dir / "log4"), 0);
}

TEST(Cli, GenSuiteThenBenchDirectory) {
  const fs::path dir = scratchDir("cli_bench");
  ASSERT_EQ(runCli("gen-suite --count 3 --seed 9 --out " + (dir / "suite").string(), dir / "log"), 0);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir / "suite"), fs::directory_iterator{}), 3);
  ASSERT_EQ(runCli("bench " + (dir / "suite").string() + " --planners ms2mp,batch --out " + (dir / "a").string(),
                   dir / "log_a"),
            0);
  ASSERT_EQ(runCli("bench " + (dir / "suite").string() + " --planners ms2mp,batch --jobs 2 --out " +
                       (dir / "b").string(),
                   dir / "log_b"),
            0);
  EXPECT_TRUE(fs::exists(dir / "a" / "report.txt"));
  EXPECT_EQ(slurp(dir / "a" / "report_deterministic.json"), slurp(dir / "b" / "report_deterministic.json"));
  const auto rep = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  EXPECT_EQ(rep["rows"].size(), 2u);
}

TEST(Cli, SdfDump) {
  const fs::path dir = scratchDir("cli_sdf");
  const std::string scenario = (fs::path(MS2MP_SCENARIO_DIR) / "minimal_point.json").string();
  ASSERT_EQ(runCli("sdf " + scenario + " --out " + (dir / "field.txt").string(), dir / "log"), 0);
  std::ifstream in(dir / "field.txt");
  const SignedDistanceField sdf = readSdf(in);
  EXPECT_EQ(sdf.cols(), 201);
  EXPECT_NEAR(sdf.query(Point2(1.0, 1.05)).distance, -0.2, 1e-3);
}
