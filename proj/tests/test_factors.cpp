#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "ms2mp/factors.hpp"
#include "oracles.hpp"

using namespace ms2mp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

std::shared_ptr<const SignedDistanceField> sdfOf(const Workspace& ws, double cell = 0.01) {
  return std::make_shared<const SignedDistanceField>(buildSdf(ws, cell));
}

Workspace clutter() {
  Workspace ws;
  ws.bounds = {Point2(0, 0), Point2(2, 2)};
  ws.obstacles.emplace_back(Circle{Point2(1.0, 1.0), 0.3});
  ws.obstacles.emplace_back(Box{Point2(0.2, 1.5), Point2(0.8, 1.7)});
  return ws;
}

/// True when every sphere center of q, moved by up to `reach`, stays inside one SDF cell.
bool awayFromCellEdges(const RobotModel& m, const SignedDistanceField& sdf, const Vector& q, double reach) {
  for (const auto& pose : forwardKinematics(m, q)) {
    const Point2 rel = (pose.center - sdf.origin()) / sdf.cellSize();
    const Point2 frac = rel - rel.array().floor().matrix();
    const double margin = reach / sdf.cellSize();
    if ((frac.array() < margin).any() || (frac.array() > 1.0 - margin).any()) return false;
  }
  return true;
}

GPPriorModel priorFor(const Vector& p0, const Vector& p1) {
  const Vector v = p1 - p0;
  return GPPriorModel::make(Matrix::Identity(p0.size(), p0.size()), makeState(p0, v), makeState(p1, v));
}

std::size_t census(std::size_t n, std::size_t n_ip) { return 2 + (n - 1) + n + (n + 1) + n * n_ip; }

}  // namespace

TEST(ObstacleCost, FreeSpaceIsZero) {
  const auto sdf = sdfOf(clutter());
  const ObstacleCost c = obstacleCostVector(RobotModel::point(0.05), *sdf, vec({1.8, 0.2}), 0.2);
  EXPECT_EQ(c.residual, vec({0.0}));
  EXPECT_EQ(c.jacobian.norm(), 0.0);
}

TEST(ObstacleCost, HandComputedEntry) {
  // Circle surface at x = 1.3; robot center at 1.5 is 0.2 from it.
  const auto sdf = sdfOf(clutter());
  const double d = sdf->query(Point2(1.5, 1.0)).distance;
  ASSERT_NEAR(d, 0.2, 1e-12);
  const ObstacleCost c = obstacleCostVector(RobotModel::point(0.05), *sdf, vec({1.5, 1.0}), 0.2);
  EXPECT_NEAR(c.residual[0], 0.05, 1e-12);
  // Pushing away from the circle lowers the cost.
  EXPECT_LT(c.jacobian(0, 0), 0.0);
}

TEST(ObstacleCost, JacobianMatchesFiniteDifferences) {
  const auto sdf = sdfOf(clutter());
  std::mt19937_64 rng(47);
  const RobotModel point = RobotModel::point(0.05);
  const RobotModel arm = RobotModel::uniformArm({0.5, 0.4}, 3, 0.04, Point2(1.0, 0.2), 0.0);
  for (const RobotModel* m : {&point, &arm}) {
    int checked = 0;
    for (int k = 0; k < 5000 && checked < 100; ++k) {
      const Vector q = m == &point ? oracle::randomVector(rng, 2, 0.5, 1.5) : oracle::randomVector(rng, 2, 0.3, 2.8);
      const ObstacleCost c = obstacleCostVector(*m, *sdf, q, 0.2);
      if (c.residual.maxCoeff() <= 1e-3 || !awayFromCellEdges(*m, *sdf, q, 1e-5)) continue;
      const Matrix fd = oracle::numericJacobian(
          [&](const Vector& x) { return obstacleCostVector(*m, *sdf, x, 0.2).residual; }, q);
      // Spheres sitting near the hinge kink are excluded from the comparison.
      Vector d(c.residual.size());
      bool near_kink = false;
      for (Eigen::Index s = 0; s < c.residual.size(); ++s) near_kink |= c.residual[s] > 0 && c.residual[s] < 1e-4;
      if (near_kink) continue;
      EXPECT_LE(oracle::relativeError(c.jacobian, fd), 1e-3);
      ++checked;
    }
    EXPECT_EQ(checked, 100);
  }
}

TEST(ObstacleCost, RowsFollowLinkThenOffset) {
  Workspace ws;
  ws.bounds = {Point2(-2, -2), Point2(2, 2)};
  ws.obstacles.emplace_back(Circle{Point2(0.0, 0.0), 0.05});
  const auto sdf = sdfOf(ws);
  const RobotModel arm = RobotModel::planarArm({1.0, 1.0}, {{1, 0.5, 0.01}, {0, 0.2, 0.01}, {0, 0.1, 0.01}});
  // Stretched along +x: sphere distances to the origin circle grow with (link, offset).
  const ObstacleCost c = obstacleCostVector(arm, *sdf, vec({0.0, 0.0}), 2.0);
  EXPECT_GT(c.residual[0], c.residual[1]);
  EXPECT_GT(c.residual[1], c.residual[2]);
}

TEST(InterpObstacle, ClearSegmentIsZero) {
  const auto sdf = sdfOf(clutter());
  const BinaryResidual r = interpObstacleCost(makeState(vec({1.7, 0.2}), vec({0, 1})), makeState(vec({1.8, 0.4}), vec({0, 1})),
                                             0.1, 0.05, RobotModel::point(0.05), *sdf, 0.2);
  EXPECT_EQ(r.residual.norm(), 0.0);
  EXPECT_EQ(r.jac_first.norm(), 0.0);
}

TEST(InterpObstacle, ThinWallCaughtOnlyBetweenSupportStates) {
  Workspace ws;
  ws.bounds = {Point2(0, 0), Point2(2, 1)};
  ws.obstacles.emplace_back(Box{Point2(0.99, 0.0), Point2(1.01, 1.0)});
  const auto sdf = sdfOf(ws);
  const RobotModel robot = RobotModel::point(0.05);
  const State a = makeState(vec({0.5, 0.5}), vec({10, 0})), b = makeState(vec({1.5, 0.5}), vec({10, 0}));
  EXPECT_EQ(obstacleCostVector(robot, *sdf, positionOf(a), 0.2).residual.norm(), 0.0);
  EXPECT_EQ(obstacleCostVector(robot, *sdf, positionOf(b), 0.2).residual.norm(), 0.0);
  EXPECT_GT(interpObstacleCost(a, b, 0.1, 0.05, robot, *sdf, 0.2).residual[0], 0.0);
}

TEST(InterpObstacle, JacobiansMatchFiniteDifferences) {
  const auto sdf = sdfOf(clutter());
  const RobotModel robot = RobotModel::point(0.05);
  std::mt19937_64 rng(53);
  int checked = 0;
  for (int k = 0; k < 5000 && checked < 100; ++k) {
    const State a = makeState(oracle::randomVector(rng, 2, 0.5, 1.5), oracle::randomVector(rng, 2));
    const State b = makeState(oracle::randomVector(rng, 2, 0.5, 1.5), oracle::randomVector(rng, 2));
    const double dt = 0.1, tau = 0.02 + 0.06 * (k % 4) / 3.0;
    const BinaryResidual r = interpObstacleCost(a, b, dt, tau, robot, *sdf, 0.2);
    const Vector mid = positionOf(interpolateState(a, b, dt, tau).state);
    if (r.residual[0] <= 1e-3 || !awayFromCellEdges(robot, *sdf, mid, 1e-5)) continue;
    const Matrix fa = oracle::numericJacobian(
        [&](const Vector& x) { return interpObstacleCost(x, b, dt, tau, robot, *sdf, 0.2).residual; }, a);
    const Matrix fb = oracle::numericJacobian(
        [&](const Vector& x) { return interpObstacleCost(a, x, dt, tau, robot, *sdf, 0.2).residual; }, b);
    EXPECT_LE(oracle::relativeError(r.jac_first, fa), 1e-3);
    EXPECT_LE(oracle::relativeError(r.jac_second, fb), 1e-3);
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(InterpObstacle, TauMustBeInterior) {
  const auto sdf = sdfOf(clutter());
  const State a = makeState(vec({0.5, 0.5}), vec({0, 0}));
  EXPECT_THROW(interpObstacleCost(a, a, 0.1, 0.0, RobotModel::point(0.05), *sdf, 0.2), std::invalid_argument);
  EXPECT_THROW(interpObstacleCost(a, a, 0.1, 0.1, RobotModel::point(0.05), *sdf, 0.2), std::invalid_argument);
}

TEST(Assemble, FactorCensus) {
  const auto sdf = sdfOf(clutter());
  const Vector p0 = vec({0.1, 0.1}), p1 = vec({1.9, 0.3});
  {
    const Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, 4, 1.0);
    const FactorGraph g = assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, 0, 0.2, 0.001);
    EXPECT_EQ(g.factors.size(), 14u);
    EXPECT_EQ(g.count(FactorKind::kAnchor), 2u);
    EXPECT_EQ(g.count(FactorKind::kPrior), 3u);
    EXPECT_EQ(g.count(FactorKind::kGp), 4u);
    EXPECT_EQ(g.count(FactorKind::kObstacle), 5u);
    EXPECT_EQ(g.count(FactorKind::kInterpolatedObstacle), 0u);
  }
  {
    const Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, 10, 1.0);
    const FactorGraph g = assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, 4, 0.2, 0.001);
    EXPECT_EQ(g.count(FactorKind::kInterpolatedObstacle), 40u);
  }
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::size_t n_ip = 0; n_ip <= 5; ++n_ip) {
      const Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, n, 1.0);
      const FactorGraph g = assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, n_ip, 0.2, 0.001);
      EXPECT_EQ(g.factors.size(), census(n, n_ip)) << "n=" << n << " n_ip=" << n_ip;
    }
  }
}

TEST(Assemble, InterpolationTimesAreUniform) {
  const auto sdf = sdfOf(clutter());
  const Vector p0 = vec({0.1, 0.1}), p1 = vec({1.9, 0.3});
  const Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, 5, 1.0);
  const FactorGraph g = assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, 4, 0.2, 0.001);
  std::vector<double> taus;
  for (const auto& f : g.factors) {
    if (f.kind() == FactorKind::kInterpolatedObstacle && f.first() == 2) taus.push_back(f.tau());
  }
  ASSERT_EQ(taus.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(taus[j], 0.2 * (j + 1) / 5.0, 1e-15);
}

TEST(Assemble, ObstacleInformationIsInverseVariance) {
  const auto sdf = sdfOf(clutter());
  const Vector p0 = vec({0.1, 0.1}), p1 = vec({1.9, 0.3});
  const Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, 3, 1.0);
  const FactorGraph g = assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, 1, 0.2, 0.001);
  for (const auto& f : g.factors) {
    if (f.kind() == FactorKind::kObstacle) EXPECT_NEAR(f.information()(0, 0), 1e6, 1e-6);
  }
}

TEST(Assemble, InterpolatedResidualZeroOnClearSegments) {
  Workspace ws;
  ws.bounds = {Point2(0, 0), Point2(2, 2)};
  ws.obstacles.emplace_back(Circle{Point2(1.0, 1.8), 0.1});
  const auto sdf = sdfOf(ws);
  const Vector p0 = vec({0.1, 0.1}), p1 = vec({1.9, 0.3});
  const Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, 10, 1.0);
  const FactorGraph g = assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, 4, 0.2, 0.001);
  for (const auto& f : g.factors) {
    if (f.kind() == FactorKind::kInterpolatedObstacle) EXPECT_EQ(f.residual(t.states[f.first()], t.states[f.second()]).norm(), 0.0);
  }
}

TEST(Assemble, ValidationErrors) {
  FactorGraph g;
  g.num_states = 3;
  g.state_dim = 2;
  g.factors.push_back(Factor::anchor(0, vec({0, 0}), Matrix::Identity(2, 2)));
  g.factors.push_back(Factor::gp(0, 1, 0.1, Matrix::Identity(1, 1)));
  g.factors.push_back(Factor::gp(1, 2, 0.1, Matrix::Identity(1, 1)));
  EXPECT_THROW(g.validate(), StructureError);  // no goal anchor
  g.factors.push_back(Factor::anchor(2, vec({0, 0}), Matrix::Identity(2, 2)));
  EXPECT_NO_THROW(g.validate());
  g.factors.erase(g.factors.begin() + 2);
  EXPECT_THROW(g.validate(), StructureError);  // disconnected
  EXPECT_THROW(Factor::anchor(0, vec({0, 0}), -Matrix::Identity(2, 2)), std::invalid_argument);
}

TEST(Compound, Fig2ChainShape) {
  const auto sdf = sdfOf(clutter());
  const Vector p0 = vec({0.1, 0.1}), p1 = vec({1.9, 0.3});
  const Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, 4, 1.0);
  const CompoundGraph c = compoundTransform(assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, 0, 0.2, 0.001));
  EXPECT_EQ(c.numStates(), 5u);
  EXPECT_EQ(c.numEdges(), 4u);
  EXPECT_EQ(c.selfPotential(0).size(), 2u);  // anchor + obstacle
  EXPECT_EQ(c.selfPotential(2).size(), 2u);  // prior + obstacle
  EXPECT_EQ(c.edgePotential(1).size(), 1u);  // gp
}

TEST(Compound, ObjectiveIdentityOnRandomTrajectories) {
  const auto sdf = sdfOf(clutter());
  std::mt19937_64 rng(59);
  for (int k = 0; k < 100; ++k) {
    const Vector p0 = oracle::randomVector(rng, 2, 0.05, 0.6), p1 = oracle::randomVector(rng, 2, 1.4, 1.95);
    const std::size_t n = 3 + static_cast<std::size_t>(k % 9);
    Trajectory t = priorMeanTrajectory(priorFor(p0, p1).start_mean, priorFor(p0, p1).goal_mean, n, 1.0);
    for (auto& x : t.states) x += 0.2 * oracle::randomVector(rng, 4);
    const FactorGraph g = assembleGraph(priorFor(p0, p1), t, RobotModel::point(0.05), sdf, k % 5, 0.2, 0.001);
    double raw = 0.0;
    for (const auto& f : g.factors) raw += f.cost(t);
    const CompoundGraph c = compoundTransform(g);
    double phi = 0.0, psi = 0.0;
    for (std::size_t i = 0; i < c.numStates(); ++i) phi += c.selfValue(i, t.states[i]);
    for (std::size_t i = 0; i < c.numEdges(); ++i) psi += c.edgeValue(i, t.states[i], t.states[i + 1]);
    EXPECT_LE(std::abs(phi + psi - raw), 1e-12 * std::max(1.0, std::abs(raw)));
  }
}

TEST(Compound, UnaryOnlyGraphHasEmptyEdges) {
  FactorGraph g;
  g.num_states = 3;
  g.state_dim = 2;
  for (std::size_t i = 0; i < 3; ++i) g.factors.push_back(Factor::anchor(i, vec({0, 0}), Matrix::Identity(2, 2)));
  const CompoundGraph c = compoundTransform(g);
  for (std::size_t e = 0; e < c.numEdges(); ++e) EXPECT_TRUE(c.edgePotential(e).empty());
}

TEST(Compound, NonAdjacentBinaryFactorIsStructureError) {
  FactorGraph g;
  g.num_states = 4;
  g.state_dim = 2;
  g.factors.push_back(Factor::gp(0, 2, 0.1, Matrix::Identity(1, 1)));
  EXPECT_THROW(compoundTransform(g), StructureError);
}
