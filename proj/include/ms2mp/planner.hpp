#pragma once

// Planners over the GP factor graph:
//   ms2mp          compound-chain min-sum with local Gauss-Newton beliefs
//   ms2mp_no_comp  same schedule, one message per raw factor, relinearized per step
//   batch          damped Gauss-Newton over the whole trajectory
//   batch_no_intp  batch without interpolated obstacle factors

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ms2mp/block_tridiagonal.hpp"
#include "ms2mp/environment.hpp"
#include "ms2mp/errors.hpp"
#include "ms2mp/factors.hpp"
#include "ms2mp/gauss_newton.hpp"
#include "ms2mp/gp_prior.hpp"
#include "ms2mp/messages.hpp"
#include "ms2mp/quadratic.hpp"
#include "ms2mp/scenario.hpp"

namespace ms2mp {

enum class PlannerKind { kMs2mp, kMs2mpNoComp, kBatch, kBatchNoIntp };

inline const char* toString(PlannerKind k) {
  switch (k) {
    case PlannerKind::kMs2mp: return "ms2mp";
    case PlannerKind::kMs2mpNoComp: return "ms2mp_no_comp";
    case PlannerKind::kBatch: return "batch";
    case PlannerKind::kBatchNoIntp: return "batch_no_intp";
  }
  return "?";
}

inline std::optional<PlannerKind> plannerFromString(const std::string& s) {
  for (auto k : {PlannerKind::kMs2mp, PlannerKind::kMs2mpNoComp, PlannerKind::kBatch, PlannerKind::kBatchNoIntp}) {
    if (s == toString(k)) return k;
  }
  return std::nullopt;
}

/// Outer-loop stopping rule: converge on state change, or run exactly one
/// iteration per support state.
enum class IterationMode { kConvergence, kFixedSupportCount };

struct SolverConfig {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // max abs state change per outer iteration
  int gn_max_inner = 20;
  double damping_init = 1e-4;
  double eps = 0.2;
  double sigma_obs = 0.001;
  std::size_t n_ip = 4;
  std::size_t support_states = 11;
  double total_time = 1.0;
  IterationMode mode = IterationMode::kConvergence;
  // ms2mp_no_comp: weight kept from the previous message of an interpolated
  // obstacle factor (0 = undamped). Linear factors are never damped.
  double message_damping = 0.3;
  // Hold x_0 and x_N at the anchor means instead of relying on the soft
  // anchor factors alone, which obstacle terms near the endpoints can outweigh.
  bool fixed_endpoints = true;
  // Reject outer iterations that raise the objective and retry with a larger
  // proximal weight (same schedule as the batch damping). Off = plain sweeps.
  bool step_control = true;
  double damping_max = 1e12;

  static SolverConfig fromScenario(const Scenario& s) {
    SolverConfig c;
    c.eps = s.planner.eps;
    c.sigma_obs = s.planner.sigma_obs;
    c.n_ip = s.planner.n_ip;
    c.support_states = s.planner.support_states;
    c.total_time = s.planner.total_time;
    return c;
  }

  void validate() const {
    if (max_iterations < 1 || !(tolerance > 0.0) || gn_max_inner < 1 || !(damping_init > 0.0) || !(eps > 0.0) ||
        !(sigma_obs > 0.0) || support_states < 2 || !(total_time > 0.0) || message_damping < 0.0 ||
        message_damping >= 1.0) {
      throw std::invalid_argument("SolverConfig: parameters must be positive (support_states >= 2)");
    }
  }

  GaussNewtonOptions localOptions() const {
    GaussNewtonOptions o;
    o.max_inner = gn_max_inner;
    o.damping_init = damping_init;
    return o;
  }
};

struct PlanResult {
  std::string planner;
  Trajectory trajectory;
  bool converged = false;
  std::size_t iterations = 0;  // outer iterations that moved the state by more than the tolerance
  double wall_time = 0.0;      // seconds
  bool collision_free = false;  // every dense-check clearance > 0
  bool in_bounds = false;       // every dense-check sphere center inside the workspace bounds
  double min_clearance = 0.0;
  std::vector<double> objective_history;  // initial objective, then one entry per outer iteration
  OptimalityReport diagnostics;            // ms2mp only
  std::string error;                       // set when the solve threw

  bool success() const { return converged && collision_free; }
};

/// Scenario plus its precomputed signed distance field.
struct PlanningProblem {
  Scenario scenario;
  std::shared_ptr<const SignedDistanceField> sdf;

  static PlanningProblem build(Scenario s) {
    s.validate();
    auto sdf = std::make_shared<const SignedDistanceField>(buildSdf(s.workspace, s.planner.cell_size));
    return {std::move(s), std::move(sdf)};
  }
};

/// Collision-check resolution per interval: ten times the interpolation density.
inline std::size_t denseCheckSubdivisions(std::size_t n_ip) { return 10 * std::max<std::size_t>(n_ip, 1) + 1; }

struct ClearanceReport {
  double min_clearance = kFarDistance;
  bool in_bounds = true;
};

/// Exact-primitive clearance along the GP-interpolated trajectory.
inline ClearanceReport denseClearance(const Workspace& ws, const RobotModel& robot, const Trajectory& traj,
                                      std::size_t subdivisions) {
  ClearanceReport rep;
  const Trajectory dense = upsampleTrajectory(traj, subdivisions);
  for (const State& x : dense.states) {
    const Vector q = positionOf(x);
    rep.min_clearance = std::min(rep.min_clearance, configurationClearance(ws, robot, q));
    rep.in_bounds = rep.in_bounds && configurationInBounds(ws, robot, q);
  }
  return rep;
}

namespace detail {

inline GPPriorModel priorFor(const Scenario& s) {
  const auto d = s.configDim();
  return GPPriorModel::make(s.planner.qc * Matrix::Identity(d, d), s.startState(), s.goalState(),
                            s.planner.anchor_sigma2, s.planner.mid_scale);
}

inline std::shared_ptr<const ObstacleContext> obstacleContext(const PlanningProblem& p, const SolverConfig& c) {
  return std::make_shared<const ObstacleContext>(ObstacleContext{p.scenario.robot, p.sdf, c.eps, c.sigma_obs});
}

/// Straight-line initialization. When a state in the hinge zone sees an SDF
/// gradient with no component off the line, interior positions are nudged by
/// 1e-9 along a fixed direction perpendicular to the line.
inline Trajectory initialTrajectory(const PlanningProblem& p, const SolverConfig& c, std::size_t n_ip) {
  const Scenario& s = p.scenario;
  Trajectory traj = priorMeanTrajectory(s.startState(), s.goalState(), c.support_states - 1, c.total_time);
  // The straight line carries the line velocity; endpoints start at the anchor means.
  traj.states.front() = s.startState();
  traj.states.back() = s.goalState();
  const Vector line = s.goal - s.start;
  if (line.norm() == 0.0) return traj;
  const Vector u = line.normalized();

  auto degenerate = [&](const Vector& q) {
    const ObstacleCost cost = obstacleCostVector(s.robot, *p.sdf, q, c.eps);
    for (Eigen::Index r = 0; r < cost.residual.size(); ++r) {
      if (cost.residual[r] <= 0.0) continue;
      const Vector row = cost.jacobian.row(r).transpose();
      if ((row - row.dot(u) * u).norm() <= 1e-12) return true;
    }
    return false;
  };
  bool singular = false;
  const Trajectory probe = upsampleTrajectory(traj, n_ip + 1);
  for (std::size_t k = 1; k + 1 < probe.size() && !singular; ++k) singular = degenerate(positionOf(probe.states[k]));
  if (!singular) return traj;

  Eigen::Index best = 0;
  double best_perp = -1.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double perp = std::sqrt(std::max(0.0, 1.0 - u[k] * u[k]));
    if (perp > best_perp + 1e-15) {
      best_perp = perp;
      best = k;
    }
  }
  Vector dir = Vector::Unit(u.size(), best) - u[best] * u;
  if (dir.norm() == 0.0) return traj;  // one-dimensional configuration space
  dir.normalize();
  const auto d = s.configDim();
  for (std::size_t i = 1; i + 1 < traj.size(); ++i) traj.states[i].head(d) += 1e-9 * dir;
  return traj;
}

inline double maxAbsChange(const Trajectory& a, const Trajectory& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a.states[i] - b.states[i]).cwiseAbs().maxCoeff());
  return m;
}

inline void finish(PlanResult& r, const PlanningProblem& p, const SolverConfig& c,
                   std::chrono::steady_clock::time_point t0) {
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ClearanceReport cl =
      denseClearance(p.scenario.workspace, p.scenario.robot, r.trajectory, denseCheckSubdivisions(c.n_ip));
  r.min_clearance = cl.min_clearance;
  r.in_bounds = cl.in_bounds;
  r.collision_free = cl.min_clearance > 0.0;
}

/// Damping schedule shared by every planner: 0 -> damping_init -> x10 on
/// rejection; /10 on acceptance, snapping to 0 below damping_init.
inline double raiseDamping(const SolverConfig& c, double lambda) { return lambda == 0.0 ? c.damping_init : lambda * 10.0; }
inline double lowerDamping(const SolverConfig& c, double lambda) {
  return lambda / 10.0 < c.damping_init ? 0.0 : lambda / 10.0;
}

inline bool keepIterating(const SolverConfig& c, std::size_t done, bool converged) {
  if (c.mode == IterationMode::kFixedSupportCount) return done < c.support_states;
  return !converged && done < c.max_iterations;
}

}  // namespace detail

/// Everything an ms2mp run leaves behind, for diagnostics and tests.
struct Ms2mpState {
  std::shared_ptr<const CompoundGraph> graph;
  MessageSet messages;
  std::vector<Belief> beliefs;
};

inline PlanResult ms2mpPlan(const PlanningProblem& p, const SolverConfig& c, Ms2mpState* state_out = nullptr) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult r;
  r.planner = toString(PlannerKind::kMs2mp);
  const Scenario& s = p.scenario;
  r.trajectory = detail::initialTrajectory(p, c, c.n_ip);
  auto graph = std::make_shared<const CompoundGraph>(compoundTransform(assembleGraph(
      detail::priorFor(s), r.trajectory, detail::obstacleContext(p, c), {c.n_ip, s.planner.mid_prior})));
  const GaussNewtonOptions local = c.localOptions();
  r.objective_history.push_back(graph->objective(r.trajectory));

  MessageSet msgs;
  std::vector<Belief> beliefs;
  const std::size_t last = graph->numStates() - 1;
  double f = r.objective_history.back();
  double lambda = 0.0;
  std::size_t done = 0;
  while (detail::keepIterating(c, done, r.converged)) {
    bool accepted = false;
    Trajectory next;
    double f_next = f;
    while (true) {
      msgs = sweepMessages(*graph, r.trajectory, c.fixed_endpoints, lambda);
      beliefs.clear();
      next = r.trajectory;
      for (std::size_t i = 0; i <= last; ++i) {
        const QuadraticMessage prox = proximalQuadratic(r.trajectory.states[i], lambda);
        std::vector<const QuadraticMessage*> in{&msgs.forward[i], &msgs.backward[i]};
        if (c.fixed_endpoints && (i == 0 || i == last)) {
          beliefs.push_back(fixedBelief(*graph, i, in, r.trajectory.states[i]));
        } else {
          if (lambda > 0.0) in.push_back(&prox);
          beliefs.push_back(beliefUpdate(*graph, i, in, r.trajectory.states[i], local));
        }
        next.states[i] = beliefs.back().state;
      }
      f_next = graph->objective(next);
      if (!c.step_control || f_next <= f) {
        accepted = true;
        lambda = detail::lowerDamping(c, lambda);
        break;
      }
      lambda = detail::raiseDamping(c, lambda);
      if (lambda > c.damping_max) break;
    }
    ++done;
    if (!accepted) {
      r.converged = true;  // no damping level yields descent: stationary
      r.objective_history.push_back(f);
      break;
    }
    const double change = detail::maxAbsChange(next, r.trajectory);
    r.trajectory = std::move(next);
    f = f_next;
    r.objective_history.push_back(f);
    r.converged = change <= c.tolerance;
    if (!r.converged) ++r.iterations;
  }
  r.diagnostics = localOptimalityCheck(*graph, msgs, beliefs, r.trajectory, local, c.fixed_endpoints);
  detail::finish(r, p, c, t0);
  if (state_out) *state_out = {graph, std::move(msgs), std::move(beliefs)};
  return r;
}

/// Loopy variant: every binary factor is its own node with its own pair of
/// messages; the receiving state is re-solved right after each edge so later
/// messages linearize at the freshest estimate. Parallel obstacle factors on
/// one interval form short cycles, so their messages are damped.
inline PlanResult ms2mpNoCompPlan(const PlanningProblem& p, const SolverConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult r;
  r.planner = toString(PlannerKind::kMs2mpNoComp);
  const Scenario& s = p.scenario;
  r.trajectory = detail::initialTrajectory(p, c, c.n_ip);
  const CompoundGraph g = compoundTransform(assembleGraph(detail::priorFor(s), r.trajectory,
                                                          detail::obstacleContext(p, c), {c.n_ip, s.planner.mid_prior}));
  const GaussNewtonOptions local = c.localOptions();
  const std::size_t n = g.numStates();
  const auto dim = r.trajectory.stateDim();
  r.objective_history.push_back(g.objective(r.trajectory));

  // to_second[e][k]: message from the k-th factor of edge e into x_{e+1}; to_first into x_e.
  std::vector<std::vector<QuadraticMessage>> to_second(g.numEdges()), to_first(g.numEdges());
  for (std::size_t e = 0; e < g.numEdges(); ++e) {
    to_second[e].assign(g.edgePotential(e).size(), QuadraticMessage::zero(dim));
    to_first[e].assign(g.edgePotential(e).size(), QuadraticMessage::zero(dim));
  }
  auto incoming = [&](std::size_t i) {
    std::vector<const QuadraticMessage*> in;
    if (i > 0) for (const auto& m : to_second[i - 1]) in.push_back(&m);
    if (i + 1 < n) for (const auto& m : to_first[i]) in.push_back(&m);
    return in;
  };
  double lambda = 0.0;
  Trajectory anchor_point = r.trajectory;  // proximal centers: the iterate at the start of the iteration
  auto isFixed = [&](std::size_t i) { return c.fixed_endpoints && (i == 0 || i + 1 == n); };
  auto selfWithProx = [&](std::size_t i, const State& x) {
    QuadraticMessage q = selfQuadratic(g, i, x);
    if (lambda > 0.0 && !isFixed(i)) q += proximalQuadratic(anchor_point.states[i], lambda);
    return q;
  };
  auto solveNode = [&](std::size_t i, const State& x) {
    if (isFixed(i)) return x;
    auto in = incoming(i);
    const QuadraticMessage prox = proximalQuadratic(anchor_point.states[i], lambda);
    if (lambda > 0.0) in.push_back(&prox);
    return beliefUpdate(g, i, in, x, local).state;
  };
  auto message = [&](const QuadraticMessage& joint, MessageTarget target, const QuadraticMessage& var,
                     std::size_t far, std::size_t to) {
    if (isFixed(far)) {
      return factorToVariableMessageFixed(joint, target, var, r.trajectory.states[far]);
    }
    return factorToVariableMessage(joint, target, var, to);
  };
  auto factorJoint = [&](const Factor& f, const Trajectory& t) {
    return jointQuadratic(f.linearize(t.states[f.first()], t.states[f.second()]), f.information(),
                          t.states[f.first()], t.states[f.second()]);
  };
  auto update = [&](QuadraticMessage& stored, QuadraticMessage fresh, const Factor& f) {
    const double keep = f.kind() == FactorKind::kInterpolatedObstacle ? c.message_damping : 0.0;
    if (keep > 0.0) {
      fresh.information = keep * stored.information + (1.0 - keep) * fresh.information;
      fresh.vector = keep * stored.vector + (1.0 - keep) * fresh.vector;
      fresh.constant = keep * stored.constant + (1.0 - keep) * fresh.constant;
    }
    stored = std::move(fresh);
  };

  auto iterate = [&] {
    Trajectory& cur = r.trajectory;
    for (std::size_t e = 0; e + 1 < n; ++e) {
      const auto& factors = g.edgePotential(e);
      for (std::size_t k = 0; k < factors.size(); ++k) {
        QuadraticMessage var = selfWithProx(e, cur.states[e]);
        if (e > 0) for (const auto& m : to_second[e - 1]) var += m;
        for (std::size_t j = 0; j < factors.size(); ++j) if (j != k) var += to_first[e][j];
        const Factor& f = g.factor(factors[k]);
        update(to_second[e][k], message(factorJoint(f, cur), MessageTarget::kSecond, var, e, e + 1), f);
      }
      cur.states[e + 1] = solveNode(e + 1, cur.states[e + 1]);
    }
    for (std::size_t e = n - 1; e-- > 0;) {
      const auto& factors = g.edgePotential(e);
      for (std::size_t k = 0; k < factors.size(); ++k) {
        QuadraticMessage var = selfWithProx(e + 1, cur.states[e + 1]);
        if (e + 1 < n - 1) for (const auto& m : to_first[e + 1]) var += m;
        for (std::size_t j = 0; j < factors.size(); ++j) if (j != k) var += to_second[e][j];
        const Factor& f = g.factor(factors[k]);
        update(to_first[e][k], message(factorJoint(f, cur), MessageTarget::kFirst, var, e + 1, e), f);
      }
      cur.states[e] = solveNode(e, cur.states[e]);
    }
    for (std::size_t i = 0; i < n; ++i) cur.states[i] = solveNode(i, cur.states[i]);
  };

  double f = r.objective_history.back();
  std::size_t done = 0;
  while (detail::keepIterating(c, done, r.converged)) {
    const Trajectory before = r.trajectory;
    const auto saved_second = to_second;
    const auto saved_first = to_first;
    anchor_point = before;
    bool accepted = false;
    double f_next = f;
    while (true) {
      iterate();
      f_next = g.objective(r.trajectory);
      if (!c.step_control || f_next <= f) {
        accepted = true;
        lambda = detail::lowerDamping(c, lambda);
        break;
      }
      r.trajectory = before;
      to_second = saved_second;
      to_first = saved_first;
      lambda = detail::raiseDamping(c, lambda);
      if (lambda > c.damping_max) break;
    }
    ++done;
    if (!accepted) {
      r.converged = true;
      r.objective_history.push_back(f);
      break;
    }
    const double change = detail::maxAbsChange(r.trajectory, before);
    f = f_next;
    r.objective_history.push_back(f);
    r.converged = change <= c.tolerance;
    if (!r.converged) ++r.iterations;
  }
  detail::finish(r, p, c, t0);
  return r;
}

namespace detail {

inline PlanResult batchSolve(const PlanningProblem& p, const SolverConfig& c, std::size_t graph_n_ip, PlannerKind kind) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult r;
  r.planner = toString(kind);
  const Scenario& s = p.scenario;
  r.trajectory = initialTrajectory(p, c, graph_n_ip);
  const FactorGraph g = assembleGraph(priorFor(s), r.trajectory, obstacleContext(p, c), {graph_n_ip, s.planner.mid_prior});
  const std::size_t n = g.num_states;
  const auto dim = g.state_dim;
  double f = g.objective(r.trajectory);
  r.objective_history.push_back(f);
  double lambda = 0.0;

  std::size_t done = 0;
  while (keepIterating(c, done, r.converged)) {
    BlockTridiagonal h = BlockTridiagonal::zero(n, dim);
    std::vector<Vector> grad(n, Vector::Zero(dim));
    for (const Factor& fac : g.factors) {
      const std::size_t i = fac.first();
      const Matrix& w = fac.information();
      if (!fac.isBinary()) {
        const Linearization lin = fac.linearize(r.trajectory.states[i]);
        const Matrix jw = lin.jac_first.transpose() * w;
        h.diag[i] += jw * lin.jac_first;
        grad[i] += jw * lin.residual;
        continue;
      }
      const Linearization lin = fac.linearize(r.trajectory.states[i], r.trajectory.states[i + 1]);
      const Matrix jw1 = lin.jac_first.transpose() * w;
      const Matrix jw2 = lin.jac_second.transpose() * w;
      h.diag[i] += jw1 * lin.jac_first;
      h.diag[i + 1] += jw2 * lin.jac_second;
      h.upper[i] += jw1 * lin.jac_second;
      grad[i] += jw1 * lin.residual;
      grad[i + 1] += jw2 * lin.residual;
    }

    if (c.fixed_endpoints) {
      for (std::size_t i : {std::size_t{0}, n - 1}) {
        h.diag[i] = Matrix::Identity(dim, dim);
        grad[i].setZero();
      }
      h.upper[0].setZero();
      h.upper[n - 2].setZero();
    }

    bool accepted = false;
    Trajectory candidate = r.trajectory;
    double change = 0.0;
    while (true) {
      BlockTridiagonal damped = h;
      damped.addDiagonal(lambda);
      bool solved = true;
      std::vector<Vector> step;
      try {
        step = damped.solve(grad);
      } catch (const NumericalError&) {
        if (lambda >= c.damping_max) throw;
        solved = false;
      }
      if (solved) {
        change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          candidate.states[i] = r.trajectory.states[i] - step[i];
          change = std::max(change, step[i].cwiseAbs().maxCoeff());
        }
        const double f_new = g.objective(candidate);
        if (f_new <= f) {
          f = f_new;
          accepted = true;
          lambda = lowerDamping(c, lambda);
          break;
        }
      }
      lambda = raiseDamping(c, lambda);
      if (lambda > c.damping_max) break;
    }
    ++done;
    if (!accepted) {
      r.converged = true;  // no descent direction left at any damping level
      r.objective_history.push_back(f);
      break;
    }
    r.trajectory = std::move(candidate);
    r.objective_history.push_back(f);
    r.converged = change <= c.tolerance;
    if (!r.converged) ++r.iterations;
  }
  finish(r, p, c, t0);
  return r;
}

}  // namespace detail

inline PlanResult batchPlan(const PlanningProblem& p, const SolverConfig& c) {
  return detail::batchSolve(p, c, c.n_ip, PlannerKind::kBatch);
}

/// Batch without interpolated factors; the dense collision check still uses c.n_ip.
inline PlanResult batchNoIntpPlan(const PlanningProblem& p, const SolverConfig& c) {
  return detail::batchSolve(p, c, 0, PlannerKind::kBatchNoIntp);
}

inline PlanResult plan(PlannerKind kind, const PlanningProblem& p, const SolverConfig& c) {
  switch (kind) {
    case PlannerKind::kMs2mp: return ms2mpPlan(p, c);
    case PlannerKind::kMs2mpNoComp: return ms2mpNoCompPlan(p, c);
    case PlannerKind::kBatch: return batchPlan(p, c);
    case PlannerKind::kBatchNoIntp: return batchNoIntpPlan(p, c);
  }
  throw std::invalid_argument("plan: unknown planner");
}

}  // namespace ms2mp
