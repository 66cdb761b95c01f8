#pragma once

// Min-sum messages on the compound chain, carried as Gauss-Newton quadratics.
//
// Forward messages flow from psi_{i-1} into x_i, backward messages from psi_i
// into x_i. A variable-to-factor message is the linearized self-potential
// plus every incoming message except the one from the receiving factor.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "ms2mp/errors.hpp"
#include "ms2mp/factors.hpp"
#include "ms2mp/gauss_newton.hpp"
#include "ms2mp/quadratic.hpp"

namespace ms2mp {

/// Linearized self-potential phi_i at x.
inline QuadraticMessage selfQuadratic(const CompoundGraph& g, std::size_t i, const State& x) {
  QuadraticMessage q = QuadraticMessage::zero(x.size());
  for (auto k : g.selfPotential(i)) {
    const Factor& f = g.factor(k);
    q += unaryQuadratic(f.linearize(x), f.information(), x);
  }
  return q;
}

/// Linearized edge-potential psi_e over [x_e; x_{e+1}].
inline QuadraticMessage edgeQuadratic(const CompoundGraph& g, std::size_t e, const State& x_first,
                                      const State& x_second) {
  QuadraticMessage q = QuadraticMessage::zero(2 * x_first.size());
  for (auto k : g.edgePotential(e)) {
    const Factor& f = g.factor(k);
    q += jointQuadratic(f.linearize(x_first, x_second), f.information(), x_first, x_second);
  }
  return q;
}

/// Which end of edge e receives the message.
enum class MessageTarget { kFirst, kSecond };

/// min over the far variable of [psi_e + incoming(far variable)], for the
/// edge linearized as `edge_quadratic`.
inline QuadraticMessage factorToVariableMessage(const QuadraticMessage& edge_quadratic, MessageTarget target,
                                                const QuadraticMessage& incoming, std::size_t node) {
  QuadraticMessage joint = edge_quadratic;
  const Keep far = target == MessageTarget::kFirst ? Keep::kSecond : Keep::kFirst;
  addToJoint(joint, incoming, far);
  return marginalize(joint, target == MessageTarget::kFirst ? Keep::kFirst : Keep::kSecond, node);
}

/// Message when the far variable is held fixed (an anchored endpoint): psi_e
/// plus the far variable's outgoing message, restricted to x_far = fixed.
inline QuadraticMessage factorToVariableMessageFixed(const QuadraticMessage& edge_quadratic, MessageTarget target,
                                                     const QuadraticMessage& incoming, const State& fixed) {
  QuadraticMessage joint = edge_quadratic;
  const Keep far = target == MessageTarget::kFirst ? Keep::kSecond : Keep::kFirst;
  addToJoint(joint, incoming, far);
  return condition(joint, target == MessageTarget::kFirst ? Keep::kFirst : Keep::kSecond, fixed);
}

/// Same, linearizing psi_e at (x_first, x_second) first.
inline QuadraticMessage factorToVariableMessage(const CompoundGraph& g, std::size_t e, MessageTarget target,
                                                const QuadraticMessage& incoming, const State& x_first,
                                                const State& x_second) {
  const std::size_t node = target == MessageTarget::kFirst ? e : e + 1;
  return factorToVariableMessage(edgeQuadratic(g, e, x_first, x_second), target, incoming, node);
}

/// phi_i linearized at x_i plus the given messages (caller excludes the target edge).
inline QuadraticMessage variableToFactorMessage(const CompoundGraph& g, std::size_t i,
                                                const std::vector<const QuadraticMessage*>& msgs,
                                                const State& x_i) {
  QuadraticMessage out = selfQuadratic(g, i, x_i);
  for (const auto* m : msgs) out += *m;
  return out;
}

struct Belief {
  QuadraticMessage aggregate;  // phi_i linearized at `state` plus all incoming messages
  State state;                 // argmin
  double value = 0.0;          // phi_i(state) + sum of messages at state
};

/// Unary terms of node i as local least-squares terms.
inline std::vector<LocalTerm> selfTerms(const CompoundGraph& g, std::size_t i, const State& x) {
  std::vector<LocalTerm> out;
  out.reserve(g.selfPotential(i).size());
  for (auto k : g.selfPotential(i)) {
    const Factor& f = g.factor(k);
    Linearization lin = f.linearize(x);
    out.push_back({std::move(lin.residual), std::move(lin.jac_first), &f.information()});
  }
  return out;
}

/// argmin of phi_i + sum(msgs) by local Gauss-Newton, starting at x_i.
inline Belief beliefUpdate(const CompoundGraph& g, std::size_t i, const std::vector<const QuadraticMessage*>& msgs,
                           const State& x_i, const GaussNewtonOptions& opts = {}) {
  QuadraticMessage incoming = QuadraticMessage::zero(x_i.size());
  for (const auto* m : msgs) incoming += *m;
  const QuadraticMessage aggregate_at_start = selfQuadratic(g, i, x_i) + incoming;
  Eigen::LLT<Matrix> check(aggregate_at_start.information);
  if (check.info() != Eigen::Success) {
    throw NumericalError("beliefUpdate: aggregate information is not positive definite", i);
  }
  auto terms = [&](const Vector& x) { return selfTerms(g, i, x); };
  GaussNewtonResult r = gaussNewtonLocal(terms, incoming, x_i, opts, i);
  Belief b;
  b.state = std::move(r.x);
  b.aggregate = selfQuadratic(g, i, b.state) + incoming;
  b.value = r.objective;
  return b;
}

/// Belief of a node that is held fixed: the aggregate is evaluated, not minimized.
inline Belief fixedBelief(const CompoundGraph& g, std::size_t i, const std::vector<const QuadraticMessage*>& msgs,
                          const State& x_i) {
  Belief b;
  b.state = x_i;
  b.aggregate = selfQuadratic(g, i, x_i);
  for (const auto* m : msgs) b.aggregate += *m;
  b.value = g.selfValue(i, x_i);
  for (const auto* m : msgs) b.value += m->evaluate(x_i);
  return b;
}

/// Messages of one forward/backward sweep.
struct MessageSet {
  std::vector<QuadraticMessage> self;      // phi_i linearized at the sweep's point
  std::vector<QuadraticMessage> forward;   // psi_{i-1} -> x_i (zero at i = 0)
  std::vector<QuadraticMessage> backward;  // psi_i -> x_i (zero at i = N)

  /// Message x_i sends toward psi_i (rightward), i.e. excluding backward[i].
  QuadraticMessage towardRight(std::size_t i) const { return self[i] + forward[i]; }
  /// Message x_i sends toward psi_{i-1} (leftward), excluding forward[i].
  QuadraticMessage towardLeft(std::size_t i) const { return self[i] + backward[i]; }
};

/// One synchronous forward-then-backward sweep with every potential linearized
/// at `traj`. With `fixed_endpoints`, x_0 and x_N are constants: messages
/// leaving them condition on their value instead of minimizing over them.
/// `proximal` > 0 adds 0.5*proximal*|x_i - traj_i|^2 to every free self-potential.
inline MessageSet sweepMessages(const CompoundGraph& g, const Trajectory& traj, bool fixed_endpoints = false,
                                double proximal = 0.0) {
  const std::size_t n = g.numStates();
  const auto dim = traj.stateDim();
  MessageSet m;
  m.self.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.self.push_back(selfQuadratic(g, i, traj.states[i]));
    const bool fixed = fixed_endpoints && (i == 0 || i + 1 == n);
    if (proximal > 0.0 && !fixed) m.self.back() += proximalQuadratic(traj.states[i], proximal);
  }
  std::vector<QuadraticMessage> edges;
  edges.reserve(g.numEdges());
  for (std::size_t e = 0; e < g.numEdges(); ++e) {
    edges.push_back(edgeQuadratic(g, e, traj.states[e], traj.states[e + 1]));
  }
  m.forward.assign(n, QuadraticMessage::zero(dim));
  m.backward.assign(n, QuadraticMessage::zero(dim));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    m.forward[i + 1] =
        fixed_endpoints && i == 0
            ? factorToVariableMessageFixed(edges[i], MessageTarget::kSecond, m.towardRight(i), traj.states[i])
            : factorToVariableMessage(edges[i], MessageTarget::kSecond, m.towardRight(i), i + 1);
  }
  for (std::size_t i = n - 1; i > 0; --i) {
    m.backward[i - 1] =
        fixed_endpoints && i == n - 1
            ? factorToVariableMessageFixed(edges[i - 1], MessageTarget::kFirst, m.towardLeft(i), traj.states[i])
            : factorToVariableMessage(edges[i - 1], MessageTarget::kFirst, m.towardLeft(i), i - 1);
  }
  return m;
}

struct OptimalityReport {
  std::vector<bool> min_consistent;  // per node
  std::vector<std::size_t> g_check;  // nodes still failing
  double max_discrepancy = 0.0;

  bool allConsistent() const { return g_check.empty(); }
};

/// Re-minimizes every edge objective over the far variable with the
/// nonlinear edge-potential and compares the result against the stored
/// messages, hence against the belief at the current state.
inline OptimalityReport localOptimalityCheck(const CompoundGraph& g, const MessageSet& msgs,
                                             const std::vector<Belief>& beliefs, const Trajectory& traj,
                                             const GaussNewtonOptions& opts = {}, bool fixed_endpoints = false) {
  const std::size_t n = g.numStates();
  OptimalityReport rep;
  rep.min_consistent.assign(n, true);

  // Edge e re-minimized with x_fixed held at its converged value.
  auto reminimize = [&](std::size_t e, MessageTarget target) {
    const bool keep_first = target == MessageTarget::kFirst;
    const std::size_t fixed = keep_first ? e : e + 1;
    const std::size_t free = keep_first ? e + 1 : e;
    const State& x_fixed = traj.states[fixed];
    const QuadraticMessage incoming = keep_first ? msgs.towardLeft(free) : msgs.towardRight(free);
    if (fixed_endpoints && (free == 0 || free == n - 1)) {
      const State& x_end = traj.states[free];
      const double edge = keep_first ? g.edgeValue(e, x_fixed, x_end) : g.edgeValue(e, x_end, x_fixed);
      return edge + incoming.evaluate(x_end);
    }
    auto terms = [&](const Vector& x_free) {
      std::vector<LocalTerm> out;
      for (auto k : g.edgePotential(e)) {
        const Factor& f = g.factor(k);
        Linearization lin = keep_first ? f.linearize(x_fixed, x_free) : f.linearize(x_free, x_fixed);
        out.push_back({std::move(lin.residual), keep_first ? std::move(lin.jac_second) : std::move(lin.jac_first),
                       &f.information()});
      }
      return out;
    };
    return gaussNewtonLocal(terms, incoming, traj.states[free], opts, free).objective;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const State& x = traj.states[i];
    const double belief_value = g.selfValue(i, x) + msgs.forward[i].evaluate(x) + msgs.backward[i].evaluate(x);
    double discrepancy = 0.0;
    if (i + 1 < n) discrepancy = std::max(discrepancy, std::abs(reminimize(i, MessageTarget::kFirst) - msgs.backward[i].evaluate(x)));
    if (i > 0) discrepancy = std::max(discrepancy, std::abs(reminimize(i - 1, MessageTarget::kSecond) - msgs.forward[i].evaluate(x)));
    if (i < beliefs.size()) {
      discrepancy = std::max(discrepancy, std::abs(beliefs[i].value - belief_value));
    }
    rep.max_discrepancy = std::max(rep.max_discrepancy, discrepancy / (1.0 + std::abs(belief_value)));
    if (discrepancy > 1e-6 * (1.0 + std::abs(belief_value))) {
      rep.min_consistent[i] = false;
      rep.g_check.push_back(i);
    }
  }
  return rep;
}

}  // namespace ms2mp
