#pragma once

#include "qpn/lmcp.hpp"
#include "qpn/solution_graph.hpp"

namespace qpn {

struct SearchOptions {
  Tolerances tol;
  GraphLimits limits;
  int max_restarts = 200;
  int lmcp_max_pivots = 0;  // <= 0: 50 pivots per LCP row
};

/// Simultaneous QPs over fixed closed branches, each optimizing its own
/// extended index set. Decision indices may overlap between participants.
struct LayerNashProblem {
  struct Participant {
    QuadCost cost;
    NncPolyhedron branch;  // closed
    IndexSet indices;
    Participant(QuadCost c, NncPolyhedron b, IndexSet idx)
        : cost(std::move(c)), branch(std::move(b)), indices(std::move(idx)) {}
  };
  int n = 0;
  std::vector<Participant> participants;
};

/// Stacks the participants' stationarity and constraint systems into one
/// bounded LMCP; coordinates outside the participants' index sets enter
/// through the constant term at their current values.
Lmcp assemble_lmcp(const LayerNashProblem& problem, const Vec& x);

struct LayerNashOutcome {
  bool ok = false;
  Vec x;
  LmcpStatus status = LmcpStatus::RayTermination;
};

/// Solves the layer LMCP and writes the participating coordinates back
/// into a copy of x. All other coordinates are untouched.
LayerNashOutcome solve_layer_nash(const LayerNashProblem& problem, const Vec& x,
                                  const Tolerances& tol, int max_pivots = 0);

enum class TraceAction { Checked, GraphBuilt, NashSolved, Restarted };

struct TraceEvent {
  Vec iterate;
  int depth = 0;  // 1-based layer depth
  TraceAction action = TraceAction::Checked;
  std::map<int, int> region_choices;  // node -> branch index (0-based)
};

enum class Termination {
  Equilibrium,
  CycleDetected,
  IterationLimit,
  LmcpFailure,
  Inconsistency
};

struct EquilibriumTrace {
  std::vector<TraceEvent> events;
  std::vector<std::map<int, int>> restart_choices;
  Termination termination = Termination::Inconsistency;
  std::string message;
  int nash_solves = 0;
};

struct EquilibriumResult {
  Vec x;
  EquilibriumTrace trace;
  bool found() const { return trace.termination == Termination::Equilibrium; }
};

/// Bottom-up equilibrium search: sweep the depth mapping from the deepest
/// layer, certify every node on every local branch, rebuild local graphs,
/// and fall back to a layer Nash solve (with a restart to the deepest
/// layer) whenever a node rejects the iterate.
EquilibriumResult find_equilibrium(const QpNetwork& net, const Vec& x0,
                                   const SearchOptions& opts = {});

struct NodeVerification {
  int node = 0;
  bool source = false;
  bool passed = false;
  bool blocked = false;  // a descendant failed, graphs unavailable
  Verdict worst = Verdict::NotFeasible;
  int branches = 0;
  std::string detail;
};

struct VerifyReport {
  bool ok = false;
  std::vector<NodeVerification> nodes;
};

/// Rebuilds all local graphs bottom-up at x and re-certifies every node
/// on every branch, including membership in the not-necessarily-closed
/// feasible pieces themselves.
VerifyReport verify_equilibrium(const QpNetwork& net, const Vec& x,
                                const SearchOptions& opts = {});

}  // namespace qpn
