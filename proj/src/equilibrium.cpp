#include "qpn/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace qpn {

Lmcp assemble_lmcp(const LayerNashProblem& problem, const Vec& x) {
  const int n = problem.n;
  if (x.size() != n) throw SolverError("assemble_lmcp iterate dimension mismatch");

  std::set<int> j_union;
  for (const auto& p : problem.participants) {
    if (p.cost.dim() != n || p.branch.dim() != n)
      throw SolverError("assemble_lmcp participant dimension mismatch");
    if (p.branch.has_strict_rows())
      throw GeometryError("assemble_lmcp expects closed branches");
    j_union.insert(p.indices.begin(), p.indices.end());
  }
  const IndexSet j_set(j_union.begin(), j_union.end());
  const int n_hat = static_cast<int>(j_set.size());
  std::vector<int> col_of(n, -1);
  for (int c = 0; c < n_hat; ++c) col_of[j_set[c]] = c;

  int n_tilde = 0, m = 0;
  for (const auto& p : problem.participants) {
    n_tilde += static_cast<int>(p.indices.size());
    for (const auto& h : p.branch.rows())
      if (h.normal.lpNorm<Eigen::Infinity>() > 0.0) ++m;
  }

  const int k = n_hat + n_tilde + m;
  Lmcp out;
  out.M = Mat::Zero(k, k);
  out.q = Vec::Zero(k);
  out.l = Vec::Constant(k, -kInf);
  out.u = Vec::Constant(k, kInf);

  // Row layout: [x_J slack block | stationarity | constraints], matching
  // the variable layout [x_J | psi | lambda].
  int stat_row = n_hat;
  int con_row = n_hat + n_tilde;
  int lam_col = n_hat + n_tilde;
  for (const auto& p : problem.participants) {
    std::vector<const Halfspace*> rows;
    for (const auto& h : p.branch.rows())
      if (h.normal.lpNorm<Eigen::Infinity>() > 0.0) rows.push_back(&h);

    for (int j : p.indices) {
      for (int c = 0; c < n_hat; ++c) out.M(stat_row, c) = p.cost.Q(j, j_set[c]);
      for (std::size_t r = 0; r < rows.size(); ++r)
        out.M(stat_row, lam_col + static_cast<int>(r)) = -rows[r]->normal[j];
      double constant = p.cost.q[j];
      for (int jp = 0; jp < n; ++jp)
        if (col_of[jp] < 0) constant += p.cost.Q(j, jp) * x[jp];
      out.q[stat_row] = constant;
      ++stat_row;
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int c = 0; c < n_hat; ++c) out.M(con_row, c) = rows[r]->normal[j_set[c]];
      double constant = rows[r]->offset;
      for (int jp = 0; jp < n; ++jp)
        if (col_of[jp] < 0) constant += rows[r]->normal[jp] * x[jp];
      out.q[con_row] = constant;
      if (rows[r]->kind == RowKind::NonStrict) {
        out.l[con_row] = 0.0;  // multiplier in [0, inf), complementary row
      }
      // Equality rows keep free bounds: the row becomes an equation and
      // its multiplier is sign-free.
      ++con_row;
      ++lam_col;
    }
  }
  return out;
}

LayerNashOutcome solve_layer_nash(const LayerNashProblem& problem, const Vec& x,
                                  const Tolerances& tol, int max_pivots) {
  LayerNashOutcome out;
  out.x = x;
  const Lmcp lmcp = assemble_lmcp(problem, x);
  const LmcpSolution sol = solve_lmcp(lmcp, tol, max_pivots);
  out.status = sol.status;
  if (sol.status != LmcpStatus::Solved) return out;

  std::set<int> j_union;
  for (const auto& p : problem.participants)
    j_union.insert(p.indices.begin(), p.indices.end());
  int c = 0;
  for (int j : j_union) out.x[j] = sol.z[c++];
  out.ok = true;
  return out;
}

namespace {

std::string state_key(const Vec& x, int depth, const std::map<int, int>& choices) {
  std::ostringstream os;
  os << depth << '|';
  char buf[32];
  for (int i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.0f", x[i] * 1e9);
    os << buf << ',';
  }
  os << '|';
  for (const auto& [node, branch] : choices) os << node << ':' << branch << ';';
  return os.str();
}

struct LayerScan {
  bool all_ok = true;
  std::map<int, int> choices;          // node -> branch used for the Nash solve
  std::map<int, bool> satisfied;       // node -> passed all branches
};

}  // namespace

EquilibriumResult find_equilibrium(const QpNetwork& net, const Vec& x0,
                                   const SearchOptions& opts) {
  EquilibriumResult result;
  result.x = x0;
  if (x0.size() != net.n()) throw SolverError("find_equilibrium init dimension mismatch");
  for (int i = 0; i < x0.size(); ++i)
    if (!std::isfinite(x0[i])) throw SolverError("find_equilibrium init must be finite");
  if (net.node_count() == 0) {
    result.trace.termination = Termination::Equilibrium;
    return result;
  }

  const DepthMapping dm = depth_mapping(net);
  const int depth = dm.depth();
  std::vector<IndexSet> ext(net.node_count());
  for (int i = 0; i < net.node_count(); ++i) ext[i] = extended_indices(net, i);
  std::vector<bool> has_parent(net.node_count(), false);
  for (const auto& [a, b] : net.edges()) {
    (void)a;
    has_parent[b] = true;
  }

  Vec x = x0;
  EquilibriumTrace& trace = result.trace;
  std::set<std::string> visited;
  int restarts = 0;

  while (true) {
    std::map<int, LocalGraph> graphs;
    std::map<int, std::vector<NncPolyhedron>> branch_lists;
    bool swept_clean = true;

    for (int d = depth - 1; d >= 0 && swept_clean; --d) {
      LayerScan scan;
      for (int i : dm.layers[d]) {
        auto branches = combined_feasible_pieces(net, i, graphs, opts.tol);
        if (branches.empty()) {
          trace.termination = Termination::Inconsistency;
          std::ostringstream os;
          os << "node " << i + 1 << " has no feasible local branch at the current iterate";
          trace.message = os.str();
          result.x = x;
          return result;
        }
        int first_fail = -1;
        for (std::size_t l = 0; l < branches.size(); ++l) {
          const CheckResult cr =
              check_qp_solution(net.node(i).cost, branches[l].closure(), ext[i], x, opts.tol);
          if (!cr.optimal()) {
            first_fail = static_cast<int>(l);
            break;
          }
        }
        trace.events.push_back({x, d + 1, TraceAction::Checked, {{i, std::max(first_fail, 0)}}});
        scan.satisfied[i] = first_fail < 0;
        scan.choices[i] = std::max(first_fail, 0);
        if (first_fail >= 0) scan.all_ok = false;
        branch_lists[i] = std::move(branches);
      }

      if (scan.all_ok) {
        for (int i : dm.layers[d]) {
          if (!has_parent[i]) continue;  // nothing above consumes this graph
          try {
            graphs[i] = local_node_graph(net, i, x, graphs, opts.tol, opts.limits);
          } catch (const SolverError& e) {
            // Certified within tolerance, yet no representable local
            // piece; a borderline certificate. Surface, do not guess.
            trace.termination = Termination::Inconsistency;
            std::ostringstream os;
            os << "node " << i + 1 << " graph construction failed: " << e.what();
            trace.message = os.str();
            result.x = x;
            return result;
          }
          graphs[i].node = i;
          trace.events.push_back({x, d + 1, TraceAction::GraphBuilt, {}});
        }
        continue;
      }

      // Layer Nash solve over the chosen branches, backtracking across
      // the free choices of the satisfied nodes on LMCP failure.
      swept_clean = false;
      const std::vector<int>& layer = dm.layers[d];
      std::vector<int> free_nodes;
      for (int i : layer)
        if (scan.satisfied.at(i)) free_nodes.push_back(i);

      std::map<int, int> combo = scan.choices;
      bool solved = false;
      LayerNashOutcome outcome;
      int attempts = 0;
      const int attempt_cap = 4096;
      while (attempts < attempt_cap) {
        ++attempts;
        LayerNashProblem problem;
        problem.n = net.n();
        for (int i : layer)
          problem.participants.emplace_back(net.node(i).cost,
                                            branch_lists[i][combo[i]].closure(), ext[i]);
        outcome = solve_layer_nash(problem, x, opts.tol, opts.lmcp_max_pivots);
        if (outcome.ok) {
          solved = true;
          break;
        }
        // Advance the free choices lexicographically.
        bool advanced = false;
        for (auto it = free_nodes.rbegin(); it != free_nodes.rend(); ++it) {
          const int node = *it;
          if (combo[node] + 1 < static_cast<int>(branch_lists[node].size())) {
            ++combo[node];
            for (auto jt = free_nodes.rbegin(); jt != it; ++jt) combo[*jt] = 0;
            advanced = true;
            break;
          }
        }
        if (!advanced) break;
      }
      if (!solved) {
        // Inconsistency only once genuine alternative branch choices for
        // the satisfied nodes have been exhausted.
        trace.termination =
            attempts > 1 ? Termination::Inconsistency : Termination::LmcpFailure;
        std::ostringstream os;
        os << "layer " << d + 1 << " Nash solve failed after " << attempts
           << " branch combination(s)";
        trace.message = os.str();
        result.x = x;
        return result;
      }

      x = outcome.x;
      ++trace.nash_solves;
      trace.events.push_back({x, d + 1, TraceAction::NashSolved, combo});
      trace.restart_choices.push_back(combo);

      const std::string key = state_key(x, d + 1, combo);
      if (!visited.insert(key).second) {
        trace.termination = Termination::CycleDetected;
        trace.message = "revisited a previously seen iterate/region state";
        result.x = x;
        return result;
      }
      if (++restarts > opts.max_restarts) {
        trace.termination = Termination::IterationLimit;
        trace.message = "restart limit exceeded";
        result.x = x;
        return result;
      }
      trace.events.push_back({x, depth, TraceAction::Restarted, {}});
    }

    if (swept_clean) {
      // Every node accepted the iterate on the closures of its branches.
      // The point must also lie in the NNC pieces themselves.
      for (int i = 0; i < net.node_count(); ++i) {
        const auto& branches = branch_lists.at(i);
        const bool member = std::any_of(
            branches.begin(), branches.end(),
            [&](const NncPolyhedron& b) { return b.contains(x, opts.tol.feas); });
        if (!member) {
          trace.termination = Termination::Inconsistency;
          std::ostringstream os;
          os << "node " << i + 1
             << ": iterate lies only on a closure boundary excluded by a strict row";
          trace.message = os.str();
          result.x = x;
          return result;
        }
      }
      trace.termination = Termination::Equilibrium;
      result.x = x;
      return result;
    }
  }
}

VerifyReport verify_equilibrium(const QpNetwork& net, const Vec& x,
                                const SearchOptions& opts) {
  VerifyReport report;
  report.ok = true;
  if (x.size() != net.n()) throw SolverError("verify_equilibrium dimension mismatch");

  const DepthMapping dm = depth_mapping(net);
  std::map<int, LocalGraph> graphs;
  std::vector<bool> failed_below(net.node_count(), false);

  for (int d = dm.depth() - 1; d >= 0; --d) {
    for (int i : dm.layers[d]) {
      NodeVerification nv;
      nv.node = i;
      nv.source = net.is_source(i);

      bool blocked = false;
      for (int c : net.children(i))
        if (!graphs.count(c)) blocked = true;
      if (blocked) {
        nv.blocked = true;
        nv.detail = "a descendant failed; local graphs unavailable";
        report.ok = false;
        report.nodes.push_back(std::move(nv));
        continue;
      }

      const auto branches = combined_feasible_pieces(net, i, graphs, opts.tol);
      nv.branches = static_cast<int>(branches.size());
      if (branches.empty()) {
        nv.detail = "no feasible local branch";
        report.ok = false;
        report.nodes.push_back(std::move(nv));
        continue;
      }

      nv.worst = Verdict::Optimal;
      const IndexSet ext = extended_indices(net, i);
      for (const auto& b : branches) {
        const CheckResult cr =
            check_qp_solution(net.node(i).cost, b.closure(), ext, x, opts.tol);
        if (cr.verdict == Verdict::NotFeasible) nv.worst = Verdict::NotFeasible;
        if (cr.verdict == Verdict::NotOptimal && nv.worst == Verdict::Optimal)
          nv.worst = Verdict::NotOptimal;
      }
      const bool member = std::any_of(branches.begin(), branches.end(), [&](const auto& b) {
        return b.contains(x, opts.tol.feas);
      });
      nv.passed = (nv.worst == Verdict::Optimal) && member;
      if (!member && nv.worst == Verdict::Optimal)
        nv.detail = "optimal on closures but excluded by a strict row";
      if (!nv.passed) report.ok = false;

      if (nv.passed && d > 0) {
        bool consumed = false;
        for (const auto& [a, b] : net.edges())
          if (b == i) consumed = true;
        if (consumed)
          graphs[i] = local_node_graph(net, i, x, graphs, opts.tol, opts.limits);
      }
      report.nodes.push_back(std::move(nv));
    }
  }
  std::sort(report.nodes.begin(), report.nodes.end(),
            [](const NodeVerification& a, const NodeVerification& b) { return a.node < b.node; });
  return report;
}

}  // namespace qpn
