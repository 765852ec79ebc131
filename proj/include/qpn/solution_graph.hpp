#pragma once

#include <map>

#include "qpn/network.hpp"

namespace qpn {

enum class Verdict { NotFeasible, NotOptimal, Optimal };

/// Outcome of the dual-certificate optimality check for one QP. `lambda`
/// holds one multiplier per region row (net value for equality rows,
/// zero for inactive rows); `residual` is the attained stationarity gap.
struct CheckResult {
  Verdict verdict = Verdict::NotFeasible;
  Vec lambda;
  double residual = kInf;
  std::vector<int> active;  // active inequality rows

  bool optimal() const { return verdict == Verdict::Optimal; }
};

/// Verifies that x solves min f over the slice of `region` along the
/// coordinates in J, by feasibility screening and a nonnegative
/// least-squares fit of the multipliers.
CheckResult check_qp_solution(const QuadCost& cost, const NncPolyhedron& region,
                              const IndexSet& j_set, const Vec& x, const Tolerances& tol);

/// How strongly each active row binds at a certified solution.
struct ActivePartition {
  std::vector<int> strong;    // active with positive multiplier
  std::vector<int> weak;      // active with vanishing multiplier
  std::vector<int> inactive;
};
ActivePartition partition_active(const NncPolyhedron& region, const CheckResult& cert,
                                 const Tolerances& tol);

struct GraphLimits {
  int max_weak = 20;          // powerset guard for weakly active rows
  int max_pieces = 4096;      // guard for the distributive expansion
  int subsume_limit = 16;     // containment reduction only below this count
};

/// A neighbourhood-exact representation of a solution graph around a
/// reference point: within some ball around `reference` the union of
/// `pieces` coincides with the true solution graph.
struct LocalGraph {
  PolyUnion pieces;
  Vec reference;
  int node = -1;
  std::vector<std::string> notes;

  LocalGraph() : pieces(1) {}
  LocalGraph(PolyUnion u, Vec ref, int nd)
      : pieces(std::move(u)), reference(std::move(ref)), node(nd) {}
};

/// Local solution graph of a single QP around a certified solution: one
/// piece per subset of the weakly active rows, obtained by vertex
/// enumeration of the primal-dual KKT polyhedron and projection back to
/// the decision space.
LocalGraph local_qp_graph(const QuadCost& cost, const NncPolyhedron& closed_region,
                          const IndexSet& j_set, const Vec& x_star,
                          const CheckResult& certificate, const Tolerances& tol,
                          const GraphLimits& limits = {});

/// Local solution graph of a network node given the local graphs of its
/// children: per selection of one child piece each, the QP graph on the
/// closed combined region is joined with the region's complement, the
/// selections are intersected, and strict rows are restored by
/// intersecting with the original not-necessarily-closed feasible pieces.
LocalGraph local_node_graph(const QpNetwork& net, int node, const Vec& x_star,
                            const std::map<int, LocalGraph>& child_graphs,
                            const Tolerances& tol, const GraphLimits& limits = {});

/// The combined feasible pieces of a node at the current child graphs:
/// the node's own feasible set intersected with one piece per child, in
/// canonical order. Used both by the search loop and by verification.
std::vector<NncPolyhedron> combined_feasible_pieces(
    const QpNetwork& net, int node, const std::map<int, LocalGraph>& child_graphs,
    const Tolerances& tol);

/// Drops pieces that are contained in another piece of the list.
std::vector<NncPolyhedron> subsume_pieces(std::vector<NncPolyhedron> pieces,
                                          const Tolerances& tol);

}  // namespace qpn
