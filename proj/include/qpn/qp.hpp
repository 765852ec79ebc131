#pragma once

#include <optional>

#include "qpn/polyhedra.hpp"

namespace qpn {

/// Convex quadratic cost f(x) = 1/2 x'Qx + x'q. Q is symmetrized at
/// construction; convexity is only required (and checked) on the
/// coordinates a consumer actually optimizes over.
struct QuadCost {
  Mat Q;
  Vec q;

  QuadCost() = default;
  QuadCost(Mat q_mat, Vec q_vec);

  int dim() const { return static_cast<int>(q.size()); }
  double value(const Vec& x) const { return 0.5 * x.dot(Q * x) + q.dot(x); }
  Vec gradient(const Vec& x) const { return Q * x + q; }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };

struct QpSolveResult {
  Vec x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
};

/// Minimizes `cost` over the slice of `region` obtained by fixing every
/// coordinate outside `free` at its value in `reference`. The region must
/// be closed (no strict rows). Throws SolverError when the cost is not
/// convex on the free coordinates.
QpSolveResult solve_qp(const QuadCost& cost, const NncPolyhedron& region,
                       const IndexSet& free, const Vec& reference,
                       const Tolerances& tol);

struct NnlsResult {
  Vec lambda;
  double residual = 0.0;
};

/// Lawson-Hanson nonnegative least squares: min ||A*lambda - b||, lambda >= 0.
NnlsResult nnls(const Mat& a, const Vec& b, const Tolerances& tol);

/// Feasibility of a closed polyhedron (strict rows rejected). Returns a
/// point satisfying every row within tol.feas, or nullopt.
std::optional<Vec> feasible_point(const NncPolyhedron& closed, const Tolerances& tol);

/// Emptiness under the NNC semantics of `contains`: phase-1 feasibility on
/// the closure plus a max-slack solve for the strict rows.
bool is_empty(const NncPolyhedron& p, const Tolerances& tol);

}  // namespace qpn
