#pragma once

#include "qpn/common.hpp"

namespace qpn {

/// Bounded linear mixed complementarity problem:
///   M z + q = w+ - w-,  0 <= z - l  perp  w+ >= 0,  0 <= u - z  perp  w- >= 0.
/// Bounds may be infinite; a row with l = -inf, u = +inf is the linear
/// equation (M z + q)_i = 0.
struct Lmcp {
  Mat M;
  Vec q;
  Vec l;
  Vec u;

  int dim() const { return static_cast<int>(q.size()); }
  void validate() const;
};

enum class LmcpStatus { Solved, RayTermination, IterationLimit };

struct LmcpSolution {
  Vec z;
  Vec w_plus;
  Vec w_minus;
  LmcpStatus status = LmcpStatus::RayTermination;
  double residual = kInf;  // worst complementarity/bound violation
  int pivots = 0;
};

/// Lemke's method on the standard-form LCP obtained by splitting the
/// variables at their finite bounds, with lexicographic anti-cycling.
/// `max_pivots` <= 0 selects the default cap of 50 pivots per LCP row.
LmcpSolution solve_lmcp(const Lmcp& problem, const Tolerances& tol, int max_pivots = 0);

}  // namespace qpn
