#include "qpn/solution_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qpn {

CheckResult check_qp_solution(const QuadCost& cost, const NncPolyhedron& region,
                              const IndexSet& j_set, const Vec& x, const Tolerances& tol) {
  if (region.dim() != cost.dim() || x.size() != cost.dim())
    throw SolverError("check_qp_solution dimension mismatch");

  CheckResult out;
  out.lambda = Vec::Zero(static_cast<int>(region.rows().size()));

  std::vector<int> active_ineq, eq_rows;
  for (std::size_t r = 0; r < region.rows().size(); ++r) {
    const auto& h = region.rows()[r];
    if (h.kind == RowKind::Strict)
      throw GeometryError("check_qp_solution expects a closed region");
    const double res = h.residual(x);
    if (h.kind == RowKind::Equality) {
      if (std::abs(res) > tol.feas) return out;  // NotFeasible
      eq_rows.push_back(static_cast<int>(r));
    } else {
      if (res < -tol.feas) return out;  // NotFeasible
      if (std::abs(res) <= tol.feas) active_ineq.push_back(static_cast<int>(r));
    }
  }

  const int nj = static_cast<int>(j_set.size());
  Vec target(nj);
  const Vec grad = cost.gradient(x);
  for (int i = 0; i < nj; ++i) target[i] = grad[j_set[i]];

  // One nonnegative column per active inequality row; equality rows
  // contribute both orientations so their net multiplier is sign-free.
  const int cols = static_cast<int>(active_ineq.size()) + 2 * static_cast<int>(eq_rows.size());
  Mat a(nj, cols);
  int c = 0;
  for (int r : active_ineq) {
    for (int i = 0; i < nj; ++i) a(i, c) = region.rows()[r].normal[j_set[i]];
    ++c;
  }
  for (int r : eq_rows) {
    for (int i = 0; i < nj; ++i) {
      a(i, c) = region.rows()[r].normal[j_set[i]];
      a(i, c + 1) = -region.rows()[r].normal[j_set[i]];
    }
    c += 2;
  }

  const NnlsResult fit = nnls(a, target, tol);
  out.residual = fit.residual;
  out.active = active_ineq;
  c = 0;
  for (int r : active_ineq) out.lambda[r] = fit.lambda[c++];
  for (int r : eq_rows) {
    out.lambda[r] = fit.lambda[c] - fit.lambda[c + 1];
    c += 2;
  }
  out.verdict = (fit.residual <= tol.feas) ? Verdict::Optimal : Verdict::NotOptimal;
  return out;
}

ActivePartition partition_active(const NncPolyhedron& region, const CheckResult& cert,
                                 const Tolerances& tol) {
  ActivePartition out;
  std::vector<bool> is_active(region.rows().size(), false);
  for (int r : cert.active) is_active[r] = true;
  for (std::size_t r = 0; r < region.rows().size(); ++r) {
    if (region.rows()[r].kind == RowKind::Equality) continue;
    if (!is_active[r]) {
      out.inactive.push_back(static_cast<int>(r));
    } else if (cert.lambda[static_cast<int>(r)] > tol.feas) {
      out.strong.push_back(static_cast<int>(r));
    } else {
      out.weak.push_back(static_cast<int>(r));
    }
  }
  return out;
}

namespace {

// KKT polyhedron for one activity assignment, in (x, lambda_active, nu_eq)
// coordinates, followed by projection back to x.
std::optional<NncPolyhedron> kkt_piece(const QuadCost& cost, const NncPolyhedron& region,
                                       const IndexSet& j_set,
                                       const std::vector<int>& active_rows,
                                       const std::vector<int>& inactive_rows,
                                       const std::vector<int>& eq_rows,
                                       const Tolerances& tol) {
  const int n = cost.dim();
  const int na = static_cast<int>(active_rows.size());
  const int ne = static_cast<int>(eq_rows.size());
  const int dim_h = n + na + ne;

  NncPolyhedron h(dim_h);
  for (std::size_t i = 0; i < j_set.size(); ++i) {
    const int j = j_set[i];
    Vec row = Vec::Zero(dim_h);
    row.head(n) = cost.Q.row(j).transpose();
    for (int k = 0; k < na; ++k) row[n + k] = -region.rows()[active_rows[k]].normal[j];
    for (int k = 0; k < ne; ++k) row[n + na + k] = -region.rows()[eq_rows[k]].normal[j];
    h.add_row(Halfspace(std::move(row), cost.q[j], RowKind::Equality));
  }
  for (int k = 0; k < na; ++k) {
    const auto& hs = region.rows()[active_rows[k]];
    Vec row = Vec::Zero(dim_h);
    row.head(n) = hs.normal;
    h.add_row(Halfspace(std::move(row), hs.offset, RowKind::Equality));
    h.add_row(Halfspace(Vec::Unit(dim_h, n + k), 0.0, RowKind::NonStrict));
  }
  for (int r : inactive_rows) {
    const auto& hs = region.rows()[r];
    Vec row = Vec::Zero(dim_h);
    row.head(n) = hs.normal;
    h.add_row(Halfspace(std::move(row), hs.offset, RowKind::NonStrict));
  }
  for (int r : eq_rows) {
    const auto& hs = region.rows()[r];
    Vec row = Vec::Zero(dim_h);
    row.head(n) = hs.normal;
    h.add_row(Halfspace(std::move(row), hs.offset, RowKind::Equality));
  }

  const auto vrep = try_vertex_enumerate(h, tol);
  if (!vrep) return std::nullopt;
  IndexSet keep(n);
  for (int i = 0; i < n; ++i) keep[i] = i;
  return hrep_from_vrep(project(*vrep, keep), tol);
}

}  // namespace

std::vector<NncPolyhedron> subsume_pieces(std::vector<NncPolyhedron> pieces,
                                          const Tolerances& tol) {
  auto contained_in = [&](const NncPolyhedron& p, const NncPolyhedron& q) {
    for (const auto& row : q.rows()) {
      std::vector<NncPolyhedron> negs;
      switch (row.kind) {
        case RowKind::NonStrict:
          negs.emplace_back(p.dim(),
                            std::vector<Halfspace>{{-row.normal, -row.offset, RowKind::Strict}});
          break;
        case RowKind::Strict:
          negs.emplace_back(p.dim(), std::vector<Halfspace>{
                                         {-row.normal, -row.offset, RowKind::NonStrict}});
          break;
        case RowKind::Equality:
          negs.emplace_back(p.dim(),
                            std::vector<Halfspace>{{row.normal, row.offset, RowKind::Strict}});
          negs.emplace_back(p.dim(),
                            std::vector<Halfspace>{{-row.normal, -row.offset, RowKind::Strict}});
          break;
      }
      for (const auto& neg : negs)
        if (!is_empty(intersect(p, neg), tol)) return false;
    }
    return true;
  };

  std::vector<bool> dropped(pieces.size(), false);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    for (std::size_t j = 0; j < pieces.size(); ++j) {
      if (i == j || dropped[j]) continue;
      if (contained_in(pieces[i], pieces[j])) {
        dropped[i] = true;
        break;
      }
    }
  }
  std::vector<NncPolyhedron> out;
  for (std::size_t i = 0; i < pieces.size(); ++i)
    if (!dropped[i]) out.push_back(std::move(pieces[i]));
  return out;
}

LocalGraph local_qp_graph(const QuadCost& cost, const NncPolyhedron& closed_region,
                          const IndexSet& j_set, const Vec& x_star,
                          const CheckResult& certificate, const Tolerances& tol,
                          const GraphLimits& limits) {
  if (!certificate.optimal())
    throw SolverError("local_qp_graph requires a certified solution");

  const ActivePartition part = partition_active(closed_region, certificate, tol);
  if (static_cast<int>(part.weak.size()) > limits.max_weak) {
    std::ostringstream os;
    os << part.weak.size() << " weakly active rows exceed the enumeration cap of "
       << limits.max_weak << "; tighten the region or raise GraphLimits::max_weak";
    throw SolverError(os.str());
  }

  std::vector<int> eq_rows;
  for (std::size_t r = 0; r < closed_region.rows().size(); ++r)
    if (closed_region.rows()[r].kind == RowKind::Equality)
      eq_rows.push_back(static_cast<int>(r));

  LocalGraph out;
  out.reference = x_star;
  std::vector<NncPolyhedron> pieces;
  const std::size_t subsets = std::size_t{1} << part.weak.size();
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    std::vector<int> active = part.strong;
    std::vector<int> inactive = part.inactive;
    for (std::size_t w = 0; w < part.weak.size(); ++w) {
      if (mask & (std::size_t{1} << w))
        active.push_back(part.weak[w]);
      else
        inactive.push_back(part.weak[w]);
    }
    std::sort(active.begin(), active.end());
    std::sort(inactive.begin(), inactive.end());
    auto piece = kkt_piece(cost, closed_region, j_set, active, inactive, eq_rows, tol);
    if (!piece) {
      std::ostringstream os;
      os << "activity subset " << mask << " produced an empty dual polyhedron; skipped";
      out.notes.push_back(os.str());
      continue;
    }
    pieces.push_back(std::move(*piece));
  }

  pieces = canonical_pieces(std::move(pieces), tol.dedup);
  if (static_cast<int>(pieces.size()) <= limits.subsume_limit)
    pieces = subsume_pieces(std::move(pieces), tol);
  out.pieces = PolyUnion(cost.dim(), canonical_pieces(std::move(pieces), tol.dedup));
  return out;
}

std::vector<NncPolyhedron> combined_feasible_pieces(
    const QpNetwork& net, int node, const std::map<int, LocalGraph>& child_graphs,
    const Tolerances& tol) {
  const auto kids = net.children(node);
  std::vector<NncPolyhedron> pieces = {net.node(node).feasible};
  for (int j : kids) {
    const auto it = child_graphs.find(j);
    if (it == child_graphs.end()) throw SolverError("missing child graph");
    std::vector<NncPolyhedron> next;
    for (const auto& base : pieces)
      for (const auto& piece : it->second.pieces.pieces())
        next.push_back(intersect(base, piece));
    pieces = std::move(next);
  }
  std::vector<NncPolyhedron> kept;
  for (auto& p : pieces) {
    if (p.has_trivially_infeasible_row(tol.feas)) continue;
    if (is_empty(p, tol)) continue;
    kept.push_back(std::move(p));
  }
  return canonical_pieces(std::move(kept), tol.dedup);
}

LocalGraph local_node_graph(const QpNetwork& net, int node, const Vec& x_star,
                            const std::map<int, LocalGraph>& child_graphs,
                            const Tolerances& tol, const GraphLimits& limits) {
  const IndexSet ext = extended_indices(net, node);
  const std::vector<NncPolyhedron> branches =
      combined_feasible_pieces(net, node, child_graphs, tol);
  if (branches.empty())
    throw SolverError("node has no feasible branch at the reference point");

  LocalGraph out;
  out.reference = x_star;
  out.node = node;

  // One Z per branch: the branch-local QP graph joined with the branch
  // complement. Only pieces whose row closure contains the reference can
  // survive the final filter, so they are dropped before expanding.
  std::vector<std::vector<NncPolyhedron>> z_sets;
  for (const auto& branch : branches) {
    const NncPolyhedron closed = branch.closure();
    const CheckResult cert = check_qp_solution(net.node(node).cost, closed, ext, x_star, tol);
    if (!cert.optimal())
      throw SolverError("reference point is not a certified solution on a local branch");
    LocalGraph qp_graph =
        local_qp_graph(net.node(node).cost, closed, ext, x_star, cert, tol, limits);
    for (auto& note : qp_graph.notes) out.notes.push_back(std::move(note));

    std::vector<NncPolyhedron> zs;
    for (const auto& piece : qp_graph.pieces.pieces())
      if (piece.closure_contains(x_star, tol.feas)) zs.push_back(piece);
    const PolyUnion comp = complement_of_closure(closed);
    for (const auto& piece : comp.pieces())
      if (piece.closure_contains(x_star, tol.feas)) zs.push_back(piece);
    z_sets.push_back(canonical_pieces(std::move(zs), tol.dedup));
  }

  // Distributive expansion of the Z intersection.
  std::vector<NncPolyhedron> expanded = {NncPolyhedron::whole_space(net.n())};
  for (const auto& zs : z_sets) {
    std::vector<NncPolyhedron> next;
    for (const auto& acc : expanded) {
      for (const auto& z : zs) {
        NncPolyhedron cand = intersect(acc, z);
        if (cand.has_trivially_infeasible_row(tol.feas)) continue;
        if (!cand.closure_contains(x_star, tol.feas)) continue;
        if (is_empty(cand, tol)) continue;
        next.push_back(std::move(cand));
      }
    }
    next = canonical_pieces(std::move(next), tol.dedup);
    if (static_cast<int>(next.size()) > limits.max_pieces)
      throw SolverError("solution-graph expansion exceeded the piece cap");
    expanded = std::move(next);
  }

  // Restore strict rows: intersect with the original NNC feasible pieces.
  std::vector<NncPolyhedron> restored;
  for (const auto& piece : expanded) {
    for (const auto& branch : branches) {
      NncPolyhedron cand = intersect(piece, branch);
      if (cand.has_trivially_infeasible_row(tol.feas)) continue;
      if (!cand.closure_contains(x_star, tol.feas)) continue;
      if (is_empty(cand, tol)) continue;
      restored.push_back(std::move(cand));
    }
  }

  restored = canonical_pieces(std::move(restored), tol.dedup);
  if (static_cast<int>(restored.size()) <= limits.subsume_limit)
    restored = subsume_pieces(std::move(restored), tol);
  restored = canonical_pieces(std::move(restored), tol.dedup);
  if (restored.empty())
    throw SolverError("local solution graph is empty at the reference point");
  out.pieces = PolyUnion(net.n(), std::move(restored));
  return out;
}

}  // namespace qpn
