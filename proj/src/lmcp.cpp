#include "qpn/lmcp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace qpn {

void Lmcp::validate() const {
  const int k = dim();
  if (M.rows() != k || M.cols() != k || l.size() != k || u.size() != k)
    throw SolverError("LMCP shape mismatch");
  if (k < 1) throw SolverError("LMCP must have at least one row");
  for (int i = 0; i < k; ++i) {
    if (std::isnan(q[i]) || l[i] > u[i]) throw SolverError("LMCP bounds invalid");
    for (int j = 0; j < k; ++j)
      if (!std::isfinite(M(i, j))) throw SolverError("LMCP matrix has non-finite entries");
  }
}

namespace {

enum class VarClass { Free, Lower, Upper, Boxed, Fixed };

struct Conversion {
  // LCP variable -> (lmcp row it tracks, kind). Kinds: 0 = z shift with
  // sign, 1 = upper-bound multiplier of a boxed row. row < 0 marks a
  // phantom variable paired to an unmatched equation row.
  struct Col {
    int row;
    double sign;  // contribution of the LCP var to z_row
    bool is_box_multiplier;
  };
  std::vector<Col> cols;
  // LCP row -> (lmcp row, sign) for residual rows, or box-bound rows.
  // row < 0 marks a trivial padding row (omega identically 0).
  struct Row {
    int row;
    double sign;
    bool is_box_bound;
  };
  std::vector<Row> rows;
  Vec base;          // z evaluated at zeta = 0
  bool inconsistent = false;
};

VarClass classify(double l, double u) {
  const bool lf = std::isfinite(l);
  const bool uf = std::isfinite(u);
  if (lf && uf) return l == u ? VarClass::Fixed : VarClass::Boxed;
  if (lf) return VarClass::Lower;
  if (uf) return VarClass::Upper;
  return VarClass::Free;
}

// The free block needs care. Within it the row/variable pairing is
// semantically arbitrary (an equation row forces its residual to zero,
// making complementarity trivial for whatever split variable it faces),
// but Lemke's processability depends on it: the standard form inherits
// positive semidefiniteness only under the arrangement in which every
// equation faces the variable whose optimality it encodes. That
// arrangement is recovered as follows: variables keep their own row when
// possible, zero columns and identically-zero rows are dropped, and the
// remaining equations are matched to the free variable whose column is
// closest to the negated transpose of the equation's coefficients on the
// already-paired rows (the skew signature of a stacked KKT system).
Conversion build_conversion(const Lmcp& p, const Tolerances& tol) {
  const int k = p.dim();
  Conversion c;
  c.base = Vec::Zero(k);

  // Equation rows that duplicate an earlier equation (same coefficients
  // and constant up to scale) are redundant: drop the row but keep its
  // variable, which then absorbs one of the surplus equations that
  // overlapping index sets produce.
  std::vector<bool> duplicate_eq(k, false);
  {
    std::vector<int> eq_seen;
    for (int i = 0; i < k; ++i) {
      if (classify(p.l[i], p.u[i]) != VarClass::Free) continue;
      const double scale_i = p.M.row(i).norm();
      if (scale_i <= tol.pivot) continue;
      for (int j : eq_seen) {
        const double scale_j = p.M.row(j).norm();
        const double mis = (p.M.row(i) / scale_i - p.M.row(j) / scale_j).lpNorm<Eigen::Infinity>();
        if (mis <= tol.dedup && std::abs(p.q[i] / scale_i - p.q[j] / scale_j) <= tol.dedup) {
          duplicate_eq[i] = true;
          break;
        }
      }
      if (!duplicate_eq[i]) eq_seen.push_back(i);
    }
  }

  std::vector<int> loose_vars, loose_rows, signature_rows;
  std::vector<std::pair<int, int>> pairs;  // (eq row, free var), -1 = phantom
  for (int i = 0; i < k; ++i) {
    switch (classify(p.l[i], p.u[i])) {
      case VarClass::Free: {
        const bool zero_col = p.M.col(i).lpNorm<Eigen::Infinity>() <= tol.pivot;
        const bool zero_row = duplicate_eq[i] ||
                              p.M.row(i).lpNorm<Eigen::Infinity>() <= tol.pivot;
        if (zero_row && !duplicate_eq[i] && std::abs(p.q[i]) > tol.feas) c.inconsistent = true;
        if (!zero_col && !zero_row) {
          pairs.push_back({i, i});  // natural pairing
          signature_rows.push_back(i);
        } else {
          if (!zero_col) loose_vars.push_back(i);
          if (!zero_row) loose_rows.push_back(i);
        }
        break;
      }
      case VarClass::Lower:
        c.base[i] = p.l[i];
        c.cols.push_back({i, 1.0, false});
        c.rows.push_back({i, 1.0, false});
        signature_rows.push_back(i);
        break;
      case VarClass::Upper:
        c.base[i] = p.u[i];
        c.cols.push_back({i, -1.0, false});
        c.rows.push_back({i, -1.0, false});
        signature_rows.push_back(i);
        break;
      case VarClass::Boxed:
        c.base[i] = p.l[i];
        c.cols.push_back({i, 1.0, false});
        c.cols.push_back({i, 0.0, true});
        c.rows.push_back({i, 1.0, false});
        c.rows.push_back({i, 0.0, true});
        signature_rows.push_back(i);
        break;
      case VarClass::Fixed:
        c.base[i] = p.l[i];
        break;
    }
  }

  std::vector<bool> used(loose_vars.size(), false);
  for (int e : loose_rows) {
    int best = -1;
    double best_mis = kInf;
    for (std::size_t f = 0; f < loose_vars.size(); ++f) {
      if (used[f]) continue;
      double mis = 0.0;
      for (int r : signature_rows) mis += std::abs(p.M(e, r) + p.M(r, loose_vars[f]));
      if (mis < best_mis - 1e-12) {
        best_mis = mis;
        best = static_cast<int>(f);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      pairs.push_back({e, loose_vars[best]});
    } else {
      pairs.push_back({e, -1});
    }
  }
  for (std::size_t f = 0; f < loose_vars.size(); ++f)
    if (!used[f]) pairs.push_back({-1, loose_vars[f]});

  for (const auto& [e, f] : pairs) {
    c.cols.push_back({f, 1.0, false});
    c.cols.push_back({f, -1.0, false});
    c.rows.push_back({e, 1.0, false});
    c.rows.push_back({e, -1.0, false});
  }
  return c;
}

// Standard-form LCP data: w = L zeta + kvec, 0 <= zeta perp w >= 0.
void assemble_lcp(const Lmcp& p, const Conversion& c, Mat& l_mat, Vec& kvec) {
  const int kk = static_cast<int>(c.cols.size());
  l_mat = Mat::Zero(kk, kk);
  kvec = Vec::Zero(kk);
  const Vec r0 = p.M * c.base + p.q;

  for (int ri = 0; ri < kk; ++ri) {
    const auto& row = c.rows[ri];
    if (row.row < 0) continue;  // padding row, omega identically zero
    if (row.is_box_bound) {
      // (u - l) - s >= 0, complementary to the upper multiplier.
      kvec[ri] = p.u[row.row] - p.l[row.row];
      for (int cj = 0; cj < kk; ++cj) {
        const auto& col = c.cols[cj];
        if (!col.is_box_multiplier && col.row == row.row) l_mat(ri, cj) = -1.0;
      }
      continue;
    }
    kvec[ri] = row.sign * r0[row.row];
    for (int cj = 0; cj < kk; ++cj) {
      const auto& col = c.cols[cj];
      if (col.row < 0) continue;  // phantom variable
      if (col.is_box_multiplier) {
        if (col.row == row.row && row.sign > 0.0) l_mat(ri, cj) = 1.0;
      } else {
        l_mat(ri, cj) = row.sign * p.M(row.row, col.row) * col.sign;
      }
    }
  }
}

// Lexicographically smaller ratio row, following the classic tableau test.
int lex_min_row(const Mat& tableau, int r1, int r2, int enter, int n) {
  for (int c = 0; c < n; ++c) {
    const double diff =
        tableau(r2, c) * tableau(r1, enter) - tableau(r1, c) * tableau(r2, enter);
    if (diff < 0.0) return r2;
    if (diff > 0.0) return r1;
  }
  return r1;
}

struct LemkeOutcome {
  bool solved = false;
  bool ray = false;
  Vec zeta;
  int pivots = 0;
};

LemkeOutcome lemke(const Mat& l_mat, const Vec& kvec, const Tolerances& tol, int max_pivots) {
  const int n = static_cast<int>(kvec.size());
  LemkeOutcome out;
  out.zeta = Vec::Zero(n);
  if (n == 0) {
    out.solved = true;
    return out;
  }
  if (kvec.minCoeff() >= -tol.pivot) {
    out.solved = true;
    return out;
  }

  // Columns: [w | zeta | theta | rhs].
  Mat t(n, 2 * n + 2);
  t.leftCols(n) = Mat::Identity(n, n);
  t.middleCols(n, n) = -l_mat;
  t.col(2 * n) = -Vec::Ones(n);
  t.col(2 * n + 1) = kvec;
  const int rhs = 2 * n + 1;
  std::vector<int> basis(n);
  for (int i = 0; i < n; ++i) basis[i] = i;

  auto pivot = [&](int row, int col) {
    t.row(row) /= t(row, col);
    for (int i = 0; i < n; ++i)
      if (i != row) t.row(i) -= t(i, col) * t.row(row);
    t.col(rhs) = t.col(rhs).cwiseMax(0.0);
  };

  int exiting_row;
  t.col(rhs).minCoeff(&exiting_row);
  pivot(exiting_row, 2 * n);
  const int theta_row_var = 2 * n;
  int entering = basis[exiting_row] + n;  // complement of the leaving w
  basis[exiting_row] = theta_row_var;

  for (out.pivots = 1; out.pivots <= max_pivots; ++out.pivots) {
    int row = -1;
    double best_ratio = kInf;
    for (int i = 0; i < n; ++i) {
      if (t(i, entering) > tol.pivot) {
        const double ratio = t(i, rhs) / t(i, entering);
        if (ratio < best_ratio - tol.pivot) {
          best_ratio = ratio;
          row = i;
        } else if (row >= 0 && ratio <= best_ratio + tol.pivot) {
          if (basis[i] == theta_row_var) {
            row = i;  // prefer driving theta out
            best_ratio = std::min(best_ratio, ratio);
          } else if (basis[row] != theta_row_var) {
            row = lex_min_row(t, row, i, entering, n);
          }
        }
      }
    }
    if (row < 0) {
      out.ray = true;
      return out;
    }
    const int leaving = basis[row];
    pivot(row, entering);
    basis[row] = entering;
    if (leaving == theta_row_var) {
      for (int i = 0; i < n; ++i)
        if (basis[i] >= n && basis[i] < 2 * n) out.zeta[basis[i] - n] = t(i, rhs);
      out.solved = true;
      return out;
    }
    entering = (leaving < n) ? leaving + n : leaving - n;
  }
  return out;  // iteration limit
}

// Policy iteration on the bound states: rows are declared interior
// (residual pinned to zero) or at a bound (variable pinned), the
// resulting linear system is solved, and the states are revised from the
// violations. Exact on nondegenerate instances, including the
// non-monotone stationarity stacks that make Lemke drift onto secondary
// rays; anything that cycles or goes inconsistent falls back to Lemke.
std::optional<Vec> policy_iteration(const Lmcp& p, const Tolerances& tol) {
  const int k = p.dim();
  enum class State { Interior, Lower, Upper };
  // Start from the all-inactive guess: bounded variables sit at a bound,
  // free variables satisfy their equations.
  std::vector<State> state(k, State::Interior);
  for (int i = 0; i < k; ++i) {
    if (std::isfinite(p.l[i]))
      state[i] = State::Lower;
    else if (std::isfinite(p.u[i]))
      state[i] = State::Upper;
  }

  const int max_rounds = 10 + 2 * k;
  for (int round = 0; round < max_rounds; ++round) {
    // Assemble equations: pinned residuals and pinned variables.
    std::vector<int> eq_rows, pinned;
    for (int i = 0; i < k; ++i) {
      if (state[i] == State::Interior)
        eq_rows.push_back(i);
      else
        pinned.push_back(i);
    }
    Mat a(k, k);
    Vec b(k);
    int r = 0;
    for (int i : eq_rows) {
      a.row(r) = p.M.row(i);
      b[r] = -p.q[i];
      ++r;
    }
    for (int i : pinned) {
      a.row(r).setZero();
      a(r, i) = 1.0;
      b[r] = state[i] == State::Lower ? p.l[i] : p.u[i];
      ++r;
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
    cod.setThreshold(tol.pivot);
    const Vec z = cod.solve(b);
    if ((a * z - b).lpNorm<Eigen::Infinity>() > 1e-10 * (1.0 + b.lpNorm<Eigen::Infinity>()))
      return std::nullopt;  // inconsistent under this policy

    // Revise the policy from bound and sign violations.
    const Vec res = p.M * z + p.q;
    bool changed = false;
    for (int i = 0; i < k; ++i) {
      if (classify(p.l[i], p.u[i]) == VarClass::Fixed) continue;
      switch (state[i]) {
        case State::Interior:
          if (z[i] < p.l[i] - tol.pivot) {
            state[i] = State::Lower;
            changed = true;
          } else if (z[i] > p.u[i] + tol.pivot) {
            state[i] = State::Upper;
            changed = true;
          }
          break;
        case State::Lower:
          if (res[i] < -tol.pivot) {
            state[i] = State::Interior;
            changed = true;
          }
          break;
        case State::Upper:
          if (res[i] > tol.pivot) {
            state[i] = State::Interior;
            changed = true;
          }
          break;
      }
    }
    if (!changed) {
      // Verify the full complementarity system before accepting.
      Vec w_plus = res.cwiseMax(0.0);
      Vec w_minus = (-res).cwiseMax(0.0);
      double worst = 0.0;
      for (int i = 0; i < k; ++i) {
        if (std::isfinite(p.l[i]))
          worst = std::max(worst, std::abs(std::min(z[i] - p.l[i], w_plus[i])));
        else
          worst = std::max(worst, w_plus[i]);
        if (std::isfinite(p.u[i]))
          worst = std::max(worst, std::abs(std::min(p.u[i] - z[i], w_minus[i])));
        else
          worst = std::max(worst, w_minus[i]);
        if (std::isfinite(p.l[i])) worst = std::max(worst, p.l[i] - z[i]);
        if (std::isfinite(p.u[i])) worst = std::max(worst, z[i] - p.u[i]);
      }
      if (worst <= 1e-9 * (1.0 + p.q.lpNorm<Eigen::Infinity>())) return z;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

double worst_violation(const Lmcp& p, const Vec& z, const Vec& w_plus, const Vec& w_minus) {
  double worst = 0.0;
  const Vec r = p.M * z + p.q;
  for (int i = 0; i < p.dim(); ++i) {
    worst = std::max(worst, std::abs(r[i] - (w_plus[i] - w_minus[i])));
    worst = std::max(worst, -w_plus[i]);
    worst = std::max(worst, -w_minus[i]);
    if (std::isfinite(p.l[i])) {
      worst = std::max(worst, p.l[i] - z[i]);
      worst = std::max(worst, std::abs(std::min(z[i] - p.l[i], w_plus[i])));
    } else {
      worst = std::max(worst, w_plus[i]);
    }
    if (std::isfinite(p.u[i])) {
      worst = std::max(worst, z[i] - p.u[i]);
      worst = std::max(worst, std::abs(std::min(p.u[i] - z[i], w_minus[i])));
    } else {
      worst = std::max(worst, w_minus[i]);
    }
  }
  return worst;
}

LmcpSolution finish(const Lmcp& p, Vec z, LmcpStatus status, int pivots) {
  LmcpSolution sol;
  const Vec r = p.M * z + p.q;
  sol.z = std::move(z);
  sol.w_plus = r.cwiseMax(0.0);
  sol.w_minus = (-r).cwiseMax(0.0);
  sol.status = status;
  sol.pivots = pivots;
  sol.residual = worst_violation(p, sol.z, sol.w_plus, sol.w_minus);
  return sol;
}

}  // namespace

LmcpSolution solve_lmcp(const Lmcp& problem, const Tolerances& tol, int max_pivots) {
  problem.validate();
  const int k = problem.dim();

  bool all_free = true;
  for (int i = 0; i < k; ++i)
    if (std::isfinite(problem.l[i]) || std::isfinite(problem.u[i])) all_free = false;
  if (all_free) {
    // Pure linear system M z + q = 0.
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(problem.M);
    cod.setThreshold(tol.pivot);
    Vec z = cod.solve(-problem.q);
    const double res = (problem.M * z + problem.q).lpNorm<Eigen::Infinity>();
    const bool ok = res <= 1e-8 * (1.0 + problem.q.lpNorm<Eigen::Infinity>());
    return finish(problem, std::move(z),
                  ok ? LmcpStatus::Solved : LmcpStatus::RayTermination, 0);
  }

  if (auto direct = policy_iteration(problem, tol))
    return finish(problem, std::move(*direct), LmcpStatus::Solved, 0);

  const Conversion conv = build_conversion(problem, tol);
  if (conv.inconsistent)
    return finish(problem, Vec(conv.base), LmcpStatus::RayTermination, 0);
  Mat l_mat;
  Vec kvec;
  assemble_lcp(problem, conv, l_mat, kvec);
  const int cap = max_pivots > 0 ? max_pivots : 50 * std::max<int>(k, static_cast<int>(kvec.size()));

  const LemkeOutcome out = lemke(l_mat, kvec, tol, cap);
  Vec z = conv.base;
  for (std::size_t j = 0; j < conv.cols.size(); ++j) {
    const auto& col = conv.cols[j];
    if (col.row >= 0 && !col.is_box_multiplier)
      z[col.row] += col.sign * out.zeta[static_cast<int>(j)];
  }
  if (out.solved) {
    LmcpSolution sol = finish(problem, std::move(z), LmcpStatus::Solved, out.pivots);
    if (sol.residual > 1e-8 * (1.0 + problem.q.lpNorm<Eigen::Infinity>()))
      sol.status = LmcpStatus::RayTermination;  // numerically unusable pivot result
    return sol;
  }
  return finish(problem, std::move(z),
                out.ray ? LmcpStatus::RayTermination : LmcpStatus::IterationLimit,
                out.pivots);
}

}  // namespace qpn
