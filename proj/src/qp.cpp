#include "qpn/qp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpn {

QuadCost::QuadCost(Mat q_mat, Vec q_vec) : Q(std::move(q_mat)), q(std::move(q_vec)) {
  if (Q.rows() != Q.cols() || Q.rows() != q.size())
    throw SolverError("quadratic cost shape mismatch");
  Q = 0.5 * (Q + Q.transpose().eval());
}

namespace {

struct DenseQp {
  Mat Q;
  Vec q;
  Mat a_eq;
  Vec b_eq;  // a_eq x + b_eq = 0
  Mat a_in;
  Vec b_in;  // a_in x + b_in >= 0
};

struct AsqOutcome {
  SolveStatus status = SolveStatus::Optimal;
  Vec x;
};

// Primal active-set method for convex QPs, null-space variant. The
// working set always contains every equality row; inequality rows enter
// and leave with lowest-index tie breaking to avoid cycling. Zero
// curvature directions (within 1e-10) with a descent component are
// followed as rays, which yields exact LP behaviour for Q = 0.
class ActiveSetSolver {
 public:
  ActiveSetSolver(const DenseQp& qp, const Tolerances& tol) : qp_(qp), tol_(tol) {}

  AsqOutcome solve(Vec x) {
    const int n = static_cast<int>(x.size());
    const int mi = static_cast<int>(qp_.a_in.rows());
    std::vector<bool> in_working(mi, false);
    std::vector<int> working;

    const int max_iter = 200 + 20 * (n + mi);
    for (int iter = 0; iter < max_iter; ++iter) {
      const Vec g = qp_.Q * x + qp_.q;

      Mat c(qp_.a_eq.rows() + static_cast<int>(working.size()), n);
      if (qp_.a_eq.rows() > 0) c.topRows(qp_.a_eq.rows()) = qp_.a_eq;
      for (std::size_t k = 0; k < working.size(); ++k)
        c.row(qp_.a_eq.rows() + static_cast<int>(k)) = qp_.a_in.row(working[k]);

      Vec p = Vec::Zero(n);
      bool ray = false;
      Mat z;
      if (c.rows() == 0) {
        z = Mat::Identity(n, n);
      } else {
        Eigen::ColPivHouseholderQR<Mat> qr(c.transpose());
        qr.setThreshold(tol_.pivot);
        const int rank = static_cast<int>(qr.rank());
        z = qr.householderQ() * Mat::Identity(n, n);
        z = z.rightCols(n - rank).eval();
      }

      if (z.cols() > 0) {
        Mat h = z.transpose() * qp_.Q * z;
        h = 0.5 * (h + h.transpose().eval());
        const Vec cg = z.transpose() * g;
        Eigen::SelfAdjointEigenSolver<Mat> es(h);
        const Vec evals = es.eigenvalues();
        const Mat evecs = es.eigenvectors();
        const double scale = std::max(1.0, evals.cwiseAbs().maxCoeff());
        if (evals.minCoeff() < -1e-8 * scale)
          throw SolverError("QP cost is not convex on the free subspace");

        const Vec chat = evecs.transpose() * cg;
        Vec u_zero = Vec::Zero(z.cols());
        Vec u_newton = Vec::Zero(z.cols());
        for (int i = 0; i < evals.size(); ++i) {
          if (evals[i] <= 1e-10 * scale)
            u_zero -= chat[i] * evecs.col(i);
          else
            u_newton -= (chat[i] / evals[i]) * evecs.col(i);
        }
        if (u_zero.norm() > 1e-10 * (1.0 + g.norm())) {
          p = z * u_zero.normalized();
          ray = true;
        } else {
          p = z * u_newton;
        }
      }

      const double step_scale = 1.0 + x.lpNorm<Eigen::Infinity>();
      if (!ray && p.lpNorm<Eigen::Infinity>() <= 1e-11 * step_scale) {
        // Stationary on the working set; inspect multipliers.
        int drop = -1;
        if (!working.empty() || qp_.a_eq.rows() > 0) {
          Eigen::CompleteOrthogonalDecomposition<Mat> cod(c.transpose());
          const Vec mu = cod.solve(g);
          for (std::size_t k = 0; k < working.size(); ++k) {
            const double m = mu[qp_.a_eq.rows() + static_cast<int>(k)];
            if (m < -10.0 * tol_.pivot) {
              drop = static_cast<int>(k);
              break;  // lowest index first
            }
          }
        }
        if (drop < 0) return {SolveStatus::Optimal, x};
        in_working[working[drop]] = false;
        working.erase(working.begin() + drop);
        continue;
      }

      // Ratio test against rows outside the working set.
      double alpha = ray ? kInf : 1.0;
      int blocking = -1;
      for (int i = 0; i < mi; ++i) {
        if (in_working[i]) continue;
        const double d = qp_.a_in.row(i).dot(p);
        if (d >= -tol_.pivot) continue;
        const double slack = qp_.a_in.row(i).dot(x) + qp_.b_in[i];
        const double a_i = std::max(0.0, slack / -d);
        if (blocking < 0 ? a_i < alpha : a_i < alpha - 1e-12 * (1.0 + alpha)) {
          alpha = a_i;
          blocking = i;
        } else if (blocking >= 0 && a_i <= alpha + 1e-12 * (1.0 + alpha) && i < blocking) {
          blocking = i;
        }
      }

      if (blocking >= 0) {
        x += alpha * p;
        in_working[blocking] = true;
        working.insert(std::upper_bound(working.begin(), working.end(), blocking), blocking);
      } else if (ray) {
        return {SolveStatus::Unbounded, x};
      } else {
        x += p;
      }
    }
    throw SolverError("active-set iteration limit exceeded");
  }

 private:
  const DenseQp& qp_;
  const Tolerances& tol_;
};

// Least-squares solution of the equality block, or nullopt if inconsistent.
std::optional<Vec> equality_solution(const Mat& a_eq, const Vec& b_eq, int n,
                                     const Tolerances& tol) {
  if (a_eq.rows() == 0) return Vec::Zero(n);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(a_eq);
  cod.setThreshold(tol.pivot);
  Vec x0 = cod.solve(-b_eq);
  const double res = (a_eq * x0 + b_eq).lpNorm<Eigen::Infinity>();
  if (res > tol.feas * (1.0 + b_eq.lpNorm<Eigen::Infinity>())) return std::nullopt;
  return x0;
}

// Phase 1: minimize 1/2 t^2 subject to rows relaxed by t. The optimum is
// the least max-violation, so t* <= feas decides feasibility exactly.
std::optional<Vec> phase1(const DenseQp& qp, const Tolerances& tol) {
  const int n = static_cast<int>(qp.Q.rows());
  auto x0 = equality_solution(qp.a_eq, qp.b_eq, n, tol);
  if (!x0) return std::nullopt;
  if (qp.a_in.rows() == 0) return x0;
  const double viol = -(qp.a_in * *x0 + qp.b_in).minCoeff();
  if (viol <= tol.feas) return x0;

  DenseQp ext;
  ext.Q = Mat::Zero(n + 1, n + 1);
  ext.Q(n, n) = 1.0;
  ext.q = Vec::Zero(n + 1);
  ext.a_eq = Mat::Zero(qp.a_eq.rows(), n + 1);
  if (qp.a_eq.rows() > 0) ext.a_eq.leftCols(n) = qp.a_eq;
  ext.b_eq = qp.b_eq;
  ext.a_in = Mat::Zero(qp.a_in.rows() + 1, n + 1);
  ext.a_in.topLeftCorner(qp.a_in.rows(), n) = qp.a_in;
  ext.a_in.col(n).head(qp.a_in.rows()).setOnes();
  ext.a_in(qp.a_in.rows(), n) = 1.0;  // t >= 0
  ext.b_in = Vec::Zero(qp.a_in.rows() + 1);
  ext.b_in.head(qp.a_in.rows()) = qp.b_in;

  Vec start(n + 1);
  start.head(n) = *x0;
  start[n] = viol * 1.01 + 1e-3;
  ActiveSetSolver solver(ext, tol);
  const AsqOutcome out = solver.solve(start);
  if (out.status != SolveStatus::Optimal)
    throw SolverError("phase-1 subproblem did not reach optimality");
  if (out.x[n] > tol.feas) return std::nullopt;
  return out.x.head(n).eval();
}

// Splits the rows of a closed polyhedron into equality/inequality blocks,
// dropping zero-normal rows. Returns false when a zero row is infeasible.
bool split_rows(const NncPolyhedron& closed, Mat& a_eq, Vec& b_eq, Mat& a_in, Vec& b_in,
                const Tolerances& tol) {
  std::vector<const Halfspace*> eqs, ins;
  for (const auto& h : closed.rows()) {
    if (h.kind == RowKind::Strict)
      throw GeometryError("expected a closed polyhedron (strict row present)");
    if (h.normal.lpNorm<Eigen::Infinity>() <= tol.pivot) {
      if (h.trivially_infeasible(tol.feas)) return false;
      continue;
    }
    (h.kind == RowKind::Equality ? eqs : ins).push_back(&h);
  }
  const int n = closed.dim();
  a_eq.resize(static_cast<int>(eqs.size()), n);
  b_eq.resize(static_cast<int>(eqs.size()));
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    a_eq.row(static_cast<int>(i)) = eqs[i]->normal.transpose();
    b_eq[static_cast<int>(i)] = eqs[i]->offset;
  }
  a_in.resize(static_cast<int>(ins.size()), n);
  b_in.resize(static_cast<int>(ins.size()));
  for (std::size_t i = 0; i < ins.size(); ++i) {
    a_in.row(static_cast<int>(i)) = ins[i]->normal.transpose();
    b_in[static_cast<int>(i)] = ins[i]->offset;
  }
  return true;
}

}  // namespace

QpSolveResult solve_qp(const QuadCost& cost, const NncPolyhedron& region,
                       const IndexSet& free, const Vec& reference,
                       const Tolerances& tol) {
  const int n = cost.dim();
  if (region.dim() != n || reference.size() != n)
    throw SolverError("solve_qp dimension mismatch");

  const int nf = static_cast<int>(free.size());
  std::vector<bool> is_free(n, false);
  for (int j : free) {
    if (j < 0 || j >= n) throw SolverError("solve_qp free index out of range");
    is_free[j] = true;
  }

  // Reduce to the free coordinates; everything else is a parameter.
  Mat q_ff(nf, nf);
  Vec q_f(nf);
  for (int i = 0; i < nf; ++i) {
    for (int j = 0; j < nf; ++j) q_ff(i, j) = cost.Q(free[i], free[j]);
    double lin = cost.q[free[i]];
    for (int j = 0; j < n; ++j)
      if (!is_free[j]) lin += cost.Q(free[i], j) * reference[j];
    q_f[i] = lin;
  }
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(q_ff);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (nf > 0 && es.eigenvalues().minCoeff() < -1e-8 * scale)
      throw SolverError("cost is not convex on the requested coordinates");
  }

  DenseQp qp;
  qp.Q = q_ff;
  qp.q = q_f;
  std::vector<Vec> eq_rows, in_rows;
  std::vector<double> eq_off, in_off;
  for (const auto& h : region.rows()) {
    if (h.kind == RowKind::Strict)
      throw GeometryError("solve_qp expects a closed region");
    Vec a_f(nf);
    double off = h.offset;
    for (int i = 0; i < nf; ++i) a_f[i] = h.normal[free[i]];
    for (int j = 0; j < n; ++j)
      if (!is_free[j]) off += h.normal[j] * reference[j];
    if (a_f.lpNorm<Eigen::Infinity>() <= tol.pivot) {
      const bool bad = (h.kind == RowKind::Equality) ? std::abs(off) > tol.feas
                                                     : off < -tol.feas;
      if (bad) return {reference, 0.0, SolveStatus::Infeasible};
      continue;
    }
    if (h.kind == RowKind::Equality) {
      eq_rows.push_back(a_f);
      eq_off.push_back(off);
    } else {
      in_rows.push_back(a_f);
      in_off.push_back(off);
    }
  }
  qp.a_eq.resize(static_cast<int>(eq_rows.size()), nf);
  qp.b_eq.resize(static_cast<int>(eq_rows.size()));
  for (std::size_t i = 0; i < eq_rows.size(); ++i) {
    qp.a_eq.row(static_cast<int>(i)) = eq_rows[i].transpose();
    qp.b_eq[static_cast<int>(i)] = eq_off[i];
  }
  qp.a_in.resize(static_cast<int>(in_rows.size()), nf);
  qp.b_in.resize(static_cast<int>(in_rows.size()));
  for (std::size_t i = 0; i < in_rows.size(); ++i) {
    qp.a_in.row(static_cast<int>(i)) = in_rows[i].transpose();
    qp.b_in[static_cast<int>(i)] = in_off[i];
  }

  auto x0 = phase1(qp, tol);
  if (!x0) return {reference, 0.0, SolveStatus::Infeasible};

  ActiveSetSolver solver(qp, tol);
  const AsqOutcome out = solver.solve(*x0);

  Vec full = reference;
  for (int i = 0; i < nf; ++i) full[free[i]] = out.x[i];
  return {full, cost.value(full), out.status};
}

NnlsResult nnls(const Mat& a, const Vec& b, const Tolerances& tol) {
  const int k = static_cast<int>(a.cols());
  Vec lambda = Vec::Zero(k);
  if (k == 0) return {lambda, b.norm()};

  std::vector<bool> passive(k, false);
  const double w_tol = 1e-10 * (1.0 + (a.transpose() * b).cwiseAbs().maxCoeff());
  const int max_outer = 3 * k + 30;

  auto solve_passive = [&](const std::vector<int>& idx) {
    Mat ap(a.rows(), static_cast<int>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) ap.col(static_cast<int>(i)) = a.col(idx[i]);
    Eigen::ColPivHouseholderQR<Mat> qr(ap);
    return Vec(qr.solve(b));
  };

  for (int outer = 0; outer < max_outer; ++outer) {
    const Vec w = a.transpose() * (b - a * lambda);
    int enter = -1;
    double best = w_tol;
    for (int i = 0; i < k; ++i) {
      if (!passive[i] && w[i] > best) {
        best = w[i];
        enter = i;
      }
    }
    if (enter < 0) break;
    passive[enter] = true;

    for (int inner = 0; inner < 2 * k + 10; ++inner) {
      std::vector<int> idx;
      for (int i = 0; i < k; ++i)
        if (passive[i]) idx.push_back(i);
      const Vec s = solve_passive(idx);
      double s_min = kInf;
      for (std::size_t i = 0; i < idx.size(); ++i) s_min = std::min(s_min, s[static_cast<int>(i)]);
      if (s_min > tol.pivot) {
        lambda.setZero();
        for (std::size_t i = 0; i < idx.size(); ++i) lambda[idx[i]] = s[static_cast<int>(i)];
        break;
      }
      double alpha = 1.0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const double si = s[static_cast<int>(i)];
        const double li = lambda[idx[i]];
        if (si <= tol.pivot && li - si > tol.pivot)
          alpha = std::min(alpha, li / (li - si));
      }
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const int j = idx[i];
        lambda[j] += alpha * (s[static_cast<int>(i)] - lambda[j]);
        if (lambda[j] <= tol.pivot) {
          lambda[j] = 0.0;
          passive[j] = false;
        }
      }
    }
  }
  return {lambda, (a * lambda - b).norm()};
}

std::optional<Vec> feasible_point(const NncPolyhedron& closed, const Tolerances& tol) {
  DenseQp qp;
  qp.Q = Mat::Zero(closed.dim(), closed.dim());
  qp.q = Vec::Zero(closed.dim());
  if (!split_rows(closed, qp.a_eq, qp.b_eq, qp.a_in, qp.b_in, tol)) return std::nullopt;
  return phase1(qp, tol);
}

bool is_empty(const NncPolyhedron& p, const Tolerances& tol) {
  if (p.has_trivially_infeasible_row(tol.feas)) return true;
  const auto x = feasible_point(p.closure(), tol);
  if (!x) return true;
  if (!p.has_strict_rows()) return false;

  // Maximize the worst strict-row slack t over the closure.
  const int n = p.dim();
  std::vector<Halfspace> rows;
  for (const auto& h : p.rows()) {
    Vec a(n + 1);
    a.head(n) = h.normal;
    a[n] = (h.kind == RowKind::Strict) ? -1.0 : 0.0;
    rows.emplace_back(std::move(a), h.offset,
                      h.kind == RowKind::Equality ? RowKind::Equality : RowKind::NonStrict);
  }
  NncPolyhedron lifted(n + 1, std::move(rows));
  QuadCost cost(Mat::Zero(n + 1, n + 1), -Vec::Unit(n + 1, n));
  IndexSet all(n + 1);
  for (int i = 0; i <= n; ++i) all[i] = i;
  const QpSolveResult res = solve_qp(cost, lifted, all, Vec::Zero(n + 1), tol);
  if (res.status == SolveStatus::Unbounded) return false;
  if (res.status == SolveStatus::Infeasible) return true;
  return res.x[n] <= tol.feas;
}

PolyUnion make_union(int dim, std::vector<NncPolyhedron> pieces, const Tolerances& tol) {
  std::vector<NncPolyhedron> kept;
  for (auto& piece : pieces) {
    if (piece.dim() != dim) throw GeometryError("make_union piece dimension mismatch");
    if (is_empty(piece, tol)) continue;
    kept.push_back(std::move(piece));
  }
  return PolyUnion(dim, canonical_pieces(std::move(kept), tol.dedup));
}

PolyUnion intersect_unions(const PolyUnion& u, const PolyUnion& v, const Tolerances& tol) {
  if (u.dim() != v.dim()) throw GeometryError("intersect_unions dimension mismatch");
  std::vector<NncPolyhedron> products;
  for (const auto& a : u.pieces())
    for (const auto& b : v.pieces()) products.push_back(intersect(a, b));
  return make_union(u.dim(), std::move(products), tol);
}

}  // namespace qpn
