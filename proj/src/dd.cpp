#include <algorithm>
#include <cmath>
#include <numeric>

#include "qpn/polyhedra.hpp"

namespace qpn {

namespace {

struct DdRay {
  Vec dir;                 // unit direction
  std::vector<bool> tight; // per processed constraint, residual == 0
};

bool subset_of(const std::vector<bool>& a, const std::vector<bool>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

// Fukuda-Prodon combinatorial adjacency: the common tight set of r1, r2
// must not be contained in the tight set of any third ray.
bool adjacent(const std::vector<DdRay>& rays, std::size_t i, std::size_t j) {
  std::vector<bool> common(rays[i].tight.size());
  for (std::size_t k = 0; k < common.size(); ++k)
    common[k] = rays[i].tight[k] && rays[j].tight[k];
  for (std::size_t w = 0; w < rays.size(); ++w) {
    if (w == i || w == j) continue;
    if (subset_of(common, rays[w].tight)) return false;
  }
  return true;
}

void drop_parallel_duplicates(std::vector<DdRay>& rays) {
  std::vector<DdRay> out;
  for (auto& r : rays) {
    bool dup = false;
    for (const auto& kept : out) {
      if (kept.dir.dot(r.dir) > 1.0 - 1e-12) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(std::move(r));
  }
  rays = std::move(out);
}

}  // namespace

ConeGenerators cone_generators(const Mat& g, const Tolerances& tol) {
  const int d = static_cast<int>(g.cols());
  std::vector<Vec> lines;
  lines.reserve(d);
  for (int i = 0; i < d; ++i) lines.push_back(Vec::Unit(d, i));
  std::vector<DdRay> rays;
  std::size_t processed = 0;  // rows folded into the tight bitsets so far

  for (int r = 0; r < g.rows(); ++r) {
    Vec a = g.row(r).transpose();
    const double nrm = a.norm();
    if (nrm <= tol.pivot) continue;  // tautological 0 >= 0 row
    a /= nrm;

    // Lineality step: a line not orthogonal to the new row becomes a ray.
    int pivot = -1;
    double best = tol.pivot;
    for (std::size_t li = 0; li < lines.size(); ++li) {
      const double v = std::abs(a.dot(lines[li]));
      if (v > best) {
        best = v;
        pivot = static_cast<int>(li);
      }
    }
    if (pivot >= 0) {
      Vec lp = lines[pivot];
      if (a.dot(lp) < 0.0) lp = -lp;
      const double denom = a.dot(lp);
      std::vector<Vec> rest;
      for (std::size_t li = 0; li < lines.size(); ++li) {
        if (static_cast<int>(li) == pivot) continue;
        Vec l2 = lines[li] - (a.dot(lines[li]) / denom) * lp;
        if (l2.norm() > tol.pivot) rest.push_back(l2.normalized());
      }
      lines = std::move(rest);
      for (auto& ray : rays) {
        ray.dir -= (a.dot(ray.dir) / denom) * lp;
        const double n2 = ray.dir.norm();
        if (n2 > tol.pivot) ray.dir /= n2;
        ray.tight.push_back(true);
      }
      // The pivot line satisfied every earlier row with equality.
      DdRay born;
      born.dir = lp;
      born.tight.assign(processed, true);
      born.tight.push_back(false);
      rays.push_back(std::move(born));
      drop_parallel_duplicates(rays);
      ++processed;
      continue;
    }

    // All lines orthogonal: classify rays by the sign of the residual.
    std::vector<std::size_t> pos, zero, neg;
    std::vector<double> slack(rays.size());
    for (std::size_t i = 0; i < rays.size(); ++i) {
      slack[i] = a.dot(rays[i].dir);
      if (slack[i] > tol.pivot)
        pos.push_back(i);
      else if (slack[i] < -tol.pivot)
        neg.push_back(i);
      else
        zero.push_back(i);
    }
    if (neg.empty()) {
      for (std::size_t i = 0; i < rays.size(); ++i)
        rays[i].tight.push_back(std::abs(slack[i]) <= tol.pivot);
      ++processed;
      continue;
    }

    std::vector<DdRay> next;
    for (std::size_t i : pos) {
      DdRay keep = rays[i];
      keep.tight.push_back(false);
      next.push_back(std::move(keep));
    }
    for (std::size_t i : zero) {
      DdRay keep = rays[i];
      keep.tight.push_back(true);
      next.push_back(std::move(keep));
    }
    for (std::size_t p : pos) {
      for (std::size_t n : neg) {
        if (!adjacent(rays, p, n)) continue;
        Vec dir = slack[p] * rays[n].dir - slack[n] * rays[p].dir;
        const double nn = dir.norm();
        if (nn <= tol.pivot) continue;
        DdRay combo;
        combo.dir = dir / nn;
        combo.tight.resize(rays[p].tight.size());
        for (std::size_t k = 0; k < combo.tight.size(); ++k)
          combo.tight[k] = rays[p].tight[k] && rays[n].tight[k];
        combo.tight.push_back(true);
        next.push_back(std::move(combo));
      }
    }
    rays = std::move(next);
    drop_parallel_duplicates(rays);
    ++processed;
  }

  ConeGenerators out;
  for (auto& r : rays) out.rays.push_back(std::move(r.dir));
  out.lines = std::move(lines);
  return out;
}

namespace {

// Orthonormal kernel basis of a (possibly empty) equality system.
Mat kernel_basis(const Mat& e, double pivot_tol) {
  const int n = static_cast<int>(e.cols());
  if (e.rows() == 0) return Mat::Identity(n, n);
  Eigen::FullPivLU<Mat> lu(e);
  lu.setThreshold(pivot_tol);
  if (lu.dimensionOfKernel() == 0) return Mat(n, 0);
  Mat k = lu.kernel();
  Eigen::HouseholderQR<Mat> qr(k);
  Mat q = qr.householderQ() * Mat::Identity(n, static_cast<int>(k.cols()));
  return q;
}

void merge_generators(std::vector<Vec>& vs, bool unitize, double tol) {
  std::vector<Vec> out;
  for (auto& v : vs) {
    Vec cand = v;
    if (unitize) {
      const double n = cand.norm();
      if (n <= tol) continue;
      cand /= n;
    }
    bool dup = false;
    for (const auto& kept : out) {
      if ((kept - cand).lpNorm<Eigen::Infinity>() <= tol * (1.0 + kept.lpNorm<Eigen::Infinity>())) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(std::move(cand));
  }
  vs = std::move(out);
}

std::optional<VRep> vertex_enumerate_impl(const NncPolyhedron& p, const Tolerances& tol) {
  const NncPolyhedron closed = p.closure();
  const int n = closed.dim();
  if (closed.has_trivially_infeasible_row(tol.feas)) return std::nullopt;

  std::vector<const Halfspace*> eqs, ineqs;
  for (const auto& h : closed.rows()) {
    if (h.normal.lpNorm<Eigen::Infinity>() <= tol.pivot) continue;
    (h.kind == RowKind::Equality ? eqs : ineqs).push_back(&h);
  }

  Vec x0 = Vec::Zero(n);
  Mat basis = Mat::Identity(n, n);
  if (!eqs.empty()) {
    Mat e(static_cast<int>(eqs.size()), n);
    Vec f(static_cast<int>(eqs.size()));
    for (std::size_t i = 0; i < eqs.size(); ++i) {
      e.row(static_cast<int>(i)) = eqs[i]->normal.transpose();
      f[static_cast<int>(i)] = -eqs[i]->offset;
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(e);
    cod.setThreshold(tol.pivot);
    x0 = cod.solve(f);
    if ((e * x0 - f).lpNorm<Eigen::Infinity>() > tol.feas * (1.0 + f.lpNorm<Eigen::Infinity>()))
      return std::nullopt;  // inconsistent equalities
    basis = kernel_basis(e, tol.pivot);
  }
  const int r = static_cast<int>(basis.cols());

  // Reduced inequality rows in the kernel parametrization, homogenized
  // with the extra coordinate t (x = x0 + basis * y / t).
  struct Row {
    Vec coeffs;
    double weight;
  };
  std::vector<Row> reduced;
  for (const auto* h : ineqs) {
    Vec a_t = basis.transpose() * h->normal;
    const double b_t = h->normal.dot(x0) + h->offset;
    const double a_max = (r == 0) ? 0.0 : a_t.lpNorm<Eigen::Infinity>();
    if (a_max <= tol.pivot) {
      if (b_t < -tol.feas) return std::nullopt;
      continue;
    }
    Vec row(r + 1);
    row.head(r) = a_t;
    row[r] = b_t;
    reduced.push_back({std::move(row), h->normal.norm()});
  }
  std::stable_sort(reduced.begin(), reduced.end(),
                   [](const Row& a, const Row& b) { return a.weight > b.weight; });

  Mat g(static_cast<int>(reduced.size()) + 1, r + 1);
  g.setZero();
  g(0, r) = 1.0;  // t >= 0 first, so the t-direction leaves the lineality
  for (std::size_t i = 0; i < reduced.size(); ++i)
    g.row(static_cast<int>(i) + 1) = reduced[i].coeffs.transpose();

  const ConeGenerators cone = cone_generators(g, tol);

  VRep out;
  out.dim = n;
  for (const auto& ray : cone.rays) {
    const double t = ray[r];
    if (t > tol.pivot * 10.0) {
      out.vertices.push_back(x0 + basis * (ray.head(r) / t));
    } else {
      Vec d = basis * ray.head(r);
      if (d.norm() > tol.pivot) out.rays.push_back(std::move(d));
    }
  }
  for (const auto& line : cone.lines) {
    Vec d = basis * line.head(r);
    if (d.norm() > tol.pivot) {
      out.rays.push_back(d);
      out.rays.push_back(-d);
    }
  }
  if (out.vertices.empty()) return std::nullopt;
  merge_generators(out.vertices, /*unitize=*/false, tol.dedup);
  merge_generators(out.rays, /*unitize=*/true, tol.dedup);
  return out;
}

}  // namespace

VRep vertex_enumerate(const NncPolyhedron& p, const Tolerances& tol) {
  auto v = vertex_enumerate_impl(p, tol);
  if (!v) throw GeometryError("vertex enumeration of an empty polyhedron");
  return *v;
}

std::optional<VRep> try_vertex_enumerate(const NncPolyhedron& p, const Tolerances& tol) {
  return vertex_enumerate_impl(p, tol);
}

NncPolyhedron hrep_from_vrep(const VRep& v, const Tolerances& tol) {
  if (v.vertices.empty()) throw GeometryError("hrep_from_vrep: empty generator list");
  const int n = v.dim;

  // Facet cone {(a,b) : <v,a>+b >= 0 for vertices, <r,a> >= 0 for rays}.
  std::vector<Vec> grows;
  for (const auto& vert : v.vertices) {
    Vec row(n + 1);
    row.head(n) = vert;
    row[n] = 1.0;
    grows.push_back(std::move(row));
  }
  for (const auto& ray : v.rays) {
    Vec row(n + 1);
    row.head(n) = ray;
    row[n] = 0.0;
    grows.push_back(std::move(row));
  }
  std::stable_sort(grows.begin(), grows.end(),
                   [](const Vec& a, const Vec& b) { return a.norm() > b.norm(); });
  Mat g(static_cast<int>(grows.size()), n + 1);
  for (std::size_t i = 0; i < grows.size(); ++i) g.row(static_cast<int>(i)) = grows[i].transpose();

  const ConeGenerators cone = cone_generators(g, tol);

  NncPolyhedron out(n);
  auto emit = [&](const Vec& y, RowKind kind) {
    Vec a = y.head(n);
    const double b = y[n];
    if (a.lpNorm<Eigen::Infinity>() <= tol.pivot) return;  // trivial offset row
    const double s = a.norm();
    out.add_row(Halfspace(a / s, b / s, kind));
  };
  for (const auto& ray : cone.rays) emit(ray, RowKind::NonStrict);
  for (const auto& line : cone.lines) emit(line, RowKind::Equality);
  return normalized(out);
}

VRep project(const VRep& v, const IndexSet& keep) {
  if (v.vertices.empty() && v.rays.empty())
    throw GeometryError("project: empty generator list");
  for (int k : keep)
    if (k < 0 || k >= v.dim) throw GeometryError("project: index out of range");
  VRep out;
  out.dim = static_cast<int>(keep.size());
  auto pick = [&](const Vec& x) {
    Vec y(out.dim);
    for (std::size_t i = 0; i < keep.size(); ++i) y[static_cast<int>(i)] = x[keep[i]];
    return y;
  };
  for (const auto& vert : v.vertices) out.vertices.push_back(pick(vert));
  for (const auto& ray : v.rays) {
    Vec y = pick(ray);
    if (y.norm() > 1e-12) out.rays.push_back(std::move(y));
  }
  merge_generators(out.vertices, /*unitize=*/false, 1e-8);
  merge_generators(out.rays, /*unitize=*/true, 1e-8);
  return out;
}

}  // namespace qpn
