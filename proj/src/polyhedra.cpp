#include "qpn/polyhedra.hpp"

#include <algorithm>
#include <cmath>

namespace qpn {

bool Halfspace::satisfied(const Vec& x, double tol) const {
  const double r = residual(x);
  switch (kind) {
    case RowKind::NonStrict:
      return r >= -tol;
    case RowKind::Strict:
      return r > tol;
    case RowKind::Equality:
      return std::abs(r) <= tol;
  }
  return false;
}

bool Halfspace::trivially_infeasible(double tol) const {
  if (normal.lpNorm<Eigen::Infinity>() > tol) return false;
  switch (kind) {
    case RowKind::NonStrict:
      return offset < -tol;
    case RowKind::Strict:
      return offset <= tol;
    case RowKind::Equality:
      return std::abs(offset) > tol;
  }
  return false;
}

bool Halfspace::trivially_satisfied(double tol) const {
  if (normal.lpNorm<Eigen::Infinity>() > tol) return false;
  return !trivially_infeasible(tol);
}

NncPolyhedron::NncPolyhedron(int dim, std::vector<Halfspace> rows) : NncPolyhedron(dim) {
  for (auto& h : rows) add_row(std::move(h));
}

void NncPolyhedron::add_row(Halfspace h) {
  if (h.normal.size() != dim_)
    throw GeometryError("halfspace normal length does not match polyhedron dimension");
  rows_.push_back(std::move(h));
}

bool NncPolyhedron::has_strict_rows() const {
  return std::any_of(rows_.begin(), rows_.end(),
                     [](const Halfspace& h) { return h.kind == RowKind::Strict; });
}

bool NncPolyhedron::has_trivially_infeasible_row(double tol) const {
  return std::any_of(rows_.begin(), rows_.end(),
                     [tol](const Halfspace& h) { return h.trivially_infeasible(tol); });
}

bool NncPolyhedron::contains(const Vec& x, double tol) const {
  if (x.size() != dim_) throw GeometryError("point dimension mismatch in contains");
  return std::all_of(rows_.begin(), rows_.end(),
                     [&](const Halfspace& h) { return h.satisfied(x, tol); });
}

NncPolyhedron NncPolyhedron::closure() const {
  NncPolyhedron out(dim_);
  for (const auto& h : rows_) {
    Halfspace c = h;
    if (c.kind == RowKind::Strict) c.kind = RowKind::NonStrict;
    out.add_row(std::move(c));
  }
  return out;
}

bool NncPolyhedron::closure_contains(const Vec& x, double tol) const {
  if (x.size() != dim_) throw GeometryError("point dimension mismatch in closure_contains");
  for (const auto& h : rows_) {
    const double r = h.residual(x);
    if (h.kind == RowKind::Equality) {
      if (std::abs(r) > tol) return false;
    } else if (r < -tol) {
      return false;
    }
  }
  return true;
}

PolyUnion::PolyUnion(int dim, std::vector<NncPolyhedron> pieces)
    : dim_(dim), pieces_(std::move(pieces)) {
  for (const auto& p : pieces_)
    if (p.dim() != dim_) throw GeometryError("union piece dimension mismatch");
}

bool PolyUnion::contains(const Vec& x, double tol) const {
  return std::any_of(pieces_.begin(), pieces_.end(),
                     [&](const NncPolyhedron& p) { return p.contains(x, tol); });
}

NncPolyhedron intersect(const NncPolyhedron& p, const NncPolyhedron& q) {
  if (p.dim() != q.dim()) throw GeometryError("dimension mismatch in intersect");
  NncPolyhedron out = p;
  for (const auto& h : q.rows()) out.add_row(h);
  return out;
}

PolyUnion complement_of_closure(const NncPolyhedron& p) {
  std::vector<NncPolyhedron> pieces;
  for (const auto& h : p.rows()) {
    if (h.normal.lpNorm<Eigen::Infinity>() == 0.0) continue;
    // The negation of <a,x>+b >= 0 is the open halfspace <-a,x>-b > 0.
    NncPolyhedron piece(p.dim());
    switch (h.kind) {
      case RowKind::NonStrict:
      case RowKind::Strict:
        piece.add_row(Halfspace(-h.normal, -h.offset, RowKind::Strict));
        pieces.push_back(std::move(piece));
        break;
      case RowKind::Equality: {
        piece.add_row(Halfspace(h.normal, h.offset, RowKind::Strict));
        pieces.push_back(std::move(piece));
        NncPolyhedron other(p.dim());
        other.add_row(Halfspace(-h.normal, -h.offset, RowKind::Strict));
        pieces.push_back(std::move(other));
        break;
      }
    }
  }
  return PolyUnion(p.dim(), canonical_pieces(std::move(pieces), 1e-12));
}

namespace {

Halfspace normalized_row(const Halfspace& h) {
  Halfspace out = h;
  const double scale = out.normal.norm();
  if (scale > 0.0) {
    out.normal /= scale;
    out.offset /= scale;
  }
  if (out.kind == RowKind::Equality) {
    // Fix the sign so that equality rows compare orientation-free.
    double lead = 0.0;
    for (int i = 0; i < out.normal.size(); ++i) {
      if (std::abs(out.normal[i]) > 1e-12) {
        lead = out.normal[i];
        break;
      }
    }
    if (lead == 0.0) lead = out.offset;
    if (lead < 0.0) {
      out.normal = -out.normal;
      out.offset = -out.offset;
    }
  }
  return out;
}

std::vector<double> row_key(const Halfspace& h) {
  std::vector<double> key;
  key.reserve(h.normal.size() + 2);
  key.push_back(static_cast<double>(h.kind));
  for (int i = 0; i < h.normal.size(); ++i) key.push_back(h.normal[i]);
  key.push_back(h.offset);
  return key;
}

}  // namespace

NncPolyhedron normalized(const NncPolyhedron& p) {
  std::vector<Halfspace> rows;
  rows.reserve(p.rows().size());
  for (const auto& h : p.rows()) rows.push_back(normalized_row(h));
  std::sort(rows.begin(), rows.end(), [](const Halfspace& a, const Halfspace& b) {
    return row_key(a) < row_key(b);
  });
  // Duplicate rows accumulate through repeated intersection; drop them
  // (and trivially satisfied zero rows) up to the dedup threshold.
  std::vector<Halfspace> unique_rows;
  for (auto& h : rows) {
    if (h.trivially_satisfied(1e-12)) continue;
    if (!unique_rows.empty()) {
      const auto ka = row_key(unique_rows.back());
      const auto kb = row_key(h);
      bool same = ka.size() == kb.size();
      for (std::size_t i = 0; same && i < ka.size(); ++i)
        if (std::abs(ka[i] - kb[i]) > 1e-8) same = false;
      if (same) continue;
    }
    unique_rows.push_back(std::move(h));
  }

  // A non-strict row implied by an equality row on the same hyperplane
  // carries no information.
  auto matches_equality = [&](const Halfspace& h) {
    for (const auto& e : unique_rows) {
      if (e.kind != RowKind::Equality) continue;
      const bool plus = (e.normal - h.normal).lpNorm<Eigen::Infinity>() <= 1e-8 &&
                        std::abs(e.offset - h.offset) <= 1e-8;
      const bool minus = (e.normal + h.normal).lpNorm<Eigen::Infinity>() <= 1e-8 &&
                         std::abs(e.offset + h.offset) <= 1e-8;
      if (plus || minus) return true;
    }
    return false;
  };
  std::vector<Halfspace> reduced;
  for (auto& h : unique_rows) {
    if (h.kind == RowKind::NonStrict && matches_equality(h)) continue;
    reduced.push_back(std::move(h));
  }
  return NncPolyhedron(p.dim(), std::move(reduced));
}

std::vector<double> canonical_key(const NncPolyhedron& p) {
  const NncPolyhedron n = normalized(p);
  std::vector<double> key;
  key.push_back(static_cast<double>(n.rows().size()));
  for (const auto& h : n.rows()) {
    auto rk = row_key(h);
    key.insert(key.end(), rk.begin(), rk.end());
  }
  return key;
}

bool rows_match(const NncPolyhedron& a, const NncPolyhedron& b, double tol) {
  if (a.dim() != b.dim() || a.rows().size() != b.rows().size()) return false;
  const auto ka = canonical_key(a);
  const auto kb = canonical_key(b);
  for (std::size_t i = 0; i < ka.size(); ++i)
    if (std::abs(ka[i] - kb[i]) > tol) return false;
  return true;
}

std::vector<NncPolyhedron> canonical_pieces(std::vector<NncPolyhedron> pieces, double tol) {
  std::vector<std::pair<std::vector<double>, NncPolyhedron>> keyed;
  keyed.reserve(pieces.size());
  for (auto& p : pieces) {
    NncPolyhedron clean = normalized(p);
    keyed.emplace_back(canonical_key(clean), std::move(clean));
  }
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<NncPolyhedron> out;
  for (auto& [key, piece] : keyed) {
    if (!out.empty() && rows_match(out.back(), piece, tol)) continue;
    out.push_back(std::move(piece));
  }
  return out;
}

}  // namespace qpn
