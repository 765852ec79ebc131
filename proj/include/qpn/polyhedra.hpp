#pragma once

#include <optional>
#include <vector>

#include "qpn/common.hpp"

namespace qpn {

/// Row relation of a halfspace: <a,x> + b  {>=, >, =}  0.
enum class RowKind { NonStrict, Strict, Equality };

struct Halfspace {
  Vec normal;
  double offset = 0.0;
  RowKind kind = RowKind::NonStrict;

  Halfspace() = default;
  Halfspace(Vec a, double b, RowKind k) : normal(std::move(a)), offset(b), kind(k) {}

  double residual(const Vec& x) const { return normal.dot(x) + offset; }

  /// NonStrict rows pass within -tol, Equality within +-tol, Strict rows
  /// must clear +tol.
  bool satisfied(const Vec& x, double tol) const;

  /// True when the normal is (numerically) zero and the offset makes the
  /// row unsatisfiable, which marks the whole set empty.
  bool trivially_infeasible(double tol) const;

  /// True for a zero-normal row that every point satisfies.
  bool trivially_satisfied(double tol) const;
};

/// A not-necessarily-closed polyhedron in mixed H-representation.
/// Immutable value type once built.
class NncPolyhedron {
 public:
  explicit NncPolyhedron(int dim) : dim_(dim) {
    if (dim <= 0) throw GeometryError("polyhedron dimension must be positive");
  }
  NncPolyhedron(int dim, std::vector<Halfspace> rows);

  static NncPolyhedron whole_space(int dim) { return NncPolyhedron(dim); }

  int dim() const { return dim_; }
  const std::vector<Halfspace>& rows() const { return rows_; }
  bool has_strict_rows() const;
  bool has_trivially_infeasible_row(double tol) const;

  void add_row(Halfspace h);

  bool contains(const Vec& x, double tol) const;

  /// Row-wise closure: every Strict row becomes NonStrict.
  NncPolyhedron closure() const;

  /// True iff the row-wise closure contains x. Cheap (no solve).
  bool closure_contains(const Vec& x, double tol) const;

 private:
  int dim_;
  std::vector<Halfspace> rows_;
};

/// Generator (V-) representation: conv(vertices) + coni(rays).
/// Nonempty iff at least one vertex. Lines appear as +-ray pairs.
struct VRep {
  int dim = 0;
  std::vector<Vec> vertices;
  std::vector<Vec> rays;
};

/// Finite union of same-dimension NNC polyhedra. The empty list is the
/// empty set. Builders in qp.hpp prune empty pieces and deduplicate.
class PolyUnion {
 public:
  explicit PolyUnion(int dim) : dim_(dim) {}
  PolyUnion(int dim, std::vector<NncPolyhedron> pieces);

  int dim() const { return dim_; }
  const std::vector<NncPolyhedron>& pieces() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }
  std::size_t size() const { return pieces_.size(); }

  bool contains(const Vec& x, double tol) const;

 private:
  int dim_;
  std::vector<NncPolyhedron> pieces_;
};

NncPolyhedron intersect(const NncPolyhedron& p, const NncPolyhedron& q);

/// Union over the rows r of closure(P) of the open single-row polyhedron
/// where r is strictly violated. Equals the complement of closure(P).
PolyUnion complement_of_closure(const NncPolyhedron& p);

/// Deduplicates, prunes empty pieces (feasibility solves) and orders
/// canonically. Implemented next to the feasibility solver.
PolyUnion make_union(int dim, std::vector<NncPolyhedron> pieces, const Tolerances& tol);

/// Pairwise piece intersection with empty pieces pruned.
PolyUnion intersect_unions(const PolyUnion& u, const PolyUnion& v, const Tolerances& tol);

/// Canonical form used for ordering and duplicate detection: rows are
/// normalized (unit normal, equality rows sign-fixed) and sorted.
std::vector<double> canonical_key(const NncPolyhedron& p);
NncPolyhedron normalized(const NncPolyhedron& p);
bool rows_match(const NncPolyhedron& a, const NncPolyhedron& b, double tol);

/// Sorts pieces by canonical key and merges row-identical duplicates.
std::vector<NncPolyhedron> canonical_pieces(std::vector<NncPolyhedron> pieces,
                                            double tol);

// ---- Double-description conversions (implemented in dd.cpp) ----

/// Extreme rays and lineality of the cone {y : G y >= 0}.
struct ConeGenerators {
  std::vector<Vec> rays;
  std::vector<Vec> lines;
};
ConeGenerators cone_generators(const Mat& g, const Tolerances& tol);

/// Double description of closure(P). Throws GeometryError when P is empty.
VRep vertex_enumerate(const NncPolyhedron& p, const Tolerances& tol);

/// As vertex_enumerate, but an empty closure yields nullopt.
std::optional<VRep> try_vertex_enumerate(const NncPolyhedron& p, const Tolerances& tol);

/// Minimal closed H-representation of conv(vertices)+coni(rays).
/// Throws GeometryError when the generator list is empty.
NncPolyhedron hrep_from_vrep(const VRep& v, const Tolerances& tol);

/// Coordinate projection of every generator onto `keep`.
VRep project(const VRep& v, const IndexSet& keep);

}  // namespace qpn
