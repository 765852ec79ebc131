#include <doctest.h>

#include "oracles.hpp"
#include "qpn/qp.hpp"

using namespace qpn;

namespace {

const Tolerances kTol;

NncPolyhedron box2(double lo, double hi) {
  NncPolyhedron p(2);
  for (int d = 0; d < 2; ++d) {
    p.add_row(Halfspace(Vec::Unit(2, d), -lo, RowKind::NonStrict));
    p.add_row(Halfspace(-Vec::Unit(2, d), hi, RowKind::NonStrict));
  }
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("qp");

TEST_CASE("follower slice solve clamps at the bound") {
  // min 1/2 (x4 - x3)^2 over x4 with x3 fixed at -3, subject to x4 >= 0.
  Mat q = Mat::Zero(4, 4);
  q(2, 2) = q(3, 3) = 1.0;
  q(2, 3) = q(3, 2) = -1.0;
  NncPolyhedron region(4);
  region.add_row(Halfspace(Vec::Unit(4, 3), 0.0, RowKind::NonStrict));
  Vec ref(4);
  ref << 0, 0, -3, 4;
  const QpSolveResult res = solve_qp(QuadCost(q, Vec::Zero(4)), region, {3}, ref, kTol);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.x[3] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(res.x[2] == doctest::Approx(-3.0));  // untouched parameter
}

TEST_CASE("unconstrained scalar minimum") {
  Mat q(1, 1);
  q << 1.0;
  const QpSolveResult res =
      solve_qp(QuadCost(q, Vec::Zero(1)), NncPolyhedron::whole_space(1), {0}, Vec::Zero(1), kTol);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.x[0] == doctest::Approx(0.0));
  CHECK(res.objective == doctest::Approx(0.0));
}

TEST_CASE("linear cost with tiny curvature matches the scalar closed form") {
  // min x + delta x^2 s.t. x >= 0; the closed form is max(0, -1/(2 delta)).
  const double delta = 1e-3;
  Mat q(1, 1);
  q << 2.0 * delta;
  Vec lin(1);
  lin << 1.0;
  NncPolyhedron region(1);
  region.add_row(Halfspace(Vec::Ones(1), 0.0, RowKind::NonStrict));
  const QpSolveResult res = solve_qp(QuadCost(q, lin), region, {0}, Vec::Zero(1), kTol);
  REQUIRE(res.status == SolveStatus::Optimal);
  const double expected = std::max(0.0, -1.0 / (2.0 * delta));
  CHECK(res.x[0] == doctest::Approx(expected).epsilon(1e-9));

  // Dropping the bound makes the closed form -1/(2 delta).
  const QpSolveResult free_res =
      solve_qp(QuadCost(q, lin), NncPolyhedron::whole_space(1), {0}, Vec::Zero(1), kTol);
  REQUIRE(free_res.status == SolveStatus::Optimal);
  CHECK(free_res.x[0] == doctest::Approx(-500.0).epsilon(1e-9));
}

TEST_CASE("infeasible and unbounded problems are reported") {
  NncPolyhedron empty(1);
  empty.add_row(Halfspace(Vec::Ones(1), -1.0, RowKind::NonStrict));   // x >= 1
  empty.add_row(Halfspace(-Vec::Ones(1), 0.0, RowKind::NonStrict));   // x <= 0
  Mat q(1, 1);
  q << 1.0;
  CHECK(solve_qp(QuadCost(q, Vec::Zero(1)), empty, {0}, Vec::Zero(1), kTol).status ==
        SolveStatus::Infeasible);

  Vec lin(1);
  lin << 1.0;
  CHECK(solve_qp(QuadCost(Mat::Zero(1, 1), lin), NncPolyhedron::whole_space(1), {0},
                 Vec::Zero(1), kTol)
            .status == SolveStatus::Unbounded);

  Mat concave(1, 1);
  concave << -1.0;
  CHECK_THROWS_AS(solve_qp(QuadCost(concave, Vec::Zero(1)), NncPolyhedron::whole_space(1), {0},
                           Vec::Zero(1), kTol),
                  SolverError);
}

TEST_CASE("nnls on scalar targets") {
  Mat a(1, 1);
  a << 1.0;
  Vec pos(1), negv(1);
  pos << 2.0;
  negv << -1.0;
  const NnlsResult hit = nnls(a, pos, kTol);
  CHECK(hit.lambda[0] == doctest::Approx(2.0));
  CHECK(hit.residual == doctest::Approx(0.0));
  const NnlsResult miss = nnls(a, negv, kTol);
  CHECK(miss.lambda[0] == doctest::Approx(0.0));
  CHECK(miss.residual == doctest::Approx(1.0));
}

TEST_CASE("nnls separates cone members from outsiders") {
  std::mt19937 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    Mat a(4, 3);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = normal(rng);

    // A nonnegative combination of the columns lies in the cone.
    Vec w(3);
    for (int j = 0; j < 3; ++j) w[j] = weight(rng);
    const NnlsResult inside = nnls(a, a * w, kTol);
    CHECK(inside.residual <= 1e-8);

    // Any point with a separating direction y (A^T y >= 0, <target,y> < 0)
    // lies outside the cone.
    Vec probe(4);
    for (int i = 0; i < 4; ++i) probe[i] = normal(rng);
    bool separates = true;
    for (int j = 0; j < 3; ++j)
      if (a.col(j).dot(probe) < 0.0) separates = false;
    if (!separates) continue;
    const Vec target = -probe;
    if (target.norm() < 1e-9) continue;
    const NnlsResult outside = nnls(a, target, kTol);
    CHECK(outside.residual > 1e-8);
  }
}

TEST_CASE("nnls zero residual iff target is in the conic hull (dual route)") {
  std::mt19937 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const int gens = 2 + static_cast<int>(rng() % 3);
    Mat a(3, gens);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < gens; ++j) a(i, j) = normal(rng);
    Vec target(3);
    for (int i = 0; i < 3; ++i) target[i] = normal(rng);

    // Dual-cone route: target in coni(columns) iff <target, y> >= 0 for
    // every generator y of {y : A^T y >= 0}.
    const ConeGenerators dual = cone_generators(a.transpose(), kTol);
    bool inside_dual = true;
    for (const auto& y : dual.rays)
      if (target.dot(y) < -1e-9) inside_dual = false;
    for (const auto& y : dual.lines)
      if (std::abs(target.dot(y)) > 1e-9) inside_dual = false;

    const bool inside_nnls = nnls(a, target, kTol).residual <= 1e-8;
    CHECK(inside_nnls == inside_dual);
  }
}

TEST_CASE("emptiness under strict-row semantics") {
  NncPolyhedron infeas(1);
  infeas.add_row(Halfspace(Vec::Ones(1), -1.0, RowKind::NonStrict));
  infeas.add_row(Halfspace(-Vec::Ones(1), 0.0, RowKind::NonStrict));
  CHECK(is_empty(infeas, kTol));

  NncPolyhedron open_interval(1);
  open_interval.add_row(Halfspace(Vec::Ones(1), 0.0, RowKind::Strict));
  open_interval.add_row(Halfspace(-Vec::Ones(1), 1.0, RowKind::Strict));
  CHECK_FALSE(is_empty(open_interval, kTol));

  NncPolyhedron pinched(1);
  pinched.add_row(Halfspace(Vec::Ones(1), 0.0, RowKind::NonStrict));
  pinched.add_row(Halfspace(-Vec::Ones(1), 0.0, RowKind::NonStrict));
  pinched.add_row(Halfspace(Vec::Ones(1), 0.0, RowKind::Strict));  // x > 0 kills {0}
  CHECK(is_empty(pinched, kTol));
}

TEST_CASE("boxed 2d solves agree with a brute-force grid") {
  std::mt19937 rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    Mat b(2, 2);
    for (int i = 0; i < 4; ++i) b(i / 2, i % 2) = normal(rng);
    Mat q = b.transpose() * b + 0.05 * Mat::Identity(2, 2);
    Vec lin(2);
    lin << normal(rng), normal(rng);
    const QuadCost cost(q, lin);
    const NncPolyhedron region = box2(-1.0, 1.0);
    const QpSolveResult res = solve_qp(cost, region, {0, 1}, Vec::Zero(2), kTol);
    REQUIRE(res.status == SolveStatus::Optimal);
    const double brute = oracle::grid_min_objective_2d(cost, region, -1.0, 1.0, 201);
    CHECK(res.objective <= brute + 1e-9);
    CHECK(std::abs(res.objective - brute) <= 1e-3);
  }
}

TEST_CASE("feasible points satisfy every row") {
  std::mt19937 rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const int dim = 1 + static_cast<int>(rng() % 4);
    const NncPolyhedron p = oracle::random_polyhedron(rng, dim, 5, rep % 2 == 0);
    const auto x = feasible_point(p, kTol);
    REQUIRE(x.has_value());
    CHECK(p.contains(*x, 1e-6));
  }
}

TEST_SUITE_END();
