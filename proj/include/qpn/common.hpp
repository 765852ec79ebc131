#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace qpn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Ordered set of 0-based coordinate indices.
using IndexSet = std::vector<int>;

/// Numeric thresholds shared across the library.
///
/// `feas` is the single feasibility/equality tolerance; `pivot` guards
/// pivoting and rank decisions; `dedup` is the row/generator merge
/// threshold used when comparing normalized polyhedra.
struct Tolerances {
  double feas = 1e-6;
  double pivot = 1e-9;
  double dedup = 1e-8;
};

struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace qpn
