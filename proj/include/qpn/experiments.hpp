#pragma once

#include <array>

#include "qpn/equilibrium.hpp"

namespace qpn {

// ---- Two-node bilevel example ----

/// Leader tracks (x1, x2) with private x3; the follower matches x4 to x3
/// under x4 >= 0. Coordinates x1, x2 are parameters.
QpNetwork build_bilevel_example();

// ---- Four-node constellation game ----

struct ConstellationInstance {
  std::array<Vec, 4> g;                  // target locations, 2-vectors
  std::array<std::array<Vec, 4>, 4> r;   // target relationships r[i][j], i != j
  double box = 5.0;
};

/// Deterministic standard-normal instance for (seed, index).
ConstellationInstance sample_instance(std::uint64_t seed, std::uint64_t index);

QpNetwork build_constellation_qpn(const ConstellationInstance& inst,
                                  const std::set<Edge>& edges);

/// Exact cost of one node at x, constant terms included.
double constellation_node_cost(const ConstellationInstance& inst, int node, const Vec& x);

struct NetworkConfig {
  int id = 0;                 // 1-based position in the canonical ordering
  std::set<Edge> edges;       // canonical representative (node 0 fixed)
  std::string label() const;  // "1>2;2>3;3>4" style
};

/// The acyclic, redundancy-free, symmetry-reduced four-node
/// configurations; node 0 is the distinguished node. 47 entries.
std::vector<NetworkConfig> enumerate_configs();

struct ConfigStats {
  int config_id = 0;
  std::string edges;
  int samples = 0;
  double mean_reduction_pct = 0.0;
  double se_pct = 0.0;
  double ci95_pct = 0.0;
};

struct StudyResult {
  std::vector<ConfigStats> rows;
  int requested_samples = 0;
  int dropped_instances = 0;
};

/// Per instance and configuration, finds an equilibrium from the origin
/// and logs node 0's relative cost reduction against the edgeless (Nash)
/// configuration. Instances on which any configuration fails are dropped
/// from every aggregate to keep the comparison paired.
StudyResult run_constellation_study(int samples, std::uint64_t seed,
                                    const std::vector<NetworkConfig>& configs,
                                    int jobs = 0, const SearchOptions& opts = {});

// ---- Robust polyhedral avoidance ----

struct AvoidanceInstance {
  int obstacle_count = 0;
  Mat ego_shape_a;               // ego polygon {y : A y + b >= 0}
  Vec ego_shape_b;
  std::vector<Mat> obs_shape_a;  // one polygon per obstacle
  std::vector<Vec> obs_shape_b;
  Vec ego_position;              // 2-vector, parameter coordinate
  std::vector<Vec> obs_positions;
  double ego_delta_bound = 15.0;
  double obs_delta_bound = 1.0;
  QuadCost ego_cost;             // over (p_e, u_e) in R^4
};

/// The planar two-obstacle instance: unit squares, ego at (-5, 0),
/// obstacles at (0, -1) and (3, -1), a cost rewarding rightward motion
/// and penalizing vertical offset.
AvoidanceInstance planar_avoidance_instance(int obstacle_count = 2);

/// Coordinate layout: [p_e(2), u_e(2)] then per obstacle [p_o(2), u_o(2),
/// q(2), eps(1)]. Node 0 owns u_e with the adversaries as children; each
/// adversary owns its u_o and parents one expansion node owning (q, eps).
QpNetwork build_avoidance_qpn(const AvoidanceInstance& inst);

/// Index of the expansion variable eps_i in the layout above.
int avoidance_eps_index(int obstacle);

}  // namespace qpn
