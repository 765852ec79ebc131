#pragma once

#include <set>
#include <utility>

#include "qpn/qp.hpp"

namespace qpn {

/// One mathematical program of the network: a convex quadratic cost over
/// an NNC polyhedral feasible set, controlling the coordinates in
/// `decision` (0-based, within the full decision space).
struct QpNode {
  QuadCost cost;
  NncPolyhedron feasible;
  IndexSet decision;

  QpNode(QuadCost c, NncPolyhedron f, IndexSet d)
      : cost(std::move(c)), feasible(std::move(f)), decision(std::move(d)) {}
};

using Edge = std::pair<int, int>;

struct DepthMapping {
  std::vector<std::vector<int>> layers;  // layers[0] is the shallowest
  int depth() const { return static_cast<int>(layers.size()); }
};

enum class DiagnosticSeverity { Error, Warning };

struct Diagnostic {
  DiagnosticSeverity severity;
  std::string code;
  std::string message;
};

class QpNetwork {
 public:
  QpNetwork(int n, std::vector<QpNode> nodes, std::set<Edge> edges);

  int n() const { return n_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::vector<QpNode>& nodes() const { return nodes_; }
  const QpNode& node(int i) const { return nodes_.at(i); }
  const std::set<Edge>& edges() const { return edges_; }

  std::vector<int> children(int i) const;
  bool is_source(int i) const;

  /// Coordinates claimed by no node; they stay at their initial values
  /// for the whole equilibrium search.
  IndexSet parameter_coordinates() const;

 private:
  int n_;
  std::vector<QpNode> nodes_;
  std::set<Edge> edges_;
};

/// Transitive closure of the edge set.
std::set<Edge> reachability(const QpNetwork& net);

struct DescendantSets {
  std::vector<std::vector<int>> d;        // D^i, includes i
  std::vector<std::vector<int>> d_not;    // complement of D^i
};
DescendantSets descendant_sets(const QpNetwork& net);

/// Decision indices controlled by node i together with all reachable
/// descendants (the extended index set used by the equilibrium solves).
IndexSet extended_indices(const QpNetwork& net, int i);

/// Layering in which every node sits as deep as possible; children are
/// always strictly deeper than their parents. Throws on cyclic networks.
DepthMapping depth_mapping(const QpNetwork& net);

bool is_valid_depth_mapping(const QpNetwork& net, const DepthMapping& dm);

/// Structural diagnostics: cycles, dimension mismatches and non-convex
/// controlled blocks are errors; redundant edges and decision-index
/// overlaps between unrelated nodes are warnings. Never throws.
std::vector<Diagnostic> validate(const QpNetwork& net);

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace qpn
