#include "qpn/network.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>

namespace qpn {

QpNetwork::QpNetwork(int n, std::vector<QpNode> nodes, std::set<Edge> edges)
    : n_(n), nodes_(std::move(nodes)), edges_(std::move(edges)) {
  if (n_ <= 0) throw GeometryError("network decision dimension must be positive");
  const int count = static_cast<int>(nodes_.size());
  for (const auto& [i, j] : edges_)
    if (i < 0 || i >= count || j < 0 || j >= count)
      throw GeometryError("edge endpoint out of range");
}

std::vector<int> QpNetwork::children(int i) const {
  std::vector<int> out;
  for (const auto& [a, b] : edges_)
    if (a == i) out.push_back(b);
  std::sort(out.begin(), out.end());
  return out;
}

bool QpNetwork::is_source(int i) const {
  return std::none_of(edges_.begin(), edges_.end(),
                      [i](const Edge& e) { return e.second == i; });
}

IndexSet QpNetwork::parameter_coordinates() const {
  std::vector<bool> owned(n_, false);
  for (const auto& node : nodes_)
    for (int j : node.decision) owned[j] = true;
  IndexSet out;
  for (int j = 0; j < n_; ++j)
    if (!owned[j]) out.push_back(j);
  return out;
}

std::set<Edge> reachability(const QpNetwork& net) {
  const int count = net.node_count();
  std::vector<std::vector<bool>> reach(count, std::vector<bool>(count, false));
  for (const auto& [i, j] : net.edges()) reach[i][j] = true;
  for (int k = 0; k < count; ++k)
    for (int i = 0; i < count; ++i)
      if (reach[i][k])
        for (int j = 0; j < count; ++j)
          if (reach[k][j]) reach[i][j] = true;
  std::set<Edge> out;
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < count; ++j)
      if (reach[i][j]) out.insert({i, j});
  return out;
}

DescendantSets descendant_sets(const QpNetwork& net) {
  const auto reach = reachability(net);
  const int count = net.node_count();
  for (int i = 0; i < count; ++i)
    if (reach.count({i, i}))
      throw GeometryError("descendant sets are undefined on a cyclic network");
  DescendantSets out;
  out.d.resize(count);
  out.d_not.resize(count);
  for (int i = 0; i < count; ++i) {
    out.d[i].push_back(i);
    for (int j = 0; j < count; ++j)
      if (j != i && reach.count({i, j})) out.d[i].push_back(j);
    std::sort(out.d[i].begin(), out.d[i].end());
    for (int j = 0; j < count; ++j)
      if (!std::binary_search(out.d[i].begin(), out.d[i].end(), j)) out.d_not[i].push_back(j);
  }
  return out;
}

IndexSet extended_indices(const QpNetwork& net, int i) {
  const auto ds = descendant_sets(net);
  std::set<int> idx;
  for (int j : ds.d[i])
    for (int k : net.node(j).decision) idx.insert(k);
  return IndexSet(idx.begin(), idx.end());
}

DepthMapping depth_mapping(const QpNetwork& net) {
  const int count = net.node_count();
  const auto reach = reachability(net);
  for (int i = 0; i < count; ++i)
    if (reach.count({i, i})) throw GeometryError("depth mapping requires an acyclic network");

  // Longest downward path from each node; a node with height h goes into
  // layer D - h so that everything sits as deep as possible.
  std::vector<int> height(count, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [i, j] : net.edges()) {
      if (height[i] < height[j] + 1) {
        height[i] = height[j] + 1;
        changed = true;
      }
    }
  }
  const int depth = count == 0 ? 0 : *std::max_element(height.begin(), height.end()) + 1;
  DepthMapping dm;
  dm.layers.assign(depth, {});
  for (int i = 0; i < count; ++i) dm.layers[depth - 1 - height[i]].push_back(i);
  return dm;
}

bool is_valid_depth_mapping(const QpNetwork& net, const DepthMapping& dm) {
  std::vector<int> layer_of(net.node_count(), -1);
  for (int d = 0; d < dm.depth(); ++d)
    for (int i : dm.layers[d]) {
      if (i < 0 || i >= net.node_count() || layer_of[i] != -1) return false;
      layer_of[i] = d;
    }
  for (int l : layer_of)
    if (l == -1) return false;
  for (const auto& [i, j] : net.edges())
    if (layer_of[j] <= layer_of[i]) return false;
  return true;
}

namespace {

std::string cycle_witness(const QpNetwork& net) {
  // Any node reaching itself; report one shortest closed walk.
  const int count = net.node_count();
  std::vector<std::vector<int>> adj(count);
  for (const auto& [i, j] : net.edges()) adj[i].push_back(j);
  for (int start = 0; start < count; ++start) {
    std::vector<int> parent(count, -1);
    std::vector<int> stack = {start};
    std::vector<bool> seen(count, false);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (w == start) {
          std::ostringstream os;
          std::vector<int> path;
          for (int c = v; c != -1; c = parent[c]) path.push_back(c);
          std::reverse(path.begin(), path.end());
          os << start + 1;
          for (int c : path)
            if (c != start) os << " -> " << c + 1;
          os << " -> " << start + 1;
          return os.str();
        }
        if (!seen[w]) {
          seen[w] = true;
          parent[w] = v;
          stack.push_back(w);
        }
      }
    }
  }
  return "";
}

}  // namespace

std::vector<Diagnostic> validate(const QpNetwork& net) {
  std::vector<Diagnostic> out;
  const int count = net.node_count();

  for (int i = 0; i < count; ++i) {
    const auto& node = net.node(i);
    std::ostringstream tag;
    tag << "node " << i + 1;
    if (node.cost.dim() != net.n())
      out.push_back({DiagnosticSeverity::Error, "dimension",
                     tag.str() + ": cost dimension does not match the network"});
    if (node.feasible.dim() != net.n())
      out.push_back({DiagnosticSeverity::Error, "dimension",
                     tag.str() + ": feasible-set dimension does not match the network"});
    if (node.decision.empty())
      out.push_back({DiagnosticSeverity::Error, "decision-indices",
                     tag.str() + ": empty decision index set"});
    for (int j : node.decision)
      if (j < 0 || j >= net.n())
        out.push_back({DiagnosticSeverity::Error, "decision-indices",
                       tag.str() + ": decision index out of range"});
  }
  if (has_errors(out)) return out;

  const auto reach = reachability(net);
  bool cyclic = false;
  for (int i = 0; i < count; ++i)
    if (reach.count({i, i})) cyclic = true;
  if (cyclic) {
    out.push_back({DiagnosticSeverity::Error, "cycle",
                   "network is cyclic: " + cycle_witness(net)});
    return out;
  }

  // Redundant edges: removing the edge leaves reachability unchanged.
  for (const auto& e : net.edges()) {
    std::set<Edge> rest = net.edges();
    rest.erase(e);
    QpNetwork trimmed(net.n(), net.nodes(), rest);
    if (reachability(trimmed) == reach) {
      std::ostringstream os;
      os << "edge (" << e.first + 1 << "," << e.second + 1
         << ") is redundant: reachability is unchanged without it";
      out.push_back({DiagnosticSeverity::Warning, "redundant-edge", os.str()});
    }
  }

  // Convexity of each node's cost on its controlled block.
  for (int i = 0; i < count; ++i) {
    const IndexSet block = extended_indices(net, i);
    const int nb = static_cast<int>(block.size());
    Mat sub(nb, nb);
    for (int r = 0; r < nb; ++r)
      for (int c = 0; c < nb; ++c) sub(r, c) = net.node(i).cost.Q(block[r], block[c]);
    Eigen::SelfAdjointEigenSolver<Mat> es(sub);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (nb > 0 && es.eigenvalues().minCoeff() < -1e-8 * scale) {
      std::ostringstream os;
      os << "node " << i + 1 << ": cost is not convex on its controlled block";
      out.push_back({DiagnosticSeverity::Error, "non-convex", os.str()});
    }
  }

  // Decision-index overlap between unrelated nodes.
  for (int i = 0; i < count; ++i) {
    for (int j = i + 1; j < count; ++j) {
      if (reach.count({i, j}) || reach.count({j, i})) continue;
      std::vector<int> common;
      for (int a : net.node(i).decision)
        for (int b : net.node(j).decision)
          if (a == b) common.push_back(a);
      if (!common.empty()) {
        std::ostringstream os;
        os << "nodes " << i + 1 << " and " << j + 1
           << " share decision indices but neither reaches the other";
        out.push_back({DiagnosticSeverity::Warning, "shared-indices", os.str()});
      }
    }
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == DiagnosticSeverity::Error;
  });
}

}  // namespace qpn
