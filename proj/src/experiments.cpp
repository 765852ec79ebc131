#include "qpn/experiments.hpp"

#include "qpn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace qpn {

// ---- counter-based RNG ----

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed) ^ splitmix64(stream + 1)) {}

std::uint64_t RngStream::next_u64() { return splitmix64(key_ + (++counter_) * kGolden); }

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

Vec RngStream::normal_vec(int k) {
  Vec out(k);
  for (int i = 0; i < k; ++i) out[i] = normal();
  return out;
}

// ---- bilevel example ----

QpNetwork build_bilevel_example() {
  const int n = 4;
  Mat q1 = Mat::Zero(n, n);
  q1(2, 2) = 1.0;
  q1(0, 0) = 1.0;
  q1(0, 2) = q1(2, 0) = -1.0;
  q1(3, 3) = 1.0;
  q1(1, 1) = 1.0;
  q1(1, 3) = q1(3, 1) = -1.0;
  QpNode leader(QuadCost(q1, Vec::Zero(n)), NncPolyhedron::whole_space(n), {2});

  Mat q2 = Mat::Zero(n, n);
  q2(2, 2) = 1.0;
  q2(3, 3) = 1.0;
  q2(2, 3) = q2(3, 2) = -1.0;
  NncPolyhedron feas2(n);
  feas2.add_row(Halfspace(Vec::Unit(n, 3), 0.0, RowKind::NonStrict));
  QpNode follower(QuadCost(q2, Vec::Zero(n)), std::move(feas2), {3});

  return QpNetwork(n, {std::move(leader), std::move(follower)}, {{0, 1}});
}

// ---- constellation game ----

ConstellationInstance sample_instance(std::uint64_t seed, std::uint64_t index) {
  RngStream rng(seed, index);
  ConstellationInstance inst;
  for (int i = 0; i < 4; ++i) inst.g[i] = rng.normal_vec(2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) inst.r[i][j] = rng.normal_vec(2);
  return inst;
}

QpNetwork build_constellation_qpn(const ConstellationInstance& inst,
                                  const std::set<Edge>& edges) {
  const int n = 8;
  std::vector<QpNode> nodes;
  for (int i = 0; i < 4; ++i) {
    // ||p_i - g_i||^2 + sum_j ||p_j - p_i - r_ij||^2 as 1/2 x'Qx + x'q.
    Mat q_mat = Mat::Zero(n, n);
    Vec q_vec = Vec::Zero(n);
    auto add_pair = [&](int a, int b, const Vec& target) {
      // ||x_a - x_b - target||^2 over 2-vectors at offsets 2a, 2b.
      for (int d = 0; d < 2; ++d) {
        const int ia = 2 * a + d;
        const int ib = 2 * b + d;
        q_mat(ia, ia) += 2.0;
        q_mat(ib, ib) += 2.0;
        q_mat(ia, ib) -= 2.0;
        q_mat(ib, ia) -= 2.0;
        q_vec[ia] -= 2.0 * target[d];
        q_vec[ib] += 2.0 * target[d];
      }
    };
    for (int d = 0; d < 2; ++d) {
      q_mat(2 * i + d, 2 * i + d) += 2.0;
      q_vec[2 * i + d] -= 2.0 * inst.g[i][d];
    }
    for (int j = 0; j < 4; ++j)
      if (j != i) add_pair(j, i, inst.r[i][j]);

    NncPolyhedron feas(n);
    for (int d = 0; d < 2; ++d) {
      feas.add_row(Halfspace(Vec::Unit(n, 2 * i + d), inst.box, RowKind::NonStrict));
      feas.add_row(Halfspace(-Vec::Unit(n, 2 * i + d), inst.box, RowKind::NonStrict));
    }
    nodes.emplace_back(QuadCost(std::move(q_mat), std::move(q_vec)), std::move(feas),
                       IndexSet{2 * i, 2 * i + 1});
  }
  return QpNetwork(n, std::move(nodes), edges);
}

double constellation_node_cost(const ConstellationInstance& inst, int node, const Vec& x) {
  auto p = [&](int i) { return x.segment(2 * i, 2); };
  double cost = (p(node) - inst.g[node]).squaredNorm();
  for (int j = 0; j < 4; ++j)
    if (j != node) cost += (p(j) - p(node) - inst.r[node][j]).squaredNorm();
  return cost;
}

std::string NetworkConfig::label() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [i, j] : edges) {
    if (!first) os << ';';
    os << i + 1 << '>' << j + 1;
    first = false;
  }
  return os.str();
}

namespace {

std::set<Edge> apply_permutation(const std::set<Edge>& edges, const std::array<int, 4>& perm) {
  std::set<Edge> out;
  for (const auto& [i, j] : edges) out.insert({perm[i], perm[j]});
  return out;
}

bool reach_matrix(const std::set<Edge>& edges, std::array<std::array<bool, 4>, 4>& reach) {
  for (auto& row : reach) row.fill(false);
  for (const auto& [i, j] : edges) reach[i][j] = true;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 4; ++i)
      if (reach[i][k])
        for (int j = 0; j < 4; ++j)
          if (reach[k][j]) reach[i][j] = true;
  for (int i = 0; i < 4; ++i)
    if (reach[i][i]) return false;  // cyclic
  return true;
}

bool has_redundant_edge(const std::set<Edge>& edges) {
  std::array<std::array<bool, 4>, 4> full{};
  if (!reach_matrix(edges, full)) return false;
  for (const auto& e : edges) {
    std::set<Edge> rest = edges;
    rest.erase(e);
    std::array<std::array<bool, 4>, 4> trimmed{};
    reach_matrix(rest, trimmed);
    if (trimmed == full) return true;
  }
  return false;
}

std::set<Edge> canonical_config(const std::set<Edge>& edges) {
  // Node 0 is pinned; nodes 1..3 are interchangeable.
  static const std::array<std::array<int, 4>, 6> perms = {{{0, 1, 2, 3},
                                                           {0, 1, 3, 2},
                                                           {0, 2, 1, 3},
                                                           {0, 2, 3, 1},
                                                           {0, 3, 1, 2},
                                                           {0, 3, 2, 1}}};
  std::set<Edge> best = apply_permutation(edges, perms[0]);
  for (std::size_t p = 1; p < perms.size(); ++p) {
    std::set<Edge> cand = apply_permutation(edges, perms[p]);
    if (std::lexicographical_compare(cand.begin(), cand.end(), best.begin(), best.end()))
      best = std::move(cand);
  }
  return best;
}

}  // namespace

std::vector<NetworkConfig> enumerate_configs() {
  std::vector<Edge> super;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) super.push_back({i, j});

  std::set<std::set<Edge>> canonical;
  for (std::uint32_t mask = 0; mask < (1u << super.size()); ++mask) {
    std::set<Edge> edges;
    for (std::size_t b = 0; b < super.size(); ++b)
      if (mask & (1u << b)) edges.insert(super[b]);
    std::array<std::array<bool, 4>, 4> reach{};
    if (!reach_matrix(edges, reach)) continue;
    if (has_redundant_edge(edges)) continue;
    canonical.insert(canonical_config(edges));
  }

  std::vector<NetworkConfig> out;
  int id = 1;
  for (const auto& edges : canonical) out.push_back({id++, edges});
  return out;
}

StudyResult run_constellation_study(int samples, std::uint64_t seed,
                                    const std::vector<NetworkConfig>& configs,
                                    int jobs, const SearchOptions& opts) {
  if (samples < 1) throw SolverError("study needs at least one sample");
  const int nc = static_cast<int>(configs.size());
  int nash_idx = -1;
  for (int c = 0; c < nc; ++c)
    if (configs[c].edges.empty()) nash_idx = c;
  if (nash_idx < 0) throw SolverError("study requires the edgeless configuration");

  // reductions[instance * nc + config]; NaN marks a dropped instance.
  std::vector<double> reductions(static_cast<std::size_t>(samples) * nc,
                                 std::numeric_limits<double>::quiet_NaN());
  std::atomic<int> next_instance{0};
  std::atomic<int> dropped{0};

  auto worker = [&]() {
    for (;;) {
      const int k = next_instance.fetch_add(1);
      if (k >= samples) return;
      const ConstellationInstance inst = sample_instance(seed, static_cast<std::uint64_t>(k));
      const Vec x0 = Vec::Zero(8);
      std::vector<double> costs(nc, std::numeric_limits<double>::quiet_NaN());
      bool ok = true;
      for (int c = 0; c < nc && ok; ++c) {
        try {
          const QpNetwork net = build_constellation_qpn(inst, configs[c].edges);
          const EquilibriumResult res = find_equilibrium(net, x0, opts);
          if (!res.found()) {
            ok = false;
            break;
          }
          costs[c] = constellation_node_cost(inst, 0, res.x);
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok) {
        dropped.fetch_add(1);
        continue;
      }
      const double nash_cost = costs[nash_idx];
      for (int c = 0; c < nc; ++c) {
        reductions[static_cast<std::size_t>(k) * nc + c] =
            (c == nash_idx) ? 0.0
                            : 100.0 * (costs[c] - nash_cost) / std::abs(nash_cost);
      }
    }
  };

  int thread_count = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  thread_count = std::max(1, std::min(thread_count, samples));
  std::vector<std::thread> pool;
  for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  StudyResult out;
  out.requested_samples = samples;
  out.dropped_instances = dropped.load();
  for (int c = 0; c < nc; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    int count = 0;
    for (int k = 0; k < samples; ++k) {
      const double v = reductions[static_cast<std::size_t>(k) * nc + c];
      if (std::isnan(v)) continue;
      sum += v;
      sum_sq += v * v;
      ++count;
    }
    ConfigStats row;
    row.config_id = configs[c].id;
    row.edges = configs[c].label();
    row.samples = count;
    if (count > 0) {
      row.mean_reduction_pct = sum / count;
      if (count > 1) {
        const double var = std::max(0.0, (sum_sq - sum * sum / count) / (count - 1));
        row.se_pct = std::sqrt(var / count);
      }
      row.ci95_pct = 1.96 * row.se_pct;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---- robust polyhedral avoidance ----

int avoidance_eps_index(int obstacle) { return 4 + 7 * obstacle + 6; }

AvoidanceInstance planar_avoidance_instance(int obstacle_count) {
  AvoidanceInstance inst;
  inst.obstacle_count = obstacle_count;

  // Unit square {y : |y|_inf <= 1}.
  Mat square_a(4, 2);
  square_a << 1, 0, -1, 0, 0, 1, 0, -1;
  const Vec square_b = Vec::Ones(4);
  inst.ego_shape_a = square_a;
  inst.ego_shape_b = square_b;

  inst.ego_position = Vec(2);
  inst.ego_position << -5.0, 0.0;
  for (int i = 0; i < obstacle_count; ++i) {
    inst.obs_shape_a.push_back(square_a);
    inst.obs_shape_b.push_back(square_b);
    Vec p(2);
    if (i == 0)
      p << 0.0, -1.0;
    else if (i == 1)
      p << 3.0, -1.0;
    else
      p << 3.0 * i, -1.0;
    inst.obs_positions.push_back(std::move(p));
  }

  // Reward rightward displacement, penalize vertical offset from zero:
  // f = -(p_ex + u_ex) + (p_ey + u_ey)^2 over (p_e, u_e).
  Mat q4 = Mat::Zero(4, 4);
  q4(1, 1) = 2.0;
  q4(3, 3) = 2.0;
  q4(1, 3) = q4(3, 1) = 2.0;
  Vec l4 = Vec::Zero(4);
  l4[0] = -1.0;
  l4[2] = -1.0;
  inst.ego_cost = QuadCost(std::move(q4), std::move(l4));
  return inst;
}

QpNetwork build_avoidance_qpn(const AvoidanceInstance& inst) {
  const int m_obs = inst.obstacle_count;
  const int n = 4 + 7 * m_obs;
  const int ego_p = 0, ego_u = 2;
  auto obs_p = [](int i) { return 4 + 7 * i; };
  auto obs_u = [](int i) { return 4 + 7 * i + 2; };
  auto obs_q = [](int i) { return 4 + 7 * i + 4; };

  std::vector<QpNode> nodes;
  std::set<Edge> edges;

  // Node 0: ego cost lifted into the full space.
  {
    Mat q_mat = Mat::Zero(n, n);
    Vec q_vec = Vec::Zero(n);
    const int map4[4] = {ego_p, ego_p + 1, ego_u, ego_u + 1};
    for (int a = 0; a < 4; ++a) {
      q_vec[map4[a]] = inst.ego_cost.q[a];
      for (int b = 0; b < 4; ++b) q_mat(map4[a], map4[b]) = inst.ego_cost.Q(a, b);
    }
    NncPolyhedron feas(n);
    for (int i = 0; i < m_obs; ++i)
      feas.add_row(Halfspace(Vec::Unit(n, avoidance_eps_index(i)), 0.0, RowKind::NonStrict));
    for (int d = 0; d < 2; ++d) {
      feas.add_row(Halfspace(Vec::Unit(n, ego_u + d), inst.ego_delta_bound, RowKind::NonStrict));
      feas.add_row(Halfspace(-Vec::Unit(n, ego_u + d), inst.ego_delta_bound, RowKind::NonStrict));
    }
    nodes.emplace_back(QuadCost(std::move(q_mat), std::move(q_vec)), std::move(feas),
                       IndexSet{ego_u, ego_u + 1});
  }

  // Adversaries: minimize the matching expansion over their delta box.
  for (int i = 0; i < m_obs; ++i) {
    Vec q_vec = Vec::Zero(n);
    q_vec[avoidance_eps_index(i)] = 1.0;
    NncPolyhedron feas(n);
    for (int d = 0; d < 2; ++d) {
      feas.add_row(Halfspace(Vec::Unit(n, obs_u(i) + d), inst.obs_delta_bound, RowKind::NonStrict));
      feas.add_row(Halfspace(-Vec::Unit(n, obs_u(i) + d), inst.obs_delta_bound, RowKind::NonStrict));
    }
    nodes.emplace_back(QuadCost(Mat::Zero(n, n), std::move(q_vec)), std::move(feas),
                       IndexSet{obs_u(i), obs_u(i) + 1});
    edges.insert({0, 1 + i});
  }

  // Expansion nodes: minimal joint inflation putting a shared point into
  // both polygons. The shared point q and the expansion eps are private.
  for (int i = 0; i < m_obs; ++i) {
    Vec q_vec = Vec::Zero(n);
    q_vec[avoidance_eps_index(i)] = 1.0;
    NncPolyhedron feas(n);
    for (int r = 0; r < inst.ego_shape_a.rows(); ++r) {
      Vec row = Vec::Zero(n);
      for (int d = 0; d < 2; ++d) {
        row[ego_p + d] = inst.ego_shape_a(r, d);
        row[ego_u + d] = inst.ego_shape_a(r, d);
        row[obs_q(i) + d] = inst.ego_shape_a(r, d);
      }
      row[avoidance_eps_index(i)] = 1.0;
      feas.add_row(Halfspace(std::move(row), inst.ego_shape_b[r], RowKind::NonStrict));
    }
    for (int r = 0; r < inst.obs_shape_a[i].rows(); ++r) {
      Vec row = Vec::Zero(n);
      for (int d = 0; d < 2; ++d) {
        row[obs_p(i) + d] = inst.obs_shape_a[i](r, d);
        row[obs_u(i) + d] = inst.obs_shape_a[i](r, d);
        row[obs_q(i) + d] = inst.obs_shape_a[i](r, d);
      }
      row[avoidance_eps_index(i)] = 1.0;
      feas.add_row(Halfspace(std::move(row), inst.obs_shape_b[i][r], RowKind::NonStrict));
    }
    nodes.emplace_back(QuadCost(Mat::Zero(n, n), std::move(q_vec)), std::move(feas),
                       IndexSet{obs_q(i), obs_q(i) + 1, avoidance_eps_index(i)});
    edges.insert({1 + i, 1 + m_obs + i});
  }

  return QpNetwork(n, std::move(nodes), std::move(edges));
}

}  // namespace qpn
