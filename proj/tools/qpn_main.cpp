#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "qpn/serialize.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitIo = 3;

qpn::Vec parse_csv_vector(const std::string& text, int n) {
  qpn::Vec out(n);
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= n) throw qpn::ParseError("too many entries in vector argument");
    out[i++] = std::stod(item);
  }
  if (i != n) throw qpn::ParseError("expected " + std::to_string(n) + " comma-separated values");
  return out;
}

std::string render_vector(const qpn::Vec& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += qpn::format_double(v[i]);
  }
  return out;
}

void print_diagnostics(const std::vector<qpn::Diagnostic>& diags) {
  for (const auto& d : diags) {
    std::cerr << (d.severity == qpn::DiagnosticSeverity::Error ? "error" : "warning") << " ["
              << d.code << "] " << d.message << "\n";
  }
}

std::string render_row(const qpn::Halfspace& h) {
  std::string lhs;
  char buf[32];
  for (int i = 0; i < h.normal.size(); ++i) {
    const double c = h.normal[i];
    if (c == 0.0) continue;
    std::snprintf(buf, sizeof buf, "%.9g", std::abs(c));
    if (lhs.empty())
      lhs += (c < 0 ? "-" : "");
    else
      lhs += (c < 0 ? " - " : " + ");
    if (std::abs(c) != 1.0) lhs += std::string(buf) + "*";
    lhs += "x" + std::to_string(i + 1);
  }
  if (lhs.empty()) lhs = "0";
  if (h.offset != 0.0) {
    std::snprintf(buf, sizeof buf, "%.9g", std::abs(h.offset));
    lhs += (h.offset < 0 ? " - " : " + ") + std::string(buf);
  }
  switch (h.kind) {
    case qpn::RowKind::NonStrict: return lhs + " >= 0";
    case qpn::RowKind::Strict: return lhs + " > 0";
    case qpn::RowKind::Equality: return lhs + " = 0";
  }
  return lhs;
}

int cmd_validate(const std::string& path) {
  const qpn::ProblemFile pf = qpn::load_problem(path);
  const qpn::QpNetwork net = pf.network();
  const auto diags = qpn::validate(net);
  print_diagnostics(diags);
  return qpn::has_errors(diags) ? kExitValidation : kExitOk;
}

int cmd_solve(const std::string& path, const std::string& init_csv, double tol_feas,
              int max_restarts, const std::string& trace_path) {
  const qpn::ProblemFile pf = qpn::load_problem(path);
  const qpn::QpNetwork net = pf.network();
  const auto diags = qpn::validate(net);
  print_diagnostics(diags);
  if (qpn::has_errors(diags)) return kExitValidation;

  qpn::SearchOptions opts;
  if (tol_feas > 0) opts.tol.feas = tol_feas;
  if (max_restarts > 0) opts.max_restarts = max_restarts;

  qpn::Vec x0 = qpn::Vec::Zero(net.n());
  if (!init_csv.empty())
    x0 = parse_csv_vector(init_csv, net.n());
  else if (pf.init)
    x0 = *pf.init;

  const qpn::EquilibriumResult res = qpn::find_equilibrium(net, x0, opts);
  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) {
      std::cerr << "error: cannot write " << trace_path << "\n";
      return kExitIo;
    }
    out << qpn::trace_to_jsonl(res.trace);
  }

  std::cerr << "termination: " << qpn::termination_name(res.trace.termination) << " after "
            << res.trace.nash_solves << " Nash solve(s)\n";
  if (!res.found()) {
    if (!res.trace.message.empty()) std::cerr << res.trace.message << "\n";
    return kExitNoConvergence;
  }
  const qpn::VerifyReport report = qpn::verify_equilibrium(net, res.x, opts);
  std::cerr << "verified: " << (report.ok ? "yes" : "NO") << "\n";
  std::cout << render_vector(res.x) << "\n";
  return kExitOk;
}

int cmd_graph(const std::string& path, int node_1based, const std::string& point_csv) {
  const qpn::ProblemFile pf = qpn::load_problem(path);
  const qpn::QpNetwork net = pf.network();
  const auto diags = qpn::validate(net);
  if (qpn::has_errors(diags)) {
    print_diagnostics(diags);
    return kExitValidation;
  }
  const qpn::Vec x = parse_csv_vector(point_csv, net.n());
  const int node = node_1based - 1;

  // Graphs for all descendants first, deepest first.
  const qpn::SearchOptions opts;
  const qpn::DepthMapping dm = qpn::depth_mapping(net);
  const auto reach = qpn::reachability(net);
  std::map<int, qpn::LocalGraph> graphs;
  for (int d = dm.depth() - 1; d >= 0; --d) {
    for (int i : dm.layers[d]) {
      if (i != node && !reach.count({node, i})) continue;
      graphs[i] = qpn::local_node_graph(net, i, x, graphs, opts.tol, opts.limits);
      if (i == node) {
        const auto& pieces = graphs[i].pieces.pieces();
        std::cout << pieces.size() << " piece(s)\n";
        for (std::size_t p = 0; p < pieces.size(); ++p) {
          std::cout << "piece " << p + 1 << ":\n";
          for (const auto& row : pieces[p].rows())
            std::cout << "  " << render_row(row) << "\n";
        }
        return kExitOk;
      }
    }
  }
  std::cerr << "error: node graph was not produced\n";
  return kExitNoConvergence;
}

int cmd_constellation(int samples, std::uint64_t seed, int jobs, const std::string& out_path) {
  const auto configs = qpn::enumerate_configs();
  const qpn::StudyResult result = qpn::run_constellation_study(samples, seed, configs, jobs);
  const std::string csv = qpn::study_to_csv(result);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitIo;
    }
    out << csv;
  }
  std::cerr << "instances dropped: " << result.dropped_instances << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadratic program network solver"};
  app.require_subcommand(1);

  std::string path, init_csv, trace_path, point_csv, out_path;
  double tol = 0.0;
  int max_restarts = 0, node = 0, samples = 1000, jobs = 0;
  std::uint64_t seed = 0;

  auto* validate = app.add_subcommand("validate", "check a problem file");
  validate->add_option("path", path)->required();

  auto* solve = app.add_subcommand("solve", "search for an equilibrium");
  solve->add_option("path", path)->required();
  solve->add_option("--init", init_csv, "comma-separated initial iterate");
  solve->add_option("--tol", tol, "feasibility tolerance");
  solve->add_option("--max-restarts", max_restarts);
  solve->add_option("--trace", trace_path, "write a JSONL trace");

  auto* graph = app.add_subcommand("graph", "print a node's local solution graph");
  graph->add_option("path", path)->required();
  graph->add_option("--node", node, "node index (1-based)")->required();
  graph->add_option("--point", point_csv, "reference point")->required();

  auto* constellation = app.add_subcommand("constellation", "run the four-node study");
  constellation->add_option("--samples", samples);
  constellation->add_option("--seed", seed);
  constellation->add_option("--jobs", jobs, "worker threads (default: logical cores)");
  constellation->add_option("--out", out_path, "CSV output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) return cmd_validate(path);
    if (app.got_subcommand(solve))
      return cmd_solve(path, init_csv, tol, max_restarts, trace_path);
    if (app.got_subcommand(graph)) {
      const qpn::ProblemFile pf = qpn::load_problem(path);
      if (node < 1 || node > static_cast<int>(pf.nodes.size())) {
        std::cerr << "error: --node must be between 1 and " << pf.nodes.size() << "\n";
        return kExitIo;
      }
      return cmd_graph(path, node, point_csv);
    }
    if (app.got_subcommand(constellation))
      return cmd_constellation(samples, seed, jobs, out_path);
  } catch (const qpn::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}
