#include "qpn/serialize.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace qpn {

using nlohmann::json;

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // canonicalize -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* action_name(TraceAction a) {
  switch (a) {
    case TraceAction::Checked: return "Checked";
    case TraceAction::GraphBuilt: return "GraphBuilt";
    case TraceAction::NashSolved: return "NashSolved";
    case TraceAction::Restarted: return "Restarted";
  }
  return "?";
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Equilibrium: return "Equilibrium";
    case Termination::CycleDetected: return "CycleDetected";
    case Termination::IterationLimit: return "IterationLimit";
    case Termination::LmcpFailure: return "LmcpFailure";
    case Termination::Inconsistency: return "Inconsistency";
  }
  return "?";
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const char* where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) ok = true;
    if (!ok) throw ParseError(std::string("unknown key \"") + item.key() + "\" in " + where);
  }
}

Vec parse_vector(const json& arr, int expect, const char* where) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != expect)
    throw ParseError(std::string(where) + ": expected an array of length " +
                     std::to_string(expect));
  Vec out(expect);
  for (int i = 0; i < expect; ++i) {
    if (!arr[i].is_number()) throw ParseError(std::string(where) + ": non-numeric entry");
    out[i] = arr[i].get<double>();
  }
  return out;
}

Mat parse_q_matrix(const json& q, int n, const char* where) {
  Mat out = Mat::Zero(n, n);
  if (!q.is_array()) throw ParseError(std::string(where) + ": Q must be an array");
  const bool dense_nested = static_cast<int>(q.size()) == n &&
                            std::all_of(q.begin(), q.end(), [&](const json& row) {
                              return row.is_array() && static_cast<int>(row.size()) == n &&
                                     std::all_of(row.begin(), row.end(),
                                                 [](const json& v) { return v.is_number(); });
                            });
  if (dense_nested) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = q[i][j].get<double>();
    return out;
  }
  const bool dense_flat =
      static_cast<int>(q.size()) == n * n &&
      std::all_of(q.begin(), q.end(), [](const json& v) { return v.is_number(); });
  if (dense_flat) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = q[i * n + j].get<double>();
    return out;
  }
  // Sparse triplets [i, j, value] with 1-based indices.
  for (const auto& t : q) {
    if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() ||
        !t[1].is_number_integer() || !t[2].is_number())
      throw ParseError(std::string(where) + ": Q entries must be dense rows or [i,j,v] triplets");
    const int i = t[0].get<int>() - 1;
    const int j = t[1].get<int>() - 1;
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw ParseError(std::string(where) + ": Q triplet index out of range");
    out(i, j) = t[2].get<double>();
  }
  return out;
}

}  // namespace

ProblemFile parse_problem(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());  // message carries the byte position
  }
  if (!doc.is_object()) throw ParseError("problem document must be a JSON object");
  reject_unknown_keys(doc, {"n", "nodes", "edges", "init"}, "problem document");
  if (!doc.contains("n") || !doc["n"].is_number_integer())
    throw ParseError("missing integer field \"n\"");

  ProblemFile pf;
  pf.n = doc["n"].get<int>();
  if (pf.n <= 0) throw ParseError("\"n\" must be positive");
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    throw ParseError("missing array field \"nodes\"");

  int node_idx = 0;
  for (const auto& jn : doc["nodes"]) {
    ++node_idx;
    const std::string where = "node " + std::to_string(node_idx);
    if (!jn.is_object()) throw ParseError(where + " must be an object");
    reject_unknown_keys(jn, {"Q", "q", "constraints", "vars"}, where.c_str());
    if (!jn.contains("Q") || !jn.contains("q") || !jn.contains("vars"))
      throw ParseError(where + " needs \"Q\", \"q\" and \"vars\"");

    Mat q_mat = parse_q_matrix(jn["Q"], pf.n, where.c_str());
    Vec q_vec = parse_vector(jn["q"], pf.n, (where + ".q").c_str());

    NncPolyhedron feas(pf.n);
    if (jn.contains("constraints")) {
      if (!jn["constraints"].is_array()) throw ParseError(where + ".constraints must be an array");
      int row_idx = 0;
      for (const auto& jc : jn["constraints"]) {
        ++row_idx;
        const std::string rw = where + ".constraints[" + std::to_string(row_idx) + "]";
        if (!jc.is_object()) throw ParseError(rw + " must be an object");
        reject_unknown_keys(jc, {"a", "b", "kind"}, rw.c_str());
        if (!jc.contains("a") || !jc.contains("b") || !jc.contains("kind"))
          throw ParseError(rw + " needs \"a\", \"b\" and \"kind\"");
        const Vec a = parse_vector(jc["a"], pf.n, (rw + ".a").c_str());
        if (!jc["b"].is_number()) throw ParseError(rw + ".b must be a number");
        const std::string kind = jc["kind"].get<std::string>();
        RowKind rk;
        if (kind == "ge")
          rk = RowKind::NonStrict;
        else if (kind == "gt")
          rk = RowKind::Strict;
        else if (kind == "eq")
          rk = RowKind::Equality;
        else
          throw ParseError(rw + ".kind must be \"ge\", \"gt\" or \"eq\"");
        feas.add_row(Halfspace(a, jc["b"].get<double>(), rk));
      }
    }

    if (!jn["vars"].is_array() || jn["vars"].empty())
      throw ParseError(where + ".vars must be a nonempty array of 1-based indices");
    IndexSet vars;
    for (const auto& jv : jn["vars"]) {
      if (!jv.is_number_integer()) throw ParseError(where + ".vars entries must be integers");
      const int v = jv.get<int>() - 1;
      if (v < 0 || v >= pf.n) throw ParseError(where + ".vars index out of range");
      vars.push_back(v);
    }
    pf.nodes.emplace_back(QuadCost(std::move(q_mat), std::move(q_vec)), std::move(feas),
                          std::move(vars));
  }

  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw ParseError("\"edges\" must be an array of [i,j] pairs");
    for (const auto& je : doc["edges"]) {
      if (!je.is_array() || je.size() != 2 || !je[0].is_number_integer() ||
          !je[1].is_number_integer())
        throw ParseError("\"edges\" entries must be [i,j] integer pairs");
      const int i = je[0].get<int>() - 1;
      const int j = je[1].get<int>() - 1;
      if (i < 0 || j < 0 || i >= static_cast<int>(pf.nodes.size()) ||
          j >= static_cast<int>(pf.nodes.size()))
        throw ParseError("edge endpoint out of range");
      pf.edges.insert({i, j});
    }
  }
  if (doc.contains("init")) pf.init = parse_vector(doc["init"], pf.n, "init");
  return pf;
}

ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem(buf.str());
}

namespace {

void emit_vector(std::ostream& os, const Vec& v) {
  os << '[';
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << format_double(v[i]);
  }
  os << ']';
}

const char* kind_name(RowKind k) {
  switch (k) {
    case RowKind::NonStrict: return "ge";
    case RowKind::Strict: return "gt";
    case RowKind::Equality: return "eq";
  }
  return "?";
}

}  // namespace

std::string problem_to_json(const ProblemFile& pf) {
  std::ostringstream os;
  os << "{\n  \"n\": " << pf.n << ",\n  \"nodes\": [\n";
  for (std::size_t i = 0; i < pf.nodes.size(); ++i) {
    const QpNode& node = pf.nodes[i];
    os << "    {\n      \"Q\": [";
    bool first = true;
    for (int r = 0; r < pf.n; ++r) {
      for (int c = 0; c < pf.n; ++c) {
        if (node.cost.Q(r, c) == 0.0) continue;
        if (!first) os << ',';
        os << '[' << r + 1 << ',' << c + 1 << ',' << format_double(node.cost.Q(r, c)) << ']';
        first = false;
      }
    }
    os << "],\n      \"q\": ";
    emit_vector(os, node.cost.q);
    os << ",\n      \"constraints\": [";
    for (std::size_t r = 0; r < node.feasible.rows().size(); ++r) {
      const auto& h = node.feasible.rows()[r];
      if (r) os << ',';
      os << "\n        {\"a\": ";
      emit_vector(os, h.normal);
      os << ", \"b\": " << format_double(h.offset) << ", \"kind\": \"" << kind_name(h.kind)
         << "\"}";
    }
    if (!node.feasible.rows().empty()) os << "\n      ";
    os << "],\n      \"vars\": [";
    for (std::size_t v = 0; v < node.decision.size(); ++v) {
      if (v) os << ',';
      os << node.decision[v] + 1;
    }
    os << "]\n    }" << (i + 1 < pf.nodes.size() ? "," : "") << '\n';
  }
  os << "  ],\n  \"edges\": [";
  bool first = true;
  for (const auto& [a, b] : pf.edges) {
    if (!first) os << ',';
    os << '[' << a + 1 << ',' << b + 1 << ']';
    first = false;
  }
  os << ']';
  if (pf.init) {
    os << ",\n  \"init\": ";
    emit_vector(os, *pf.init);
  }
  os << "\n}\n";
  return os.str();
}

void save_problem(const std::string& path, const ProblemFile& pf) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << problem_to_json(pf);
}

std::string trace_to_jsonl(const EquilibriumTrace& trace) {
  std::ostringstream os;
  for (const auto& ev : trace.events) {
    os << "{\"action\":\"" << action_name(ev.action) << "\",\"depth\":" << ev.depth
       << ",\"iterate\":";
    emit_vector(os, ev.iterate);
    os << ",\"region_choices\":{";
    bool first = true;
    for (const auto& [node, branch] : ev.region_choices) {
      if (!first) os << ',';
      os << '"' << node + 1 << "\":" << branch;
      first = false;
    }
    os << "}}\n";
  }
  os << "{\"termination\":\"" << termination_name(trace.termination) << "\",\"nash_solves\":"
     << trace.nash_solves << ",\"message\":\"" << trace.message << "\"}\n";
  return os.str();
}

std::string study_to_csv(const StudyResult& result) {
  std::ostringstream os;
  os << "config_id,edges,samples,mean_reduction_pct,se_pct,ci95_pct\n";
  char buf[64];
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f", row.mean_reduction_pct, row.se_pct,
                  row.ci95_pct);
    os << row.config_id << ',' << row.edges << ',' << row.samples << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace qpn
