#pragma once

#include <optional>
#include <string>

#include "qpn/equilibrium.hpp"
#include "qpn/experiments.hpp"

namespace qpn {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct ProblemFile {
  int n = 0;
  std::vector<QpNode> nodes;
  std::set<Edge> edges;
  std::optional<Vec> init;

  QpNetwork network() const { return QpNetwork(n, nodes, edges); }
};

/// JSON problem document. Variable indices are 1-based on disk. "Q" is
/// either a dense n x n array (nested rows or flat row-major) or a list
/// of [i, j, value] triplets. Unknown keys are rejected.
ProblemFile parse_problem(const std::string& text);
ProblemFile load_problem(const std::string& path);

/// Serializes with 17 significant digits so parsing is an identity up to
/// float formatting.
std::string problem_to_json(const ProblemFile& pf);
void save_problem(const std::string& path, const ProblemFile& pf);

/// One JSON object per trace event:
/// {"action":…,"depth":…,"iterate":[…],"region_choices":{"1":0,…}}
std::string trace_to_jsonl(const EquilibriumTrace& trace);

std::string study_to_csv(const StudyResult& result);

std::string format_double(double v);  // %.17g
const char* action_name(TraceAction a);
const char* termination_name(Termination t);

}  // namespace qpn
