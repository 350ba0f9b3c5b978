#pragma once
// Workflows as DAGs over tool invocations: edge inference from effect/
// precondition overlap, consistency validation, canonical topological order,
// and the three graph repair operators. All operators are pure: the input dag
// is never mutated, a new value is returned.

#include "knowflow/schema.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace knowflow {

struct WorkflowNode {
  std::string id;
  std::string tool_name;
  std::map<std::string, Json> args;
  std::optional<double> quality_threshold;  // in [0,1]; absent = any quality accepted

  friend bool operator==(const WorkflowNode&, const WorkflowNode&) = default;
};

using EdgeSet = std::set<std::pair<std::string, std::string>>;

struct WorkflowDag {
  std::map<std::string, WorkflowNode> nodes;
  EdgeSet edges;
  WorldState initial_state;

  bool has_node(const std::string& id) const { return nodes.count(id) > 0; }
  bool has_edge(const std::string& from, const std::string& to) const {
    return edges.count({from, to}) > 0;
  }
  const WorkflowNode& node(const std::string& id) const;  // no_such_node when absent

  friend bool operator==(const WorkflowDag&, const WorkflowDag&) = default;
};

struct UnsatisfiedAtom {
  std::string node_id;
  PredicateAtom atom;

  friend bool operator==(const UnsatisfiedAtom&, const UnsatisfiedAtom&) = default;
};

struct ArgError {
  std::string node_id;
  std::string param;
  std::string reason;

  friend bool operator==(const ArgError&, const ArgError&) = default;
};

struct ValidationReport {
  bool acyclic = true;
  std::vector<UnsatisfiedAtom> unsatisfied;
  std::vector<ArgError> arg_errors;
  std::vector<std::string> warnings;
  bool ok = false;

  Json to_json() const;

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

// Edge (i,j) iff i != j and add-effects(tool(i)) intersects preconditions(tool(j)).
EdgeSet infer_edges(const std::vector<WorkflowNode>& nodes, const ToolRegistry& registry);

// Acyclicity, argument checks against ParameterSpec, and state-simulation
// consistency along the canonical order. An order-independent ancestor check
// runs as well; disagreements between the two are reported as warnings.
ValidationReport validate(const WorkflowDag& dag, const ToolRegistry& registry);

// Kahn's algorithm with a min-id frontier: the lexicographically smallest
// valid order, so repeated calls agree.
std::vector<std::string> topological_order(const WorkflowDag& dag);

WorkflowDag replace_node(const WorkflowDag& dag, const std::string& failed_id,
                         WorkflowNode replacement);
WorkflowDag insert_node(const WorkflowDag& dag, const std::string& pred_id,
                        const std::string& succ_id, WorkflowNode inserted);
WorkflowDag modify_params(const WorkflowDag& dag, const std::string& node_id,
                          std::map<std::string, Json> new_args, const ToolRegistry& registry);

// Rule and script payload nodes may leave the id empty (the executor
// generates a fresh one); everywhere else ids are required.
WorkflowNode workflow_node_from_json(const Json& value, bool allow_empty_id = false);
Json to_json(const WorkflowNode& node);

WorkflowDag workflow_from_json(const Json& value);
Json to_json(const WorkflowDag& dag);
WorkflowDag parse_workflow(const std::string& text);
std::string serialize_workflow(const WorkflowDag& dag);
WorkflowDag load_workflow(const std::string& path);

}  // namespace knowflow
