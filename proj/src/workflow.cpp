#include "knowflow/workflow.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

namespace knowflow {

const WorkflowNode& WorkflowDag::node(const std::string& id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) fail(Errc::no_such_node, "node \"" + id + "\" does not exist");
  return it->second;
}

EdgeSet infer_edges(const std::vector<WorkflowNode>& nodes, const ToolRegistry& registry) {
  EdgeSet edges;
  for (const WorkflowNode& from : nodes) {
    const AtomSet adds = registry.at(from.tool_name).add_effects();
    if (adds.empty()) continue;
    for (const WorkflowNode& to : nodes) {
      if (from.id == to.id) continue;
      const AtomSet& pre = registry.at(to.tool_name).preconditions;
      const bool overlaps = std::any_of(adds.begin(), adds.end(), [&](const PredicateAtom& atom) {
        return pre.count(atom) > 0;
      });
      if (overlaps) edges.insert({from.id, to.id});
    }
  }
  return edges;
}

std::vector<std::string> topological_order(const WorkflowDag& dag) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::set<std::string>> successors;
  for (const auto& [id, node] : dag.nodes) indegree[id] = 0;
  for (const auto& [from, to] : dag.edges) {
    if (successors[from].insert(to).second) ++indegree[to];
  }

  std::set<std::string> frontier;
  for (const auto& [id, degree] : indegree)
    if (degree == 0) frontier.insert(id);

  std::vector<std::string> order;
  while (!frontier.empty()) {
    const std::string id = *frontier.begin();
    frontier.erase(frontier.begin());
    order.push_back(id);
    for (const std::string& next : successors[id]) {
      if (--indegree[next] == 0) frontier.insert(next);
    }
  }
  if (order.size() != dag.nodes.size())
    fail(Errc::cycle_detected, "workflow contains a cycle");
  return order;
}

namespace {

bool is_acyclic(const WorkflowDag& dag) {
  try {
    topological_order(dag);
    return true;
  } catch (const Error&) {
    return false;
  }
}

void check_node_args(const WorkflowNode& node, const ToolRegistry& registry,
                     std::vector<ArgError>& errors) {
  const ToolSchema* schema = registry.find(node.tool_name);
  if (!schema) {
    errors.push_back({node.id, "", "unknown tool \"" + node.tool_name + "\""});
    return;
  }
  for (const ParameterSpec& spec : schema->parameters) {
    auto it = node.args.find(spec.name);
    if (it == node.args.end()) {
      if (spec.required) errors.push_back({node.id, spec.name, "required parameter missing"});
      continue;
    }
    if (auto reason = check_arg_value(spec, it->second))
      errors.push_back({node.id, spec.name, *reason});
  }
  for (const auto& [name, value] : node.args) {
    if (!schema->find_param(name))
      errors.push_back({node.id, name, "not a parameter of \"" + node.tool_name + "\""});
  }
}

// Ancestor closure per node over reverse edges.
std::map<std::string, std::set<std::string>> ancestor_sets(const WorkflowDag& dag,
                                                           const std::vector<std::string>& order) {
  std::map<std::string, std::set<std::string>> predecessors;
  for (const auto& [from, to] : dag.edges) predecessors[to].insert(from);

  std::map<std::string, std::set<std::string>> ancestors;
  for (const std::string& id : order) {
    std::set<std::string>& mine = ancestors[id];
    for (const std::string& pred : predecessors[id]) {
      mine.insert(pred);
      const auto& theirs = ancestors[pred];
      mine.insert(theirs.begin(), theirs.end());
    }
  }
  return ancestors;
}

}  // namespace

ValidationReport validate(const WorkflowDag& dag, const ToolRegistry& registry) {
  ValidationReport report;
  report.acyclic = is_acyclic(dag);

  for (const auto& [id, node] : dag.nodes) check_node_args(node, registry, report.arg_errors);

  if (report.acyclic) {
    const std::vector<std::string> order = topological_order(dag);

    // Canonical-order simulation; unsatisfied nodes are recorded and their
    // effects still applied so downstream reporting names root causes only.
    std::map<std::string, bool> satisfied_sim;
    WorldState state = dag.initial_state;
    for (const std::string& id : order) {
      const WorkflowNode& node = dag.nodes.at(id);
      const ToolSchema* schema = registry.find(node.tool_name);
      if (!schema) continue;
      bool all_met = true;
      for (const PredicateAtom& atom : schema->preconditions) {
        if (!atom.is_ground() || !state.contains(atom)) {
          report.unsatisfied.push_back({id, atom});
          all_met = false;
        }
      }
      satisfied_sim[id] = all_met;
      for (const PredicateAtom& atom : schema->delete_effects()) state.atoms.erase(atom);
      for (const PredicateAtom& atom : schema->add_effects()) state.atoms.insert(atom);
    }

    // Order-independent check: Pre(v) within initial state plus the union of
    // ancestor add-effects. Disagreement with the simulation is a warning.
    const auto ancestors = ancestor_sets(dag, order);
    for (const std::string& id : order) {
      const WorkflowNode& node = dag.nodes.at(id);
      const ToolSchema* schema = registry.find(node.tool_name);
      if (!schema) continue;
      AtomSet available = dag.initial_state.atoms;
      for (const std::string& ancestor : ancestors.at(id)) {
        const ToolSchema* a = registry.find(dag.nodes.at(ancestor).tool_name);
        if (!a) continue;
        for (const PredicateAtom& atom : a->add_effects()) available.insert(atom);
      }
      const bool satisfied_anc =
          std::all_of(schema->preconditions.begin(), schema->preconditions.end(),
                      [&](const PredicateAtom& atom) { return available.count(atom) > 0; });
      if (satisfied_anc != satisfied_sim.at(id)) {
        report.warnings.push_back(
            "node \"" + id + "\": canonical-order simulation and ancestor check disagree (" +
            (satisfied_sim.at(id) ? "order-dependent satisfaction" : "delete-effect interference") +
            ")");
      }
    }
  }

  report.ok = report.acyclic && report.unsatisfied.empty() && report.arg_errors.empty();
  return report;
}

Json ValidationReport::to_json() const {
  Json unsat = Json::array();
  for (const UnsatisfiedAtom& entry : unsatisfied)
    unsat.push_back(Json{{"node_id", entry.node_id}, {"atom", knowflow::to_json(entry.atom)}});
  Json errors = Json::array();
  for (const ArgError& entry : arg_errors)
    errors.push_back(
        Json{{"node_id", entry.node_id}, {"param", entry.param}, {"reason", entry.reason}});
  return Json{{"ok", ok},
              {"acyclic", acyclic},
              {"unsatisfied", unsat},
              {"arg_errors", errors},
              {"warnings", warnings}};
}

WorkflowDag replace_node(const WorkflowDag& dag, const std::string& failed_id,
                         WorkflowNode replacement) {
  if (!dag.has_node(failed_id)) fail(Errc::no_such_node, "node \"" + failed_id + "\" does not exist");
  if (replacement.id != failed_id && dag.has_node(replacement.id))
    fail(Errc::duplicate_node_id, "node \"" + replacement.id + "\" already exists");

  WorkflowDag out = dag;
  out.nodes.erase(failed_id);
  const std::string new_id = replacement.id;
  out.nodes.emplace(new_id, std::move(replacement));

  out.edges.clear();
  for (const auto& [from, to] : dag.edges) {
    out.edges.insert({from == failed_id ? new_id : from, to == failed_id ? new_id : to});
  }
  return out;
}

WorkflowDag insert_node(const WorkflowDag& dag, const std::string& pred_id,
                        const std::string& succ_id, WorkflowNode inserted) {
  if (!dag.has_edge(pred_id, succ_id))
    fail(Errc::no_such_edge, "edge (" + pred_id + ", " + succ_id + ") does not exist");
  if (dag.has_node(inserted.id))
    fail(Errc::duplicate_node_id, "node \"" + inserted.id + "\" already exists");

  WorkflowDag out = dag;
  out.edges.erase({pred_id, succ_id});
  out.edges.insert({pred_id, inserted.id});
  out.edges.insert({inserted.id, succ_id});
  out.nodes.emplace(inserted.id, std::move(inserted));
  return out;
}

WorkflowDag modify_params(const WorkflowDag& dag, const std::string& node_id,
                          std::map<std::string, Json> new_args, const ToolRegistry& registry) {
  if (!dag.has_node(node_id)) fail(Errc::no_such_node, "node \"" + node_id + "\" does not exist");

  const WorkflowNode& node = dag.nodes.at(node_id);
  if (const ToolSchema* schema = registry.find(node.tool_name)) {
    for (const auto& [name, value] : new_args) {
      const ParameterSpec* spec = schema->find_param(name);
      if (!spec)
        fail(Errc::arg_kind_mismatch,
             "\"" + name + "\" is not a parameter of \"" + node.tool_name + "\"");
      if (auto reason = check_arg_value(*spec, value))
        fail(Errc::arg_kind_mismatch, "argument \"" + name + "\": " + *reason);
    }
  }

  WorkflowDag out = dag;
  out.nodes.at(node_id).args = std::move(new_args);
  return out;
}

WorkflowNode workflow_node_from_json(const Json& value, bool allow_empty_id) {
  jsonio::expect_keys(value, {"id", "tool_name", "args", "quality_threshold"}, "workflow node");
  WorkflowNode node;
  node.id = allow_empty_id ? jsonio::get_string(value, "id", "")
                           : jsonio::require_string(value, "id", "workflow node");
  if (node.id.empty() && !allow_empty_id) fail(Errc::malformed, "node id must be nonempty");
  node.tool_name = jsonio::require_string(value, "tool_name", "workflow node");
  if (value.contains("args")) {
    jsonio::expect_object(value.at("args"), "node args");
    for (const auto& [name, arg] : value.at("args").items()) node.args[name] = arg;
  }
  if (value.contains("quality_threshold")) {
    const Json& threshold = value.at("quality_threshold");
    if (!threshold.is_number()) fail(Errc::malformed, "quality_threshold must be a number");
    const double v = threshold.get<double>();
    if (v < 0.0 || v > 1.0) fail(Errc::malformed, "quality_threshold must lie in [0,1]");
    node.quality_threshold = v;
  }
  return node;
}

Json to_json(const WorkflowNode& node) {
  Json args = Json::object();
  for (const auto& [name, value] : node.args) args[name] = value;
  Json out{{"id", node.id}, {"tool_name", node.tool_name}, {"args", args}};
  if (node.quality_threshold) out["quality_threshold"] = *node.quality_threshold;
  return out;
}

WorkflowDag workflow_from_json(const Json& value) {
  jsonio::expect_keys(value, {"initial_state", "nodes", "edges"}, "workflow");
  WorkflowDag dag;
  dag.initial_state = world_state_from_json(jsonio::require(value, "initial_state", "workflow"));

  const Json& nodes = jsonio::require(value, "nodes", "workflow");
  jsonio::expect_array(nodes, "workflow nodes");
  for (const Json& entry : nodes) {
    WorkflowNode node = workflow_node_from_json(entry);
    if (dag.has_node(node.id))
      fail(Errc::duplicate_node_id, "node \"" + node.id + "\" defined twice");
    dag.nodes.emplace(node.id, std::move(node));
  }

  const Json& edges = jsonio::require(value, "edges", "workflow");
  jsonio::expect_array(edges, "workflow edges");
  for (const Json& entry : edges) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_string())
      fail(Errc::malformed, "edges must be [from, to] string pairs");
    const std::string from = entry[0].get<std::string>();
    const std::string to = entry[1].get<std::string>();
    if (!dag.has_node(from) || !dag.has_node(to))
      fail(Errc::malformed, "edge (" + from + ", " + to + ") references a missing node");
    dag.edges.insert({from, to});
  }
  return dag;
}

Json to_json(const WorkflowDag& dag) {
  Json nodes = Json::array();
  for (const auto& [id, node] : dag.nodes) nodes.push_back(to_json(node));
  Json edges = Json::array();
  for (const auto& [from, to] : dag.edges) edges.push_back(Json::array({from, to}));
  return Json{{"initial_state", to_json(dag.initial_state)}, {"nodes", nodes}, {"edges", edges}};
}

WorkflowDag parse_workflow(const std::string& text) {
  return workflow_from_json(jsonio::parse_text(text, "workflow"));
}

std::string serialize_workflow(const WorkflowDag& dag) { return to_json(dag).dump(2); }

WorkflowDag load_workflow(const std::string& path) {
  return workflow_from_json(jsonio::load_file(path));
}

}  // namespace knowflow
