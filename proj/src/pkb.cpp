#include "knowflow/pkb.hpp"

#include "knowflow/memory.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace knowflow {

namespace {

std::string lowercase(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return text;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t shared = 0;
  for (const std::string& tag : a) shared += b.count(tag);
  const size_t total = a.size() + b.size() - shared;
  return total == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(total);
}

// +0.05 for solidified templates whose recorded signature tags all appear in
// the goal: the template was proven on exactly this kind of task.
bool signature_tags_covered(const WorkflowTemplate& tmpl, const TaskGoal& goal) {
  auto it = tmpl.metadata.find("signature_tags");
  if (it == tmpl.metadata.end() || !it->second.is_array()) return false;
  for (const Json& tag : it->second) {
    if (!tag.is_string() || !goal.tags.count(tag.get<std::string>())) return false;
  }
  return true;
}

void collect_leaves(const std::vector<TemplateStep>& steps, std::vector<const TemplateStep*>& out) {
  for (const TemplateStep& step : steps) {
    if (step.is_leaf()) {
      out.push_back(&step);
    } else {
      collect_leaves(step.children, out);
    }
  }
}

Json resolve_binding(const Json& binding, const TaskGoal& goal) {
  if (binding.is_string()) {
    const std::string text = binding.get<std::string>();
    if (!text.empty() && text.front() == '?') {
      const std::string key = text.substr(1);
      auto it = goal.context.find(key);
      if (it == goal.context.end())
        fail(Errc::unbound_context_key, "context key \"" + key + "\" is not bound");
      return it->second;
    }
  }
  return binding;
}

}  // namespace

std::vector<RankedTemplate> retrieve_template(const TaskGoal& goal,
                                              const TemplateLibrary& library) {
  if (library.templates.empty()) fail(Errc::empty_library, "template library is empty");

  std::vector<RankedTemplate> ranked;
  ranked.reserve(library.templates.size());
  for (const auto& [id, tmpl] : library.templates) {
    double score = jaccard(goal.tags, tmpl.tags);
    if (tmpl.provenance == Provenance::solidified && signature_tags_covered(tmpl, goal))
      score += 0.05;
    ranked.push_back({id, score});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedTemplate& a, const RankedTemplate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.template_id < b.template_id;
  });
  return ranked;
}

WorkflowDag instantiate(const WorkflowTemplate& tmpl, const TaskGoal& goal,
                        const ToolRegistry& registry) {
  std::vector<const TemplateStep*> leaves;
  collect_leaves(tmpl.steps, leaves);
  if (leaves.empty())
    fail(Errc::invalid_instantiation, "template \"" + tmpl.id + "\" has no leaf steps");

  std::map<std::string, std::string> label_to_id;
  std::set<std::string> ambiguous_labels;
  std::vector<WorkflowNode> nodes;
  size_t index = 0;
  for (const TemplateStep* leaf : leaves) {
    ++index;
    WorkflowNode node;
    node.id = tmpl.id + "." + std::to_string(index);
    node.tool_name = leaf->tool_name;
    if (!registry.find(leaf->tool_name))
      fail(Errc::unknown_tool, "template step \"" + leaf->label + "\" names unregistered tool \"" +
                                   leaf->tool_name + "\"");
    for (const auto& [param, binding] : leaf->arg_bindings)
      node.args[param] = resolve_binding(binding, goal);
    if (!label_to_id.emplace(leaf->label, node.id).second) ambiguous_labels.insert(leaf->label);
    nodes.push_back(std::move(node));
  }

  WorkflowDag dag;
  for (const WorkflowNode& node : nodes) dag.nodes.emplace(node.id, node);
  dag.edges = infer_edges(nodes, registry);
  for (const auto& [from_label, to_label] : tmpl.explicit_edges) {
    if (ambiguous_labels.count(from_label) || ambiguous_labels.count(to_label))
      fail(Errc::invalid_instantiation,
           "template \"" + tmpl.id + "\": explicit edge references a duplicated label");
    auto from = label_to_id.find(from_label);
    auto to = label_to_id.find(to_label);
    if (from == label_to_id.end() || to == label_to_id.end())
      fail(Errc::invalid_instantiation,
           "template \"" + tmpl.id + "\": explicit edge references an unknown label");
    dag.edges.insert({from->second, to->second});
  }

  const ValidationReport report = validate(dag, registry);
  if (!report.ok)
    fail(Errc::invalid_instantiation,
         "template \"" + tmpl.id + "\" does not instantiate to a consistent workflow: " +
             report.to_json().dump());
  return dag;
}

TemplateLibrary solidify(TemplateLibrary library, const WorkflowDag& final_dag,
                         const ExecutionTrace& trace) {
  if (trace.outcome != Outcome::success)
    fail(Errc::not_eligible, "only successful traces can be solidified");
  if (trace.accepted_adjustments() == 0)
    fail(Errc::not_eligible, "workflow was not adjusted; nothing to solidify");

  WorkflowTemplate tmpl;
  tmpl.id = "solidified." + trace.trace_id;
  while (library.templates.count(tmpl.id)) tmpl.id += "+";
  tmpl.tags = trace.goal.tags;
  tmpl.provenance = Provenance::solidified;

  // Generalize arg values that came from the goal context back to
  // placeholders; repair-introduced literals stay as they are.
  const std::vector<std::string> order = topological_order(final_dag);
  std::string previous_label;
  for (const std::string& node_id : order) {
    const WorkflowNode& node = final_dag.nodes.at(node_id);
    TemplateStep step;
    step.label = node_id;
    step.tool_name = node.tool_name;
    for (const auto& [param, value] : node.args) {
      std::string placeholder;
      for (const auto& [key, context_value] : trace.goal.context) {
        if (context_value == value) {
          placeholder = "?" + key;
          break;  // context is sorted; the smallest key wins deterministically
        }
      }
      step.arg_bindings[param] = placeholder.empty() ? value : Json(placeholder);
    }
    if (!previous_label.empty()) tmpl.explicit_edges.push_back({previous_label, step.label});
    previous_label = step.label;
    tmpl.steps.push_back(std::move(step));
  }

  Json signature_tags = Json::array();
  for (const std::string& tag : trace.goal.tags) signature_tags.push_back(tag);
  Json repaired = Json::array();
  for (const Adjustment& adjustment : trace.adjustments)
    if (adjustment.accepted) repaired.push_back(to_json(adjustment.signature));
  tmpl.metadata["signature_tags"] = signature_tags;
  tmpl.metadata["repaired_signatures"] = repaired;
  tmpl.metadata["source_trace"] = trace.trace_id;

  library.templates.emplace(tmpl.id, std::move(tmpl));
  return library;
}

TaskGoal goal_from_json(const Json& value) {
  jsonio::expect_keys(value, {"text", "tags", "context"}, "task goal");
  TaskGoal goal;
  goal.text = jsonio::require_string(value, "text", "task goal");
  if (value.contains("tags")) {
    jsonio::expect_array(value.at("tags"), "goal tags");
    for (const Json& tag : value.at("tags")) {
      if (!tag.is_string()) fail(Errc::malformed, "goal tags must be strings");
      goal.tags.insert(lowercase(tag.get<std::string>()));
    }
  }
  if (value.contains("context")) {
    jsonio::expect_object(value.at("context"), "goal context");
    for (const auto& [key, entry] : value.at("context").items()) goal.context[key] = entry;
  }
  return goal;
}

Json to_json(const TaskGoal& goal) {
  Json context = Json::object();
  for (const auto& [key, value] : goal.context) context[key] = value;
  return Json{{"text", goal.text}, {"tags", goal.tags}, {"context", context}};
}

TaskGoal load_goal(const std::string& path) { return goal_from_json(jsonio::load_file(path)); }

namespace {

TemplateStep step_from_json(const Json& value) {
  jsonio::expect_keys(value, {"label", "tool_name", "arg_bindings", "children"}, "template step");
  TemplateStep step;
  step.label = jsonio::require_string(value, "label", "template step");
  if (value.contains("children")) {
    jsonio::expect_array(value.at("children"), "step children");
    for (const Json& child : value.at("children")) step.children.push_back(step_from_json(child));
    if (step.children.empty())
      fail(Errc::malformed, "composite step \"" + step.label + "\" has no children");
    if (value.contains("tool_name"))
      fail(Errc::malformed, "composite step \"" + step.label + "\" must not name a tool");
    if (value.contains("arg_bindings"))
      fail(Errc::malformed, "composite step \"" + step.label + "\" must not bind args");
    return step;
  }
  step.tool_name = jsonio::require_string(value, "tool_name", "template step");
  if (step.tool_name.empty())
    fail(Errc::malformed, "leaf step \"" + step.label + "\" must name a concrete tool");
  if (value.contains("arg_bindings")) {
    jsonio::expect_object(value.at("arg_bindings"), "arg bindings");
    for (const auto& [param, binding] : value.at("arg_bindings").items())
      step.arg_bindings[param] = binding;
  }
  return step;
}

Json step_to_json(const TemplateStep& step) {
  if (!step.is_leaf()) {
    Json children = Json::array();
    for (const TemplateStep& child : step.children) children.push_back(step_to_json(child));
    return Json{{"label", step.label}, {"children", children}};
  }
  Json bindings = Json::object();
  for (const auto& [param, binding] : step.arg_bindings) bindings[param] = binding;
  return Json{{"label", step.label}, {"tool_name", step.tool_name}, {"arg_bindings", bindings}};
}

}  // namespace

WorkflowTemplate template_from_json(const Json& value) {
  jsonio::expect_keys(value, {"id", "tags", "steps", "explicit_edges", "provenance", "metadata"},
                      "workflow template");
  WorkflowTemplate tmpl;
  tmpl.id = jsonio::require_string(value, "id", "workflow template");
  if (tmpl.id.empty()) fail(Errc::malformed, "template id must be nonempty");
  if (value.contains("tags")) {
    jsonio::expect_array(value.at("tags"), "template tags");
    for (const Json& tag : value.at("tags")) {
      if (!tag.is_string()) fail(Errc::malformed, "template tags must be strings");
      tmpl.tags.insert(lowercase(tag.get<std::string>()));
    }
  }
  const Json& steps = jsonio::require(value, "steps", "workflow template");
  jsonio::expect_array(steps, "template steps");
  for (const Json& entry : steps) tmpl.steps.push_back(step_from_json(entry));
  if (tmpl.steps.empty()) fail(Errc::malformed, "template \"" + tmpl.id + "\" has no steps");

  if (value.contains("explicit_edges")) {
    jsonio::expect_array(value.at("explicit_edges"), "explicit edges");
    for (const Json& entry : value.at("explicit_edges")) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_string())
        fail(Errc::malformed, "explicit edges must be [from, to] label pairs");
      tmpl.explicit_edges.push_back({entry[0].get<std::string>(), entry[1].get<std::string>()});
    }
  }

  const std::string provenance = jsonio::require_string(value, "provenance", "workflow template");
  if (provenance == "expert") {
    tmpl.provenance = Provenance::expert;
  } else if (provenance == "solidified") {
    tmpl.provenance = Provenance::solidified;
  } else {
    fail(Errc::malformed, "provenance must be \"expert\" or \"solidified\"");
  }

  if (value.contains("metadata")) {
    jsonio::expect_object(value.at("metadata"), "template metadata");
    for (const auto& [key, entry] : value.at("metadata").items()) tmpl.metadata[key] = entry;
  }
  return tmpl;
}

Json to_json(const WorkflowTemplate& tmpl) {
  Json steps = Json::array();
  for (const TemplateStep& step : tmpl.steps) steps.push_back(step_to_json(step));
  Json edges = Json::array();
  for (const auto& [from, to] : tmpl.explicit_edges) edges.push_back(Json::array({from, to}));
  Json metadata = Json::object();
  for (const auto& [key, value] : tmpl.metadata) metadata[key] = value;
  return Json{{"id", tmpl.id},
              {"tags", tmpl.tags},
              {"steps", steps},
              {"explicit_edges", edges},
              {"provenance", tmpl.provenance == Provenance::expert ? "expert" : "solidified"},
              {"metadata", metadata}};
}

TemplateLibrary library_from_json(const Json& value) {
  jsonio::expect_array(value, "template library");
  TemplateLibrary library;
  for (const Json& entry : value) {
    WorkflowTemplate tmpl = template_from_json(entry);
    if (library.templates.count(tmpl.id))
      fail(Errc::malformed, "template \"" + tmpl.id + "\" defined twice");
    library.templates.emplace(tmpl.id, std::move(tmpl));
  }
  return library;
}

Json to_json(const TemplateLibrary& library) {
  Json out = Json::array();
  for (const auto& [id, tmpl] : library.templates) out.push_back(to_json(tmpl));
  return out;
}

TemplateLibrary parse_library(const std::string& text) {
  return library_from_json(jsonio::parse_text(text, "template library"));
}

std::string serialize_library(const TemplateLibrary& library) { return to_json(library).dump(2); }

TemplateLibrary load_library(const std::string& path) {
  return library_from_json(jsonio::load_file(path));
}

void save_library(const std::string& path, const TemplateLibrary& library) {
  jsonio::write_file_atomic(path, serialize_library(library) + "\n");
}

}  // namespace knowflow
