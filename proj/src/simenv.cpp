#include "knowflow/simenv.hpp"

#include <httplib.h>

#include <algorithm>
#include <iostream>

namespace knowflow {

void SimEnvironment::reset_run_state() {
  fault_fire_counts.assign(faults.size(), 0);
  call_count = 0;
}

const DatasetDescriptor* SimEnvironment::input_dataset(const WorkflowNode& node) const {
  for (const auto& [param, value] : node.args) {
    if (!value.is_string()) continue;
    const std::string id = value.get<std::string>();
    for (const DatasetDescriptor& dataset : datasets)
      if (dataset.id == id) return &dataset;
  }
  if (datasets.size() == 1) return &datasets.front();
  return nullptr;
}

double QualitySpec::score(const std::map<std::string, Json>& attrs) const {
  double value = base;
  for (const QualityAdjust& rule : adjust) {
    auto it = attrs.find(rule.key);
    if (it != attrs.end() && it->second == rule.value) value += rule.delta;
  }
  return value;
}

bool sim_environment_config_equal(const SimEnvironment& a, const SimEnvironment& b) {
  return a.datasets == b.datasets && a.faults == b.faults &&
         a.tool_behaviors == b.tool_behaviors && a.seed == b.seed;
}

namespace {

FirePolicy fire_policy_from_json(const Json& value) {
  FirePolicy policy;
  const std::string kind = jsonio::require_string(value, "kind", "fire policy");
  if (kind == "always") {
    jsonio::expect_keys(value, {"kind"}, "fire policy");
    policy.kind = FirePolicy::Kind::always;
  } else if (kind == "first_n") {
    jsonio::expect_keys(value, {"kind", "n"}, "fire policy");
    policy.kind = FirePolicy::Kind::first_n;
    policy.n = jsonio::require(value, "n", "fire policy").get<long>();
    if (policy.n < 0) fail(Errc::malformed, "first_n count must be non-negative");
  } else if (kind == "until_atom") {
    jsonio::expect_keys(value, {"kind", "atom"}, "fire policy");
    policy.kind = FirePolicy::Kind::until_atom;
    policy.atom = atom_from_json(jsonio::require(value, "atom", "fire policy"));
  } else {
    fail(Errc::malformed, "unknown fire policy \"" + kind + "\"");
  }
  return policy;
}

Json fire_policy_to_json(const FirePolicy& policy) {
  switch (policy.kind) {
    case FirePolicy::Kind::always:
      return Json{{"kind", "always"}};
    case FirePolicy::Kind::first_n:
      return Json{{"kind", "first_n"}, {"n", policy.n}};
    case FirePolicy::Kind::until_atom:
      return Json{{"kind", "until_atom"}, {"atom", to_json(policy.atom)}};
  }
  return Json{{"kind", "always"}};
}

std::map<std::string, Json> attrs_from_json(const Json& value, const std::string& what) {
  jsonio::expect_object(value, what);
  std::map<std::string, Json> attrs;
  for (const auto& [key, attr] : value.items()) attrs[key] = attr;
  return attrs;
}

Json attrs_to_json(const std::map<std::string, Json>& attrs) {
  Json out = Json::object();
  for (const auto& [key, value] : attrs) out[key] = value;
  return out;
}

}  // namespace

SimEnvironment environment_from_json(const Json& value) {
  jsonio::expect_keys(value, {"datasets", "faults", "tool_behaviors", "seed"}, "environment");
  SimEnvironment env;

  if (value.contains("datasets")) {
    jsonio::expect_array(value.at("datasets"), "datasets");
    for (const Json& entry : value.at("datasets")) {
      jsonio::expect_keys(entry, {"id", "attrs"}, "dataset");
      DatasetDescriptor dataset;
      dataset.id = jsonio::require_string(entry, "id", "dataset");
      const bool duplicate =
          std::any_of(env.datasets.begin(), env.datasets.end(),
                      [&](const DatasetDescriptor& d) { return d.id == dataset.id; });
      if (duplicate) fail(Errc::malformed, "dataset \"" + dataset.id + "\" defined twice");
      if (entry.contains("attrs")) dataset.attrs = attrs_from_json(entry.at("attrs"), "dataset attrs");
      env.datasets.push_back(std::move(dataset));
    }
  }

  if (value.contains("faults")) {
    jsonio::expect_array(value.at("faults"), "faults");
    for (const Json& entry : value.at("faults")) {
      jsonio::expect_keys(entry, {"tool_name", "attr_match", "error_code", "fire_policy"}, "fault");
      FaultRule fault;
      fault.tool_name = jsonio::get_string(entry, "tool_name", "");
      if (entry.contains("attr_match"))
        fault.attr_match = attrs_from_json(entry.at("attr_match"), "fault attr_match");
      fault.error_code = jsonio::require_string(entry, "error_code", "fault");
      if (fault.error_code.empty()) fail(Errc::malformed, "fault error_code must be nonempty");
      fault.fire = fire_policy_from_json(jsonio::require(entry, "fire_policy", "fault"));
      env.faults.push_back(std::move(fault));
    }
  }

  if (value.contains("tool_behaviors")) {
    jsonio::expect_object(value.at("tool_behaviors"), "tool behaviors");
    for (const auto& [tool, entry] : value.at("tool_behaviors").items()) {
      jsonio::expect_keys(entry, {"emitted_atoms", "quality"}, "tool behavior");
      ToolBehavior behavior;
      if (entry.contains("emitted_atoms")) {
        jsonio::expect_array(entry.at("emitted_atoms"), "emitted atoms");
        std::vector<PredicateAtom> atoms;
        for (const Json& atom : entry.at("emitted_atoms")) atoms.push_back(atom_from_json(atom));
        behavior.emitted_atoms = std::move(atoms);
      }
      if (entry.contains("quality")) {
        jsonio::expect_keys(entry.at("quality"), {"base", "adjust"}, "quality spec");
        QualitySpec quality;
        if (entry.at("quality").contains("base"))
          quality.base = entry.at("quality").at("base").get<double>();
        if (entry.at("quality").contains("adjust")) {
          jsonio::expect_array(entry.at("quality").at("adjust"), "quality adjust");
          for (const Json& rule : entry.at("quality").at("adjust")) {
            jsonio::expect_keys(rule, {"key", "value", "delta"}, "quality adjust");
            QualityAdjust adjust;
            adjust.key = jsonio::require_string(rule, "key", "quality adjust");
            adjust.value = jsonio::require(rule, "value", "quality adjust");
            adjust.delta = jsonio::require(rule, "delta", "quality adjust").get<double>();
            quality.adjust.push_back(std::move(adjust));
          }
        }
        behavior.quality = std::move(quality);
      }
      env.tool_behaviors.emplace(tool, std::move(behavior));
    }
  }

  if (value.contains("seed")) env.seed = value.at("seed").get<long>();
  env.reset_run_state();
  return env;
}

Json to_json(const SimEnvironment& env) {
  Json datasets = Json::array();
  for (const DatasetDescriptor& dataset : env.datasets)
    datasets.push_back(Json{{"id", dataset.id}, {"attrs", attrs_to_json(dataset.attrs)}});

  Json faults = Json::array();
  for (const FaultRule& fault : env.faults) {
    Json entry{{"attr_match", attrs_to_json(fault.attr_match)},
               {"error_code", fault.error_code},
               {"fire_policy", fire_policy_to_json(fault.fire)}};
    if (!fault.tool_name.empty()) entry["tool_name"] = fault.tool_name;
    faults.push_back(std::move(entry));
  }

  Json behaviors = Json::object();
  for (const auto& [tool, behavior] : env.tool_behaviors) {
    Json entry = Json::object();
    if (behavior.emitted_atoms) {
      Json atoms = Json::array();
      for (const PredicateAtom& atom : *behavior.emitted_atoms) atoms.push_back(to_json(atom));
      entry["emitted_atoms"] = atoms;
    }
    if (behavior.quality) {
      Json adjust = Json::array();
      for (const QualityAdjust& rule : behavior.quality->adjust)
        adjust.push_back(Json{{"key", rule.key}, {"value", rule.value}, {"delta", rule.delta}});
      entry["quality"] = Json{{"base", behavior.quality->base}, {"adjust", adjust}};
    }
    behaviors[tool] = std::move(entry);
  }

  return Json{{"datasets", datasets},
              {"faults", faults},
              {"tool_behaviors", behaviors},
              {"seed", env.seed}};
}

SimEnvironment parse_environment(const std::string& text) {
  return environment_from_json(jsonio::parse_text(text, "environment"));
}

SimEnvironment load_environment(const std::string& path) {
  return environment_from_json(jsonio::load_file(path));
}

HistoryEntry execute_tool(SimEnvironment& env, const WorkflowNode& node,
                          const ToolRegistry& registry, const WorldState& state) {
  const ToolSchema& schema = registry.at(node.tool_name);
  if (env.fault_fire_counts.size() != env.faults.size()) env.reset_run_state();

  HistoryEntry entry;
  entry.node_id = node.id;
  entry.tool_name = node.tool_name;
  entry.args = node.args;
  entry.timestamp = ++env.call_count;

  const DatasetDescriptor* dataset = env.input_dataset(node);
  const std::map<std::string, Json> no_attrs;
  const std::map<std::string, Json>& attrs = dataset ? dataset->attrs : no_attrs;

  // First matching fault whose policy fires wins.
  for (size_t i = 0; i < env.faults.size(); ++i) {
    const FaultRule& fault = env.faults[i];
    if (!fault.tool_name.empty() && fault.tool_name != node.tool_name) continue;
    const bool attrs_match =
        std::all_of(fault.attr_match.begin(), fault.attr_match.end(), [&](const auto& kv) {
          auto it = attrs.find(kv.first);
          return it != attrs.end() && it->second == kv.second;
        });
    if (!attrs_match) continue;

    bool fires = false;
    switch (fault.fire.kind) {
      case FirePolicy::Kind::always:
        fires = true;
        break;
      case FirePolicy::Kind::first_n:
        if (env.fault_fire_counts[i] < fault.fire.n) {
          ++env.fault_fire_counts[i];
          fires = true;
        }
        break;
      case FirePolicy::Kind::until_atom:
        fires = !state.contains(fault.fire.atom);
        break;
    }
    if (fires) {
      entry.status.kind = StepStatus::Kind::error;
      entry.status.error_code = fault.error_code;
      return entry;
    }
  }

  auto behavior_it = env.tool_behaviors.find(node.tool_name);
  const ToolBehavior* behavior =
      behavior_it == env.tool_behaviors.end() ? nullptr : &behavior_it->second;

  if (node.quality_threshold) {
    const double score = behavior && behavior->quality ? behavior->quality->score(attrs) : 1.0;
    if (score < *node.quality_threshold) {
      entry.status.kind = StepStatus::Kind::quality_fail;
      entry.status.score = score;
      return entry;
    }
  }

  entry.status.kind = StepStatus::Kind::success;
  if (behavior && behavior->emitted_atoms) {
    entry.output_atoms.insert(behavior->emitted_atoms->begin(), behavior->emitted_atoms->end());
  } else {
    const AtomSet adds = schema.add_effects();
    entry.output_atoms.insert(adds.begin(), adds.end());
  }
  return entry;
}

ScriptedPlanner ScriptedPlanner::from_json(const Json& value) {
  jsonio::expect_keys(value, {"repairs", "plans"}, "planner script");
  std::vector<ScriptRepair> repairs;
  std::vector<ScriptPlan> plans;
  if (value.contains("repairs")) {
    jsonio::expect_array(value.at("repairs"), "script repairs");
    for (const Json& entry : value.at("repairs")) {
      jsonio::expect_keys(entry, {"pattern", "action"}, "script repair");
      ScriptRepair repair;
      repair.pattern = pattern_from_json(jsonio::require(entry, "pattern", "script repair"));
      repair.action = repair_action_from_json(jsonio::require(entry, "action", "script repair"));
      repairs.push_back(std::move(repair));
    }
  }
  if (value.contains("plans")) {
    jsonio::expect_array(value.at("plans"), "script plans");
    for (const Json& entry : value.at("plans")) {
      jsonio::expect_keys(entry, {"goal_tags", "workflow"}, "script plan");
      ScriptPlan plan;
      const Json& tags = jsonio::require(entry, "goal_tags", "script plan");
      jsonio::expect_array(tags, "plan goal tags");
      for (const Json& tag : tags) plan.goal_tags.insert(tag.get<std::string>());
      plan.workflow = workflow_from_json(jsonio::require(entry, "workflow", "script plan"));
      plans.push_back(std::move(plan));
    }
  }
  return ScriptedPlanner(std::move(repairs), std::move(plans));
}

ScriptedPlanner ScriptedPlanner::load(const std::string& path) {
  return from_json(jsonio::load_file(path));
}

std::optional<RepairAction> ScriptedPlanner::propose_repair(const RepairContext& context) {
  for (const ScriptRepair& repair : repairs_) {
    if (repair.pattern.matches(context.signature)) return repair.action;
  }
  return std::nullopt;
}

std::optional<WorkflowDag> ScriptedPlanner::synthesize_plan(const TaskGoal& goal,
                                                            const ToolRegistry&) {
  for (const ScriptPlan& plan : plans_) {
    const bool applies = std::all_of(plan.goal_tags.begin(), plan.goal_tags.end(),
                                     [&](const std::string& tag) { return goal.tags.count(tag); });
    if (applies) return plan.workflow;
  }
  return std::nullopt;
}

RemotePlanner::RemotePlanner(std::string url, int timeout_seconds)
    : scheme_host_(std::move(url)), timeout_seconds_(timeout_seconds) {}

std::optional<Json> RemotePlanner::post(const std::string& path, const Json& request) {
  try {
    httplib::Client client(scheme_host_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_write_timeout(timeout_seconds_, 0);
    auto response = client.Post(path, request.dump(), "application/json");
    if (!response || response->status != 200) {
      std::cerr << "remote planner: no usable response from " << scheme_host_ << path << "\n";
      return std::nullopt;
    }
    Json body = Json::parse(response->body, nullptr, false);
    if (body.is_discarded()) {
      std::cerr << "remote planner: malformed response body\n";
      return std::nullopt;
    }
    return body;
  } catch (const std::exception& e) {
    std::cerr << "remote planner: " << e.what() << "\n";
    return std::nullopt;
  }
}

std::optional<RepairAction> RemotePlanner::propose_repair(const RepairContext& context) {
  Json history = Json::array();
  if (context.trace)
    for (const HistoryEntry& entry : context.trace->history) history.push_back(to_json(entry));
  Json tools = Json::array();
  if (context.registry)
    for (const auto& [name, schema] : context.registry->tools) tools.push_back(name);
  const Json request{{"history", history},
                     {"workflow", context.dag ? to_json(*context.dag) : Json(nullptr)},
                     {"tools", tools},
                     {"signature", to_json(context.signature)}};
  auto response = post("/repair", request);
  if (!response) return std::nullopt;
  try {
    return repair_action_from_json(*response);
  } catch (const std::exception& e) {
    std::cerr << "remote planner: unparseable repair action: " << e.what() << "\n";
    return std::nullopt;
  }
}

std::optional<WorkflowDag> RemotePlanner::synthesize_plan(const TaskGoal& goal,
                                                          const ToolRegistry& registry) {
  Json tools = Json::array();
  for (const auto& [name, schema] : registry.tools) tools.push_back(name);
  const Json request{{"goal", to_json(goal)}, {"tools", tools}};
  auto response = post("/plan", request);
  if (!response) return std::nullopt;
  try {
    if (response->contains("workflow")) return workflow_from_json(response->at("workflow"));
    return workflow_from_json(*response);
  } catch (const std::exception& e) {
    std::cerr << "remote planner: unparseable plan: " << e.what() << "\n";
    return std::nullopt;
  }
}

}  // namespace knowflow
