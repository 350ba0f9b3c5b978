#include "knowflow/executor.hpp"

#include <algorithm>
#include <set>

namespace knowflow {

RunConfig run_config_from_json(const Json& value) {
  jsonio::expect_keys(value,
                      {"max_repairs_per_node", "max_total_adjustments", "tier1", "tier2",
                       "workflow_library", "dynamic_adjustment", "learning", "seed"},
                      "run config");
  RunConfig config;
  if (value.contains("max_repairs_per_node"))
    config.max_repairs_per_node = value.at("max_repairs_per_node").get<long>();
  if (value.contains("max_total_adjustments"))
    config.max_total_adjustments = value.at("max_total_adjustments").get<long>();
  if (config.max_repairs_per_node < 0 || config.max_total_adjustments < 0)
    fail(Errc::malformed, "repair budgets must be non-negative");
  if (value.contains("tier1")) config.tiers.tier1 = value.at("tier1").get<bool>();
  if (value.contains("tier2")) config.tiers.tier2 = value.at("tier2").get<bool>();
  if (value.contains("workflow_library"))
    config.ablations.workflow_library = value.at("workflow_library").get<bool>();
  if (value.contains("dynamic_adjustment"))
    config.ablations.dynamic_adjustment = value.at("dynamic_adjustment").get<bool>();
  if (value.contains("learning")) config.ablations.learning = value.at("learning").get<bool>();
  if (value.contains("seed")) config.seed = value.at("seed").get<long>();
  return config;
}

Json to_json(const RunConfig& config) {
  return Json{{"max_repairs_per_node", config.max_repairs_per_node},
              {"max_total_adjustments", config.max_total_adjustments},
              {"tier1", config.tiers.tier1},
              {"tier2", config.tiers.tier2},
              {"workflow_library", config.ablations.workflow_library},
              {"dynamic_adjustment", config.ablations.dynamic_adjustment},
              {"learning", config.ablations.learning},
              {"seed", config.seed}};
}

Json to_json(const RunResult& result) {
  return Json{{"outcome", result.outcome == Outcome::success ? "success" : "terminal_failure"},
              {"first_pass", result.first_pass},
              {"counters",
               Json{{"tool_calls", result.counters.tool_calls},
                    {"planner_calls", result.counters.planner_calls},
                    {"interactions", result.counters.interactions},
                    {"adjustments", result.counters.adjustments}}},
              {"final_state", to_json(result.final_state)},
              {"format_violations", result.format_violations},
              {"trace", to_json(result.trace)}};
}

FailureSignature diagnose(const HistoryEntry& entry, const WorkflowNode& node,
                          const SimEnvironment& env) {
  if (entry.status.is_success())
    fail(Errc::not_a_failure, "entry for node \"" + entry.node_id + "\" succeeded");

  FailureSignature sig;
  sig.tool_name = node.tool_name;
  if (const DatasetDescriptor* dataset = env.input_dataset(node)) sig.data_attrs = dataset->attrs;
  sig.error_code = entry.status.kind == StepStatus::Kind::quality_fail
                       ? "quality_below_threshold"
                       : entry.status.error_code;
  return sig;
}

std::optional<SelectedRepair> select_repair(const FailureSignature& sig,
                                            const ExecutionTrace& trace, const WorkflowDag& dag,
                                            const ToolRegistry& registry, const MemoryStore& store,
                                            PlannerInterface& planner, const RunConfig& config,
                                            RunCounters& counters) {
  if (config.tiers.tier1) {
    if (auto action = query_repair(store, sig)) return SelectedRepair{std::move(*action), 1};
  }
  if (config.tiers.tier2) {
    ++counters.planner_calls;
    RepairContext context;
    context.trace = &trace;
    context.dag = &dag;
    context.registry = &registry;
    context.signature = sig;
    try {
      if (auto action = planner.propose_repair(context))
        return SelectedRepair{std::move(*action), 2};
    } catch (const std::exception&) {
      // PlannerUnavailable: a Tier-2 miss, never fatal.
    }
  }
  return std::nullopt;
}

WorkflowDag apply_repair(const WorkflowDag& dag, const RepairAction& action,
                         const ToolRegistry& registry) {
  WorkflowDag repaired;
  switch (action.kind) {
    case RepairKind::replace:
      repaired = replace_node(dag, action.target, *action.node);
      break;
    case RepairKind::insert:
      repaired = insert_node(dag, action.predecessor, action.target, *action.node);
      break;
    case RepairKind::modify:
      repaired = modify_params(dag, action.target, action.args, registry);
      break;
    default:
      fail(Errc::repair_rejected,
           std::string(repair_kind_name(action.kind)) + " does not manipulate the graph");
  }
  const ValidationReport report = validate(repaired, registry);
  if (!report.ok)
    fail(Errc::repair_rejected,
         "repaired workflow is not logically consistent: " + report.to_json().dump());
  return repaired;
}

namespace {

// Rule and script actions may reference nodes relative to the failure point;
// pin them to concrete ids against the current dag.
RepairAction resolve_action(RepairAction action, const WorkflowDag& dag,
                            const std::string& failing_node) {
  if (action.kind != RepairKind::replace && action.kind != RepairKind::insert &&
      action.kind != RepairKind::modify)
    return action;

  if (action.target.empty()) action.target = failing_node;

  if (action.kind == RepairKind::insert && action.predecessor.empty()) {
    // Canonical predecessor: the smallest id with an edge into the target.
    for (const auto& [from, to] : dag.edges) {
      if (to == action.target) {
        action.predecessor = from;
        break;
      }
    }
    if (action.predecessor.empty())
      fail(Errc::no_such_edge, "node \"" + action.target + "\" has no predecessor to insert after");
  }

  if (action.node && action.node->id.empty()) {
    const char* suffix = action.kind == RepairKind::insert ? ".ins" : ".rep";
    for (int k = 1;; ++k) {
      const std::string id = action.target + suffix + std::to_string(k);
      if (!dag.has_node(id)) {
        action.node->id = id;
        break;
      }
    }
  }
  return action;
}

HistoryEntry precondition_failure_entry(SimEnvironment& env, const WorkflowNode& node) {
  HistoryEntry entry;
  entry.node_id = node.id;
  entry.tool_name = node.tool_name;
  entry.args = node.args;
  entry.timestamp = ++env.call_count;
  entry.status.kind = StepStatus::Kind::error;
  entry.status.error_code = "precondition_violated";
  return entry;
}

RunResult terminal_without_execution(const WorkflowDag& dag, const TaskGoal& goal,
                                     const std::string& trace_id) {
  RunResult result;
  result.outcome = Outcome::terminal_failure;
  result.trace.trace_id = trace_id;
  result.trace.goal = goal;
  result.trace.w_init = dag;
  result.trace.w_final = dag;
  result.trace.outcome = Outcome::terminal_failure;
  result.counters.interactions = 1;  // the user must be told
  result.final_state = dag.initial_state;
  return result;
}

}  // namespace

RunResult execute_workflow(const WorkflowDag& initial_dag, SimEnvironment& env,
                           const ToolRegistry& registry, const MemoryStore& store,
                           PlannerInterface& planner, const RunConfig& config,
                           const TaskGoal& goal, const std::string& trace_id) {
  env.reset_run_state();

  WorkflowDag dag = initial_dag;
  ExecutionTrace trace;
  trace.trace_id = trace_id;
  trace.goal = goal;
  trace.w_init = initial_dag;

  RunCounters counters;
  WorldState state = dag.initial_state;
  std::set<std::string> executed;
  std::map<std::string, long> attempts_per_node;
  long total_attempts = 0;
  std::optional<FailureSignature> final_failure;
  bool terminal = false;

  while (true) {
    const std::vector<std::string> order = topological_order(dag);
    std::string current;
    for (const std::string& id : order) {
      if (!executed.count(id)) {
        current = id;
        break;
      }
    }
    if (current.empty()) break;  // every node executed

    const WorkflowNode& node = dag.nodes.at(current);
    const ToolSchema& schema = registry.at(node.tool_name);

    HistoryEntry entry = preconditions_satisfied(schema, state)
                             ? execute_tool(env, node, registry, state)
                             : precondition_failure_entry(env, node);
    trace.history.push_back(entry);
    ++counters.tool_calls;

    if (entry.status.is_success()) {
      for (const PredicateAtom& atom : schema.delete_effects()) state.atoms.erase(atom);
      state.atoms.insert(entry.output_atoms.begin(), entry.output_atoms.end());
      executed.insert(current);
      continue;
    }

    const FailureSignature sig = diagnose(entry, node, env);
    if (!config.ablations.dynamic_adjustment || attempts_per_node[current] >= config.max_repairs_per_node ||
        total_attempts >= config.max_total_adjustments) {
      final_failure = sig;
      terminal = true;
      break;
    }

    auto selected = select_repair(sig, trace, dag, registry, store, planner, config, counters);
    if (!selected) {
      final_failure = sig;
      terminal = true;
      break;
    }

    if (selected->action.kind == RepairKind::ask_user || selected->action.kind == RepairKind::abort) {
      if (selected->action.kind == RepairKind::ask_user) ++counters.interactions;
      trace.adjustments.push_back({sig, current, selected->action, selected->tier, false});
      final_failure = sig;
      terminal = true;
      break;
    }

    ++attempts_per_node[current];
    ++total_attempts;
    RepairAction attempted = selected->action;
    try {
      attempted = resolve_action(std::move(attempted), dag, current);
      WorkflowDag repaired = apply_repair(dag, attempted, registry);
      trace.adjustments.push_back({sig, current, attempted, selected->tier, true});
      ++counters.adjustments;
      dag = std::move(repaired);
      // Resume from the repaired point: completed ancestors stay executed.
    } catch (const Error&) {
      trace.adjustments.push_back({sig, current, attempted, selected->tier, false});
      // The failing node is re-attempted; budgets bound the retries.
    }
  }

  if (terminal) ++counters.interactions;

  trace.w_final = dag;
  trace.outcome = terminal ? Outcome::terminal_failure : Outcome::success;
  trace.final_failure = final_failure;

  RunResult result;
  result.outcome = trace.outcome;
  result.trace = std::move(trace);
  result.counters = counters;
  result.first_pass = result.outcome == Outcome::success && counters.adjustments == 0;
  result.final_state = std::move(state);
  return result;
}

TaskOutcome run_task(const TaskGoal& goal, TemplateLibrary library, MemoryStore store,
                     SimEnvironment& env, const ToolRegistry& registry, PlannerInterface& planner,
                     const RunConfig& config) {
  const std::string trace_id = store.fresh_trace_id();

  WorkflowDag dag;
  bool have_dag = false;
  long planning_calls = 0;

  if (config.ablations.workflow_library && !library.templates.empty()) {
    for (const RankedTemplate& ranked : retrieve_template(goal, library)) {
      try {
        dag = instantiate(library.templates.at(ranked.template_id), goal, registry);
        have_dag = true;
        break;
      } catch (const Error&) {
        // Unusable template; try the next best match.
      }
    }
  }

  if (!have_dag) {
    ++planning_calls;
    std::optional<WorkflowDag> plan;
    try {
      plan = planner.synthesize_plan(goal, registry);
    } catch (const std::exception&) {
      plan = std::nullopt;
    }
    if (!plan) {
      if (config.ablations.workflow_library)
        fail(Errc::empty_library, "no usable template and the planner produced no workflow");
      RunResult result = terminal_without_execution(WorkflowDag{}, goal, trace_id);
      result.counters.planner_calls = planning_calls;
      store = record_trace(std::move(store), result.trace);
      return {std::move(result), std::move(library), std::move(store)};
    }
    if (!validate(*plan, registry).ok) {
      // A flawed synthesized plan never starts executing.
      RunResult result = terminal_without_execution(*plan, goal, trace_id);
      result.counters.planner_calls = planning_calls;
      store = record_trace(std::move(store), result.trace);
      if (config.ablations.learning) store = attribute_failure(std::move(store), result.trace);
      return {std::move(result), std::move(library), std::move(store)};
    }
    dag = std::move(*plan);
    have_dag = true;
  }

  RunResult result = execute_workflow(dag, env, registry, store, planner, config, goal, trace_id);
  result.counters.planner_calls += planning_calls;

  store = record_trace(std::move(store), result.trace);
  if (config.ablations.learning) {
    if (result.outcome == Outcome::success && result.counters.adjustments > 0) {
      library = solidify(std::move(library), result.trace.w_final, result.trace);
      store = harvest_successful_repairs(std::move(store), result.trace);
    } else if (result.outcome == Outcome::terminal_failure) {
      store = attribute_failure(std::move(store), result.trace);
    }
  }
  return {std::move(result), std::move(library), std::move(store)};
}

}  // namespace knowflow
