#pragma once
// The orchestrator loop: monitored execution over the simulated environment,
// failure diagnosis, hierarchical (memory-first, planner-second) repair,
// graph manipulation with revalidation, and post-task learning.

#include "knowflow/memory.hpp"
#include "knowflow/pkb.hpp"
#include "knowflow/repair.hpp"
#include "knowflow/simenv.hpp"

#include <optional>
#include <string>

namespace knowflow {

struct TierFlags {
  bool tier1 = true;
  bool tier2 = true;

  friend bool operator==(const TierFlags&, const TierFlags&) = default;
};

struct AblationFlags {
  bool workflow_library = true;   // WL
  bool dynamic_adjustment = true; // DA
  bool learning = true;           // LC

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct RunConfig {
  long max_repairs_per_node = 3;
  long max_total_adjustments = 10;
  TierFlags tiers;
  AblationFlags ablations;
  long seed = 0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig run_config_from_json(const Json& value);
Json to_json(const RunConfig& config);

struct RunCounters {
  long tool_calls = 0;
  long planner_calls = 0;
  long interactions = 0;
  long adjustments = 0;  // accepted adjustments only

  friend bool operator==(const RunCounters&, const RunCounters&) = default;
};

struct RunResult {
  Outcome outcome = Outcome::terminal_failure;
  ExecutionTrace trace;
  RunCounters counters;
  bool first_pass = false;
  WorldState final_state;
  std::vector<std::string> format_violations;  // node ids with malformed planner output

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

Json to_json(const RunResult& result);

FailureSignature diagnose(const HistoryEntry& entry, const WorkflowNode& node,
                          const SimEnvironment& env);

struct SelectedRepair {
  RepairAction action;
  int tier = 0;
};

// Tier 1 queries the memory store; on a miss, Tier 2 invokes the planner
// with the history, current dag, toolset, and signature (planner errors count
// as misses). Increments counters.planner_calls whenever the planner is
// consulted.
std::optional<SelectedRepair> select_repair(const FailureSignature& sig,
                                            const ExecutionTrace& trace, const WorkflowDag& dag,
                                            const ToolRegistry& registry, const MemoryStore& store,
                                            PlannerInterface& planner, const RunConfig& config,
                                            RunCounters& counters);

// Applies a graph-manipulating action and revalidates; throws repair_rejected
// when the resulting workflow is not logically consistent.
WorkflowDag apply_repair(const WorkflowDag& dag, const RepairAction& action,
                         const ToolRegistry& registry);

RunResult execute_workflow(const WorkflowDag& dag, SimEnvironment& env,
                           const ToolRegistry& registry, const MemoryStore& store,
                           PlannerInterface& planner, const RunConfig& config,
                           const TaskGoal& goal = {}, const std::string& trace_id = "t000001");

struct TaskOutcome {
  RunResult result;
  TemplateLibrary library;
  MemoryStore store;
};

// The full task cycle: plan (template retrieval or planner synthesis),
// execute with dynamic adjustment, then learn from the outcome.
TaskOutcome run_task(const TaskGoal& goal, TemplateLibrary library, MemoryStore store,
                     SimEnvironment& env, const ToolRegistry& registry,
                     PlannerInterface& planner, const RunConfig& config);

}  // namespace knowflow
