#pragma once
// Deterministic simulated tool environment with declarative fault injection,
// plus the Tier-2 planner interface, its scripted implementation, and an
// optional HTTP client for a remote planner.

#include "knowflow/memory.hpp"
#include "knowflow/pkb.hpp"
#include "knowflow/repair.hpp"
#include "knowflow/schema.hpp"
#include "knowflow/workflow.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace knowflow {

struct DatasetDescriptor {
  std::string id;
  std::map<std::string, Json> attrs;  // e.g. type=SAR, cloud_cover=0.3

  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

struct FirePolicy {
  enum class Kind { always, first_n, until_atom };

  Kind kind = Kind::always;
  long n = 0;          // first_n
  PredicateAtom atom;  // until_atom: the fault is suppressed once present

  friend bool operator==(const FirePolicy&, const FirePolicy&) = default;
};

struct FaultRule {
  std::string tool_name;                  // empty = any tool
  std::map<std::string, Json> attr_match; // subset of dataset attrs
  std::string error_code;
  FirePolicy fire;

  friend bool operator==(const FaultRule&, const FaultRule&) = default;
};

struct QualityAdjust {
  std::string key;
  Json value;
  double delta = 0.0;

  friend bool operator==(const QualityAdjust&, const QualityAdjust&) = default;
};

// Deterministic quality score: base plus each adjustment whose dataset attr
// matches.
struct QualitySpec {
  double base = 1.0;
  std::vector<QualityAdjust> adjust;

  double score(const std::map<std::string, Json>& attrs) const;

  friend bool operator==(const QualitySpec&, const QualitySpec&) = default;
};

struct ToolBehavior {
  std::optional<std::vector<PredicateAtom>> emitted_atoms;  // default: add-effects
  std::optional<QualitySpec> quality;                       // default: 1.0

  friend bool operator==(const ToolBehavior&, const ToolBehavior&) = default;
};

struct SimEnvironment {
  std::vector<DatasetDescriptor> datasets;
  std::vector<FaultRule> faults;
  std::map<std::string, ToolBehavior> tool_behaviors;
  long seed = 0;

  // Run-instance state; one environment serves one run, clones are cheap.
  std::vector<long> fault_fire_counts;
  long call_count = 0;

  void reset_run_state();

  // The node's input dataset: the first dataset whose id equals one of the
  // node's arg values (params scanned in sorted order), falling back to the
  // environment's sole dataset when there is exactly one.
  const DatasetDescriptor* input_dataset(const WorkflowNode& node) const;
};

bool sim_environment_config_equal(const SimEnvironment& a, const SimEnvironment& b);

SimEnvironment environment_from_json(const Json& value);
Json to_json(const SimEnvironment& env);
SimEnvironment parse_environment(const std::string& text);
SimEnvironment load_environment(const std::string& path);

// One simulated invocation. Fault rules are consulted in declaration order;
// the first matching rule whose policy fires wins. Otherwise the behavior's
// quality score is checked against the node's threshold.
HistoryEntry execute_tool(SimEnvironment& env, const WorkflowNode& node,
                          const ToolRegistry& registry, const WorldState& state);

struct RepairContext {
  const ExecutionTrace* trace = nullptr;
  const WorkflowDag* dag = nullptr;
  const ToolRegistry* registry = nullptr;
  FailureSignature signature;
};

class PlannerInterface {
public:
  virtual ~PlannerInterface() = default;
  virtual std::optional<RepairAction> propose_repair(const RepairContext& context) = 0;
  virtual std::optional<WorkflowDag> synthesize_plan(const TaskGoal& goal,
                                                     const ToolRegistry& registry) = 0;
};

class NullPlanner : public PlannerInterface {
public:
  std::optional<RepairAction> propose_repair(const RepairContext&) override { return std::nullopt; }
  std::optional<WorkflowDag> synthesize_plan(const TaskGoal&, const ToolRegistry&) override {
    return std::nullopt;
  }
};

struct ScriptRepair {
  RulePattern pattern;
  RepairAction action;

  friend bool operator==(const ScriptRepair&, const ScriptRepair&) = default;
};

struct ScriptPlan {
  std::set<std::string> goal_tags;  // matches when a subset of the goal's tags
  WorkflowDag workflow;

  friend bool operator==(const ScriptPlan&, const ScriptPlan&) = default;
};

// Deterministic Tier-2 stand-in: first matching script entry wins, no hidden
// state.
class ScriptedPlanner : public PlannerInterface {
public:
  ScriptedPlanner() = default;
  ScriptedPlanner(std::vector<ScriptRepair> repairs, std::vector<ScriptPlan> plans)
      : repairs_(std::move(repairs)), plans_(std::move(plans)) {}

  static ScriptedPlanner from_json(const Json& value);
  static ScriptedPlanner load(const std::string& path);

  std::optional<RepairAction> propose_repair(const RepairContext& context) override;
  std::optional<WorkflowDag> synthesize_plan(const TaskGoal& goal,
                                             const ToolRegistry& registry) override;

private:
  std::vector<ScriptRepair> repairs_;
  std::vector<ScriptPlan> plans_;
};

// Bridge to a real planner over HTTP. Any transport, parse, or protocol
// problem degrades to a Tier-2 miss; it never throws.
class RemotePlanner : public PlannerInterface {
public:
  explicit RemotePlanner(std::string url, int timeout_seconds = 30);

  std::optional<RepairAction> propose_repair(const RepairContext& context) override;
  std::optional<WorkflowDag> synthesize_plan(const TaskGoal& goal,
                                             const ToolRegistry& registry) override;

private:
  std::optional<Json> post(const std::string& path, const Json& request);

  std::string scheme_host_;
  int timeout_seconds_;
};

}  // namespace knowflow
