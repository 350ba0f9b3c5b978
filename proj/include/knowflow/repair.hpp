#pragma once
// Repair actions shared by the executor, the memory rules, and the planner
// interface. Node references may be left empty in rule/script actions:
// an empty target means "the failing node", an empty predecessor means "the
// failing node's canonical predecessor", and an empty payload-node id asks
// the executor to generate a fresh one. The executor resolves these before
// touching the dag.

#include "knowflow/workflow.hpp"

#include <map>
#include <optional>
#include <string>

namespace knowflow {

enum class RepairKind { replace, insert, modify, abort, ask_user };

const char* repair_kind_name(RepairKind kind);

struct RepairAction {
  RepairKind kind = RepairKind::abort;
  std::string target;                 // v_f for replace/insert/modify
  std::string predecessor;            // v_p for insert
  std::optional<WorkflowNode> node;   // payload for replace/insert
  std::map<std::string, Json> args;   // payload for modify
  std::string message;                // payload for ask_user

  friend bool operator==(const RepairAction&, const RepairAction&) = default;
};

RepairAction repair_action_from_json(const Json& value);
Json to_json(const RepairAction& action);

}  // namespace knowflow
