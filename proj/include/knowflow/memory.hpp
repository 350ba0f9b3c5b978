#pragma once
// Evolutionary memory: execution traces, pattern-action rules, and the
// append-only store behind Tier-1 knowledge-driven repair. Recommend rules
// come from harvested successful repairs, avoid rules from terminal failures.

#include "knowflow/pkb.hpp"
#include "knowflow/repair.hpp"
#include "knowflow/workflow.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace knowflow {

struct StepStatus {
  enum class Kind { success, error, quality_fail };

  Kind kind = Kind::success;
  std::string error_code;  // error only
  double score = 0.0;      // quality_fail only

  bool is_success() const { return kind == Kind::success; }

  friend bool operator==(const StepStatus&, const StepStatus&) = default;
};

struct HistoryEntry {
  std::string node_id;
  std::string tool_name;
  std::map<std::string, Json> args;
  StepStatus status;
  AtomSet output_atoms;
  long timestamp = 0;  // strictly increasing within a trace

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct FailureSignature {
  std::string tool_name;
  std::map<std::string, Json> data_attrs;
  std::string error_code;

  std::string text() const;

  friend bool operator==(const FailureSignature&, const FailureSignature&) = default;
};

// A signature pattern; absent tool_name/error_code act as wildcards and
// data_attrs match by subset.
struct RulePattern {
  std::optional<std::string> tool_name;
  std::map<std::string, Json> data_attrs;
  std::optional<std::string> error_code;

  bool matches(const FailureSignature& sig) const;
  int specificity() const;  // non-wildcard fields + matched attrs

  friend bool operator==(const RulePattern&, const RulePattern&) = default;
};

enum class Outcome { success, terminal_failure };

struct Adjustment {
  FailureSignature signature;
  std::string node_id;  // the failing node the repair addressed
  RepairAction action;
  int tier = 0;         // 1 knowledge-driven, 2 planner-driven
  bool accepted = false;

  friend bool operator==(const Adjustment&, const Adjustment&) = default;
};

struct ExecutionTrace {
  std::string trace_id;
  TaskGoal goal;
  WorkflowDag w_init;
  std::vector<HistoryEntry> history;
  std::vector<Adjustment> adjustments;
  WorkflowDag w_final;
  Outcome outcome = Outcome::terminal_failure;
  std::optional<FailureSignature> final_failure;  // set on terminal failure

  long accepted_adjustments() const;

  friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

enum class RulePolarity { recommend, avoid };

struct PatternActionRule {
  std::string rule_id;
  RulePattern pattern;
  // Absent action on an avoid rule records "no repair was available" as a
  // diagnostic; it suppresses nothing.
  std::optional<RepairAction> action;
  RulePolarity polarity = RulePolarity::recommend;
  long created_at = 0;
  std::string provenance;  // originating trace id

  friend bool operator==(const PatternActionRule&, const PatternActionRule&) = default;
};

struct MemoryStore {
  std::vector<ExecutionTrace> traces;  // append-only
  std::vector<PatternActionRule> rules;

  bool has_trace(const std::string& trace_id) const;
  long next_rule_seq() const;
  std::string fresh_trace_id() const;

  friend bool operator==(const MemoryStore&, const MemoryStore&) = default;
};

MemoryStore record_trace(MemoryStore store, ExecutionTrace trace);

// Tier-1 lookup: the most specific matching recommend rule whose action is
// not suppressed by an equally or more specific matching avoid rule.
std::optional<RepairAction> query_repair(const MemoryStore& store, const FailureSignature& sig);

// Terminal failures produce avoid rules: one per rejected adjustment and one
// for the final unrepaired signature.
MemoryStore attribute_failure(MemoryStore store, const ExecutionTrace& trace);

// Successful adjusted runs produce recommend rules, deduplicated, with node
// references generalized so the rule applies to future dags.
MemoryStore harvest_successful_repairs(MemoryStore store, const ExecutionTrace& trace);

HistoryEntry history_entry_from_json(const Json& value);
Json to_json(const HistoryEntry& entry);

FailureSignature signature_from_json(const Json& value);
Json to_json(const FailureSignature& sig);

RulePattern pattern_from_json(const Json& value);
Json to_json(const RulePattern& pattern);

PatternActionRule rule_from_json(const Json& value);
Json to_json(const PatternActionRule& rule);

ExecutionTrace trace_from_json(const Json& value);
Json to_json(const ExecutionTrace& trace);

// Store files are JSON-lines, one record per line, appended and never
// rewritten: {"kind":"trace",...} / {"kind":"rule",...}.
std::string export_store(const MemoryStore& store);
MemoryStore import_store(const std::string& text);
MemoryStore load_store(const std::string& path);  // missing file = empty store

}  // namespace knowflow
