#include "knowflow/memory.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace knowflow {

std::string FailureSignature::text() const {
  std::ostringstream out;
  out << tool_name << "[";
  bool first = true;
  for (const auto& [key, value] : data_attrs) {
    if (!first) out << ",";
    out << key << "=" << value.dump();
    first = false;
  }
  out << "]:" << error_code;
  return out.str();
}

bool RulePattern::matches(const FailureSignature& sig) const {
  if (tool_name && *tool_name != sig.tool_name) return false;
  if (error_code && *error_code != sig.error_code) return false;
  for (const auto& [key, value] : data_attrs) {
    auto it = sig.data_attrs.find(key);
    if (it == sig.data_attrs.end() || it->second != value) return false;
  }
  return true;
}

int RulePattern::specificity() const {
  return (tool_name ? 1 : 0) + (error_code ? 1 : 0) + static_cast<int>(data_attrs.size());
}

long ExecutionTrace::accepted_adjustments() const {
  return std::count_if(adjustments.begin(), adjustments.end(),
                       [](const Adjustment& a) { return a.accepted; });
}

bool MemoryStore::has_trace(const std::string& trace_id) const {
  return std::any_of(traces.begin(), traces.end(),
                     [&](const ExecutionTrace& t) { return t.trace_id == trace_id; });
}

long MemoryStore::next_rule_seq() const {
  long seq = 0;
  for (const PatternActionRule& rule : rules) seq = std::max(seq, rule.created_at);
  return seq + 1;
}

std::string MemoryStore::fresh_trace_id() const {
  size_t n = traces.size() + 1;
  while (true) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "t%06zu", n);
    if (!has_trace(buffer)) return buffer;
    ++n;
  }
}

MemoryStore record_trace(MemoryStore store, ExecutionTrace trace) {
  if (store.has_trace(trace.trace_id))
    fail(Errc::duplicate_trace_id, "trace \"" + trace.trace_id + "\" already recorded");
  store.traces.push_back(std::move(trace));
  return store;
}

namespace {

std::string fresh_rule_id(const MemoryStore& store, long seq) {
  while (true) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "r%06ld", seq);
    const bool taken = std::any_of(store.rules.begin(), store.rules.end(),
                                   [&](const PatternActionRule& r) { return r.rule_id == buffer; });
    if (!taken) return buffer;
    ++seq;
  }
}

PatternActionRule make_rule(const MemoryStore& store, RulePattern pattern,
                            std::optional<RepairAction> action, RulePolarity polarity,
                            const std::string& provenance) {
  PatternActionRule rule;
  rule.created_at = store.next_rule_seq();
  rule.rule_id = fresh_rule_id(store, rule.created_at);
  rule.pattern = std::move(pattern);
  rule.action = std::move(action);
  rule.polarity = polarity;
  rule.provenance = provenance;
  return rule;
}

RulePattern exact_pattern(const FailureSignature& sig) {
  RulePattern pattern;
  pattern.tool_name = sig.tool_name;
  pattern.data_attrs = sig.data_attrs;
  pattern.error_code = sig.error_code;
  return pattern;
}

bool rule_exists(const MemoryStore& store, const RulePattern& pattern,
                 const std::optional<RepairAction>& action, RulePolarity polarity) {
  return std::any_of(store.rules.begin(), store.rules.end(), [&](const PatternActionRule& r) {
    return r.polarity == polarity && r.pattern == pattern && r.action == action;
  });
}

// Rules must transfer to future dags, so node references are relativized:
// the failing node becomes the implicit target and payload ids are cleared.
RepairAction generalize_action(RepairAction action, const std::string& failing_node) {
  switch (action.kind) {
    case RepairKind::replace:
    case RepairKind::modify:
      if (action.target == failing_node) action.target.clear();
      if (action.node) action.node->id.clear();
      break;
    case RepairKind::insert:
      if (action.target == failing_node) action.target.clear();
      action.predecessor.clear();
      if (action.node) action.node->id.clear();
      break;
    default:
      break;
  }
  return action;
}

}  // namespace

std::optional<RepairAction> query_repair(const MemoryStore& store, const FailureSignature& sig) {
  struct Candidate {
    const PatternActionRule* rule;
    int specificity;
  };
  std::vector<Candidate> candidates;
  std::vector<Candidate> suppressors;
  for (const PatternActionRule& rule : store.rules) {
    if (!rule.pattern.matches(sig)) continue;
    if (rule.polarity == RulePolarity::recommend && rule.action) {
      candidates.push_back({&rule, rule.pattern.specificity()});
    } else if (rule.polarity == RulePolarity::avoid && rule.action) {
      suppressors.push_back({&rule, rule.pattern.specificity()});
    }
  }

  // Highest specificity first, newest breaking ties.
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.specificity != b.specificity) return a.specificity > b.specificity;
    return a.rule->created_at > b.rule->created_at;
  });

  for (const Candidate& candidate : candidates) {
    const bool suppressed =
        std::any_of(suppressors.begin(), suppressors.end(), [&](const Candidate& avoid) {
          return avoid.specificity >= candidate.specificity &&
                 *avoid.rule->action == *candidate.rule->action;
        });
    if (!suppressed) return *candidate.rule->action;
  }
  return std::nullopt;
}

MemoryStore attribute_failure(MemoryStore store, const ExecutionTrace& trace) {
  if (trace.outcome != Outcome::terminal_failure)
    fail(Errc::not_a_failure, "trace \"" + trace.trace_id + "\" did not fail");

  for (const Adjustment& adjustment : trace.adjustments) {
    if (adjustment.accepted) continue;
    store.rules.push_back(make_rule(store, exact_pattern(adjustment.signature),
                                    generalize_action(adjustment.action, adjustment.node_id),
                                    RulePolarity::avoid, trace.trace_id));
  }

  if (trace.final_failure) {
    std::optional<RepairAction> last_action;
    if (!trace.adjustments.empty()) {
      const Adjustment& last = trace.adjustments.back();
      last_action = generalize_action(last.action, last.node_id);
    }
    store.rules.push_back(make_rule(store, exact_pattern(*trace.final_failure),
                                    std::move(last_action), RulePolarity::avoid, trace.trace_id));
  }
  return store;
}

MemoryStore harvest_successful_repairs(MemoryStore store, const ExecutionTrace& trace) {
  if (trace.outcome != Outcome::success || trace.adjustments.empty()) return store;

  for (const Adjustment& adjustment : trace.adjustments) {
    if (!adjustment.accepted) continue;

    // The repair must have stuck: the node it unblocked (or introduced) is in
    // the final dag and eventually succeeded.
    std::string target;
    switch (adjustment.action.kind) {
      case RepairKind::replace:
        target = adjustment.action.node ? adjustment.action.node->id : "";
        break;
      case RepairKind::insert:
      case RepairKind::modify:
        target = adjustment.action.target;
        break;
      default:
        continue;
    }
    if (target.empty() || !trace.w_final.has_node(target)) continue;
    const bool succeeded_later =
        std::any_of(trace.history.begin(), trace.history.end(), [&](const HistoryEntry& entry) {
          return entry.node_id == target && entry.status.is_success();
        });
    if (!succeeded_later) continue;

    RulePattern pattern = exact_pattern(adjustment.signature);
    RepairAction action = generalize_action(adjustment.action, adjustment.node_id);
    if (rule_exists(store, pattern, action, RulePolarity::recommend)) continue;
    store.rules.push_back(
        make_rule(store, std::move(pattern), std::move(action), RulePolarity::recommend,
                  trace.trace_id));
  }
  return store;
}

HistoryEntry history_entry_from_json(const Json& value) {
  jsonio::expect_keys(value, {"node_id", "tool_name", "args", "status", "output_atoms", "timestamp"},
                      "history entry");
  HistoryEntry entry;
  entry.node_id = jsonio::require_string(value, "node_id", "history entry");
  entry.tool_name = jsonio::require_string(value, "tool_name", "history entry");
  if (value.contains("args")) {
    jsonio::expect_object(value.at("args"), "history args");
    for (const auto& [name, arg] : value.at("args").items()) entry.args[name] = arg;
  }
  const Json& status = jsonio::require(value, "status", "history entry");
  const std::string kind = jsonio::require_string(status, "kind", "status");
  if (kind == "success") {
    jsonio::expect_keys(status, {"kind"}, "status");
    entry.status.kind = StepStatus::Kind::success;
  } else if (kind == "error") {
    jsonio::expect_keys(status, {"kind", "code"}, "status");
    entry.status.kind = StepStatus::Kind::error;
    entry.status.error_code = jsonio::require_string(status, "code", "status");
  } else if (kind == "quality_fail") {
    jsonio::expect_keys(status, {"kind", "score"}, "status");
    entry.status.kind = StepStatus::Kind::quality_fail;
    entry.status.score = jsonio::require(status, "score", "status").get<double>();
  } else {
    fail(Errc::malformed, "unknown status kind \"" + kind + "\"");
  }
  if (value.contains("output_atoms")) {
    jsonio::expect_array(value.at("output_atoms"), "output atoms");
    for (const Json& atom : value.at("output_atoms")) entry.output_atoms.insert(atom_from_json(atom));
  }
  const Json& timestamp = jsonio::require(value, "timestamp", "history entry");
  if (!timestamp.is_number_integer()) fail(Errc::malformed, "timestamp must be an integer");
  entry.timestamp = timestamp.get<long>();
  return entry;
}

Json to_json(const HistoryEntry& entry) {
  Json status;
  switch (entry.status.kind) {
    case StepStatus::Kind::success:
      status = Json{{"kind", "success"}};
      break;
    case StepStatus::Kind::error:
      status = Json{{"kind", "error"}, {"code", entry.status.error_code}};
      break;
    case StepStatus::Kind::quality_fail:
      status = Json{{"kind", "quality_fail"}, {"score", entry.status.score}};
      break;
  }
  Json args = Json::object();
  for (const auto& [name, value] : entry.args) args[name] = value;
  Json atoms = Json::array();
  for (const PredicateAtom& atom : entry.output_atoms) atoms.push_back(to_json(atom));
  return Json{{"node_id", entry.node_id}, {"tool_name", entry.tool_name},
              {"args", args},           {"status", status},
              {"output_atoms", atoms},  {"timestamp", entry.timestamp}};
}

FailureSignature signature_from_json(const Json& value) {
  jsonio::expect_keys(value, {"tool_name", "data_attrs", "error_code"}, "failure signature");
  FailureSignature sig;
  sig.tool_name = jsonio::require_string(value, "tool_name", "failure signature");
  if (value.contains("data_attrs")) {
    jsonio::expect_object(value.at("data_attrs"), "data attrs");
    for (const auto& [key, attr] : value.at("data_attrs").items()) sig.data_attrs[key] = attr;
  }
  sig.error_code = jsonio::require_string(value, "error_code", "failure signature");
  if (sig.error_code.empty()) fail(Errc::malformed, "error_code must be nonempty");
  return sig;
}

Json to_json(const FailureSignature& sig) {
  Json attrs = Json::object();
  for (const auto& [key, value] : sig.data_attrs) attrs[key] = value;
  return Json{{"tool_name", sig.tool_name}, {"data_attrs", attrs}, {"error_code", sig.error_code}};
}

RulePattern pattern_from_json(const Json& value) {
  jsonio::expect_keys(value, {"tool_name", "data_attrs", "error_code"}, "rule pattern");
  RulePattern pattern;
  if (value.contains("tool_name") && !value.at("tool_name").is_null())
    pattern.tool_name = value.at("tool_name").get<std::string>();
  if (value.contains("error_code") && !value.at("error_code").is_null())
    pattern.error_code = value.at("error_code").get<std::string>();
  if (value.contains("data_attrs")) {
    jsonio::expect_object(value.at("data_attrs"), "pattern attrs");
    for (const auto& [key, attr] : value.at("data_attrs").items()) pattern.data_attrs[key] = attr;
  }
  return pattern;
}

Json to_json(const RulePattern& pattern) {
  Json attrs = Json::object();
  for (const auto& [key, value] : pattern.data_attrs) attrs[key] = value;
  Json out{{"data_attrs", attrs}};
  if (pattern.tool_name) out["tool_name"] = *pattern.tool_name;
  if (pattern.error_code) out["error_code"] = *pattern.error_code;
  return out;
}

PatternActionRule rule_from_json(const Json& value) {
  jsonio::expect_keys(value,
                      {"rule_id", "pattern", "action", "polarity", "created_at", "provenance"},
                      "pattern-action rule");
  PatternActionRule rule;
  rule.rule_id = jsonio::require_string(value, "rule_id", "rule");
  rule.pattern = pattern_from_json(jsonio::require(value, "pattern", "rule"));
  if (value.contains("action") && !value.at("action").is_null())
    rule.action = repair_action_from_json(value.at("action"));
  const std::string polarity = jsonio::require_string(value, "polarity", "rule");
  if (polarity == "recommend") {
    rule.polarity = RulePolarity::recommend;
  } else if (polarity == "avoid") {
    rule.polarity = RulePolarity::avoid;
  } else {
    fail(Errc::malformed, "rule polarity must be \"recommend\" or \"avoid\"");
  }
  if (rule.polarity == RulePolarity::recommend && !rule.action)
    fail(Errc::malformed, "recommend rules must carry an action");
  rule.created_at = jsonio::require(value, "created_at", "rule").get<long>();
  rule.provenance = jsonio::get_string(value, "provenance", "");
  return rule;
}

Json to_json(const PatternActionRule& rule) {
  return Json{{"rule_id", rule.rule_id},
              {"pattern", to_json(rule.pattern)},
              {"action", rule.action ? to_json(*rule.action) : Json(nullptr)},
              {"polarity", rule.polarity == RulePolarity::recommend ? "recommend" : "avoid"},
              {"created_at", rule.created_at},
              {"provenance", rule.provenance}};
}

namespace {

Adjustment adjustment_from_json(const Json& value) {
  jsonio::expect_keys(value, {"signature", "node_id", "action", "tier", "accepted"}, "adjustment");
  Adjustment adjustment;
  adjustment.signature = signature_from_json(jsonio::require(value, "signature", "adjustment"));
  adjustment.node_id = jsonio::get_string(value, "node_id", "");
  adjustment.action = repair_action_from_json(jsonio::require(value, "action", "adjustment"));
  adjustment.tier = jsonio::require(value, "tier", "adjustment").get<int>();
  adjustment.accepted = jsonio::require_bool(value, "accepted", "adjustment");
  return adjustment;
}

Json adjustment_to_json(const Adjustment& adjustment) {
  return Json{{"signature", to_json(adjustment.signature)},
              {"node_id", adjustment.node_id},
              {"action", to_json(adjustment.action)},
              {"tier", adjustment.tier},
              {"accepted", adjustment.accepted}};
}

}  // namespace

ExecutionTrace trace_from_json(const Json& value) {
  jsonio::expect_keys(value,
                      {"trace_id", "goal", "w_init", "history", "adjustments", "w_final", "outcome",
                       "final_failure"},
                      "execution trace");
  ExecutionTrace trace;
  trace.trace_id = jsonio::require_string(value, "trace_id", "trace");
  trace.goal = goal_from_json(jsonio::require(value, "goal", "trace"));
  trace.w_init = workflow_from_json(jsonio::require(value, "w_init", "trace"));
  const Json& history = jsonio::require(value, "history", "trace");
  jsonio::expect_array(history, "trace history");
  long previous = 0;
  for (const Json& entry : history) {
    HistoryEntry parsed = history_entry_from_json(entry);
    if (parsed.timestamp <= previous)
      fail(Errc::malformed, "history timestamps must increase strictly");
    previous = parsed.timestamp;
    trace.history.push_back(std::move(parsed));
  }
  const Json& adjustments = jsonio::require(value, "adjustments", "trace");
  jsonio::expect_array(adjustments, "trace adjustments");
  for (const Json& entry : adjustments) trace.adjustments.push_back(adjustment_from_json(entry));
  trace.w_final = workflow_from_json(jsonio::require(value, "w_final", "trace"));
  const std::string outcome = jsonio::require_string(value, "outcome", "trace");
  if (outcome == "success") {
    trace.outcome = Outcome::success;
  } else if (outcome == "terminal_failure") {
    trace.outcome = Outcome::terminal_failure;
  } else {
    fail(Errc::malformed, "outcome must be \"success\" or \"terminal_failure\"");
  }
  if (value.contains("final_failure") && !value.at("final_failure").is_null())
    trace.final_failure = signature_from_json(value.at("final_failure"));
  return trace;
}

Json to_json(const ExecutionTrace& trace) {
  Json history = Json::array();
  for (const HistoryEntry& entry : trace.history) history.push_back(to_json(entry));
  Json adjustments = Json::array();
  for (const Adjustment& adjustment : trace.adjustments)
    adjustments.push_back(adjustment_to_json(adjustment));
  Json out{{"trace_id", trace.trace_id},
           {"goal", to_json(trace.goal)},
           {"w_init", to_json(trace.w_init)},
           {"history", history},
           {"adjustments", adjustments},
           {"w_final", to_json(trace.w_final)},
           {"outcome", trace.outcome == Outcome::success ? "success" : "terminal_failure"}};
  out["final_failure"] = trace.final_failure ? to_json(*trace.final_failure) : Json(nullptr);
  return out;
}

std::string export_store(const MemoryStore& store) {
  std::ostringstream out;
  for (const ExecutionTrace& trace : store.traces) {
    Json line = to_json(trace);
    line["kind"] = "trace";
    out << line.dump() << "\n";
  }
  for (const PatternActionRule& rule : store.rules) {
    Json line = to_json(rule);
    line["kind"] = "rule";
    out << line.dump() << "\n";
  }
  return out.str();
}

MemoryStore import_store(const std::string& text) {
  MemoryStore store;
  std::istringstream in(text);
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    Json record = jsonio::parse_text(line, "store line " + std::to_string(line_number));
    const std::string kind = jsonio::require_string(record, "kind", "store record");
    record.erase("kind");
    if (kind == "trace") {
      ExecutionTrace trace = trace_from_json(record);
      if (store.has_trace(trace.trace_id))
        fail(Errc::duplicate_trace_id, "trace \"" + trace.trace_id + "\" appears twice");
      store.traces.push_back(std::move(trace));
    } else if (kind == "rule") {
      store.rules.push_back(rule_from_json(record));
    } else {
      fail(Errc::malformed, "unknown store record kind \"" + kind + "\"");
    }
  }
  return store;
}

MemoryStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return import_store(buffer.str());
}

}  // namespace knowflow
