#include "knowflow/repair.hpp"

namespace knowflow {

const char* repair_kind_name(RepairKind kind) {
  switch (kind) {
    case RepairKind::replace: return "replace";
    case RepairKind::insert: return "insert";
    case RepairKind::modify: return "modify";
    case RepairKind::abort: return "abort";
    case RepairKind::ask_user: return "ask_user";
  }
  return "abort";
}

RepairAction repair_action_from_json(const Json& value) {
  const std::string kind = jsonio::require_string(value, "kind", "repair action");
  RepairAction action;
  if (kind == "replace") {
    jsonio::expect_keys(value, {"kind", "target", "node"}, "replace action");
    action.kind = RepairKind::replace;
    action.target = jsonio::get_string(value, "target", "");
    action.node = workflow_node_from_json(jsonio::require(value, "node", "replace action"), true);
  } else if (kind == "insert") {
    jsonio::expect_keys(value, {"kind", "predecessor", "target", "node"}, "insert action");
    action.kind = RepairKind::insert;
    action.predecessor = jsonio::get_string(value, "predecessor", "");
    action.target = jsonio::get_string(value, "target", "");
    action.node = workflow_node_from_json(jsonio::require(value, "node", "insert action"), true);
  } else if (kind == "modify") {
    jsonio::expect_keys(value, {"kind", "target", "args"}, "modify action");
    action.kind = RepairKind::modify;
    action.target = jsonio::get_string(value, "target", "");
    const Json& args = jsonio::require(value, "args", "modify action");
    jsonio::expect_object(args, "modify args");
    for (const auto& [name, arg] : args.items()) action.args[name] = arg;
  } else if (kind == "abort") {
    jsonio::expect_keys(value, {"kind"}, "abort action");
    action.kind = RepairKind::abort;
  } else if (kind == "ask_user") {
    jsonio::expect_keys(value, {"kind", "message"}, "ask_user action");
    action.kind = RepairKind::ask_user;
    action.message = jsonio::get_string(value, "message", "");
  } else {
    fail(Errc::malformed, "unknown repair kind \"" + kind + "\"");
  }
  return action;
}

Json to_json(const RepairAction& action) {
  Json out{{"kind", repair_kind_name(action.kind)}};
  switch (action.kind) {
    case RepairKind::replace:
      out["target"] = action.target;
      out["node"] = to_json(*action.node);
      break;
    case RepairKind::insert:
      out["predecessor"] = action.predecessor;
      out["target"] = action.target;
      out["node"] = to_json(*action.node);
      break;
    case RepairKind::modify: {
      out["target"] = action.target;
      Json args = Json::object();
      for (const auto& [name, value] : action.args) args[name] = value;
      out["args"] = args;
      break;
    }
    case RepairKind::abort:
      break;
    case RepairKind::ask_user:
      out["message"] = action.message;
      break;
  }
  return out;
}

}  // namespace knowflow
