#include "knowflow/jsonio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace knowflow {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::malformed: return "Malformed";
    case Errc::missing_field: return "MissingField";
    case Errc::duplicate_param: return "DuplicateParam";
    case Errc::conflicting_effect: return "ConflictingEffect";
    case Errc::duplicate_tool_name: return "DuplicateToolName";
    case Errc::unbound_placeholder: return "UnboundPlaceholder";
    case Errc::precondition_violated: return "PreconditionViolated";
    case Errc::unknown_tool: return "UnknownTool";
    case Errc::cycle_detected: return "CycleDetected";
    case Errc::no_such_node: return "NoSuchNode";
    case Errc::no_such_edge: return "NoSuchEdge";
    case Errc::duplicate_node_id: return "DuplicateNodeId";
    case Errc::arg_kind_mismatch: return "ArgKindMismatch";
    case Errc::empty_library: return "EmptyLibrary";
    case Errc::unbound_context_key: return "UnboundContextKey";
    case Errc::invalid_instantiation: return "InvalidInstantiation";
    case Errc::not_eligible: return "NotEligible";
    case Errc::duplicate_trace_id: return "DuplicateTraceId";
    case Errc::not_a_failure: return "NotAFailure";
    case Errc::duplicate_case_id: return "DuplicateCaseId";
    case Errc::empty_suite: return "EmptySuite";
    case Errc::repair_rejected: return "RepairRejected";
    case Errc::planner_unavailable: return "PlannerUnavailable";
  }
  return "Error";
}

bool is_format_error(Errc code) {
  switch (code) {
    case Errc::malformed:
    case Errc::missing_field:
    case Errc::duplicate_param:
    case Errc::conflicting_effect:
    case Errc::duplicate_tool_name:
    case Errc::duplicate_node_id:
    case Errc::duplicate_trace_id:
    case Errc::duplicate_case_id:
      return true;
    default:
      return false;
  }
}

namespace jsonio {

Json parse_text(const std::string& text, const std::string& what) {
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) fail(Errc::malformed, "invalid JSON in " + what);
  return value;
}

Json load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::malformed, "cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str(), path);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::malformed, "cannot write file: " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

void append_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(Errc::malformed, "cannot append to file: " + path);
  out << content;
}

const Json& require(const Json& object, const std::string& field, const std::string& what) {
  if (!object.is_object() || !object.contains(field))
    fail(Errc::missing_field, what + ": missing \"" + field + "\"");
  return object.at(field);
}

void expect_object(const Json& value, const std::string& what) {
  if (!value.is_object()) fail(Errc::malformed, what + ": expected an object");
}

void expect_array(const Json& value, const std::string& what) {
  if (!value.is_array()) fail(Errc::malformed, what + ": expected an array");
}

void expect_keys(const Json& object, std::initializer_list<const char*> allowed,
                 const std::string& what) {
  expect_object(object, what);
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : object.items()) {
    if (!ok.count(key)) fail(Errc::malformed, what + ": unknown field \"" + key + "\"");
  }
}

std::string require_string(const Json& object, const std::string& field, const std::string& what) {
  const Json& value = require(object, field, what);
  if (!value.is_string()) fail(Errc::malformed, what + ": \"" + field + "\" must be a string");
  return value.get<std::string>();
}

bool require_bool(const Json& object, const std::string& field, const std::string& what) {
  const Json& value = require(object, field, what);
  if (!value.is_boolean()) fail(Errc::malformed, what + ": \"" + field + "\" must be a boolean");
  return value.get<bool>();
}

std::string get_string(const Json& object, const std::string& field, const std::string& fallback) {
  if (!object.is_object() || !object.contains(field)) return fallback;
  const Json& value = object.at(field);
  if (!value.is_string()) fail(Errc::malformed, "\"" + field + "\" must be a string");
  return value.get<std::string>();
}

}  // namespace jsonio

}  // namespace knowflow
