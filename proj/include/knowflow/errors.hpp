#pragma once

#include <stdexcept>
#include <string>

namespace knowflow {

enum class Errc {
  malformed,
  missing_field,
  duplicate_param,
  conflicting_effect,
  duplicate_tool_name,
  unbound_placeholder,
  precondition_violated,
  unknown_tool,
  cycle_detected,
  no_such_node,
  no_such_edge,
  duplicate_node_id,
  arg_kind_mismatch,
  empty_library,
  unbound_context_key,
  invalid_instantiation,
  not_eligible,
  duplicate_trace_id,
  not_a_failure,
  duplicate_case_id,
  empty_suite,
  repair_rejected,
  planner_unavailable,
};

const char* errc_name(Errc code);

// True for errors caused by an unusable input document or invocation;
// the CLI maps these to exit code 2, everything else to exit code 1.
bool is_format_error(Errc code);

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace knowflow
