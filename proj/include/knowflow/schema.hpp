#pragma once
// PDDL-style tool schemas: predicate atoms, parameter specs, preconditions
// and add/delete effects, plus the registry the planner draws tools from and
// the ground world state they are evaluated against.

#include "knowflow/errors.hpp"
#include "knowflow/jsonio.hpp"

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace knowflow {

struct PredicateAtom {
  std::string name;
  std::vector<std::string> args;

  // A term written `?key` is a placeholder; ground atoms have none.
  bool is_ground() const;
  std::string text() const;  // name(arg1,arg2) display form

  auto operator<=>(const PredicateAtom&) const = default;
};

using AtomSet = std::set<PredicateAtom>;

enum class ParamKind { string_kind, number, path, enum_kind };

const char* param_kind_name(ParamKind kind);
ParamKind param_kind_from_name(const std::string& name);

struct ParameterSpec {
  std::string name;
  ParamKind kind = ParamKind::string_kind;
  bool required = true;
  std::vector<std::string> enum_values;     // enum kind only
  std::optional<double> min_value;          // number kind only
  std::optional<double> max_value;

  friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

// Returns a reason string when `value` does not satisfy the spec.
std::optional<std::string> check_arg_value(const ParameterSpec& spec, const Json& value);

enum class EffectPolarity { add, del };

struct Effect {
  PredicateAtom atom;
  EffectPolarity polarity = EffectPolarity::add;

  auto operator<=>(const Effect&) const = default;
};

enum class ToolCategory { atomic, semantic };

struct ToolSchema {
  std::string name;
  ToolCategory category = ToolCategory::atomic;
  std::vector<ParameterSpec> parameters;
  AtomSet preconditions;
  std::set<Effect> effects;

  AtomSet add_effects() const;
  AtomSet delete_effects() const;
  const ParameterSpec* find_param(const std::string& param_name) const;

  friend bool operator==(const ToolSchema&, const ToolSchema&) = default;
};

struct ToolRegistry {
  // std::map keeps iteration deterministic (sorted by tool name).
  std::map<std::string, ToolSchema> tools;

  const ToolSchema* find(const std::string& name) const;
  const ToolSchema& at(const std::string& name) const;  // unknown_tool when absent

  friend bool operator==(const ToolRegistry&, const ToolRegistry&) = default;
};

struct WorldState {
  AtomSet atoms;  // ground atoms only

  bool contains(const PredicateAtom& atom) const { return atoms.count(atom) > 0; }

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

PredicateAtom atom_from_json(const Json& value);
Json to_json(const PredicateAtom& atom);

WorldState world_state_from_json(const Json& value);
Json to_json(const WorldState& state);

ToolSchema tool_schema_from_json(const Json& value);
Json to_json(const ToolSchema& schema);

// Parses one schema document (external format: a single JSON object).
ToolSchema parse_tool_schema(const std::string& text);
std::string serialize_tool_schema(const ToolSchema& schema);

// A registry file is a JSON array of schema objects.
ToolRegistry registry_from_json(const Json& value);
Json to_json(const ToolRegistry& registry);
ToolRegistry parse_registry(const std::string& text);
ToolRegistry load_registry(const std::string& path);

ToolRegistry register_tool(ToolRegistry registry, ToolSchema schema);

bool preconditions_satisfied(const ToolSchema& schema, const WorldState& state);
WorldState apply_effects(const ToolSchema& schema, const WorldState& state);

}  // namespace knowflow
