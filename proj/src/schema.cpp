#include "knowflow/schema.hpp"

#include <algorithm>
#include <sstream>

namespace knowflow {

namespace {

bool is_placeholder(const std::string& term) { return !term.empty() && term.front() == '?'; }

}  // namespace

bool PredicateAtom::is_ground() const {
  return std::none_of(args.begin(), args.end(), is_placeholder);
}

std::string PredicateAtom::text() const {
  std::ostringstream out;
  out << name << '(';
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) out << ',';
    out << args[i];
  }
  out << ')';
  return out.str();
}

const char* param_kind_name(ParamKind kind) {
  switch (kind) {
    case ParamKind::string_kind: return "string";
    case ParamKind::number: return "number";
    case ParamKind::path: return "path";
    case ParamKind::enum_kind: return "enum";
  }
  return "string";
}

ParamKind param_kind_from_name(const std::string& name) {
  if (name == "string") return ParamKind::string_kind;
  if (name == "number") return ParamKind::number;
  if (name == "path") return ParamKind::path;
  if (name == "enum") return ParamKind::enum_kind;
  fail(Errc::malformed, "unknown parameter kind \"" + name + "\"");
}

std::optional<std::string> check_arg_value(const ParameterSpec& spec, const Json& value) {
  switch (spec.kind) {
    case ParamKind::string_kind:
      if (!value.is_string()) return "expected a string";
      break;
    case ParamKind::path:
      if (!value.is_string()) return "expected a path string";
      break;
    case ParamKind::number: {
      if (!value.is_number()) return "expected a number";
      const double v = value.get<double>();
      if (spec.min_value && v < *spec.min_value) return "below minimum";
      if (spec.max_value && v > *spec.max_value) return "above maximum";
      break;
    }
    case ParamKind::enum_kind: {
      if (!value.is_string()) return "expected an enum string";
      const std::string v = value.get<std::string>();
      if (std::find(spec.enum_values.begin(), spec.enum_values.end(), v) ==
          spec.enum_values.end())
        return "not an allowed value: \"" + v + "\"";
      break;
    }
  }
  return std::nullopt;
}

AtomSet ToolSchema::add_effects() const {
  AtomSet out;
  for (const Effect& effect : effects)
    if (effect.polarity == EffectPolarity::add) out.insert(effect.atom);
  return out;
}

AtomSet ToolSchema::delete_effects() const {
  AtomSet out;
  for (const Effect& effect : effects)
    if (effect.polarity == EffectPolarity::del) out.insert(effect.atom);
  return out;
}

const ParameterSpec* ToolSchema::find_param(const std::string& param_name) const {
  for (const ParameterSpec& spec : parameters)
    if (spec.name == param_name) return &spec;
  return nullptr;
}

const ToolSchema* ToolRegistry::find(const std::string& name) const {
  auto it = tools.find(name);
  return it == tools.end() ? nullptr : &it->second;
}

const ToolSchema& ToolRegistry::at(const std::string& name) const {
  const ToolSchema* schema = find(name);
  if (!schema) fail(Errc::unknown_tool, "tool \"" + name + "\" is not registered");
  return *schema;
}

PredicateAtom atom_from_json(const Json& value) {
  jsonio::expect_keys(value, {"name", "args"}, "atom");
  PredicateAtom atom;
  atom.name = jsonio::require_string(value, "name", "atom");
  if (atom.name.empty()) fail(Errc::malformed, "atom name must be nonempty");
  if (value.contains("args")) {
    const Json& args = value.at("args");
    jsonio::expect_array(args, "atom args");
    for (const Json& arg : args) {
      if (!arg.is_string()) fail(Errc::malformed, "atom args must be strings");
      atom.args.push_back(arg.get<std::string>());
    }
  }
  return atom;
}

Json to_json(const PredicateAtom& atom) {
  return Json{{"name", atom.name}, {"args", atom.args}};
}

WorldState world_state_from_json(const Json& value) {
  jsonio::expect_array(value, "world state");
  WorldState state;
  for (const Json& entry : value) {
    PredicateAtom atom = atom_from_json(entry);
    if (!atom.is_ground())
      fail(Errc::malformed, "world state atoms must be ground: " + atom.text());
    state.atoms.insert(std::move(atom));
  }
  return state;
}

Json to_json(const WorldState& state) {
  Json out = Json::array();
  for (const PredicateAtom& atom : state.atoms) out.push_back(to_json(atom));
  return out;
}

namespace {

ParameterSpec parameter_from_json(const Json& value) {
  jsonio::expect_keys(value, {"name", "kind", "required", "constraints"}, "parameter");
  ParameterSpec spec;
  spec.name = jsonio::require_string(value, "name", "parameter");
  if (spec.name.empty()) fail(Errc::malformed, "parameter name must be nonempty");
  spec.kind = param_kind_from_name(jsonio::require_string(value, "kind", "parameter"));
  spec.required = jsonio::require_bool(value, "required", "parameter");
  if (value.contains("constraints")) {
    const Json& constraints = value.at("constraints");
    if (spec.kind == ParamKind::enum_kind) {
      jsonio::expect_keys(constraints, {"values"}, "enum constraints");
      const Json& values = jsonio::require(constraints, "values", "enum constraints");
      jsonio::expect_array(values, "enum values");
      for (const Json& v : values) {
        if (!v.is_string()) fail(Errc::malformed, "enum values must be strings");
        spec.enum_values.push_back(v.get<std::string>());
      }
    } else if (spec.kind == ParamKind::number) {
      jsonio::expect_keys(constraints, {"min", "max"}, "number constraints");
      if (constraints.contains("min")) spec.min_value = constraints.at("min").get<double>();
      if (constraints.contains("max")) spec.max_value = constraints.at("max").get<double>();
    } else {
      fail(Errc::malformed, "constraints are only valid for enum and number parameters");
    }
  }
  if (spec.kind == ParamKind::enum_kind && spec.enum_values.empty())
    fail(Errc::malformed, "enum parameter \"" + spec.name + "\" requires a value list");
  return spec;
}

Json parameter_to_json(const ParameterSpec& spec) {
  Json out{{"name", spec.name}, {"kind", param_kind_name(spec.kind)}, {"required", spec.required}};
  if (spec.kind == ParamKind::enum_kind) {
    out["constraints"] = Json{{"values", spec.enum_values}};
  } else if (spec.kind == ParamKind::number && (spec.min_value || spec.max_value)) {
    Json range = Json::object();
    if (spec.min_value) range["min"] = *spec.min_value;
    if (spec.max_value) range["max"] = *spec.max_value;
    out["constraints"] = range;
  }
  return out;
}

}  // namespace

ToolSchema tool_schema_from_json(const Json& value) {
  jsonio::expect_keys(value, {"name", "category", "parameters", "preconditions", "effects"},
                      "tool schema");
  ToolSchema schema;
  schema.name = jsonio::require_string(value, "name", "tool schema");
  if (schema.name.empty()) fail(Errc::malformed, "tool name must be nonempty");

  const std::string category = jsonio::require_string(value, "category", "tool schema");
  if (category == "atomic") {
    schema.category = ToolCategory::atomic;
  } else if (category == "semantic") {
    schema.category = ToolCategory::semantic;
  } else {
    fail(Errc::malformed, "tool category must be \"atomic\" or \"semantic\"");
  }

  const Json& parameters = jsonio::require(value, "parameters", "tool schema");
  jsonio::expect_array(parameters, "parameters");
  for (const Json& entry : parameters) {
    ParameterSpec spec = parameter_from_json(entry);
    if (schema.find_param(spec.name))
      fail(Errc::duplicate_param, "parameter \"" + spec.name + "\" defined twice");
    schema.parameters.push_back(std::move(spec));
  }

  const Json& preconditions = jsonio::require(value, "preconditions", "tool schema");
  jsonio::expect_array(preconditions, "preconditions");
  for (const Json& entry : preconditions) schema.preconditions.insert(atom_from_json(entry));

  const Json& effects = jsonio::require(value, "effects", "tool schema");
  jsonio::expect_array(effects, "effects");
  for (const Json& entry : effects) {
    jsonio::expect_keys(entry, {"name", "args", "polarity"}, "effect");
    Effect effect;
    effect.atom = atom_from_json(Json{{"name", entry.at("name")},
                                      {"args", entry.contains("args") ? entry.at("args")
                                                                      : Json::array()}});
    const std::string polarity = jsonio::get_string(entry, "polarity", "add");
    if (polarity == "add") {
      effect.polarity = EffectPolarity::add;
    } else if (polarity == "delete") {
      effect.polarity = EffectPolarity::del;
    } else {
      fail(Errc::malformed, "effect polarity must be \"add\" or \"delete\"");
    }
    schema.effects.insert(std::move(effect));
  }

  for (const PredicateAtom& atom : schema.add_effects()) {
    if (schema.delete_effects().count(atom))
      fail(Errc::conflicting_effect,
           "tool \"" + schema.name + "\" both adds and deletes " + atom.text());
  }
  return schema;
}

Json to_json(const ToolSchema& schema) {
  Json parameters = Json::array();
  for (const ParameterSpec& spec : schema.parameters) parameters.push_back(parameter_to_json(spec));

  Json preconditions = Json::array();
  for (const PredicateAtom& atom : schema.preconditions) preconditions.push_back(to_json(atom));

  Json effects = Json::array();
  for (const Effect& effect : schema.effects) {
    effects.push_back(Json{{"name", effect.atom.name},
                           {"args", effect.atom.args},
                           {"polarity", effect.polarity == EffectPolarity::add ? "add" : "delete"}});
  }

  return Json{{"name", schema.name},
              {"category", schema.category == ToolCategory::atomic ? "atomic" : "semantic"},
              {"parameters", parameters},
              {"preconditions", preconditions},
              {"effects", effects}};
}

ToolSchema parse_tool_schema(const std::string& text) {
  return tool_schema_from_json(jsonio::parse_text(text, "tool schema"));
}

std::string serialize_tool_schema(const ToolSchema& schema) { return to_json(schema).dump(2); }

ToolRegistry registry_from_json(const Json& value) {
  jsonio::expect_array(value, "tool registry");
  ToolRegistry registry;
  for (const Json& entry : value)
    registry = register_tool(std::move(registry), tool_schema_from_json(entry));
  return registry;
}

Json to_json(const ToolRegistry& registry) {
  Json out = Json::array();
  for (const auto& [name, schema] : registry.tools) out.push_back(to_json(schema));
  return out;
}

ToolRegistry parse_registry(const std::string& text) {
  return registry_from_json(jsonio::parse_text(text, "tool registry"));
}

ToolRegistry load_registry(const std::string& path) {
  return registry_from_json(jsonio::load_file(path));
}

ToolRegistry register_tool(ToolRegistry registry, ToolSchema schema) {
  if (registry.tools.count(schema.name))
    fail(Errc::duplicate_tool_name, "tool \"" + schema.name + "\" already registered");
  registry.tools.emplace(schema.name, std::move(schema));
  return registry;
}

bool preconditions_satisfied(const ToolSchema& schema, const WorldState& state) {
  for (const PredicateAtom& atom : schema.preconditions) {
    if (!atom.is_ground())
      fail(Errc::unbound_placeholder,
           "precondition " + atom.text() + " of \"" + schema.name + "\" is not ground");
    if (!state.contains(atom)) return false;
  }
  return true;
}

WorldState apply_effects(const ToolSchema& schema, const WorldState& state) {
  if (!preconditions_satisfied(schema, state))
    fail(Errc::precondition_violated, "preconditions of \"" + schema.name + "\" unmet");
  WorldState out = state;
  for (const PredicateAtom& atom : schema.delete_effects()) out.atoms.erase(atom);
  for (const PredicateAtom& atom : schema.add_effects()) {
    // World states hold ground atoms only.
    if (!atom.is_ground())
      fail(Errc::unbound_placeholder,
           "effect " + atom.text() + " of \"" + schema.name + "\" is not ground");
    out.atoms.insert(atom);
  }
  return out;
}

}  // namespace knowflow
