#pragma once
// Procedural knowledge base: hierarchical workflow templates, tag-based
// retrieval, instantiation into concrete dags, and solidification of
// successfully repaired workflows into new templates.

#include "knowflow/workflow.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace knowflow {

struct ExecutionTrace;  // memory.hpp

struct TaskGoal {
  std::string text;
  std::set<std::string> tags;            // lowercase, deduplicated
  std::map<std::string, Json> context;   // data paths, region, dates, sensor attrs

  friend bool operator==(const TaskGoal&, const TaskGoal&) = default;
};

struct TemplateStep {
  std::string label;
  std::string tool_name;                 // leaves only
  std::map<std::string, Json> arg_bindings;  // string "?key" binds from goal context
  std::vector<TemplateStep> children;    // composite steps only

  bool is_leaf() const { return children.empty(); }

  friend bool operator==(const TemplateStep&, const TemplateStep&) = default;
};

enum class Provenance { expert, solidified };

struct WorkflowTemplate {
  std::string id;
  std::set<std::string> tags;
  std::vector<TemplateStep> steps;
  // Ordering constraints between leaf labels, kept in addition to inferred
  // edges (expert sequencing goes beyond data dependencies).
  std::vector<std::pair<std::string, std::string>> explicit_edges;
  Provenance provenance = Provenance::expert;
  std::map<std::string, Json> metadata;

  friend bool operator==(const WorkflowTemplate&, const WorkflowTemplate&) = default;
};

struct TemplateLibrary {
  std::map<std::string, WorkflowTemplate> templates;  // sorted by id

  friend bool operator==(const TemplateLibrary&, const TemplateLibrary&) = default;
};

struct RankedTemplate {
  std::string template_id;
  double score = 0.0;

  friend bool operator==(const RankedTemplate&, const RankedTemplate&) = default;
};

// Jaccard similarity over tags; solidified templates earn +0.05 when all of
// their recorded signature tags appear in the goal. Returns every template,
// sorted by score descending then id ascending.
std::vector<RankedTemplate> retrieve_template(const TaskGoal& goal, const TemplateLibrary& library);

// Flattens leaf steps depth-first into nodes `<template-id>.<k>`, resolves
// `?key` placeholders from the goal context, and unions explicit edges with
// inferred ones. The result is guaranteed to validate.
WorkflowDag instantiate(const WorkflowTemplate& tmpl, const TaskGoal& goal,
                        const ToolRegistry& registry);

// Promotes a successfully repaired workflow into a new solidified template.
// Arg values traceable to the goal context are generalized to placeholders;
// values introduced by repairs stay literal.
TemplateLibrary solidify(TemplateLibrary library, const WorkflowDag& final_dag,
                         const ExecutionTrace& trace);

TaskGoal goal_from_json(const Json& value);
Json to_json(const TaskGoal& goal);
TaskGoal load_goal(const std::string& path);

WorkflowTemplate template_from_json(const Json& value);
Json to_json(const WorkflowTemplate& tmpl);

TemplateLibrary library_from_json(const Json& value);
Json to_json(const TemplateLibrary& library);
TemplateLibrary parse_library(const std::string& text);
std::string serialize_library(const TemplateLibrary& library);
TemplateLibrary load_library(const std::string& path);
void save_library(const std::string& path, const TemplateLibrary& library);

}  // namespace knowflow
