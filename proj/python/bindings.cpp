// Python bindings for the core engine. Payloads cross the boundary as JSON
// text in the same formats the CLI uses; the heavyweight values (registries,
// dags, libraries, stores, environments) stay opaque handles.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "knowflow/bench.hpp"
#include "knowflow/executor.hpp"

namespace py = pybind11;
using namespace knowflow;

namespace {

std::map<std::string, Json> args_from_text(const std::string& text) {
  const Json parsed = jsonio::parse_text(text, "args");
  jsonio::expect_object(parsed, "args");
  std::map<std::string, Json> args;
  for (const auto& [name, value] : parsed.items()) args[name] = value;
  return args;
}

py::dict counters_dict(const RunCounters& counters) {
  py::dict out;
  out["tool_calls"] = counters.tool_calls;
  out["planner_calls"] = counters.planner_calls;
  out["interactions"] = counters.interactions;
  out["adjustments"] = counters.adjustments;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "knowledge-guided workflow orchestration engine";

  py::class_<ToolRegistry>(m, "ToolRegistry")
      .def_static("from_json", [](const std::string& text) { return parse_registry(text); })
      .def_static("load", &load_registry)
      .def("to_json", [](const ToolRegistry& reg) { return to_json(reg).dump(2); })
      .def("tool_names",
           [](const ToolRegistry& reg) {
             std::vector<std::string> names;
             for (const auto& [name, schema] : reg.tools) names.push_back(name);
             return names;
           })
      .def("__len__", [](const ToolRegistry& reg) { return reg.tools.size(); });

  py::class_<WorkflowDag>(m, "WorkflowDag")
      .def_static("from_json", [](const std::string& text) { return parse_workflow(text); })
      .def_static("load", &load_workflow)
      .def("to_json", [](const WorkflowDag& dag) { return serialize_workflow(dag); })
      .def("node_ids",
           [](const WorkflowDag& dag) {
             std::vector<std::string> ids;
             for (const auto& [id, node] : dag.nodes) ids.push_back(id);
             return ids;
           })
      .def("tool_sequence",
           [](const WorkflowDag& dag) {
             std::vector<std::string> tools;
             for (const std::string& id : topological_order(dag))
               tools.push_back(dag.nodes.at(id).tool_name);
             return tools;
           })
      .def("__len__", [](const WorkflowDag& dag) { return dag.nodes.size(); });

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("ok", &ValidationReport::ok)
      .def_readonly("acyclic", &ValidationReport::acyclic)
      .def("to_json", [](const ValidationReport& report) { return report.to_json().dump(2); });

  py::class_<TaskGoal>(m, "TaskGoal")
      .def_static("from_json",
                  [](const std::string& text) {
                    return goal_from_json(jsonio::parse_text(text, "task goal"));
                  })
      .def_static("load", &load_goal)
      .def("to_json", [](const TaskGoal& goal) { return to_json(goal).dump(2); });

  py::class_<TemplateLibrary>(m, "TemplateLibrary")
      .def_static("from_json", [](const std::string& text) { return parse_library(text); })
      .def_static("load", &load_library)
      .def("to_json", [](const TemplateLibrary& lib) { return serialize_library(lib); })
      .def("template_ids",
           [](const TemplateLibrary& lib) {
             std::vector<std::string> ids;
             for (const auto& [id, tmpl] : lib.templates) ids.push_back(id);
             return ids;
           })
      .def("__len__", [](const TemplateLibrary& lib) { return lib.templates.size(); });

  py::class_<MemoryStore>(m, "MemoryStore")
      .def(py::init<>())
      .def_static("from_jsonl", [](const std::string& text) { return import_store(text); })
      .def_static("load", &load_store)
      .def("export", [](const MemoryStore& store) { return export_store(store); })
      .def("trace_count", [](const MemoryStore& store) { return store.traces.size(); })
      .def("rule_count", [](const MemoryStore& store) { return store.rules.size(); });

  py::class_<SimEnvironment>(m, "SimEnvironment")
      .def_static("from_json", [](const std::string& text) { return parse_environment(text); })
      .def_static("load", &load_environment)
      .def("to_json", [](const SimEnvironment& env) { return to_json(env).dump(2); });

  py::class_<PlannerInterface>(m, "PlannerInterface");
  py::class_<NullPlanner, PlannerInterface>(m, "NullPlanner").def(py::init<>());
  py::class_<ScriptedPlanner, PlannerInterface>(m, "ScriptedPlanner")
      .def_static("from_json",
                  [](const std::string& text) {
                    return ScriptedPlanner::from_json(jsonio::parse_text(text, "planner script"));
                  })
      .def_static("load", &ScriptedPlanner::load);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("from_json",
                  [](const std::string& text) {
                    return run_config_from_json(jsonio::parse_text(text, "run config"));
                  })
      .def_readwrite("seed", &RunConfig::seed)
      .def_property(
          "workflow_library",
          [](const RunConfig& c) { return c.ablations.workflow_library; },
          [](RunConfig& c, bool v) { c.ablations.workflow_library = v; })
      .def_property(
          "dynamic_adjustment",
          [](const RunConfig& c) { return c.ablations.dynamic_adjustment; },
          [](RunConfig& c, bool v) { c.ablations.dynamic_adjustment = v; })
      .def_property(
          "learning", [](const RunConfig& c) { return c.ablations.learning; },
          [](RunConfig& c, bool v) { c.ablations.learning = v; });

  py::class_<RunResult>(m, "RunResult")
      .def_property_readonly(
          "outcome",
          [](const RunResult& r) {
            return std::string(r.outcome == Outcome::success ? "success" : "terminal_failure");
          })
      .def_readonly("first_pass", &RunResult::first_pass)
      .def_property_readonly("counters",
                             [](const RunResult& r) { return counters_dict(r.counters); })
      .def("to_json", [](const RunResult& r) { return to_json(r).dump(2); });

  m.def("validate", &validate, py::arg("dag"), py::arg("registry"));
  m.def("topological_order", &topological_order, py::arg("dag"));
  m.def(
      "replace_node",
      [](const WorkflowDag& dag, const std::string& failed_id, const std::string& node_json) {
        return replace_node(dag, failed_id,
                            workflow_node_from_json(jsonio::parse_text(node_json, "node")));
      },
      py::arg("dag"), py::arg("failed_id"), py::arg("node_json"));
  m.def(
      "insert_node",
      [](const WorkflowDag& dag, const std::string& pred_id, const std::string& succ_id,
         const std::string& node_json) {
        return insert_node(dag, pred_id, succ_id,
                           workflow_node_from_json(jsonio::parse_text(node_json, "node")));
      },
      py::arg("dag"), py::arg("pred_id"), py::arg("succ_id"), py::arg("node_json"));
  m.def(
      "modify_params",
      [](const WorkflowDag& dag, const std::string& node_id, const std::string& args_json,
         const ToolRegistry& registry) {
        return modify_params(dag, node_id, args_from_text(args_json), registry);
      },
      py::arg("dag"), py::arg("node_id"), py::arg("args_json"), py::arg("registry"));

  m.def(
      "retrieve_template",
      [](const TaskGoal& goal, const TemplateLibrary& library) {
        std::vector<std::pair<std::string, double>> out;
        for (const RankedTemplate& ranked : retrieve_template(goal, library))
          out.emplace_back(ranked.template_id, ranked.score);
        return out;
      },
      py::arg("goal"), py::arg("library"));
  m.def(
      "instantiate",
      [](const TemplateLibrary& library, const std::string& template_id, const TaskGoal& goal,
         const ToolRegistry& registry) {
        auto it = library.templates.find(template_id);
        if (it == library.templates.end())
          fail(Errc::invalid_instantiation, "no template \"" + template_id + "\"");
        return instantiate(it->second, goal, registry);
      },
      py::arg("library"), py::arg("template_id"), py::arg("goal"), py::arg("registry"));

  m.def(
      "query_repair",
      [](const MemoryStore& store, const std::string& signature_json) -> py::object {
        const FailureSignature sig =
            signature_from_json(jsonio::parse_text(signature_json, "signature"));
        if (auto action = query_repair(store, sig)) return py::str(to_json(*action).dump(2));
        return py::none();
      },
      py::arg("store"), py::arg("signature_json"));

  m.def(
      "run_task",
      [](const TaskGoal& goal, const TemplateLibrary& library, const MemoryStore& store,
         SimEnvironment& env, const ToolRegistry& registry, PlannerInterface& planner,
         const RunConfig& config) {
        TaskOutcome outcome = run_task(goal, library, store, env, registry, planner, config);
        return py::make_tuple(std::move(outcome.result), std::move(outcome.library),
                              std::move(outcome.store));
      },
      py::arg("goal"), py::arg("library"), py::arg("store"), py::arg("env"), py::arg("registry"),
      py::arg("planner"), py::arg("config"));

  m.def("load_suite", &load_suite, py::arg("path"));
  py::class_<BenchmarkCase>(m, "BenchmarkCase")
      .def_readonly("case_id", &BenchmarkCase::case_id)
      .def_readonly("goal", &BenchmarkCase::goal);
  m.def(
      "run_suite",
      [](const std::vector<BenchmarkCase>& cases, const TemplateLibrary& library,
         const MemoryStore& store, const ToolRegistry& registry, PlannerInterface& planner,
         const RunConfig& config, int epochs, const std::string& config_name) {
        const SuiteRun run =
            run_suite(cases, library, store, registry, planner, config, epochs, config_name);
        std::vector<std::string> reports;
        for (const SuiteReport& report : run.reports)
          reports.push_back(report_to_json(report).dump(2));
        return reports;
      },
      py::arg("cases"), py::arg("library"), py::arg("store"), py::arg("registry"),
      py::arg("planner"), py::arg("config"), py::arg("epochs") = 1,
      py::arg("config_name") = "default");

  py::register_exception<Error>(m, "KnowflowError");
}
