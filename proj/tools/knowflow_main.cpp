// knowflow CLI: validate, plan, run, bench, and memory subcommands.
// Exit codes: 0 success, 1 task or validation failure, 2 usage or file-format
// error. Machine-readable output goes to stdout, diagnostics to stderr.

#include "knowflow/bench.hpp"
#include "knowflow/executor.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace {

using namespace knowflow;

constexpr int kExitSuccess = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitUsage = 2;

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  jsonio::write_file_atomic(out_path, content);
}

std::unique_ptr<PlannerInterface> make_planner(const std::string& script_path,
                                               const std::string& url) {
  if (!script_path.empty())
    return std::make_unique<ScriptedPlanner>(ScriptedPlanner::load(script_path));
  std::string endpoint = url;
  if (endpoint.empty()) {
    if (const char* env_url = std::getenv("KNOWFLOW_PLANNER_URL")) endpoint = env_url;
  }
  if (!endpoint.empty()) return std::make_unique<RemotePlanner>(endpoint);
  return std::make_unique<NullPlanner>();
}

int cmd_validate(const std::string& workflow_path, const std::string& tools_path,
                 const std::string& format) {
  const ToolRegistry registry = load_registry(tools_path);
  const WorkflowDag dag = load_workflow(workflow_path);
  const ValidationReport report = validate(dag, registry);

  if (format == "json") {
    std::cout << report.to_json().dump(2) << "\n";
  } else {
    std::cout << "ok: " << (report.ok ? "true" : "false") << "\n";
    std::cout << "acyclic: " << (report.acyclic ? "true" : "false") << "\n";
    for (const UnsatisfiedAtom& entry : report.unsatisfied)
      std::cout << "unsatisfied: " << entry.node_id << " needs " << entry.atom.text() << "\n";
    for (const ArgError& entry : report.arg_errors)
      std::cout << "arg_error: " << entry.node_id
                << (entry.param.empty() ? "" : "." + entry.param) << ": " << entry.reason << "\n";
    for (const std::string& warning : report.warnings) std::cout << "warning: " << warning << "\n";
  }
  return report.ok ? kExitSuccess : kExitTaskFailure;
}

int cmd_plan(const std::string& goal_path, const std::string& library_path,
             const std::string& tools_path, const std::string& out_path) {
  const ToolRegistry registry = load_registry(tools_path);
  const TemplateLibrary library = load_library(library_path);
  const TaskGoal goal = load_goal(goal_path);

  std::string last_error = "library has no templates";
  for (const RankedTemplate& candidate : retrieve_template(goal, library)) {
    try {
      const WorkflowDag dag =
          instantiate(library.templates.at(candidate.template_id), goal, registry);
      write_output(out_path, serialize_workflow(dag) + "\n");
      std::cerr << "planned from template \"" << candidate.template_id << "\" (score "
                << candidate.score << ")\n";
      return kExitSuccess;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  std::cerr << "no template instantiates for this goal: " << last_error << "\n";
  return kExitTaskFailure;
}

int cmd_run(const std::string& goal_path, const std::string& library_path,
            const std::string& memory_path, const std::string& env_path,
            const std::string& tools_path, const std::string& planner_path,
            const std::string& planner_url, bool no_wl, bool no_da, bool no_lc, long seed,
            const std::string& format, const std::string& save_library_path) {
  const ToolRegistry registry = load_registry(tools_path);
  const TemplateLibrary library = load_library(library_path);
  const TaskGoal goal = load_goal(goal_path);
  SimEnvironment env = load_environment(env_path);
  const MemoryStore store = load_store(memory_path);

  RunConfig config;
  config.ablations.workflow_library = !no_wl;
  config.ablations.dynamic_adjustment = !no_da;
  config.ablations.learning = !no_lc;
  config.seed = seed;

  auto planner = make_planner(planner_path, planner_url);
  const TaskOutcome outcome = run_task(goal, library, store, env, registry, *planner, config);

  // The memory file is append-only: only records new to this run are written.
  std::ostringstream appended;
  for (size_t i = store.traces.size(); i < outcome.store.traces.size(); ++i) {
    Json line = to_json(outcome.store.traces[i]);
    line["kind"] = "trace";
    appended << line.dump() << "\n";
  }
  for (size_t i = store.rules.size(); i < outcome.store.rules.size(); ++i) {
    Json line = to_json(outcome.store.rules[i]);
    line["kind"] = "rule";
    appended << line.dump() << "\n";
  }
  jsonio::append_file(memory_path, appended.str());

  if (!save_library_path.empty()) save_library(save_library_path, outcome.library);

  if (format == "json") {
    std::cout << to_json(outcome.result).dump(2) << "\n";
  } else {
    const RunCounters& counters = outcome.result.counters;
    std::cout << "outcome: "
              << (outcome.result.outcome == Outcome::success ? "success" : "terminal_failure")
              << "\n";
    std::cout << "first_pass: " << (outcome.result.first_pass ? "true" : "false") << "\n";
    std::cout << "tool_calls: " << counters.tool_calls << "\n";
    std::cout << "planner_calls: " << counters.planner_calls << "\n";
    std::cout << "interactions: " << counters.interactions << "\n";
    std::cout << "adjustments: " << counters.adjustments << "\n";
  }
  return outcome.result.outcome == Outcome::success ? kExitSuccess : kExitTaskFailure;
}

int cmd_bench(const std::string& suite_path, const std::string& library_path,
              const std::string& config_path, int epochs, const std::string& format,
              const std::string& out_path, const std::string& memory_path) {
  const Json config_doc = jsonio::load_file(config_path);
  jsonio::expect_keys(config_doc, {"name", "tools", "planner", "run"}, "bench config");
  const std::string config_name = jsonio::get_string(config_doc, "name", "default");

  const std::filesystem::path config_dir = std::filesystem::path(config_path).parent_path();
  const auto resolve = [&](const std::string& path) { return (config_dir / path).string(); };

  const ToolRegistry registry =
      load_registry(resolve(jsonio::require_string(config_doc, "tools", "bench config")));
  std::unique_ptr<PlannerInterface> planner;
  if (config_doc.contains("planner")) {
    planner = std::make_unique<ScriptedPlanner>(
        ScriptedPlanner::load(resolve(config_doc.at("planner").get<std::string>())));
  } else {
    planner = make_planner("", "");
  }
  RunConfig config;
  if (config_doc.contains("run")) config = run_config_from_json(config_doc.at("run"));

  const std::vector<BenchmarkCase> cases = load_suite(suite_path);
  const TemplateLibrary library = load_library(library_path);
  const MemoryStore store = memory_path.empty() ? MemoryStore{} : load_store(memory_path);

  const SuiteRun run =
      run_suite(cases, library, store, registry, *planner, config, epochs, config_name);

  const ReportFormat report_format = format == "csv" ? ReportFormat::csv : ReportFormat::json;
  write_output(out_path, emit_reports(run.reports, report_format));
  return kExitSuccess;
}

int cmd_memory_inspect(const std::string& memory_path, const std::string& format) {
  const MemoryStore store = load_store(memory_path);
  if (format == "json") {
    Json traces = Json::array();
    for (const ExecutionTrace& trace : store.traces) traces.push_back(to_json(trace));
    Json rules = Json::array();
    for (const PatternActionRule& rule : store.rules) rules.push_back(to_json(rule));
    std::cout << Json{{"traces", traces}, {"rules", rules}}.dump(2) << "\n";
    return kExitSuccess;
  }
  std::cout << "traces: " << store.traces.size() << "\n";
  for (const ExecutionTrace& trace : store.traces) {
    std::cout << "  " << trace.trace_id << ": "
              << (trace.outcome == Outcome::success ? "success" : "terminal_failure") << ", "
              << trace.history.size() << " steps, " << trace.adjustments.size()
              << " adjustments\n";
  }
  std::cout << "rules: " << store.rules.size() << "\n";
  for (const PatternActionRule& rule : store.rules) {
    std::cout << "  " << rule.rule_id << " ["
              << (rule.polarity == RulePolarity::recommend ? "recommend" : "avoid") << "] "
              << (rule.pattern.tool_name ? *rule.pattern.tool_name : "*") << " / "
              << (rule.pattern.error_code ? *rule.pattern.error_code : "*") << " -> "
              << (rule.action ? repair_kind_name(rule.action->kind) : "none") << "\n";
  }
  return kExitSuccess;
}

int cmd_memory_export(const std::string& memory_path, const std::string& out_path) {
  const MemoryStore store = load_store(memory_path);
  write_output(out_path, export_store(store));
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-guided workflow orchestration engine"};
  app.require_subcommand(1);

  std::string workflow_path, tools_path, goal_path, library_path, memory_path, env_path;
  std::string planner_path, planner_url, suite_path, config_path, out_path, save_library_path;
  std::string format = "text";
  bool no_wl = false, no_da = false, no_lc = false;
  long seed = 0;
  int epochs = 1;

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a workflow file for consistency");
  validate_cmd->add_option("--workflow", workflow_path, "workflow file")->required();
  validate_cmd->add_option("--tools", tools_path, "tool registry file")->required();
  validate_cmd->add_option("--format", format, "text|json");

  CLI::App* plan_cmd = app.add_subcommand("plan", "instantiate the best template for a goal");
  plan_cmd->add_option("--goal", goal_path, "task goal file")->required();
  plan_cmd->add_option("--library", library_path, "template library file")->required();
  plan_cmd->add_option("--tools", tools_path, "tool registry file")->required();
  plan_cmd->add_option("--out", out_path, "write the workflow here instead of stdout");

  CLI::App* run_cmd = app.add_subcommand("run", "execute one task end to end");
  run_cmd->add_option("--goal", goal_path, "task goal file")->required();
  run_cmd->add_option("--library", library_path, "template library file")->required();
  run_cmd->add_option("--memory", memory_path, "memory store file (appended)")->required();
  run_cmd->add_option("--env", env_path, "simulated environment file")->required();
  run_cmd->add_option("--tools", tools_path, "tool registry file")->required();
  run_cmd->add_option("--planner", planner_path, "scripted planner file");
  run_cmd->add_option("--planner-url", planner_url, "remote planner endpoint");
  run_cmd->add_flag("--no-wl", no_wl, "disable the workflow library");
  run_cmd->add_flag("--no-da", no_da, "disable dynamic adjustment");
  run_cmd->add_flag("--no-lc", no_lc, "disable learning");
  run_cmd->add_option("--seed", seed, "deterministic seed");
  run_cmd->add_option("--format", format, "text|json");
  run_cmd->add_option("--save-library", save_library_path, "persist the updated library here");

  CLI::App* bench_cmd = app.add_subcommand("bench", "run a benchmark suite");
  bench_cmd->add_option("--suite", suite_path, "benchmark suite file")->required();
  bench_cmd->add_option("--library", library_path, "template library file")->required();
  bench_cmd->add_option("--config", config_path, "bench config file")->required();
  bench_cmd->add_option("--epochs", epochs, "number of passes over the suite");
  bench_cmd->add_option("--format", format, "json|csv");
  bench_cmd->add_option("--out", out_path, "write the report here instead of stdout");
  bench_cmd->add_option("--memory", memory_path, "seed memory store file (read-only)");

  CLI::App* memory_cmd = app.add_subcommand("memory", "inspect or export the memory store");
  memory_cmd->require_subcommand(1);
  CLI::App* inspect_cmd = memory_cmd->add_subcommand("inspect", "pretty-print the store");
  inspect_cmd->add_option("--memory", memory_path, "memory store file")->required();
  inspect_cmd->add_option("--format", format, "text|json");
  CLI::App* export_cmd = memory_cmd->add_subcommand("export", "canonical JSON-lines export");
  export_cmd->add_option("--memory", memory_path, "memory store file")->required();
  export_cmd->add_option("--out", out_path, "write the export here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(workflow_path, tools_path, format);
    if (plan_cmd->parsed()) return cmd_plan(goal_path, library_path, tools_path, out_path);
    if (run_cmd->parsed())
      return cmd_run(goal_path, library_path, memory_path, env_path, tools_path, planner_path,
                     planner_url, no_wl, no_da, no_lc, seed, format, save_library_path);
    if (bench_cmd->parsed())
      return cmd_bench(suite_path, library_path, config_path, epochs, format, out_path,
                       memory_path);
    if (memory_cmd->parsed()) {
      if (inspect_cmd->parsed()) return cmd_memory_inspect(memory_path, format);
      if (export_cmd->parsed()) return cmd_memory_export(memory_path, out_path);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return is_format_error(e.code()) ? kExitUsage : kExitTaskFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTaskFailure;
  }
  return kExitUsage;
}
