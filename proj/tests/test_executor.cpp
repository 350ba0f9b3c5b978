#include "test_support.hpp"

#include <doctest.h>

using namespace kftest;

namespace {

struct Scenario {
  ToolRegistry registry = load_registry(fixture_path("tools.json"));
  TemplateLibrary library = load_library(fixture_path("library.json"));
  TaskGoal goal = load_goal(fixture_path("goal_ship.json"));
  SimEnvironment env = load_environment(fixture_path("env_sar.json"));
  ScriptedPlanner planner = ScriptedPlanner::load(fixture_path("planner_script.json"));
  RunConfig config;
};

WorkflowDag ship_dag(const Scenario& s) {
  return instantiate(s.library.templates.at("tpl.ship_detection"), s.goal, s.registry);
}

}  // namespace

TEST_CASE("diagnose builds the canonical signature triple") {
  Scenario s;
  WorkflowNode node = make_node("detect", "yolovax_detection");
  HistoryEntry entry;
  entry.node_id = "detect";
  entry.tool_name = "yolovax_detection";
  entry.status.kind = StepStatus::Kind::error;
  entry.status.error_code = "low_contrast";

  const FailureSignature sig = diagnose(entry, node, s.env);
  CHECK(sig.tool_name == "yolovax_detection");
  CHECK(sig.data_attrs.at("type") == Json("SAR"));
  CHECK(sig.error_code == "low_contrast");

  entry.status.kind = StepStatus::Kind::quality_fail;
  entry.status.score = 0.4;
  CHECK(diagnose(entry, node, s.env).error_code == "quality_below_threshold");

  entry.status.kind = StepStatus::Kind::success;
  try {
    diagnose(entry, node, s.env);
    FAIL("expected NotAFailure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_a_failure);
  }
}

TEST_CASE("select_repair prefers tier 1 and never calls the planner on a hit") {
  Scenario s;
  const WorkflowDag dag = ship_dag(s);
  ExecutionTrace trace;
  FailureSignature sig;
  sig.tool_name = "yolovax_detection";
  sig.data_attrs["type"] = "SAR";
  sig.error_code = "low_contrast";

  MemoryStore store;
  PatternActionRule rule;
  rule.rule_id = "r1";
  rule.pattern.tool_name = sig.tool_name;
  rule.pattern.error_code = sig.error_code;
  RepairAction remembered;
  remembered.kind = RepairKind::insert;
  remembered.node = make_node("", "speckle_suppression");
  rule.action = remembered;
  rule.polarity = RulePolarity::recommend;
  rule.created_at = 1;
  store.rules.push_back(rule);

  RunCounters counters;
  const auto selected =
      select_repair(sig, trace, dag, s.registry, store, s.planner, s.config, counters);
  REQUIRE(selected.has_value());
  CHECK(selected->tier == 1);
  CHECK(counters.planner_calls == 0);

  // Empty store falls through to the scripted planner.
  RunCounters counters2;
  const auto tier2 =
      select_repair(sig, trace, dag, s.registry, MemoryStore{}, s.planner, s.config, counters2);
  REQUIRE(tier2.has_value());
  CHECK(tier2->tier == 2);
  CHECK(tier2->action.kind == RepairKind::insert);
  CHECK(counters2.planner_calls == 1);

  // Both tiers disabled: nothing to select.
  RunConfig disabled;
  disabled.tiers.tier1 = false;
  disabled.tiers.tier2 = false;
  RunCounters counters3;
  CHECK_FALSE(select_repair(sig, trace, dag, s.registry, store, s.planner, disabled, counters3)
                  .has_value());
  CHECK(counters3.planner_calls == 0);
}

TEST_CASE("apply_repair validates the manipulated graph") {
  Scenario s;
  const WorkflowDag dag = ship_dag(s);

  RepairAction insert;
  insert.kind = RepairKind::insert;
  insert.predecessor = "tpl.ship_detection.2";
  insert.target = "tpl.ship_detection.3";
  insert.node = make_node("despeckle", "speckle_suppression");
  const WorkflowDag repaired = apply_repair(dag, insert, s.registry);
  CHECK(repaired.nodes.size() == 4);
  CHECK(validate(repaired, s.registry).ok);

  // Replacing the loader with a consumer starves everything downstream.
  RepairAction bad_replace;
  bad_replace.kind = RepairKind::replace;
  bad_replace.target = "tpl.ship_detection.1";
  bad_replace.node = make_node("oops", "radiometric_correction");
  try {
    apply_repair(dag, bad_replace, s.registry);
    FAIL("expected RepairRejected");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::repair_rejected);
  }

  RepairAction modify;
  modify.kind = RepairKind::modify;
  modify.target = "tpl.ship_detection.3";
  modify.args["confidence"] = 0.5;
  const WorkflowDag adjusted = apply_repair(dag, modify, s.registry);
  CHECK(adjusted.edges == dag.edges);
  CHECK(adjusted.nodes.at("tpl.ship_detection.3").args.at("confidence") == Json(0.5));

  RepairAction abort;
  abort.kind = RepairKind::abort;
  CHECK_THROWS_AS(apply_repair(dag, abort, s.registry), Error);
}

TEST_CASE("execute_workflow: fault-free chain runs first-pass") {
  Scenario s;
  s.env = load_environment(fixture_path("env_optical_clean.json"));
  TaskGoal goal;
  goal.context["scene"] = "a.tif";
  goal.context["classes"] = "building";
  goal.context["resolution"] = 10;
  goal.tags = {"optical", "segmentation", "buildings"};
  const WorkflowDag dag = instantiate(s.library.templates.at("tpl.segmentation"), goal, s.registry);

  const RunResult result =
      execute_workflow(dag, s.env, s.registry, MemoryStore{}, s.planner, s.config, goal);
  CHECK(result.outcome == Outcome::success);
  CHECK(result.counters.tool_calls == 3);
  CHECK(result.counters.adjustments == 0);
  CHECK(result.counters.planner_calls == 0);
  CHECK(result.counters.interactions == 0);
  CHECK(result.first_pass);
  CHECK(result.trace.history.size() == 3);
  CHECK(result.final_state.contains(atom("landcover_map")));
}

TEST_CASE("execute_workflow: injected fault repaired by the scripted insert") {
  Scenario s;
  const WorkflowDag dag = ship_dag(s);
  const RunResult result =
      execute_workflow(dag, s.env, s.registry, MemoryStore{}, s.planner, s.config, s.goal);
  CHECK(result.outcome == Outcome::success);
  CHECK(result.counters.tool_calls == 5);  // 3 + retry + inserted
  CHECK(result.counters.planner_calls == 1);
  CHECK(result.counters.adjustments == 1);
  CHECK_FALSE(result.first_pass);
  REQUIRE(result.trace.adjustments.size() == 1);
  CHECK(result.trace.adjustments[0].tier == 2);
  CHECK(result.trace.adjustments[0].accepted);
  // The inserted node sits between correction and detection.
  const WorkflowDag& final_dag = result.trace.w_final;
  CHECK(final_dag.nodes.size() == 4);
  std::vector<std::string> tools;
  for (const std::string& id : topological_order(final_dag))
    tools.push_back(final_dag.nodes.at(id).tool_name);
  CHECK(tools == std::vector<std::string>{"load_sar", "radiometric_correction",
                                          "speckle_suppression", "yolovax_detection"});
}

TEST_CASE("execute_workflow: no tier 2 and an empty store is terminal") {
  Scenario s;
  s.config.tiers.tier2 = false;
  const WorkflowDag dag = ship_dag(s);
  const RunResult result =
      execute_workflow(dag, s.env, s.registry, MemoryStore{}, s.planner, s.config, s.goal);
  CHECK(result.outcome == Outcome::terminal_failure);
  CHECK(result.counters.tool_calls == 3);
  CHECK(result.counters.planner_calls == 0);
  CHECK(result.counters.interactions == 1);  // the terminal report
  REQUIRE(result.trace.final_failure.has_value());
  CHECK(result.trace.final_failure->error_code == "low_contrast");
}

TEST_CASE("execute_workflow: disabled dynamic adjustment fails immediately") {
  Scenario s;
  s.config.ablations.dynamic_adjustment = false;
  const RunResult result =
      execute_workflow(ship_dag(s), s.env, s.registry, MemoryStore{}, s.planner, s.config, s.goal);
  CHECK(result.outcome == Outcome::terminal_failure);
  CHECK(result.counters.tool_calls == 3);
  CHECK(result.counters.adjustments == 0);
}

TEST_CASE("ask_user counts an interaction and ends the run") {
  Scenario s;
  s.env = load_environment(fixture_path("env_sar_review.json"));
  const RunResult result =
      execute_workflow(ship_dag(s), s.env, s.registry, MemoryStore{}, s.planner, s.config, s.goal);
  CHECK(result.outcome == Outcome::terminal_failure);
  CHECK(result.counters.interactions == 2);  // the question plus the terminal report
  CHECK(result.counters.adjustments == 0);
}

TEST_CASE("repair budgets bound the retries") {
  Scenario s;
  // A planner that always proposes a rejected repair (replace the loader with
  // a downstream consumer) burns the per-node budget and stops.
  const Json script = jsonio::parse_text(R"({
    "repairs": [
      {"pattern": {"data_attrs": {}, "error_code": "low_contrast"},
       "action": {"kind": "replace", "target": "tpl.ship_detection.1",
                  "node": {"id": "", "tool_name": "radiometric_correction", "args": {}}}}
    ],
    "plans": []
  })", "script");
  ScriptedPlanner stubborn = ScriptedPlanner::from_json(script);
  const RunResult result =
      execute_workflow(ship_dag(s), s.env, s.registry, MemoryStore{}, stubborn, s.config, s.goal);
  CHECK(result.outcome == Outcome::terminal_failure);
  CHECK(result.counters.adjustments == 0);
  CHECK(static_cast<long>(result.trace.adjustments.size()) == s.config.max_repairs_per_node);
  CHECK(result.counters.tool_calls <=
        static_cast<long>(result.trace.w_final.nodes.size()) + s.config.max_total_adjustments);
}

TEST_CASE("run_task: clean run leaves library and store unchanged except the trace") {
  Scenario s;
  s.env = load_environment(fixture_path("env_optical_clean.json"));
  TaskGoal goal;
  goal.text = "buildings";
  goal.tags = {"optical", "segmentation", "buildings"};
  goal.context["scene"] = "a.tif";
  goal.context["classes"] = "building";
  goal.context["resolution"] = 10;

  const TaskOutcome outcome =
      run_task(goal, s.library, MemoryStore{}, s.env, s.registry, s.planner, s.config);
  CHECK(outcome.result.outcome == Outcome::success);
  CHECK(outcome.result.first_pass);
  CHECK(outcome.library == s.library);
  CHECK(outcome.store.rules.empty());
  CHECK(outcome.store.traces.size() == 1);
}

TEST_CASE("run_task: one tier-2 repair grows the library and the rulebook") {
  Scenario s;
  const TaskOutcome outcome =
      run_task(s.goal, s.library, MemoryStore{}, s.env, s.registry, s.planner, s.config);
  CHECK(outcome.result.outcome == Outcome::success);
  CHECK(outcome.result.counters.planner_calls == 1);
  CHECK(outcome.result.counters.adjustments == 1);
  CHECK(outcome.library.templates.size() == s.library.templates.size() + 1);
  CHECK(outcome.store.traces.size() == 1);
  REQUIRE(outcome.store.rules.size() == 1);
  CHECK(outcome.store.rules[0].polarity == RulePolarity::recommend);

  SUBCASE("the same goal re-runs first-pass off the solidified template") {
    SimEnvironment env2 = load_environment(fixture_path("env_sar.json"));
    const TaskOutcome rerun =
        run_task(s.goal, outcome.library, outcome.store, env2, s.registry, s.planner, s.config);
    CHECK(rerun.result.outcome == Outcome::success);
    CHECK(rerun.result.first_pass);
    CHECK(rerun.result.counters.planner_calls == 0);
    CHECK(rerun.result.counters.tool_calls == 4);
    CHECK(rerun.library.templates.size() == outcome.library.templates.size());
  }

  SUBCASE("a fresh store with the harvested rule repairs via tier 1") {
    MemoryStore fresh;
    fresh.rules.push_back(outcome.store.rules[0]);
    SimEnvironment env2 = load_environment(fixture_path("env_sar.json"));
    const TaskOutcome tier1 =
        run_task(s.goal, s.library, fresh, env2, s.registry, s.planner, s.config);
    CHECK(tier1.result.outcome == Outcome::success);
    CHECK(tier1.result.counters.planner_calls == 0);
    CHECK(tier1.result.counters.adjustments == 1);
    REQUIRE(tier1.result.trace.adjustments.size() == 1);
    CHECK(tier1.result.trace.adjustments[0].tier == 1);
  }
}

TEST_CASE("run_task: terminal failure feeds failure attribution") {
  Scenario s;
  s.env = load_environment(fixture_path("env_sar_saturated.json"));
  const TaskOutcome outcome =
      run_task(s.goal, s.library, MemoryStore{}, s.env, s.registry, s.planner, s.config);
  CHECK(outcome.result.outcome == Outcome::terminal_failure);
  CHECK(outcome.library == s.library);
  CHECK(outcome.store.traces.size() == 1);
  REQUIRE(outcome.store.rules.size() == 1);
  CHECK(outcome.store.rules[0].polarity == RulePolarity::avoid);
  CHECK_FALSE(outcome.store.rules[0].action.has_value());

  SUBCASE("with learning disabled the store keeps only the trace") {
    s.config.ablations.learning = false;
    SimEnvironment env2 = load_environment(fixture_path("env_sar_saturated.json"));
    const TaskOutcome quiet =
        run_task(s.goal, s.library, MemoryStore{}, env2, s.registry, s.planner, s.config);
    CHECK(quiet.store.rules.empty());
    CHECK(quiet.store.traces.size() == 1);
  }
}

TEST_CASE("run_task without the workflow library leans on plan synthesis") {
  Scenario s;
  s.config.ablations.workflow_library = false;
  ScriptedPlanner planner = ScriptedPlanner::load(fixture_path("planner_ablation.json"));
  const TaskOutcome outcome =
      run_task(s.goal, s.library, MemoryStore{}, s.env, s.registry, planner, s.config);
  CHECK(outcome.result.outcome == Outcome::success);
  // One synthesize call plus one repair call.
  CHECK(outcome.result.counters.planner_calls == 2);
  CHECK(outcome.result.counters.tool_calls == 6);

  SUBCASE("no plan available is a terminal failure, not an exception") {
    NullPlanner none;
    SimEnvironment env2 = load_environment(fixture_path("env_sar.json"));
    const TaskOutcome stuck =
        run_task(s.goal, s.library, MemoryStore{}, env2, s.registry, none, s.config);
    CHECK(stuck.result.outcome == Outcome::terminal_failure);
    CHECK(stuck.result.counters.tool_calls == 0);
    CHECK(stuck.result.counters.interactions == 1);
  }
}

TEST_CASE("run_task with an empty library and no plan raises EmptyLibrary") {
  Scenario s;
  NullPlanner none;
  try {
    run_task(s.goal, TemplateLibrary{}, MemoryStore{}, s.env, s.registry, none, s.config);
    FAIL("expected EmptyLibrary");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_library);
  }
}

TEST_CASE("run_task is bit-identical across repeated executions") {
  Scenario s;
  SimEnvironment env1 = load_environment(fixture_path("env_sar.json"));
  SimEnvironment env2 = load_environment(fixture_path("env_sar.json"));
  const TaskOutcome a = run_task(s.goal, s.library, MemoryStore{}, env1, s.registry, s.planner, s.config);
  const TaskOutcome b = run_task(s.goal, s.library, MemoryStore{}, env2, s.registry, s.planner, s.config);
  CHECK(to_json(a.result).dump() == to_json(b.result).dump());
  CHECK(export_store(a.store) == export_store(b.store));
  CHECK(serialize_library(a.library) == serialize_library(b.library));
}

TEST_CASE("learning effect: a harvested signature is repaired without the planner") {
  Scenario s;
  const TaskOutcome first =
      run_task(s.goal, s.library, MemoryStore{}, s.env, s.registry, s.planner, s.config);
  REQUIRE(first.result.counters.planner_calls == 1);

  // Same signature, original library (no solidified shortcut): tier 1 must
  // carry the repair alone.
  SimEnvironment env2 = load_environment(fixture_path("env_sar.json"));
  const TaskOutcome second =
      run_task(s.goal, s.library, first.store, env2, s.registry, s.planner, s.config);
  CHECK(second.result.outcome == Outcome::success);
  CHECK(second.result.counters.planner_calls == 0);
  CHECK(second.result.counters.adjustments == 1);
}
