#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace kftest;

namespace {

ToolRegistry chain_registry() {
  return make_registry({make_tool("load", {}, {"raw"}),
                        make_tool("correct", {"raw"}, {"corr"}),
                        make_tool("despeckle", {"raw"}, {"clean"}),
                        make_tool("detect", {"corr"}, {"found"})});
}

}  // namespace

TEST_CASE("infer_edges follows effect/precondition overlap") {
  const ToolRegistry registry =
      make_registry({make_tool("a_tool", {}, {"x"}), make_tool("b_tool", {"x"}, {}),
                     make_tool("c_tool", {"y"}, {})});

  const std::vector<WorkflowNode> ab = {make_node("a", "a_tool"), make_node("b", "b_tool")};
  CHECK(infer_edges(ab, registry) == EdgeSet{{"a", "b"}});

  const std::vector<WorkflowNode> ac = {make_node("a", "a_tool"), make_node("c", "c_tool")};
  CHECK(infer_edges(ac, registry).empty());
}

TEST_CASE("infer_edges matches the pairwise oracle on the four-tool pipeline") {
  const ToolRegistry registry = chain_registry();
  const std::vector<WorkflowNode> nodes = {make_node("load", "load"),
                                           make_node("correct", "correct"),
                                           make_node("despeckle", "despeckle"),
                                           make_node("detect", "detect")};
  const EdgeSet expected = {{"load", "correct"}, {"load", "despeckle"}, {"correct", "detect"}};
  CHECK(infer_edges(nodes, registry) == expected);
  CHECK(infer_edges(nodes, registry) == brute_force_edges(nodes, registry));
}

TEST_CASE("infer_edges rejects unregistered tools") {
  const ToolRegistry registry = chain_registry();
  const std::vector<WorkflowNode> nodes = {make_node("a", "missing_tool")};
  try {
    infer_edges(nodes, registry);
    FAIL("expected UnknownTool");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_tool);
  }
}

TEST_CASE("infer_edges equals the oracle on random registries") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const ToolRegistry registry = random_registry(rng, 1 + rng.below(10), 4);
    std::vector<WorkflowNode> nodes;
    size_t index = 0;
    for (const auto& [name, schema] : registry.tools)
      nodes.push_back(make_node("n" + std::to_string(index++), name));
    CHECK(infer_edges(nodes, registry) == brute_force_edges(nodes, registry));
  }
}

TEST_CASE("validate accepts a satisfied chain") {
  const ToolRegistry registry = chain_registry();
  const WorkflowDag dag = make_dag({make_node("a", "load"), make_node("b", "correct")},
                                   {{"a", "b"}});
  const ValidationReport report = validate(dag, registry);
  CHECK(report.ok);
  CHECK(report.acyclic);
  CHECK(report.unsatisfied.empty());
  CHECK(report.arg_errors.empty());
}

TEST_CASE("validate flags a two-node cycle") {
  const ToolRegistry registry = chain_registry();
  const WorkflowDag dag = make_dag({make_node("a", "load"), make_node("b", "correct")},
                                   {{"a", "b"}, {"b", "a"}});
  const ValidationReport report = validate(dag, registry);
  CHECK_FALSE(report.acyclic);
  CHECK_FALSE(report.ok);
}

TEST_CASE("validate pinpoints the missing despeckle step") {
  const ToolRegistry registry =
      make_registry({make_tool("load", {}, {"raw"}), make_tool("correct", {"raw"}, {"corr"}),
                     make_tool("detect", {"corr", "speckle_free"}, {"found"})});
  const WorkflowDag dag =
      make_dag({make_node("load", "load"), make_node("correct", "correct"),
                make_node("detect", "detect")},
                {{"load", "correct"}, {"correct", "detect"}});
  const ValidationReport report = validate(dag, registry);
  CHECK_FALSE(report.ok);
  REQUIRE(report.unsatisfied.size() == 1);
  CHECK(report.unsatisfied[0].node_id == "detect");
  CHECK(report.unsatisfied[0].atom == atom("speckle_free"));
}

TEST_CASE("validate reports unknown tools per node without aborting") {
  const ToolRegistry registry = chain_registry();
  const WorkflowDag dag = make_dag({make_node("a", "load"), make_node("b", "no_such")}, {});
  const ValidationReport report = validate(dag, registry);
  CHECK_FALSE(report.ok);
  REQUIRE(report.arg_errors.size() == 1);
  CHECK(report.arg_errors[0].node_id == "b");
}

TEST_CASE("validate checks argument kinds against the schema") {
  ToolSchema tool = make_tool("export", {}, {"done"});
  ParameterSpec format;
  format.name = "format";
  format.kind = ParamKind::enum_kind;
  format.enum_values = {"geotiff", "png"};
  tool.parameters.push_back(format);
  ParameterSpec level;
  level.name = "level";
  level.kind = ParamKind::number;
  level.required = false;
  level.min_value = 0.0;
  level.max_value = 9.0;
  tool.parameters.push_back(level);
  const ToolRegistry registry = make_registry({tool});

  WorkflowNode missing = make_node("n1", "export");
  WorkflowNode bad_enum = make_node("n2", "export");
  bad_enum.args["format"] = "bmp";
  WorkflowNode out_of_range = make_node("n3", "export");
  out_of_range.args["format"] = "png";
  out_of_range.args["level"] = 99;
  WorkflowNode stray = make_node("n4", "export");
  stray.args["format"] = "png";
  stray.args["unknown_param"] = 1;

  const ValidationReport report =
      validate(make_dag({missing, bad_enum, out_of_range, stray}, {}), registry);
  CHECK(report.arg_errors.size() == 4);
}

TEST_CASE("topological_order is the lexicographically smallest valid order") {
  const ToolRegistry registry = chain_registry();

  const WorkflowDag single = make_dag({make_node("only", "load")}, {});
  CHECK(topological_order(single) == std::vector<std::string>{"only"});

  // Diamond a->{b,c}, {b,c}->d: both a,b,c,d and a,c,b,d are valid; the
  // smallest wins.
  const WorkflowDag diamond =
      make_dag({make_node("a", "load"), make_node("b", "correct"), make_node("c", "despeckle"),
                make_node("d", "detect")},
               {{"a", "b"}, {"a", "c"}, {"b", "d"}, {"c", "d"}});
  std::vector<std::vector<std::string>> valid_orders;
  std::vector<std::string> ids = {"a", "b", "c", "d"};
  std::sort(ids.begin(), ids.end());
  do {
    bool ok = true;
    for (const auto& [from, to] : diamond.edges) {
      const auto from_at = std::find(ids.begin(), ids.end(), from);
      const auto to_at = std::find(ids.begin(), ids.end(), to);
      if (from_at > to_at) ok = false;
    }
    if (ok) valid_orders.push_back(ids);
  } while (std::next_permutation(ids.begin(), ids.end()));
  REQUIRE(valid_orders.size() == 2);
  CHECK(topological_order(diamond) == *std::min_element(valid_orders.begin(), valid_orders.end()));
  CHECK(topological_order(diamond) == std::vector<std::string>{"a", "b", "c", "d"});

  const WorkflowDag cycle =
      make_dag({make_node("a", "load"), make_node("b", "correct")}, {{"a", "b"}, {"b", "a"}});
  try {
    topological_order(cycle);
    FAIL("expected CycleDetected");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::cycle_detected);
  }
}

TEST_CASE("topological_order properties on random dags") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const ToolRegistry registry = random_registry(rng, 4, 4);
    const WorkflowDag dag = random_dag(rng, registry, 8);
    const std::vector<std::string> order = topological_order(dag);
    CHECK(order.size() == dag.nodes.size());
    for (const auto& [from, to] : dag.edges) {
      const auto from_at = std::find(order.begin(), order.end(), from);
      const auto to_at = std::find(order.begin(), order.end(), to);
      CHECK(from_at < to_at);
    }
    CHECK(topological_order(dag) == order);
  }
}

TEST_CASE("replace_node remaps every incident edge") {
  const ToolRegistry registry = chain_registry();
  const WorkflowDag dag = make_dag({make_node("a", "load"), make_node("b", "correct"),
                                    make_node("c", "detect")},
                                   {{"a", "b"}, {"b", "c"}});
  const WorkflowDag swapped = replace_node(dag, "b", make_node("b_prime", "despeckle"));
  CHECK(swapped.edges == EdgeSet{{"a", "b_prime"}, {"b_prime", "c"}});
  CHECK_FALSE(swapped.has_node("b"));
  CHECK(swapped.has_node("b_prime"));
  CHECK(dag.has_node("b"));  // input untouched

  const WorkflowDag isolated = make_dag({make_node("solo", "load")}, {});
  const WorkflowDag swapped_solo = replace_node(isolated, "solo", make_node("fresh", "load"));
  CHECK(swapped_solo.edges.empty());
  CHECK(swapped_solo.has_node("fresh"));

  try {
    replace_node(dag, "ghost", make_node("x", "load"));
    FAIL("expected NoSuchNode");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_such_node);
  }
  try {
    replace_node(dag, "b", make_node("a", "load"));
    FAIL("expected DuplicateNodeId");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duplicate_node_id);
  }
}

TEST_CASE("replacement without effect coverage shows up in validate") {
  const ToolRegistry registry = chain_registry();
  const WorkflowDag dag = make_dag({make_node("a", "load"), make_node("b", "correct"),
                                    make_node("c", "detect")},
                                   {{"a", "b"}, {"b", "c"}});
  REQUIRE(validate(dag, registry).ok);
  // despeckle emits clean, not corr, so detect starves.
  const WorkflowDag broken = replace_node(dag, "b", make_node("b2", "despeckle"));
  const ValidationReport report = validate(broken, registry);
  CHECK_FALSE(report.ok);
  REQUIRE(report.unsatisfied.size() == 1);
  CHECK(report.unsatisfied[0].node_id == "c");
  CHECK(report.unsatisfied[0].atom == atom("corr"));
}

TEST_CASE("insert_node rewires exactly one edge") {
  const ToolRegistry registry = chain_registry();
  const WorkflowDag dag =
      make_dag({make_node("a", "load"), make_node("b", "detect")}, {{"a", "b"}});
  const WorkflowDag widened = insert_node(dag, "a", "b", make_node("n", "correct"));
  CHECK(widened.edges == EdgeSet{{"a", "n"}, {"n", "b"}});
  CHECK(dag.edges == EdgeSet{{"a", "b"}});

  try {
    insert_node(dag, "b", "a", make_node("x", "correct"));
    FAIL("expected NoSuchEdge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_such_edge);
  }
  try {
    insert_node(dag, "a", "b", make_node("a", "correct"));
    FAIL("expected DuplicateNodeId");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duplicate_node_id);
  }
}

TEST_CASE("inserting the despeckle step satisfies the detector") {
  const ToolRegistry registry =
      make_registry({make_tool("load_sar", {}, {"raw"}),
                     make_tool("speckle_suppression", {"raw"}, {"speckle_free"}),
                     make_tool("yolovax", {"raw", "speckle_free"}, {"ships"})});
  const WorkflowDag dag =
      make_dag({make_node("load", "load_sar"), make_node("detect", "yolovax")},
               {{"load", "detect"}});
  CHECK_FALSE(validate(dag, registry).ok);
  const WorkflowDag repaired =
      insert_node(dag, "load", "detect", make_node("despeckle", "speckle_suppression"));
  CHECK(validate(repaired, registry).ok);
}

TEST_CASE("modify_params rewrites args and nothing else") {
  ToolSchema seg = make_tool("segment", {}, {"map"});
  ParameterSpec res;
  res.name = "spatial_resolution_m";
  res.kind = ParamKind::number;
  seg.parameters.push_back(res);
  ParameterSpec mode;
  mode.name = "mode";
  mode.kind = ParamKind::enum_kind;
  mode.required = false;
  mode.enum_values = {"fast", "exact"};
  seg.parameters.push_back(mode);
  const ToolRegistry registry = make_registry({seg});

  WorkflowNode node = make_node("s", "segment");
  node.args["spatial_resolution_m"] = 10;
  const WorkflowDag dag = make_dag({node}, {});

  const WorkflowDag coarse = modify_params(dag, "s", {{"spatial_resolution_m", Json(30)}}, registry);
  CHECK(coarse.edges == dag.edges);
  CHECK(coarse.nodes.at("s").args.at("spatial_resolution_m") == Json(30));
  CHECK(dag.nodes.at("s").args.at("spatial_resolution_m") == Json(10));

  try {
    modify_params(dag, "s", {{"mode", Json("wrong")}}, registry);
    FAIL("expected ArgKindMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::arg_kind_mismatch);
  }
  try {
    modify_params(dag, "ghost", {}, registry);
    FAIL("expected NoSuchNode");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_such_node);
  }

  // Reports before and after differ only in argument checking.
  const ValidationReport before = validate(dag, registry);
  const ValidationReport after = validate(coarse, registry);
  CHECK(before.acyclic == after.acyclic);
  CHECK(before.unsatisfied == after.unsatisfied);
  CHECK(before.ok == after.ok);
}

TEST_CASE("operators never mutate their input") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const ToolRegistry registry = random_registry(rng, 5, 4);
    const WorkflowDag dag = random_dag(rng, registry, 6);
    const std::string snapshot = serialize_workflow(dag);

    std::vector<std::string> ids;
    for (const auto& [id, node] : dag.nodes) ids.push_back(id);
    const std::string victim = ids[rng.below(ids.size())];
    const std::string tool = "tool" + std::to_string(rng.below(5));

    try {
      replace_node(dag, victim, make_node("fresh_replacement", tool));
    } catch (const Error&) {
    }
    try {
      modify_params(dag, victim, {}, registry);
    } catch (const Error&) {
    }
    if (!dag.edges.empty()) {
      const auto edge = *dag.edges.begin();
      try {
        insert_node(dag, edge.first, edge.second, make_node("fresh_insert", tool));
      } catch (const Error&) {
      }
    }
    CHECK(serialize_workflow(dag) == snapshot);
  }
}

TEST_CASE("insert and modify preserve acyclicity; replace keeps structure") {
  Rng rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const ToolRegistry registry = random_registry(rng, 5, 4);
    const WorkflowDag dag = random_dag(rng, registry, 6);

    if (!dag.edges.empty()) {
      const auto edge = *dag.edges.begin();
      const WorkflowDag inserted =
          insert_node(dag, edge.first, edge.second, make_node("zz_new", "tool0"));
      CHECK_NOTHROW(topological_order(inserted));
    }
    std::vector<std::string> ids;
    for (const auto& [id, node] : dag.nodes) ids.push_back(id);
    const WorkflowDag replaced =
        replace_node(dag, ids[rng.below(ids.size())], make_node("zz_rep", "tool0"));
    CHECK_NOTHROW(topological_order(replaced));
    const WorkflowDag modified = modify_params(dag, ids[0], {}, registry);
    CHECK_NOTHROW(topological_order(modified));
  }
}

TEST_CASE("delete-effect interference surfaces as a warning") {
  // The ancestor check sees x available for c (a is its only ancestor), but
  // the canonical order runs the deleter b before c.
  const ToolRegistry registry =
      make_registry({make_tool("adder", {}, {"x"}), make_tool("deleter", {}, {}, {"x"}),
                     make_tool("consumer", {"x"}, {"y"})});
  const WorkflowDag dag = make_dag({make_node("a", "adder"), make_node("b", "deleter"),
                                    make_node("c", "consumer")},
                                   {{"a", "c"}});
  const ValidationReport report = validate(dag, registry);
  CHECK_FALSE(report.ok);
  REQUIRE(report.unsatisfied.size() == 1);
  CHECK(report.unsatisfied[0].node_id == "c");
  CHECK_FALSE(report.warnings.empty());
}

TEST_CASE("workflow files round-trip") {
  const WorkflowDag dag = load_workflow(fixture_path("workflow_ship.json"));
  const WorkflowDag reparsed = parse_workflow(serialize_workflow(dag));
  CHECK(reparsed == dag);
  CHECK(serialize_workflow(reparsed) == serialize_workflow(dag));
}

TEST_CASE("ok=true means execution never trips a precondition") {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const ToolRegistry registry = random_registry(rng, 5, 4);
    const WorkflowDag dag = random_dag(rng, registry, 6);
    const ValidationReport report = validate(dag, registry);
    if (!report.ok) continue;
    ++checked;
    WorldState state = dag.initial_state;
    for (const std::string& id : topological_order(dag)) {
      const ToolSchema& schema = registry.at(dag.nodes.at(id).tool_name);
      CHECK_NOTHROW(state = apply_effects(schema, state));
    }
  }
  CHECK(checked > 0);
}
