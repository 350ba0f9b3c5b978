#include "knowflow/bench.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

namespace knowflow {

const char* difficulty_name(Difficulty difficulty) {
  return difficulty == Difficulty::simple ? "simple" : "complex";
}

std::vector<BenchmarkCase> suite_from_json(const Json& value, const std::string& base_dir) {
  jsonio::expect_array(value, "benchmark suite");
  std::vector<BenchmarkCase> cases;
  for (const Json& entry : value) {
    jsonio::expect_keys(entry, {"case_id", "difficulty", "goal", "gold", "environment"},
                        "benchmark case");
    BenchmarkCase bench_case;
    bench_case.case_id = jsonio::require_string(entry, "case_id", "benchmark case");
    const std::string difficulty = jsonio::require_string(entry, "difficulty", "benchmark case");
    if (difficulty == "simple") {
      bench_case.difficulty = Difficulty::simple;
    } else if (difficulty == "complex") {
      bench_case.difficulty = Difficulty::complex_;
    } else {
      fail(Errc::malformed, "difficulty must be \"simple\" or \"complex\"");
    }
    bench_case.goal = goal_from_json(jsonio::require(entry, "goal", "benchmark case"));

    const Json& gold = jsonio::require(entry, "gold", "benchmark case");
    jsonio::expect_array(gold, "gold workflow");
    for (const Json& step : gold) {
      jsonio::expect_keys(step, {"tool_name", "args"}, "gold step");
      GoldStep gold_step;
      gold_step.tool_name = jsonio::require_string(step, "tool_name", "gold step");
      if (step.contains("args")) {
        jsonio::expect_object(step.at("args"), "gold args");
        for (const auto& [name, arg] : step.at("args").items()) gold_step.args[name] = arg;
      }
      bench_case.gold.push_back(std::move(gold_step));
    }
    if (bench_case.gold.empty())
      fail(Errc::malformed, "case \"" + bench_case.case_id + "\" has an empty gold workflow");

    bench_case.environment_ref = jsonio::require(entry, "environment", "benchmark case");
    if (bench_case.environment_ref.is_string()) {
      const std::filesystem::path path =
          std::filesystem::path(base_dir) / bench_case.environment_ref.get<std::string>();
      bench_case.environment = load_environment(path.string());
    } else {
      bench_case.environment = environment_from_json(bench_case.environment_ref);
    }

    const bool duplicate = std::any_of(cases.begin(), cases.end(), [&](const BenchmarkCase& c) {
      return c.case_id == bench_case.case_id;
    });
    if (duplicate)
      fail(Errc::duplicate_case_id, "case \"" + bench_case.case_id + "\" defined twice");
    cases.push_back(std::move(bench_case));
  }
  std::sort(cases.begin(), cases.end(),
            [](const BenchmarkCase& a, const BenchmarkCase& b) { return a.case_id < b.case_id; });
  return cases;
}

Json to_json(const std::vector<BenchmarkCase>& cases) {
  Json out = Json::array();
  for (const BenchmarkCase& bench_case : cases) {
    Json gold = Json::array();
    for (const GoldStep& step : bench_case.gold) {
      Json args = Json::object();
      for (const auto& [name, value] : step.args) args[name] = value;
      gold.push_back(Json{{"tool_name", step.tool_name}, {"args", args}});
    }
    out.push_back(Json{{"case_id", bench_case.case_id},
                       {"difficulty", difficulty_name(bench_case.difficulty)},
                       {"goal", to_json(bench_case.goal)},
                       {"gold", gold},
                       {"environment", bench_case.environment_ref}});
  }
  return out;
}

std::vector<BenchmarkCase> load_suite(const std::string& path) {
  const std::string base_dir = std::filesystem::path(path).parent_path().string();
  return suite_from_json(jsonio::load_file(path), base_dir);
}

StepHits compare_to_gold(const RunResult& result, const std::vector<GoldStep>& gold) {
  std::vector<const WorkflowNode*> generated;
  for (const std::string& id : topological_order(result.trace.w_final))
    generated.push_back(&result.trace.w_final.nodes.at(id));

  const std::set<std::string> violations(result.format_violations.begin(),
                                         result.format_violations.end());

  StepHits hits;
  hits.aligned = static_cast<long>(std::max(generated.size(), gold.size()));
  for (long i = 0; i < hits.aligned; ++i) {
    const WorkflowNode* gen = i < static_cast<long>(generated.size()) ? generated[i] : nullptr;
    const GoldStep* want = i < static_cast<long>(gold.size()) ? &gold[i] : nullptr;

    if (gen && !violations.count(gen->id)) ++hits.inst_hits;
    if (!gen || !want) continue;  // a gap misses on all three

    if (gen->tool_name != want->tool_name) continue;
    ++hits.tool_hits;

    const bool args_match =
        std::all_of(want->args.begin(), want->args.end(), [&](const auto& kv) {
          auto it = gen->args.find(kv.first);
          return it != gen->args.end() && it->second == kv.second;
        });
    if (args_match) ++hits.arg_hits;
  }
  return hits;
}

bool case_success(const RunResult& result, const std::vector<GoldStep>& gold,
                  const ToolRegistry& registry) {
  if (result.outcome != Outcome::success) return false;

  // The gold sequence's final effect set must be covered by the run's final
  // world state.
  AtomSet expected;
  for (const GoldStep& step : gold) {
    const ToolSchema* schema = registry.find(step.tool_name);
    if (!schema) continue;
    for (const PredicateAtom& atom : schema->delete_effects()) expected.erase(atom);
    for (const PredicateAtom& atom : schema->add_effects()) expected.insert(atom);
  }
  for (const PredicateAtom& atom : expected) {
    if (!result.final_state.contains(atom)) return false;
  }

  // Every gold-specified numeric arg must match where the same tool ran.
  for (const GoldStep& step : gold) {
    std::vector<const HistoryEntry*> runs;
    for (const HistoryEntry& entry : result.trace.history)
      if (entry.status.is_success() && entry.tool_name == step.tool_name) runs.push_back(&entry);
    if (runs.empty()) continue;

    const bool matched = std::any_of(runs.begin(), runs.end(), [&](const HistoryEntry* entry) {
      for (const auto& [name, value] : step.args) {
        if (!value.is_number()) continue;
        auto it = entry->args.find(name);
        if (it == entry->args.end() || it->second != value) return false;
      }
      return true;
    });
    if (!matched) return false;
  }
  return true;
}

namespace {

AggregateRow aggregate(const std::string& difficulty, const std::vector<const CaseResult*>& rows) {
  AggregateRow out;
  out.difficulty = difficulty;
  out.cases = static_cast<long>(rows.size());
  if (rows.empty()) return out;

  long successes = 0;
  long first_pass = 0;
  double tool_calls = 0;
  double interactions = 0;
  long tool_hits = 0;
  long arg_hits = 0;
  long inst_hits = 0;
  long aligned = 0;
  for (const CaseResult* row : rows) {
    successes += row->success ? 1 : 0;
    first_pass += (row->success && row->result.first_pass) ? 1 : 0;
    tool_calls += static_cast<double>(row->result.counters.tool_calls);
    interactions += static_cast<double>(row->result.counters.interactions);
    tool_hits += row->hits.tool_hits;
    arg_hits += row->hits.arg_hits;
    inst_hits += row->hits.inst_hits;
    aligned += row->hits.aligned;
  }
  const double n = static_cast<double>(rows.size());
  out.tsr = 100.0 * static_cast<double>(successes) / n;
  out.fpa = 100.0 * static_cast<double>(first_pass) / n;
  out.ntc = tool_calls / n;
  out.ni = interactions / n;
  if (aligned > 0) {
    out.inst_acc = 100.0 * static_cast<double>(inst_hits) / static_cast<double>(aligned);
    out.tool_acc = 100.0 * static_cast<double>(tool_hits) / static_cast<double>(aligned);
    out.arg_acc = 100.0 * static_cast<double>(arg_hits) / static_cast<double>(aligned);
  }
  out.overall = (out.inst_acc + out.tool_acc + out.arg_acc) / 3.0;
  return out;
}

}  // namespace

SuiteReport compute_metrics(const std::string& config_name, int epoch,
                            std::vector<CaseResult> results) {
  if (results.empty()) fail(Errc::empty_suite, "no case results to aggregate");

  SuiteReport report;
  report.config_name = config_name;
  report.epoch = epoch;
  report.per_case = std::move(results);

  std::vector<const CaseResult*> simple;
  std::vector<const CaseResult*> complex_cases;
  std::vector<const CaseResult*> all;
  for (const CaseResult& row : report.per_case) {
    (row.difficulty == Difficulty::simple ? simple : complex_cases).push_back(&row);
    all.push_back(&row);
  }
  if (!simple.empty()) report.aggregates.push_back(aggregate("simple", simple));
  if (!complex_cases.empty()) report.aggregates.push_back(aggregate("complex", complex_cases));
  report.aggregates.push_back(aggregate("all", all));
  return report;
}

SuiteRun run_suite(const std::vector<BenchmarkCase>& cases, TemplateLibrary library,
                   MemoryStore store, const ToolRegistry& registry, PlannerInterface& planner,
                   const RunConfig& config, int epochs, const std::string& config_name) {
  if (cases.empty()) fail(Errc::empty_suite, "benchmark suite is empty");
  if (epochs < 1) fail(Errc::malformed, "epochs must be at least 1");

  SuiteRun run;
  run.library = std::move(library);
  run.store = std::move(store);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::vector<CaseResult> results;
    results.reserve(cases.size());
    for (const BenchmarkCase& bench_case : cases) {
      CaseResult row;
      row.case_id = bench_case.case_id;
      row.difficulty = bench_case.difficulty;

      SimEnvironment env = bench_case.environment;  // fresh clone per run
      try {
        TaskOutcome outcome =
            run_task(bench_case.goal, run.library, run.store, env, registry, planner, config);
        row.result = std::move(outcome.result);
        run.library = std::move(outcome.library);
        run.store = std::move(outcome.store);
      } catch (const Error& e) {
        // Recorded as a failed case, never thrown out of the suite.
        row.result.outcome = Outcome::terminal_failure;
        row.result.counters.interactions = 1;
        row.result.trace.trace_id = run.store.fresh_trace_id();
        row.result.trace.goal = bench_case.goal;
        row.result.trace.outcome = Outcome::terminal_failure;
        run.store = record_trace(std::move(run.store), row.result.trace);
      }
      row.success = case_success(row.result, bench_case.gold, registry);
      row.hits = compare_to_gold(row.result, bench_case.gold);
      results.push_back(std::move(row));
    }
    run.reports.push_back(compute_metrics(config_name, epoch, std::move(results)));
  }
  return run;
}

namespace {

Json aggregate_to_json(const AggregateRow& row) {
  return Json{{"difficulty", row.difficulty},
              {"cases", row.cases},
              {"tsr", row.tsr},
              {"fpa", row.fpa},
              {"ntc", row.ntc},
              {"ni", row.ni},
              {"inst_acc", row.inst_acc},
              {"tool_acc", row.tool_acc},
              {"arg_acc", row.arg_acc},
              {"overall", row.overall}};
}

Json case_to_json(const CaseResult& row) {
  return Json{{"case_id", row.case_id},
              {"difficulty", difficulty_name(row.difficulty)},
              {"outcome", row.result.outcome == Outcome::success ? "success" : "terminal_failure"},
              {"success", row.success},
              {"first_pass", row.result.first_pass},
              {"tool_calls", row.result.counters.tool_calls},
              {"planner_calls", row.result.counters.planner_calls},
              {"interactions", row.result.counters.interactions},
              {"adjustments", row.result.counters.adjustments},
              {"tool_hits", row.hits.tool_hits},
              {"arg_hits", row.hits.arg_hits},
              {"inst_hits", row.hits.inst_hits},
              {"aligned_steps", row.hits.aligned}};
}

std::string csv_number(double value) { return Json(value).dump(); }

}  // namespace

Json report_to_json(const SuiteReport& report) {
  Json aggregates = Json::array();
  for (const AggregateRow& row : report.aggregates) aggregates.push_back(aggregate_to_json(row));
  Json per_case = Json::array();
  for (const CaseResult& row : report.per_case) per_case.push_back(case_to_json(row));
  return Json{{"config", report.config_name},
              {"epoch", report.epoch},
              {"aggregates", aggregates},
              {"per_case", per_case}};
}

std::string emit_report(const SuiteReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return report_to_json(report).dump(2) + "\n";

  std::ostringstream out;
  out << "config,difficulty,tsr,fpa,ntc,ni,inst_acc,tool_acc,arg_acc,overall\n";
  for (const AggregateRow& row : report.aggregates) {
    out << report.config_name << ',' << row.difficulty << ',' << csv_number(row.tsr) << ','
        << csv_number(row.fpa) << ',' << csv_number(row.ntc) << ',' << csv_number(row.ni) << ','
        << csv_number(row.inst_acc) << ',' << csv_number(row.tool_acc) << ','
        << csv_number(row.arg_acc) << ',' << csv_number(row.overall) << '\n';
  }
  return out.str();
}

std::string emit_reports(const std::vector<SuiteReport>& reports, ReportFormat format) {
  if (format == ReportFormat::json) {
    Json out = Json::array();
    for (const SuiteReport& report : reports) out.push_back(report_to_json(report));
    return out.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "config,difficulty,tsr,fpa,ntc,ni,inst_acc,tool_acc,arg_acc,overall\n";
  for (const SuiteReport& report : reports) {
    for (const AggregateRow& row : report.aggregates) {
      out << report.config_name << ',' << row.difficulty << ',' << csv_number(row.tsr) << ','
          << csv_number(row.fpa) << ',' << csv_number(row.ntc) << ',' << csv_number(row.ni) << ','
          << csv_number(row.inst_acc) << ',' << csv_number(row.tool_acc) << ','
          << csv_number(row.arg_acc) << ',' << csv_number(row.overall) << '\n';
    }
  }
  return out.str();
}

}  // namespace knowflow
