#pragma once
// Benchmark harness: suites of (goal, gold workflow) pairs, end-to-end
// metrics (TSR/FPA/NTC/NI) and step-wise metrics (InstAcc/ToolAcc/ArgAcc)
// computed by positional alignment against the gold call sequence.

#include "knowflow/executor.hpp"

#include <string>
#include <vector>

namespace knowflow {

enum class Difficulty { simple, complex_ };

const char* difficulty_name(Difficulty difficulty);

struct GoldStep {
  std::string tool_name;
  std::map<std::string, Json> args;

  friend bool operator==(const GoldStep&, const GoldStep&) = default;
};

struct BenchmarkCase {
  std::string case_id;
  TaskGoal goal;
  Difficulty difficulty = Difficulty::simple;
  std::vector<GoldStep> gold;
  Json environment_ref;        // as authored: a path string or an inline object
  SimEnvironment environment;  // resolved

  friend bool operator==(const BenchmarkCase& a, const BenchmarkCase& b) {
    return a.case_id == b.case_id && a.goal == b.goal && a.difficulty == b.difficulty &&
           a.gold == b.gold && a.environment_ref == b.environment_ref;
  }
};

struct StepHits {
  long tool_hits = 0;
  long arg_hits = 0;
  long inst_hits = 0;
  long aligned = 0;  // max(len(generated), len(gold))

  friend bool operator==(const StepHits&, const StepHits&) = default;
};

struct CaseResult {
  std::string case_id;
  Difficulty difficulty = Difficulty::simple;
  RunResult result;
  bool success = false;  // the TSR notion, stricter than result.outcome
  StepHits hits;
};

struct AggregateRow {
  std::string difficulty;  // "simple", "complex", or "all"
  long cases = 0;
  double tsr = 0.0;
  double fpa = 0.0;
  double ntc = 0.0;
  double ni = 0.0;
  double inst_acc = 0.0;
  double tool_acc = 0.0;
  double arg_acc = 0.0;
  double overall = 0.0;  // arithmetic mean of the three step metrics
};

struct SuiteReport {
  std::string config_name;
  int epoch = 1;
  std::vector<CaseResult> per_case;
  std::vector<AggregateRow> aggregates;
};

std::vector<BenchmarkCase> suite_from_json(const Json& value, const std::string& base_dir);
Json to_json(const std::vector<BenchmarkCase>& cases);
std::vector<BenchmarkCase> load_suite(const std::string& path);

// Positional alignment over the canonical topological order of the final dag,
// padded with gaps when lengths differ.
StepHits compare_to_gold(const RunResult& result, const std::vector<GoldStep>& gold);

// Task success for TSR: the run succeeded, the final world state covers the
// gold sequence's final effect set, and gold-specified numeric args match
// wherever the same tool ran.
bool case_success(const RunResult& result, const std::vector<GoldStep>& gold,
                  const ToolRegistry& registry);

SuiteReport compute_metrics(const std::string& config_name, int epoch,
                            std::vector<CaseResult> results);

struct SuiteRun {
  std::vector<SuiteReport> reports;  // one per epoch
  TemplateLibrary library;
  MemoryStore store;
};

// Runs cases in id order; with learning enabled, updates from case k are
// visible to case k+1 and to later epochs.
SuiteRun run_suite(const std::vector<BenchmarkCase>& cases, TemplateLibrary library,
                   MemoryStore store, const ToolRegistry& registry, PlannerInterface& planner,
                   const RunConfig& config, int epochs, const std::string& config_name);

enum class ReportFormat { json, csv };

Json report_to_json(const SuiteReport& report);
std::string emit_report(const SuiteReport& report, ReportFormat format);
std::string emit_reports(const std::vector<SuiteReport>& reports, ReportFormat format);

}  // namespace knowflow
