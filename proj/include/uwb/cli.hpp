#pragma once

#include <string>
#include <vector>

namespace uwb::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every subcommand. Configuration trouble (bad JSON, bad
// override, refused preconditions) is distinct from a run that started but
// collapsed, which still leaves partial outputs behind.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCollapse = 3;

// Log level comes from UWB_DYNROLES_LOG (error, info, debug); default error.
void log_info(const std::string& message);
void log_debug(const std::string& message);

struct RunArgs {
  std::string scenario_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  bool events = true;
  bool dump_costs = false;
};

// Runs one scenario and writes metrics.csv, roles.csv, report.json and (with
// events enabled) events.ndjson into out_dir. Outputs are written via a
// temporary file plus rename, so a failed run never leaves a truncated file.
int cmd_run(const RunArgs& args);

struct CompareArgs {
  std::vector<std::string> run_dirs;
  std::string segment = "all";  // all | switch | hull_exit
  double switch_half_width = 2.0;
  std::string out_path = "compare.csv";
};

// Puts the runs' focus-node error statistics side by side, one column per run
// directory. Refuses directories whose scenarios differ in node geometry or
// dimension. Switch windows are pooled across the runs, so a constant-role
// run is measured over the same time spans as the run that actually switched.
int cmd_compare(const CompareArgs& args);

struct SweepArgs {
  std::string scenario_path;
  std::string param;
  std::vector<double> values;
  int seeds = 1;
  int jobs = 0;  // 0 picks the hardware concurrency
  std::vector<std::string> overrides;
  std::string out_path = "sweep.csv";
};

// Runs the value x seed cross product in a bounded worker pool and aggregates
// the focus node's errors per value into sweep.csv.
int cmd_sweep(const SweepArgs& args);

}  // namespace uwb::cli
