#include "uwb/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "uwb/allocation.hpp"
#include "uwb/scenario_io.hpp"
#include "uwb/sim.hpp"

namespace uwb::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("UWB_DYNROLES_LOG");
    if (env == nullptr) return LogLevel::Error;
    const std::string text(env);
    if (text == "debug") return LogLevel::Debug;
    if (text == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

void emit_log(const char* tag, const std::string& message) {
  std::lock_guard<std::mutex> lock(log_mutex());
  std::cerr << "[" << tag << "] " << message << "\n";
}

// Writes through a sibling temp file and renames, so readers never observe a
// half-written artifact and a crash leaves no truncated file under the final
// name.
void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json box_json(const BoxStats& box) {
  json j = {{"count", box.count}, {"median", box.median}, {"q1", box.q1}, {"q3", box.q3},
            {"outliers", box.outliers.size()}};
  j["whisker_low"] = box.whisker_low ? json(*box.whisker_low) : json();
  j["whisker_high"] = box.whisker_high ? json(*box.whisker_high) : json();
  return j;
}

json summary_json(const std::optional<SegmentSummary>& summary) {
  if (!summary) return json();
  return {{"count", summary->count},
          {"raw_error", box_json(summary->raw_error)},
          {"tracking_error", box_json(summary->tracking_error)}};
}

std::string roles_csv(const RunResult& result, int node_count) {
  std::ostringstream out;
  out << "epoch,node,role\n";
  for (const RoleAssignment& assignment : result.roles) {
    for (int node = 0; node < node_count; ++node) {
      out << assignment.epoch << "," << node << "," << to_string(role_of(assignment, node))
          << "\n";
    }
  }
  return out.str();
}

std::string costs_json_text(const std::vector<CostReport>& reports) {
  std::ostringstream out;
  out << "[\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    write_json(reports[i], out);
    if (i + 1 < reports.size()) out << ",";
    out << "\n";
  }
  out << "]\n";
  return out.str();
}

json report_json(const Scenario& sc, const RunResult& result, double wall_seconds) {
  const NodeId focus = resolve_focus(sc);
  const TimeWindows windows = switch_windows(result.records, focus, 2.0);
  json node_stats = json::array();
  for (std::size_t i = 0; i < result.node_stats.size(); ++i) {
    node_stats.push_back({{"node", i},
                          {"estimate_updates", result.node_stats[i].estimate_updates},
                          {"tdoa_measurements", result.node_stats[i].tdoa_measurements}});
  }
  return {
      {"software", "uwb-dynroles"},
      {"version", kVersion},
      {"seed", sc.seed},
      {"focus", focus},
      {"wall_clock_seconds", wall_seconds},
      {"collapsed", result.collapsed},
      {"collapse_reason", result.collapse_reason},
      {"counters",
       {{"completed_cycles", result.completed_cycles},
        {"failed_exchanges", result.failed_exchanges},
        {"role_changes", result.role_changes},
        {"epochs", result.roles.size()},
        {"metrics_rows", result.records.size()},
        {"init_end", result.init_end},
        {"end_time", result.end_time}}},
      {"node_stats", node_stats},
      {"summary",
       {{"all", summary_json(summarize(result.records, focus, Segment::All))},
        {"hull_exit", summary_json(summarize(result.records, focus, Segment::HullExit))},
        {"switch", summary_json(summarize(result.records, focus, Segment::Switch, &windows))}}},
      {"config", json::parse(scenario_to_json(sc))},
  };
}

struct LoadedRun {
  std::string dir;
  std::string label;
  json report;
  std::vector<MetricsRecord> records;
  NodeId focus = 0;
};

LoadedRun load_run_dir(const std::string& dir) {
  LoadedRun run;
  run.dir = dir;
  const fs::path metrics_path = fs::path(dir) / "metrics.csv";
  const fs::path report_path = fs::path(dir) / "report.json";
  std::ifstream metrics(metrics_path);
  if (!metrics) throw ConfigError(dir + ": missing metrics.csv");
  run.records = read_metrics_csv(metrics);
  std::ifstream report(report_path);
  if (!report) throw ConfigError(dir + ": missing report.json");
  try {
    run.report = json::parse(report);
  } catch (const json::parse_error&) {
    throw ConfigError(dir + ": unreadable report.json");
  }
  run.label = run.report.value("/config/mode"_json_pointer, std::string("run"));
  run.focus = run.report.value("focus", 0);
  return run;
}

std::string format_number(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6f", v);
  return buffer;
}

}  // namespace

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::Info) emit_log("info", message);
}

void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::Debug) emit_log("debug", message);
}

int cmd_run(const RunArgs& args) {
  const auto wall_start = std::chrono::steady_clock::now();
  Scenario sc;
  try {
    sc = load_scenario(args.scenario_path, args.overrides);
    if (args.dump_costs) sc.record_cost_reports = true;
    validate(sc);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  log_info("running '" + sc.name + "' (seed " + std::to_string(sc.seed) + ")");

  RunResult result;
  try {
    result = run_scenario(sc);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  const double wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  try {
    fs::create_directories(args.out_dir);
    std::ostringstream metrics;
    write_metrics_csv(result.records, metrics);
    atomic_write(fs::path(args.out_dir) / "metrics.csv", metrics.str());
    atomic_write(fs::path(args.out_dir) / "roles.csv",
                 roles_csv(result, static_cast<int>(sc.nodes.size())));
    if (args.events) {
      std::ostringstream events;
      result.events.write_ndjson(events);
      atomic_write(fs::path(args.out_dir) / "events.ndjson", events.str());
    }
    if (sc.record_cost_reports) {
      atomic_write(fs::path(args.out_dir) / "costs.json", costs_json_text(result.cost_reports));
    }
    atomic_write(fs::path(args.out_dir) / "report.json",
                 report_json(sc, result, wall_seconds).dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  log_info("wrote " + args.out_dir + " in " + format_number(wall_seconds) + " s");
  if (result.collapsed) {
    std::cerr << "collapse: " << result.collapse_reason << "\n";
    return kExitCollapse;
  }
  return kExitOk;
}

int cmd_compare(const CompareArgs& args) {
  if (args.run_dirs.size() < 2) {
    std::cerr << "error: compare needs at least two run directories\n";
    return kExitConfig;
  }
  Segment segment;
  if (args.segment == "all") segment = Segment::All;
  else if (args.segment == "switch") segment = Segment::Switch;
  else if (args.segment == "hull_exit") segment = Segment::HullExit;
  else {
    std::cerr << "error: unknown segment '" << args.segment << "'\n";
    return kExitConfig;
  }

  std::vector<LoadedRun> runs;
  try {
    for (const std::string& dir : args.run_dirs) runs.push_back(load_run_dir(dir));
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const json& reference = runs.front().report;
  for (const LoadedRun& run : runs) {
    if (run.report.value("/config/nodes"_json_pointer, json()) !=
            reference.value("/config/nodes"_json_pointer, json()) ||
        run.report.value("/config/dimension"_json_pointer, json()) !=
            reference.value("/config/dimension"_json_pointer, json())) {
      std::cerr << "error: scenario geometry differs between " << runs.front().dir << " and "
                << run.dir << "\n";
      return kExitConfig;
    }
  }

  // Pool the switch windows so every run is measured over the same spans.
  TimeWindows windows;
  for (const LoadedRun& run : runs) {
    const TimeWindows own = switch_windows(run.records, run.focus, args.switch_half_width);
    windows.intervals.insert(windows.intervals.end(), own.intervals.begin(),
                             own.intervals.end());
  }
  std::sort(windows.intervals.begin(), windows.intervals.end());

  std::vector<std::optional<SegmentSummary>> summaries;
  std::vector<std::string> labels;
  for (const LoadedRun& run : runs) {
    summaries.push_back(summarize(run.records, run.focus, segment, &windows));
    std::string label = run.label;
    int duplicate = 1;
    while (std::find(labels.begin(), labels.end(), label) != labels.end()) {
      label = run.label + "#" + std::to_string(++duplicate);
    }
    labels.push_back(label);
  }

  struct Row {
    const char* name;
    std::function<double(const SegmentSummary&)> get;
  };
  const std::vector<Row> rows = {
      {"count", [](const SegmentSummary& s) { return static_cast<double>(s.count); }},
      {"raw_error_median", [](const SegmentSummary& s) { return s.raw_error.median; }},
      {"raw_error_q1", [](const SegmentSummary& s) { return s.raw_error.q1; }},
      {"raw_error_q3", [](const SegmentSummary& s) { return s.raw_error.q3; }},
      {"tracking_error_median",
       [](const SegmentSummary& s) { return s.tracking_error.median; }},
      {"tracking_error_q1", [](const SegmentSummary& s) { return s.tracking_error.q1; }},
      {"tracking_error_q3", [](const SegmentSummary& s) { return s.tracking_error.q3; }},
  };

  std::ostringstream csv;
  csv << "stat";
  for (const std::string& label : labels) csv << "," << label;
  csv << "\n";
  std::cout << std::left << std::setw(24) << ("segment=" + args.segment);
  for (const std::string& label : labels) std::cout << std::right << std::setw(16) << label;
  std::cout << "\n";
  for (const Row& row : rows) {
    csv << row.name;
    std::cout << std::left << std::setw(24) << row.name;
    for (const auto& summary : summaries) {
      const double value =
          summary ? row.get(*summary) : std::numeric_limits<double>::quiet_NaN();
      csv << "," << format_number(value);
      std::cout << std::right << std::setw(16) << format_number(value);
    }
    csv << "\n";
    std::cout << "\n";
  }

  try {
    atomic_write(args.out_path, csv.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_sweep(const SweepArgs& args) {
  if (args.values.empty()) {
    std::cerr << "error: refused, the value list is empty\n";
    return kExitConfig;
  }
  if (args.seeds < 1) {
    std::cerr << "error: refused, need at least one seed\n";
    return kExitConfig;
  }

  std::string text;
  {
    std::ifstream in(args.scenario_path);
    if (!in) {
      std::cerr << "error: cannot open scenario file: " << args.scenario_path << "\n";
      return kExitConfig;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    text = buffer.str();
  }

  // The parameter must name a numeric field of the fully serialized scenario;
  // string and boolean fields are refused before any run starts.
  try {
    const Scenario base = parse_scenario_text(text, args.overrides);
    const json full = json::parse(scenario_to_json(base));
    std::string pointer_text = "/" + args.param;
    for (char& c : pointer_text) {
      if (c == '.') c = '/';
    }
    std::string normalized;
    for (char c : pointer_text) {
      if (c == '[') normalized += '/';
      else if (c == ']') continue;
      else normalized += c;
    }
    const json slot = full.value(json::json_pointer(normalized), json());
    if (!slot.is_number()) {
      std::cerr << "error: refused, --param must name a numeric scenario field\n";
      return kExitConfig;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  struct Cell {
    std::size_t value_index;
    int seed;
  };
  std::vector<Cell> cells;
  for (std::size_t v = 0; v < args.values.size(); ++v) {
    for (int s = 1; s <= args.seeds; ++s) cells.push_back({v, s});
  }

  struct CellResult {
    bool collapsed = false;
    std::string error;
    std::vector<double> raw, tracking;
  };
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      CellResult& cell = results[i];
      try {
        char value_text[64];
        std::snprintf(value_text, sizeof(value_text), "%.17g", args.values[cells[i].value_index]);
        std::vector<std::string> overrides = args.overrides;
        overrides.push_back(args.param + "=" + value_text);
        overrides.push_back("seed=" + std::to_string(cells[i].seed));
        const Scenario sc = parse_scenario_text(text, overrides);
        const RunResult result = run_scenario(sc);
        cell.collapsed = result.collapsed;
        const NodeId focus = resolve_focus(sc);
        for (const MetricsRecord& r : result.records) {
          if (r.node != focus) continue;
          cell.raw.push_back(r.raw_error);
          cell.tracking.push_back(r.tracking_error);
        }
        log_debug("sweep cell " + std::to_string(i) + " done");
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int jobs = std::max(1, std::min<int>(static_cast<int>(cells.size()),
                                             args.jobs > 0 ? args.jobs : std::max(1, hw)));
  log_info("sweep: " + std::to_string(cells.size()) + " cells on " + std::to_string(jobs) +
           " workers");
  std::vector<std::thread> pool;
  for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
  for (std::thread& thread : pool) thread.join();

  for (const CellResult& cell : results) {
    if (!cell.error.empty()) {
      std::cerr << "error: " << cell.error << "\n";
      return kExitConfig;
    }
  }

  std::ostringstream csv;
  csv << "param,value,seeds,collapsed,raw_error_median,raw_error_q1,raw_error_q3,"
         "tracking_error_median,tracking_error_q1,tracking_error_q3\n";
  for (std::size_t v = 0; v < args.values.size(); ++v) {
    std::vector<double> raw, tracking;
    int collapsed = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].value_index != v) continue;
      raw.insert(raw.end(), results[i].raw.begin(), results[i].raw.end());
      tracking.insert(tracking.end(), results[i].tracking.begin(), results[i].tracking.end());
      collapsed += results[i].collapsed ? 1 : 0;
    }
    const BoxStats raw_stats = box_stats(std::move(raw));
    const BoxStats tracking_stats = box_stats(std::move(tracking));
    char value_text[64];
    std::snprintf(value_text, sizeof(value_text), "%.10g", args.values[v]);
    csv << args.param << "," << value_text << "," << args.seeds << "," << collapsed << ","
        << format_number(raw_stats.median) << "," << format_number(raw_stats.q1) << ","
        << format_number(raw_stats.q3) << "," << format_number(tracking_stats.median) << ","
        << format_number(tracking_stats.q1) << "," << format_number(tracking_stats.q3) << "\n";
  }
  std::cout << csv.str();
  try {
    atomic_write(args.out_path, csv.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace uwb::cli
