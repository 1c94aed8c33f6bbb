#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uwb/cli.hpp"

namespace {

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    if (!item.empty()) {
      std::size_t parsed = 0;
      values.push_back(std::stod(item, &parsed));
      if (parsed != item.size()) throw std::invalid_argument(item);
    }
    pos = comma + 1;
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic active/passive role simulation for UWB relative localization"};
  app.set_version_flag("--version", std::string("uwb-dynroles ") + uwb::cli::kVersion);
  app.require_subcommand(1);
  int rc = 0;

  uwb::cli::RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Run one scenario and write its artifacts");
  run->add_option("--scenario", run_args.scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", run_args.out_dir, "Output directory");
  run->add_option("--set", run_args.overrides, "Override a scenario field, path=value");
  run->add_flag("--events,!--no-events", run_args.events, "Write events.ndjson");
  run->add_flag("--dump-costs", run_args.dump_costs, "Write per-epoch subset costs to costs.json");
  run->callback([&] { rc = uwb::cli::cmd_run(run_args); });

  uwb::cli::CompareArgs compare_args;
  CLI::App* compare =
      app.add_subcommand("compare", "Tabulate error statistics across completed runs");
  compare->add_option("dirs", compare_args.run_dirs, "Run directories")->expected(-2);
  compare->add_option("--segment", compare_args.segment, "all, switch or hull_exit");
  compare->add_option("--switch-half-width", compare_args.switch_half_width,
                      "Half-width of each switch window, seconds");
  compare->add_option("--out", compare_args.out_path, "Comparison CSV path");
  compare->callback([&] { rc = uwb::cli::cmd_compare(compare_args); });

  uwb::cli::SweepArgs sweep_args;
  std::string value_list;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a parameter x seed cross product");
  sweep->add_option("--scenario", sweep_args.scenario_path, "Scenario JSON file")->required();
  sweep->add_option("--param", sweep_args.param, "Numeric scenario field to vary")->required();
  sweep->add_option("--values", value_list, "Comma-separated values")->required();
  sweep->add_option("--seeds", sweep_args.seeds, "Seeds per value (1..N)");
  sweep->add_option("--jobs", sweep_args.jobs, "Worker threads (default: hardware)");
  sweep->add_option("--set", sweep_args.overrides, "Override a scenario field, path=value");
  sweep->add_option("--out", sweep_args.out_path, "Sweep CSV path");
  sweep->callback([&] {
    try {
      sweep_args.values = parse_value_list(value_list);
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: --values must be a comma-separated number list\n");
      rc = uwb::cli::kExitConfig;
      return;
    }
    rc = uwb::cli::cmd_sweep(sweep_args);
  });

  CLI11_PARSE(app, argc, argv);
  return rc;
}
