#include <cstdio>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "harness/experiment.hpp"
#include "knife/errors.hpp"

using namespace knife::harness;

namespace {

struct Flags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string modes;
  bool quiet = false;
  bool check = false;
  bool timing = false;
};

ExperimentConfig prepare(const Flags& f) {
  ExperimentConfig cfg = load_config(f.config);
  if (!f.seeds.empty()) cfg.seeds = f.seeds;
  if (!f.out.empty()) cfg.output = f.out;
  if (!f.modes.empty()) {
    cfg.modes.clear();
    std::stringstream ss(f.modes);
    std::string name;
    while (std::getline(ss, name, ',')) {
      try {
        cfg.modes.push_back(knife::parse_estimator_mode(name));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
    if (cfg.modes.empty()) throw ConfigError("--modes must name at least one estimator");
  }
  return cfg;
}

int finish_run(const ExperimentConfig& cfg, RunResult& result, const Flags& f) {
  if (f.check) apply_checks(cfg, result);
  write_outputs(cfg, result);
  if (!f.quiet)
    for (const std::string& m : result.check_messages) std::cerr << m << '\n';
  if (!result.check_passed && (f.check || cfg.id == "gradcheck")) return exit_check;
  return exit_ok;
}

void print_comparison(const ExperimentConfig& cfg, const RunResult& result) {
  const auto& series = result.summary["series"];
  std::cout << std::left << std::setw(40) << "series" << std::right << std::setw(12) << "median" << std::setw(12)
            << "mean" << std::setw(12) << "std" << std::setw(12) << "max" << '\n';
  for (const auto& [name, s] : series.items()) {
    if (!s.contains("final_abs_error")) continue;
    const auto& e = s["final_abs_error"];
    std::cout << std::left << std::setw(40) << name << std::right << std::fixed << std::setprecision(4)
              << std::setw(12) << e["median"].get<double>() << std::setw(12) << e["mean"].get<double>()
              << std::setw(12) << e["std"].get<double>() << std::setw(12) << e["max"].get<double>() << '\n';
  }
  std::cout << "(|estimate - oracle| at the final epoch over " << cfg.seeds.size() << " seeds)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KNIFE entropy and mutual-information experiments"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", f.config, "Experiment config (JSON)")->required();
    sub->add_option("--seed-override", f.seeds, "Replace the config's seed list")->delimiter(',');
    sub->add_option("--out", f.out, "Output directory (overrides the config)");
    sub->add_flag("--quiet", f.quiet, "No progress output");
    sub->add_flag("--check", f.check, "Apply the config's check thresholds; exit 4 on failure");
    sub->add_flag("--timing", f.timing, "Record wall-clock milliseconds in results.csv");
  };
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  add_common(run);
  CLI::App* compare = app.add_subcommand("compare", "Run several estimators on identical data and tabulate errors");
  add_common(compare);
  compare->add_option("--modes", f.modes, "Comma-separated estimators: knife,schraudolph,doe,parzen")->required();

  std::string csv_path, summary_out;
  CLI::App* summarize = app.add_subcommand("summarize", "Recompute summary statistics from a results.csv");
  summarize->add_option("results", csv_path, "results.csv")->required();
  summarize->add_option("--out", summary_out, "Write the summary here instead of stdout");

  CLI::App* list = app.add_subcommand("list", "Print the experiment ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (list->parsed()) {
      for (const auto& id : experiment_ids()) std::cout << id << '\n';
      return exit_ok;
    }
    if (summarize->parsed()) {
      const nlohmann::json s = {{"series", summarize_rows(read_results_csv(csv_path))}};
      if (summary_out.empty())
        std::cout << s.dump(2) << '\n';
      else
        write_json(summary_out, s);
      return exit_ok;
    }
    const ExperimentConfig cfg = prepare(f);
    RunResult result = run_experiment(cfg, RunOptions{f.quiet, f.timing});
    const int code = finish_run(cfg, result, f);
    if (compare->parsed()) print_comparison(cfg, result);
    return code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const OutputError& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return exit_output;
  } catch (const knife::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return exit_numeric;
  } catch (const knife::ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const knife::Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return exit_numeric;
  }
}
