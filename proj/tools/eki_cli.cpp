#include "eki/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

eki::ExperimentConfig resolve(const std::string& source) {
  if (eki::is_preset(source)) return eki::preset(source);
  return eki::load_config(source);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time ensemble Kalman inversion with data subsampling"};
  app.set_version_flag("--version", eki::version_string());
  app.require_subcommand(1);

  std::string source;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> out_dir;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run a campaign from a config file or preset name");
  run->add_option("config", source, "JSON config path or preset name")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--runs", runs, "Override the number of runs");
  run->add_option("--out", out_dir, "Override the output directory");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string agg_dir;
  auto* agg = app.add_subcommand("aggregate", "Rebuild aggregate.csv from run files");
  agg->add_option("dir", agg_dir, "Campaign directory")->required();

  auto* list = app.add_subcommand("list-presets", "Print the preset names");

  std::string check_source;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", check_source, "JSON config path or preset name")->required();

  std::string show_name;
  auto* show = app.add_subcommand("show-preset", "Print a preset as JSON");
  show->add_option("name", show_name, "Preset name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& n : eki::list_presets()) std::cout << n << '\n';
      return 0;
    }
    if (*show) {
      std::cout << eki::to_json(eki::preset(show_name)).dump(2) << '\n';
      return 0;
    }
    if (*validate) {
      const auto cfg = resolve(check_source);
      cfg.validate();
      std::cout << "ok: " << cfg.name << '\n';
      return 0;
    }
  } catch (const eki::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  if (*agg) {
    try {
      const auto a = eki::aggregate(agg_dir);
      std::cout << "aggregated " << a.n_runs << " runs into " << agg_dir << "/aggregate.csv\n";
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kRuntimeError;
    }
  }

  eki::ExperimentConfig cfg;
  try {
    cfg = resolve(source);
    if (seed) cfg.master_seed = *seed;
    if (runs) cfg.n_runs = *runs;
    if (out_dir) cfg.output_dir = *out_dir;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    eki::RunOptions opts;
    opts.jobs = jobs;
    const auto result = eki::run_experiment(cfg, opts);
    int failed = 0;
    for (const auto& r : result.runs) {
      if (!r.ok) {
        ++failed;
        std::cerr << "run " << r.run + 1 << " failed: " << r.error << '\n';
      }
    }
    std::cout << cfg.name << ": " << cfg.n_runs - failed << "/" << cfg.n_runs << " runs ok, output in "
              << result.dir.string() << '\n';
    return failed == 0 ? 0 : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
