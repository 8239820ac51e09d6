#include "evattack/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace evattack;

std::optional<ScenarioConfig> load_or_report(const std::string& path) {
  try {
    return load_scenario(path);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return std::nullopt;
  }
}

int do_validate(const std::string& path) {
  const auto config = load_or_report(path);
  if (!config) return kExitInvalid;
  const auto report = validate(*config);
  for (const auto& d : report.diagnostics) std::cerr << "error[" << d.code << "]: " << d.message << '\n';
  if (!report.ok()) return kExitInvalid;
  std::cout << config->name << ": valid\n";
  return kExitOk;
}

// Baseline parameters come from the scenario's `baseline.synthetic` block;
// bus count from its feeder and the horizon from its `horizon` block.
int do_gen_baseline(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed) {
  const auto config = load_or_report(path);
  if (!config) return kExitInvalid;
  if (!config->baseline_generator) {
    std::cerr << "error[InvalidConfig]: config has no baseline.synthetic block\n";
    return kExitInvalid;
  }
  BaselineParams params = *config->baseline_generator;
  if (seed) params.seed = *seed;
  int buses = 0;
  try {
    buses = load_feeder(config->resolve(config->feeder)).n;
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitInvalid;
  }
  std::filesystem::path target = out;
  if (target.extension() != ".csv") target /= "baseline.csv";
  const int code = gen_baseline_command(params, buses, config->horizon, config->dt, target);
  if (code == kExitOk) std::cout << "wrote " << target.string() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized EV charging simulator with for-purpose attacks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int workers = 0;
  bool trace = false;
  std::optional<std::uint64_t> seed;

  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario config and list every violation");
  validate_cmd->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);

  auto* run_cmd = app.add_subcommand("run", "Run one scenario and write its report and traces");
  run_cmd->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_dir, "Output directory (defaults to the config's output.dir)");
  run_cmd->add_option("--workers", workers, "Engine worker threads (defaults to the config's workers)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_flag("--trace", trace, "Append per-iteration trace rows to trace.csv");

  auto* compare_cmd = app.add_subcommand("compare", "Run the attack-free twin and every attack variant");
  compare_cmd->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--out", out_dir, "Output directory (defaults to the config's output.dir)");
  compare_cmd->add_option("--workers", workers, "Engine worker threads")->check(CLI::PositiveNumber);

  auto* gen_cmd = app.add_subcommand("gen-baseline", "Write the synthetic baseline CSV of a scenario");
  gen_cmd->add_option("--config", config_path, "Scenario JSON with a baseline.synthetic block")
      ->required()
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", out_dir, "Output CSV file or directory")->required();
  gen_cmd->add_option("--seed", seed, "Override the generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  if (*validate_cmd) return do_validate(config_path);
  if (*gen_cmd) return do_gen_baseline(config_path, out_dir, seed);

  const auto config = load_or_report(config_path);
  if (!config) return kExitInvalid;
  const std::filesystem::path out = out_dir.empty() ? config->resolve(config->output_dir) : std::filesystem::path(out_dir);
  if (*run_cmd) return run_command(*config, out, workers, trace);
  return compare_command(*config, out, workers);
}
