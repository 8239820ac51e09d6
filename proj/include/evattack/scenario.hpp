#pragma once

#include "evattack/attacks.hpp"
#include "evattack/engine.hpp"
#include "evattack/feeder.hpp"
#include "evattack/fleet.hpp"
#include "evattack/metrics.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace evattack {

/// Uniform draws in [0, 1) from mt19937_64 using the top 53 bits, so any
/// language with a standard MT19937-64 reproduces generated fleets exactly.
class PinnedRng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit PinnedRng(std::uint64_t seed);
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

struct FleetGenerator {
  std::string rng{PinnedRng::kAlgorithm};
  std::uint64_t seed = 1;
  std::vector<int> counts;  // EVs per bus, index 0 is bus 1
  double p_max = 6.6;
  std::array<double, 2> capacity{18.0, 20.0};
  std::array<double, 2> soc_ini{0.3, 0.5};
  std::array<double, 2> soc_des{0.7, 0.9};
  double eta = 0.95;
};

/// Valley-shaped synthetic baseline: evening peak at the start of the
/// horizon, cosine descent to the overnight valley, rise to the morning level.
struct BaselineParams {
  double peak_kw = 300.0;
  double valley_kw = 150.0;
  double morning_kw = 190.0;
  double start_hour = 19.0;
  double valley_hour = 3.5;
  double scale = 1.0;
  double reactive_ratio = 0.3;  // q = ratio * p
  double weight_jitter = 0.2;   // per-bus share spread
  double noise = 0.0;           // multiplicative per-bus per-step noise amplitude
  std::uint64_t seed = 1;
  std::vector<double> bus_weights;  // optional, index 0 is bus 1
};

std::vector<EvSpec> generate_fleet(const FleetGenerator& gen, int buses);
BaselineLoad generate_baseline(const BaselineParams& params, int buses, int horizon, double dt);

struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::filesystem::path feeder;
  std::optional<std::filesystem::path> fleet_file;
  std::optional<FleetGenerator> fleet_generator;
  std::optional<std::filesystem::path> baseline_file;
  std::optional<BaselineParams> baseline_generator;
  int horizon = 52;
  double dt = 0.25;
  SolverConfig solver;
  std::vector<AttackSpec> attacks;
  std::filesystem::path output_dir = "out";
  bool trace = false;
  int workers = 1;
  nlohmann::ordered_json raw;  // the document as read, echoed into reports

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

ScenarioConfig parse_scenario(const nlohmann::ordered_json& doc, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Same scenario with every attack removed; the JSON echo differs only in the
/// `attacks` section.
ScenarioConfig attack_free_twin(const ScenarioConfig& config);
/// Same scenario keeping only attacks[index].
ScenarioConfig single_attack(const ScenarioConfig& config, std::size_t index);

struct Diagnostic {
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return diagnostics.empty(); }
};

ValidationReport validate(const ScenarioConfig& config);

struct Scenario {
  FeederModel feeder;
  Fleet fleet;
  BaselineLoad baseline;
  Problem problem;
};

/// Loads or generates every input. Throws the first error encountered.
Scenario build_scenario(const ScenarioConfig& config);

struct RunArtifacts {
  Scenario scenario;
  RunReport report;
};

/// Engine run with the configured attacks; `workers` < 1 uses the config's count.
RunArtifacts execute(const ScenarioConfig& config, int workers = 0, const std::filesystem::path& trace_file = {});

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInvalid = 2, kExitDivergence = 3 };

int run_command(const ScenarioConfig& config, const std::filesystem::path& out_dir, int workers, bool trace);
int compare_command(const ScenarioConfig& config, const std::filesystem::path& out_dir, int workers);
int gen_baseline_command(const BaselineParams& params, int buses, int horizon, double dt,
                         const std::filesystem::path& out_file);

}  // namespace evattack
