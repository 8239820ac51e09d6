#pragma once

#include "evattack/attacks.hpp"
#include "evattack/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evattack {

struct AttackerRecord {
  int agent = 0;
  AttackVariant variant = AttackVariant::None;
  int trigger_iteration = -1;  // stealthy variants only
};

struct RunReport {
  std::string scenario;
  bool converged = false;
  std::string criterion;
  int iterations = 0;
  RowMatrix profiles;      // s x T
  Vector baseline_load;    // kW
  Vector total_load;       // kW
  RowMatrix voltages;      // n x T, p.u. magnitudes
  double objective = 0.0;
  double min_voltage = 0.0;
  double max_energy_error = 0.0;  // kWh, worst |delivered - required|
  std::vector<double> residuals;
  std::vector<double> objectives;
  std::vector<AttackerRecord> attackers;
  std::vector<WiretapAccess> wiretap_log;
  std::optional<BoundAudit> bound;
  nlohmann::ordered_json config;  // echo of the scenario that produced the run
};

/// P_b(t) + sum_i p_max_i c_i(t).
Vector total_load(const RowMatrix& profiles, const Vector& P_b, std::span<const double> p_max);

struct Flatness {
  double max_minus_min = 0.0;  // kW
  double rel_std = 0.0;        // population std / mean
};

/// Statistics of load[begin, end).
Flatness flatness(const Vector& load, int begin, int end);

/// First step where the aggregate EV load exceeds 1% of the fleet's charging
/// capacity; the window runs from there to the end of the horizon. Throws
/// EmptyWindow when the fleet never charges.
std::pair<int, int> flat_window(const RowMatrix& profiles, std::span<const double> p_max);

RunReport make_report(const Problem& problem, const RunResult& result,
                      std::span<const std::unique_ptr<PrimalHook>> hooks = {});

/// zeta = ||C_a - C_b||_F.
double stealthiness(const RunReport& attacked, const RunReport& attack_free);

struct ComparisonReport {
  std::vector<double> load_deviation;      // kW, attacked - attack-free, per step
  std::vector<double> load_deviation_pct;  // relative to attack-free load
  std::vector<double> voltage_deviation;   // p.u., per bus max |delta|
  double mean_abs_load_deviation = 0.0;
  double max_voltage_deviation = 0.0;
  double objective_delta = 0.0;
  double objective_delta_pct = 0.0;
  double zeta = 0.0;
  std::optional<BoundAudit> bound;
};

/// Paired-run statistics; `reference` (when given) is the optimum C* used for
/// the deviation-bound audit, otherwise the attack-free profiles are used.
ComparisonReport compare(const Problem& problem, const RunReport& attacked, const RunReport& attack_free,
                         std::span<const AttackSpec> specs, const RowMatrix* reference = nullptr);

nlohmann::ordered_json to_json(const RunReport& report);
nlohmann::ordered_json to_json(const ComparisonReport& comparison);
nlohmann::ordered_json to_json(const BoundAudit& audit);

/// load.csv, voltage.csv, profiles.csv, residuals.csv under `dir`.
void write_traces(const RunReport& report, const std::filesystem::path& dir);

}  // namespace evattack
