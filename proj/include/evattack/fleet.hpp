#pragma once

#include "evattack/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace evattack {

struct EvSpec {
  int id = 0;
  int node = 1;
  double p_max = 6.6;     // kW
  double capacity = 19;   // kWh
  double soc_ini = 0.4;
  double soc_des = 0.8;
  double eta = 1.0;
};

/// Energy the battery must absorb over the horizon, in kWh.
double required_energy(const EvSpec& ev);

/// Target for sum_t c(t): energy delivered at full rate for one step is
/// eta * dt * p_max, so K = E_req / (eta * dt * p_max).
double required_sum(const EvSpec& ev, double dt);

/// EV population ordered by ascending node. Agent index i is the position in
/// this order; every per-agent quantity in the solver uses that index.
class Fleet {
 public:
  Fleet() = default;
  Fleet(std::vector<EvSpec> evs, double dt, int horizon);

  const std::vector<EvSpec>& evs() const { return evs_; }
  const EvSpec& operator[](int i) const { return evs_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(evs_.size()); }
  double dt() const { return dt_; }
  int horizon() const { return horizon_; }

  std::vector<double> p_max() const;
  /// Per-agent K_i. Throws InfeasibleTarget when an EV cannot finish in the horizon.
  std::vector<double> required_sums() const;

 private:
  std::vector<EvSpec> evs_;
  double dt_ = 0.25;
  int horizon_ = 0;
};

/// Euclidean projection onto {z in [0,1]^T : sum z = target}.
std::vector<double> project_feasible(std::span<const double> c, double target);
void project_feasible_inplace(std::span<double> c, double target);

/// project_feasible((1/tau) * project_feasible(tau * x, K), K).
std::vector<double> shrink_project(std::span<const double> x, double tau, double target);
void shrink_project_inplace(std::span<double> x, double tau, double target);

std::vector<EvSpec> load_fleet(const std::filesystem::path& path);
void save_fleet(const std::vector<EvSpec>& evs, const std::filesystem::path& path);

}  // namespace evattack
