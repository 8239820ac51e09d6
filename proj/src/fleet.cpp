#include "evattack/fleet.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace evattack {

namespace {

constexpr double kSumTolerance = 1e-10;
constexpr int kMaxBisections = 200;

double clipped_sum(std::span<const double> c, double mu) {
  double sum = 0.0;
  for (double v : c) sum += std::clamp(v + mu, 0.0, 1.0);
  return sum;
}

}  // namespace

double required_energy(const EvSpec& ev) { return ev.capacity * (ev.soc_des - ev.soc_ini); }

double required_sum(const EvSpec& ev, double dt) {
  return required_energy(ev) / (ev.eta * dt * ev.p_max);
}

Fleet::Fleet(std::vector<EvSpec> evs, double dt, int horizon)
    : evs_(std::move(evs)), dt_(dt), horizon_(horizon) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "dt must be positive");
  if (horizon <= 0) throw Error(ErrorCode::InvalidConfig, "horizon must be positive");
  for (std::size_t i = 0; i < evs_.size(); ++i) {
    const auto& ev = evs_[i];
    const auto who = "EV " + std::to_string(ev.id);
    if (!(ev.p_max > 0.0)) throw Error(ErrorCode::InvalidConfig, who + ": p_max must be positive");
    if (!(ev.capacity > 0.0)) throw Error(ErrorCode::InvalidConfig, who + ": capacity must be positive");
    if (!(ev.eta > 0.0 && ev.eta <= 1.0)) throw Error(ErrorCode::InvalidConfig, who + ": eta outside (0,1]");
    if (ev.soc_ini < 0.0 || ev.soc_des > 1.0 || ev.soc_des < ev.soc_ini)
      throw Error(ErrorCode::InvalidConfig, who + ": need 0 <= soc_ini <= soc_des <= 1");
    if (i > 0 && ev.node < evs_[i - 1].node)
      throw Error(ErrorCode::InvalidConfig, who + ": fleet must be ordered by ascending node");
  }
}

std::vector<double> Fleet::p_max() const {
  std::vector<double> out;
  out.reserve(evs_.size());
  for (const auto& ev : evs_) out.push_back(ev.p_max);
  return out;
}

std::vector<double> Fleet::required_sums() const {
  std::vector<double> out;
  out.reserve(evs_.size());
  for (const auto& ev : evs_) {
    const double k = required_sum(ev, dt_);
    if (k < 0.0 || k > horizon_) {
      throw Error(ErrorCode::InfeasibleTarget, "EV " + std::to_string(ev.id) + " needs " +
                                                   std::to_string(k) + " full-rate steps, horizon is " +
                                                   std::to_string(horizon_));
    }
    out.push_back(k);
  }
  return out;
}

void project_feasible_inplace(std::span<double> c, double target) {
  const auto horizon = static_cast<double>(c.size());
  if (!(target >= 0.0 && target <= horizon))
    throw Error(ErrorCode::InfeasibleTarget, "target sum " + std::to_string(target) + " outside [0, " +
                                                 std::to_string(c.size()) + "]");
  if (c.empty()) return;

  const auto [lo_it, hi_it] = std::minmax_element(c.begin(), c.end());
  double lo = -1.0 - *hi_it;
  double hi = 1.0 - *lo_it;
  double mu = 0.5 * (lo + hi);
  if (std::abs(clipped_sum(c, lo) - target) <= kSumTolerance) {
    mu = lo;
  } else if (std::abs(clipped_sum(c, hi) - target) <= kSumTolerance) {
    mu = hi;
  } else {
    for (int it = 0; it < kMaxBisections; ++it) {
      mu = 0.5 * (lo + hi);
      const double gap = clipped_sum(c, mu) - target;
      if (std::abs(gap) <= kSumTolerance) break;
      (gap < 0.0 ? lo : hi) = mu;
    }
  }

  // With the active set known, the multiplier has a closed form; use it when
  // it reproduces the same active set so the sum is met to rounding.
  int free = 0;
  int ones = 0;
  double free_sum = 0.0;
  for (double v : c) {
    const double z = v + mu;
    if (z >= 1.0) {
      ++ones;
    } else if (z > 0.0) {
      ++free;
      free_sum += v;
    }
  }
  if (free > 0) {
    const double exact = (target - ones - free_sum) / free;
    bool consistent = true;
    for (double v : c) {
      const double z_old = v + mu;
      const double z_new = v + exact;
      const bool was_free = z_old > 0.0 && z_old < 1.0;
      if (was_free != (z_new > 0.0 && z_new < 1.0) || (z_old >= 1.0) != (z_new >= 1.0)) {
        consistent = false;
        break;
      }
    }
    if (consistent) mu = exact;
  }
  for (double& v : c) v = std::clamp(v + mu, 0.0, 1.0);
}

std::vector<double> project_feasible(std::span<const double> c, double target) {
  std::vector<double> z(c.begin(), c.end());
  project_feasible_inplace(z, target);
  return z;
}

void shrink_project_inplace(std::span<double> x, double tau, double target) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidConfig, "shrink factor outside (0,1]");
  for (double& v : x) v *= tau;
  project_feasible_inplace(x, target);
  for (double& v : x) v /= tau;
  project_feasible_inplace(x, target);
}

std::vector<double> shrink_project(std::span<const double> x, double tau, double target) {
  std::vector<double> z(x.begin(), x.end());
  shrink_project_inplace(z, tau, target);
  return z;
}

std::vector<EvSpec> load_fleet(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open fleet file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  std::vector<EvSpec> evs;
  int next_id = 0;
  for (const auto& e : j) {
    EvSpec ev;
    ev.id = e.value("id", next_id);
    ev.node = e.at("node").get<int>();
    ev.p_max = e.value("p_max", ev.p_max);
    ev.capacity = e.at("capacity").get<double>();
    ev.soc_ini = e.at("soc_ini").get<double>();
    ev.soc_des = e.at("soc_des").get<double>();
    ev.eta = e.value("eta", 1.0);
    evs.push_back(ev);
    next_id = ev.id + 1;
  }
  return evs;
}

void save_fleet(const std::vector<EvSpec>& evs, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& ev : evs) {
    j.push_back({{"id", ev.id},
                 {"node", ev.node},
                 {"p_max", ev.p_max},
                 {"capacity", ev.capacity},
                 {"soc_ini", ev.soc_ini},
                 {"soc_des", ev.soc_des},
                 {"eta", ev.eta}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace evattack
