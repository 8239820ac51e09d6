#include "evattack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace evattack {

namespace {

nlohmann::ordered_json matrix_json(const RowMatrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  }
  return rows;
}

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

Vector total_load(const RowMatrix& profiles, const Vector& P_b, std::span<const double> p_max) {
  if (profiles.cols() != P_b.size() || static_cast<std::size_t>(profiles.rows()) != p_max.size())
    throw Error(ErrorCode::DimensionMismatch, "total_load operand sizes");
  Vector load = P_b;
  for (Eigen::Index i = 0; i < profiles.rows(); ++i) load += p_max[static_cast<std::size_t>(i)] * profiles.row(i).transpose();
  return load;
}

Flatness flatness(const Vector& load, int begin, int end) {
  if (begin < 0 || end > load.size() || begin >= end) throw Error(ErrorCode::EmptyWindow, "flatness window is empty");
  const auto window = load.segment(begin, end - begin);
  const double mean = window.mean();
  const double var = (window.array() - mean).square().mean();
  Flatness f;
  f.max_minus_min = window.maxCoeff() - window.minCoeff();
  f.rel_std = mean != 0.0 ? std::sqrt(var) / std::abs(mean) : 0.0;
  return f;
}

std::pair<int, int> flat_window(const RowMatrix& profiles, std::span<const double> p_max) {
  double capacity = 0.0;
  for (double p : p_max) capacity += p;
  const Vector ev_load = total_load(profiles, Vector::Zero(profiles.cols()), p_max);
  const int horizon = static_cast<int>(profiles.cols());
  for (int t = 0; t < horizon; ++t) {
    if (ev_load[t] > 0.01 * capacity) return {t, horizon};
  }
  throw Error(ErrorCode::EmptyWindow, "EV load never exceeds 1% of capacity");
}

RunReport make_report(const Problem& problem, const RunResult& result, std::span<const std::unique_ptr<PrimalHook>> hooks) {
  RunReport report;
  report.converged = result.converged;
  report.criterion = result.criterion;
  report.iterations = result.iterations;
  report.profiles = result.profiles;
  report.baseline_load = problem.P_b;
  report.total_load = total_load(result.profiles, problem.P_b, problem.p_max);
  const RowMatrix y = problem.y_d + problem.D * result.profiles;
  report.voltages = y.cwiseMax(0.0).cwiseSqrt();
  report.min_voltage = report.voltages.size() > 0 ? report.voltages.minCoeff() : 0.0;
  report.objective = objective(result.profiles, problem.P_b, problem.p_max);
  for (int i = 0; i < problem.agents(); ++i) {
    const auto& ev = problem.fleet[i];
    const double delivered = ev.eta * problem.fleet.dt() * ev.p_max * result.profiles.row(i).sum();
    report.max_energy_error = std::max(report.max_energy_error, std::abs(delivered - required_energy(ev)));
  }
  report.residuals = result.residuals;
  report.objectives = result.objectives;
  report.wiretap_log = result.wiretap_log;
  for (const auto& hook : hooks) {
    if (const auto* attacker = dynamic_cast<const AttackAgent*>(hook.get())) {
      report.attackers.push_back({attacker->agent(), attacker->variant(), attacker->stealth().trigger_iteration});
    }
  }
  return report;
}

double stealthiness(const RunReport& attacked, const RunReport& attack_free) {
  if (attacked.profiles.rows() != attack_free.profiles.rows() || attacked.profiles.cols() != attack_free.profiles.cols())
    throw Error(ErrorCode::DimensionMismatch, "reports have different profile shapes");
  return (attacked.profiles - attack_free.profiles).norm();
}

ComparisonReport compare(const Problem& problem, const RunReport& attacked, const RunReport& attack_free,
                         std::span<const AttackSpec> specs, const RowMatrix* reference) {
  if (attacked.profiles.rows() != attack_free.profiles.rows() || attacked.profiles.cols() != attack_free.profiles.cols() ||
      attacked.voltages.rows() != attack_free.voltages.rows() ||
      attacked.profiles.rows() != problem.agents() || attacked.profiles.cols() != problem.horizon())
    throw Error(ErrorCode::ScenarioMismatch, "compared runs do not share dimensions");
  if (attacked.baseline_load != attack_free.baseline_load)
    throw Error(ErrorCode::ScenarioMismatch, "compared runs use different baselines");

  ComparisonReport cmp;
  const int horizon = problem.horizon();
  for (int t = 0; t < horizon; ++t) {
    const double d = attacked.total_load[t] - attack_free.total_load[t];
    cmp.load_deviation.push_back(d);
    cmp.load_deviation_pct.push_back(attack_free.total_load[t] != 0.0 ? 100.0 * d / attack_free.total_load[t] : 0.0);
    cmp.mean_abs_load_deviation += std::abs(d) / horizon;
  }
  for (Eigen::Index b = 0; b < attacked.voltages.rows(); ++b) {
    const double dev = (attacked.voltages.row(b) - attack_free.voltages.row(b)).cwiseAbs().maxCoeff();
    cmp.voltage_deviation.push_back(dev);
    cmp.max_voltage_deviation = std::max(cmp.max_voltage_deviation, dev);
  }
  cmp.objective_delta = attacked.objective - attack_free.objective;
  cmp.objective_delta_pct = attack_free.objective != 0.0 ? 100.0 * cmp.objective_delta / attack_free.objective : 0.0;
  cmp.zeta = stealthiness(attacked, attack_free);
  cmp.bound = audit_deviation_bound(problem, attacked.profiles, reference ? *reference : attack_free.profiles, specs);
  return cmp;
}

nlohmann::ordered_json to_json(const BoundAudit& audit) {
  nlohmann::ordered_json j;
  j["f_reference"] = audit.f_reference;
  j["f_attacked"] = audit.f_attacked;
  j["interest_attacked"] = audit.interest_attacked;
  j["bound"] = audit.bound;
  j["lower_slack"] = audit.lower_slack;
  j["upper_slack"] = audit.upper_slack;
  j["holds"] = audit.holds;
  return j;
}

nlohmann::ordered_json to_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = report.scenario;
  j["converged"] = report.converged;
  j["criterion"] = report.criterion;
  j["iterations"] = report.iterations;
  j["objective"] = report.objective;
  j["min_voltage"] = report.min_voltage;
  j["max_energy_error"] = report.max_energy_error;
  j["baseline_load"] = to_vector(report.baseline_load);
  j["total_load"] = to_vector(report.total_load);
  j["residuals"] = report.residuals;
  j["objectives"] = report.objectives;
  j["profiles"] = matrix_json(report.profiles);
  j["voltages"] = matrix_json(report.voltages);
  auto attack = nlohmann::ordered_json::object();
  attack["attackers"] = nlohmann::ordered_json::array();
  for (const auto& a : report.attackers) {
    attack["attackers"].push_back(
        {{"agent", a.agent}, {"variant", std::string(to_string(a.variant))}, {"trigger_iteration", a.trigger_iteration}});
  }
  attack["wiretap_log"] = nlohmann::ordered_json::array();
  for (const auto& access : report.wiretap_log)
    attack["wiretap_log"].push_back({{"agent", access.agent}, {"iteration", access.iteration}});
  attack["bound"] = report.bound ? to_json(*report.bound) : nlohmann::ordered_json(nullptr);
  j["attack"] = attack;
  j["config"] = report.config;
  return j;
}

nlohmann::ordered_json to_json(const ComparisonReport& cmp) {
  nlohmann::ordered_json j;
  j["zeta"] = cmp.zeta;
  j["objective_delta"] = cmp.objective_delta;
  j["objective_delta_pct"] = cmp.objective_delta_pct;
  j["mean_abs_load_deviation"] = cmp.mean_abs_load_deviation;
  j["max_voltage_deviation"] = cmp.max_voltage_deviation;
  j["load_deviation"] = cmp.load_deviation;
  j["load_deviation_pct"] = cmp.load_deviation_pct;
  j["voltage_deviation"] = cmp.voltage_deviation;
  j["bound"] = cmp.bound ? to_json(*cmp.bound) : nlohmann::ordered_json(nullptr);
  return j;
}

void write_traces(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_csv(dir / "load.csv");
    out << "t,baseline,total\n";
    for (Eigen::Index t = 0; t < report.total_load.size(); ++t)
      out << t << ',' << report.baseline_load[t] << ',' << report.total_load[t] << '\n';
  }
  {
    auto out = open_csv(dir / "voltage.csv");
    out << "bus,t,magnitude\n";
    for (Eigen::Index b = 0; b < report.voltages.rows(); ++b)
      for (Eigen::Index t = 0; t < report.voltages.cols(); ++t) out << b + 1 << ',' << t << ',' << report.voltages(b, t) << '\n';
  }
  {
    auto out = open_csv(dir / "profiles.csv");
    out << "ev,t,rate\n";
    for (Eigen::Index i = 0; i < report.profiles.rows(); ++i)
      for (Eigen::Index t = 0; t < report.profiles.cols(); ++t) out << i << ',' << t << ',' << report.profiles(i, t) << '\n';
  }
  {
    auto out = open_csv(dir / "residuals.csv");
    out << "k,residual,objective\n";
    for (std::size_t k = 0; k < report.residuals.size(); ++k)
      out << k << ',' << report.residuals[k] << ',' << report.objectives[k] << '\n';
  }
}

}  // namespace evattack
