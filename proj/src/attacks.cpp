#include "evattack/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace evattack {

std::string_view to_string(AttackVariant variant) {
  switch (variant) {
    case AttackVariant::None: return "none";
    case AttackVariant::Smooth: return "smooth";
    case AttackVariant::Rush: return "rush";
    case AttackVariant::StealthySmooth: return "stealthy-smooth";
    case AttackVariant::StealthyRush: return "stealthy-rush";
  }
  return "none";
}

AttackVariant parse_variant(std::string_view name) {
  for (auto v : {AttackVariant::None, AttackVariant::Smooth, AttackVariant::Rush, AttackVariant::StealthySmooth,
                 AttackVariant::StealthyRush}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown attack variant '" + std::string(name) + "'");
}

bool is_stealthy(AttackVariant variant) {
  return variant == AttackVariant::StealthySmooth || variant == AttackVariant::StealthyRush;
}

bool is_rush(AttackVariant variant) {
  return variant == AttackVariant::Rush || variant == AttackVariant::StealthyRush;
}

std::vector<std::string> AttackSpec::violations(double solver_eps, int agents, int horizon) const {
  std::vector<std::string> out;
  if (variant == AttackVariant::None) return out;
  if (!(omega1 > 0.0)) out.push_back("omega1 must be positive");
  if (omega2 < 0.0) out.push_back("omega2 must be nonnegative");
  for (int a : attackers) {
    if (a < 0 || a >= agents) out.push_back("attacker index " + std::to_string(a) + " outside the fleet");
  }
  if (is_rush(variant)) {
    if (!(m > 0.0 && m < M)) out.push_back("rush weights need 0 < m < M");
    if (t_d < 1 || t_d > horizon) out.push_back("t_d must lie in 1.." + std::to_string(horizon));
  }
  if (is_stealthy(variant) && !(eps_att > solver_eps)) {
    out.push_back("stealth threshold eps_att=" + std::to_string(eps_att) +
                  " must exceed the solver tolerance eps=" + std::to_string(solver_eps) +
                  ", otherwise the run converges before the attack launches");
  }
  return out;
}

RushMatrix RushMatrix::build(int horizon, int t_d, double m, double M) {
  RushMatrix rush{Vector(horizon)};
  for (int t = 0; t < horizon; ++t) rush.diag[t] = t < t_d ? m : M;
  return rush;
}

Vector interest_weights(const AttackSpec& spec, int horizon) {
  if (is_rush(spec.variant)) return RushMatrix::build(horizon, spec.t_d, spec.m, spec.M).diag.array().square();
  return Vector::Ones(horizon);
}

double interest_value(std::span<const double> c, const Vector& weights) {
  if (static_cast<Eigen::Index>(c.size()) != weights.size())
    throw Error(ErrorCode::DimensionMismatch, "interest_value operand sizes");
  double value = 0.0;
  for (std::size_t t = 0; t < c.size(); ++t) value += weights[static_cast<Eigen::Index>(t)] * c[t] * c[t];
  return value;
}

double max_interest(const Vector& weights, double target) {
  const auto horizon = static_cast<double>(weights.size());
  if (!(target >= 0.0 && target <= horizon)) throw Error(ErrorCode::InfeasibleTarget, "target outside [0, T]");
  std::vector<double> w(weights.data(), weights.data() + weights.size());
  std::sort(w.begin(), w.end(), std::greater<>());
  const double whole = std::floor(target);
  const double frac = target - whole;
  const auto ones = static_cast<std::size_t>(whole);
  double value = 0.0;
  for (std::size_t t = 0; t < ones; ++t) value += w[t];
  if (ones < w.size()) value += w[ones] * frac * frac;
  return value;
}

Vector smooth_injection(std::span<const double> c, double omega1) {
  Vector out(static_cast<Eigen::Index>(c.size()));
  for (std::size_t t = 0; t < c.size(); ++t) out[static_cast<Eigen::Index>(t)] = 2.0 * omega1 * c[t];
  return out;
}

Vector rush_injection(std::span<const double> c, const RushMatrix& rush, double omega1) {
  if (static_cast<Eigen::Index>(c.size()) != rush.diag.size())
    throw Error(ErrorCode::DimensionMismatch, "rush matrix built for a different horizon");
  Vector out(rush.diag.size());
  for (Eigen::Index t = 0; t < out.size(); ++t) {
    const double a = rush.diag[t];
    out[t] = 2.0 * omega1 * a * a * c[static_cast<std::size_t>(t)];
  }
  return out;
}

Vector StealthState::snapshot_row(int agent) const {
  if (!armed() || !snapshot) throw Error(ErrorCode::NotArmed, "stealth snapshot requested before arming");
  if (agent < 0 || agent >= snapshot->rows()) throw Error(ErrorCode::IndexOutOfRange, "snapshot row");
  return snapshot->row(agent).transpose();
}

StealthState stealth_update(const StealthState& state, int agent, double own_residual, int k, double eps_att,
                            Wiretap& tap) {
  if (state.armed() || !(own_residual < eps_att)) return state;
  StealthState next;
  next.phase = StealthState::Phase::Armed;
  next.snapshot = std::make_shared<const RowMatrix>(tap.snapshot(agent, k));
  next.trigger_iteration = k;
  return next;
}

Vector pullback_injection(std::span<const double> c, std::span<const double> snapshot_i, const Vector& base,
                          double omega2) {
  if (c.size() != snapshot_i.size() || static_cast<Eigen::Index>(c.size()) != base.size())
    throw Error(ErrorCode::DimensionMismatch, "pullback operand sizes");
  Vector out = base;
  for (std::size_t t = 0; t < c.size(); ++t) out[static_cast<Eigen::Index>(t)] += 2.0 * omega2 * (c[t] - snapshot_i[t]);
  return out;
}

Vector stealthy_injection(const StealthState& state, int agent, std::span<const double> c, const Vector& base,
                          double omega2) {
  if (!state.armed()) return Vector::Zero(static_cast<Eigen::Index>(c.size()));
  const Vector snap = state.snapshot_row(agent);
  return pullback_injection(c, std::span<const double>(snap.data(), static_cast<std::size_t>(snap.size())), base,
                            omega2);
}

AttackAgent::AttackAgent(int agent, const AttackSpec& spec, int horizon)
    : agent_(agent), spec_(spec), weights_(interest_weights(spec, horizon)) {}

void AttackAgent::inject(int /*k*/, std::span<const double> own, std::span<double> out) {
  if (spec_.variant == AttackVariant::None) return;
  Vector base(static_cast<Eigen::Index>(own.size()));
  for (std::size_t t = 0; t < own.size(); ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    base[tt] = 2.0 * spec_.omega1 * weights_[tt] * own[t];
  }
  const Vector term = is_stealthy(spec_.variant) ? stealthy_injection(stealth_, agent_, own, base, spec_.omega2) : base;
  for (std::size_t t = 0; t < out.size(); ++t) out[t] += term[static_cast<Eigen::Index>(t)];
}

void AttackAgent::observe(int k, double own_residual, Wiretap& tap) {
  if (!is_stealthy(spec_.variant)) return;
  stealth_ = stealth_update(stealth_, agent_, own_residual, k, spec_.eps_att, tap);
}

std::vector<std::unique_ptr<PrimalHook>> make_hooks(std::span<const AttackSpec> specs, int agents, int horizon) {
  std::vector<std::unique_ptr<PrimalHook>> hooks(static_cast<std::size_t>(agents));
  for (const auto& spec : specs) {
    if (spec.variant == AttackVariant::None) continue;
    for (int a : spec.attackers) {
      if (a < 0 || a >= agents) throw Error(ErrorCode::IndexOutOfRange, "attacker " + std::to_string(a));
      auto& slot = hooks[static_cast<std::size_t>(a)];
      if (slot) throw Error(ErrorCode::InvalidConfig, "agent " + std::to_string(a) + " appears in two attack specs");
      slot = std::make_unique<AttackAgent>(a, spec, horizon);
    }
  }
  return hooks;
}

std::vector<InterestTerm> interest_terms(std::span<const AttackSpec> specs, int horizon) {
  std::vector<InterestTerm> terms;
  for (const auto& spec : specs) {
    if (spec.variant == AttackVariant::None) continue;
    const Vector w = interest_weights(spec, horizon);
    for (int a : spec.attackers) terms.push_back({a, spec.omega1, w});
  }
  return terms;
}

BoundAudit audit_deviation_bound(const Problem& problem, const RowMatrix& attacked, const RowMatrix& reference,
                          std::span<const AttackSpec> specs) {
  if (attacked.rows() != reference.rows() || attacked.cols() != reference.cols())
    throw Error(ErrorCode::DimensionMismatch, "attacked and reference profiles differ in shape");
  BoundAudit audit;
  audit.f_reference = objective(reference, problem.P_b, problem.p_max);
  audit.f_attacked = objective(attacked, problem.P_b, problem.p_max);
  const auto horizon = static_cast<std::size_t>(attacked.cols());
  for (const auto& spec : specs) {
    if (spec.variant == AttackVariant::None) continue;
    const Vector w = interest_weights(spec, static_cast<int>(horizon));
    for (int a : spec.attackers) {
      audit.interest_attacked +=
          spec.omega1 * interest_value(std::span<const double>(attacked.row(a).data(), horizon), w);
      audit.bound += spec.omega1 * max_interest(w, problem.targets[static_cast<std::size_t>(a)]);
    }
  }
  audit.lower_slack = audit.f_attacked - audit.f_reference;
  audit.upper_slack = audit.bound - audit.lower_slack;
  audit.holds = audit.lower_slack >= -kBoundTolerance && audit.upper_slack >= -kBoundTolerance &&
                audit.interest_attacked >= -kBoundTolerance;
  return audit;
}

BoundAudit theorem2_bound(const Problem& problem, const RowMatrix& attacked, const RowMatrix& reference,
                          std::span<const AttackSpec> specs) {
  auto audit = audit_deviation_bound(problem, attacked, reference, specs);
  if (!audit.holds) {
    throw Error(ErrorCode::BoundViolated, "F(C*)=" + std::to_string(audit.f_reference) +
                                              " F(C_hat)=" + std::to_string(audit.f_attacked) +
                                              " bound=" + std::to_string(audit.bound));
  }
  return audit;
}

}  // namespace evattack
