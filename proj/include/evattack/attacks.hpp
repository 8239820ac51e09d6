#pragma once

#include "evattack/engine.hpp"
#include "evattack/types.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evattack {

enum class AttackVariant { None, Smooth, Rush, StealthySmooth, StealthyRush };

std::string_view to_string(AttackVariant variant);
AttackVariant parse_variant(std::string_view name);
bool is_stealthy(AttackVariant variant);
bool is_rush(AttackVariant variant);

/// One attack configuration shared by a group of attacking agents.
struct AttackSpec {
  std::vector<int> attackers;  // agent indices
  AttackVariant variant = AttackVariant::None;
  double omega1 = 0.0;   // self-interest power
  double omega2 = 0.0;   // stealth power
  int t_d = 0;           // rush: steps 1..t_d are cheap
  double m = 0.2;
  double M = 1e5;
  double eps_att = 0.0;  // stealth trigger threshold

  /// Violated invariants, empty when valid. `solver_eps` is the convergence
  /// tolerance the stealth threshold must exceed.
  std::vector<std::string> violations(double solver_eps, int agents, int horizon) const;
};

/// Diagonal of the rush weighting A: m for the first t_d steps, M afterwards.
struct RushMatrix {
  Vector diag;

  static RushMatrix build(int horizon, int t_d, double m, double M);
};

/// Weights w of the interest function G(c) = sum_t w_t c_t^2 (ones for smooth,
/// a^2 for rush).
Vector interest_weights(const AttackSpec& spec, int horizon);
double interest_value(std::span<const double> c, const Vector& weights);

/// Largest value of sum_t w_t c_t^2 over {c in [0,1]^T, sum c = K}. The maximum
/// of a convex function sits at a vertex: floor(K) ones and one fractional entry.
double max_interest(const Vector& weights, double target);

/// 2 * omega1 * c.
Vector smooth_injection(std::span<const double> c, double omega1);
/// 2 * omega1 * A^T A c.
Vector rush_injection(std::span<const double> c, const RushMatrix& rush, double omega1);

struct StealthState {
  enum class Phase { Dormant, Armed };
  Phase phase = Phase::Dormant;
  std::shared_ptr<const RowMatrix> snapshot;  // full C^(l), present iff Armed
  int trigger_iteration = -1;

  bool armed() const { return phase == Phase::Armed; }
  /// Attacker's own block of the snapshot. Throws NotArmed while dormant.
  Vector snapshot_row(int agent) const;
};

/// Arms once, the first time `own_residual` drops below `eps_att`, capturing
/// C^(k) through the wiretap.
StealthState stealth_update(const StealthState& state, int agent, double own_residual, int k, double eps_att,
                            Wiretap& tap);

/// base + 2 * omega2 * (c - snapshot_i).
Vector pullback_injection(std::span<const double> c, std::span<const double> snapshot_i, const Vector& base,
                          double omega2);

/// Stealthy term for agent `agent`: zero while dormant, pullback once armed.
Vector stealthy_injection(const StealthState& state, int agent, std::span<const double> c, const Vector& base,
                          double omega2);

/// Hook driving one attacking agent.
class AttackAgent final : public PrimalHook {
 public:
  AttackAgent(int agent, const AttackSpec& spec, int horizon);

  void inject(int k, std::span<const double> own, std::span<double> out) override;
  void observe(int k, double own_residual, Wiretap& tap) override;

  int agent() const { return agent_; }
  AttackVariant variant() const { return spec_.variant; }
  const StealthState& stealth() const { return stealth_; }

 private:
  int agent_;
  AttackSpec spec_;
  Vector weights_;
  StealthState stealth_;
};

/// One hook slot per agent; slots of honest agents are null.
std::vector<std::unique_ptr<PrimalHook>> make_hooks(std::span<const AttackSpec> specs, int agents, int horizon);

/// The attacked objective posed directly: F + omega1 * G(c_i) for every attacker.
std::vector<InterestTerm> interest_terms(std::span<const AttackSpec> specs, int horizon);

struct BoundAudit {
  double f_reference = 0.0;     // F(C*)
  double f_attacked = 0.0;      // F(C_hat)
  double interest_attacked = 0.0;  // sum over attackers of omega1 * G(C_hat_i)
  double bound = 0.0;           // sum over attackers of omega1 * max G
  double lower_slack = 0.0;     // F(C_hat) - F(C*)
  double upper_slack = 0.0;     // bound - (F(C_hat) - F(C*))
  bool holds = false;
};

constexpr double kBoundTolerance = 1e-6;

/// Evaluates the deviation sandwich F(C*) <= F(C_hat) <= F(C_hat) + omega1 G(C_hat_i)
/// and F(C_hat) - F(C*) <= omega1 max G without throwing.
BoundAudit audit_deviation_bound(const Problem& problem, const RowMatrix& attacked, const RowMatrix& reference,
                          std::span<const AttackSpec> specs);

/// audit_deviation_bound, throwing BoundViolated when any slack is below -1e-6.
BoundAudit theorem2_bound(const Problem& problem, const RowMatrix& attacked, const RowMatrix& reference,
                          std::span<const AttackSpec> specs);

}  // namespace evattack
