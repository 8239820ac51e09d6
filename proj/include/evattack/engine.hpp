#pragma once

#include "evattack/feeder.hpp"
#include "evattack/fleet.hpp"
#include "evattack/types.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace evattack {

/// Separable quadratic omega * sum_t w_t c_i(t)^2 added to the valley-filling
/// objective for one agent. Used to pose the attacked problem directly.
struct InterestTerm {
  int agent = 0;
  double omega = 0.0;
  Vector weights;  // length T
};

/// Immutable data of one valley-filling instance.
struct Problem {
  Fleet fleet;
  Matrix D;                      // n x s sensitivity
  RowMatrix y_d;                 // n x T squared baseline voltages
  Vector P_b;                    // T aggregate baseline, kW
  std::vector<double> p_max;     // kW
  std::vector<double> targets;   // K_i
  double v0 = 1.0;
  std::vector<InterestTerm> interests;

  static Problem assemble(const FeederModel& feeder, const Fleet& fleet, const BaselineLoad& baseline);

  int agents() const { return static_cast<int>(p_max.size()); }
  int horizon() const { return static_cast<int>(P_b.size()); }
  int buses() const { return static_cast<int>(D.rows()); }
};

struct SolverConfig {
  double alpha = 1e-5;
  double beta = 1.0;
  double tau_c = 1.0;
  double tau_l = 1.0;
  int k_max = 1000;
  double eps = 1e-4;
  double lambda_max = std::numeric_limits<double>::infinity();
  double v_min = 0.954;
  bool diminishing_step = false;

  /// Primal step used at iteration k.
  double alpha_at(int k) const;
  void check() const;
};

struct SolverState {
  int k = 0;
  RowMatrix profiles;  // s x T
  RowMatrix dual;      // n x T
  std::vector<double> residuals;

  static SolverState initial(const Problem& problem);
};

/// 1/2 * sum_t (P_b(t) + sum_i p_max_i c_i(t))^2.
double objective(const RowMatrix& profiles, const Vector& P_b, std::span<const double> p_max);

/// objective() plus every interest term of the problem.
double penalized_objective(const Problem& problem, const RowMatrix& profiles);

/// Relaxed Lagrangian F(C) + sum lambda * (v_min^2 v0^2 - y).
double lagrangian(const Problem& problem, const RowMatrix& profiles, const RowMatrix& dual, double v_min);

/// d L / d c_i = p_max_i * (P_b + sum_j p_max_j c_j) - D[:, i]^T lambda.
Vector primal_gradient(int i, const RowMatrix& profiles, const RowMatrix& dual, const Vector& P_b,
                       const Matrix& D, std::span<const double> p_max);

/// d L / d lambda = v_min^2 v0^2 - y, n x T.
RowMatrix dual_gradient(const RowMatrix& profiles, const RowMatrix& y_d, const Matrix& D, double v_min,
                        double v0);

/// Shrunken projected-gradient update of agent i. `injection` is added to the
/// gradient; pass an empty span when the agent is honest.
Vector primal_step(const Problem& problem, int i, const SolverState& state, const SolverConfig& config,
                   std::span<const double> injection = {});

/// Shrunken dual ascent with the clip to [0, lambda_max].
RowMatrix dual_step(const Problem& problem, const SolverState& state, const SolverConfig& config);

struct WiretapAccess {
  int agent = 0;
  int iteration = 0;
};

/// Profiles the coordinator received at the last barrier, exposed to agents
/// that tap the uplink channels. Every read is logged.
class Wiretap {
 public:
  void publish(int iteration, const RowMatrix* profiles);
  /// C^(iteration). Throws WiretapUnavailable unless that iterate is the one
  /// published at the current barrier.
  const RowMatrix& snapshot(int agent, int iteration);
  const std::vector<WiretapAccess>& log() const { return log_; }

 private:
  int iteration_ = -1;
  const RowMatrix* profiles_ = nullptr;
  std::vector<WiretapAccess> log_;
};

/// Per-agent interception point on the primal update.
class PrimalHook {
 public:
  virtual ~PrimalHook() = default;
  /// Adds this agent's term to `out` (zero on entry) for the update at iteration k.
  virtual void inject(int k, std::span<const double> own, std::span<double> out) = 0;
  /// Called at the barrier after iteration k with ||c_i^(k+1) - c_i^(k)||.
  virtual void observe(int /*k*/, double /*own_residual*/, Wiretap& /*tap*/) {}
};

struct TraceRecord {
  int k = 0;
  double residual = 0.0;
  double objective = 0.0;
  double min_voltage = 0.0;  // p.u. magnitude
};

struct RunOptions {
  int workers = 1;
  std::function<void(const TraceRecord&)> trace;
};

struct RunResult {
  bool converged = false;
  std::string criterion;  // "tolerance" or "iteration_cap"
  int iterations = 0;
  RowMatrix profiles;
  RowMatrix dual;
  std::vector<double> residuals;
  std::vector<double> objectives;
  std::vector<WiretapAccess> wiretap_log;
};

/// Coordinator loop: every agent's primal step from a frozen (C^k, lambda^k),
/// then the dual step, until ||C^(k+1) - C^k|| < eps or k_max iterations.
/// `hooks` is empty or holds one (possibly null) hook per agent.
RunResult run(const Problem& problem, const SolverConfig& config,
              std::span<const std::unique_ptr<PrimalHook>> hooks = {}, const RunOptions& options = {});

}  // namespace evattack
