#include "evattack/engine.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>

namespace evattack {

namespace {

Vector aggregate_load(const RowMatrix& profiles, const Vector& P_b, std::span<const double> p_max) {
  if (profiles.cols() != P_b.size() || static_cast<std::size_t>(profiles.rows()) != p_max.size())
    throw Error(ErrorCode::DimensionMismatch, "profiles do not match baseline or fleet size");
  Vector load = P_b;
  // Ascending agent order keeps the sum bit-identical for any worker count.
  for (Eigen::Index i = 0; i < profiles.rows(); ++i) load += p_max[static_cast<std::size_t>(i)] * profiles.row(i).transpose();
  return load;
}

void add_interest_gradient(const Problem& problem, int i, std::span<const double> own, std::span<double> g) {
  for (const auto& term : problem.interests) {
    if (term.agent != i) continue;
    for (std::size_t t = 0; t < g.size(); ++t) g[t] += 2.0 * term.omega * term.weights[static_cast<Eigen::Index>(t)] * own[t];
  }
}

// Agent update shared by primal_step and the coordinator loop. `out` receives
// the new profile.
void agent_update(const Problem& problem, int i, const RowMatrix& profiles, const RowMatrix& dual,
                  const Vector& load, double alpha, double tau, std::span<const double> injection,
                  std::span<double> out) {
  const auto horizon = static_cast<std::size_t>(problem.horizon());
  const double p = problem.p_max[static_cast<std::size_t>(i)];
  const auto own = std::span<const double>(profiles.row(i).data(), horizon);
  const Vector coupling = dual.transpose() * problem.D.col(i);  // D_i^T lambda, length T

  std::vector<double> g(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    g[t] = p * load[tt] - coupling[tt];
  }
  add_interest_gradient(problem, i, own, g);
  if (!injection.empty()) {
    if (injection.size() != horizon) throw Error(ErrorCode::DimensionMismatch, "injection length");
    for (std::size_t t = 0; t < horizon; ++t) g[t] += injection[t];
  }
  for (std::size_t t = 0; t < horizon; ++t) {
    out[t] = tau * own[t] - alpha * g[t];
    if (!std::isfinite(out[t]))
      throw Error(ErrorCode::NumericalDivergence, "agent " + std::to_string(i) + " update is not finite");
  }
  const double target = problem.targets[static_cast<std::size_t>(i)];
  project_feasible_inplace(out, target);
  for (double& v : out) v /= tau;
  project_feasible_inplace(out, target);
}

// Fixed set of threads executing one indexed loop at a time with a static
// partition of the index range.
class WorkerPool {
 public:
  explicit WorkerPool(int workers) : workers_(std::max(1, workers)), errors_(static_cast<std::size_t>(workers_)) {
    for (int w = 1; w < workers_; ++w) threads_.emplace_back([this, w] { loop(w); });
  }

  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void parallel_for(int count, const std::function<void(int)>& body) {
    if (workers_ == 1) {
      for (int i = 0; i < count; ++i) body(i);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      body_ = &body;
      count_ = count;
      pending_ = workers_ - 1;
      ++generation_;
    }
    wake_.notify_all();
    execute(0);
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    body_ = nullptr;
    for (auto& e : errors_) {
      if (e) std::rethrow_exception(std::exchange(e, nullptr));
    }
  }

 private:
  void execute(int w) {
    const int begin = count_ * w / workers_;
    const int end = count_ * (w + 1) / workers_;
    try {
      for (int i = begin; i < end; ++i) (*body_)(i);
    } catch (...) {
      errors_[static_cast<std::size_t>(w)] = std::current_exception();
    }
  }

  void loop(int w) {
    std::uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      execute(w);
      {
        std::lock_guard lock(mutex_);
        --pending_;
      }
      done_.notify_one();
    }
  }

  int workers_;
  std::vector<std::thread> threads_;
  std::vector<std::exception_ptr> errors_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(int)>* body_ = nullptr;
  int count_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

double min_voltage_magnitude(const RowMatrix& y) {
  return std::sqrt(std::max(0.0, y.minCoeff()));
}

}  // namespace

Problem Problem::assemble(const FeederModel& feeder, const Fleet& fleet, const BaselineLoad& baseline) {
  if (baseline.buses() != feeder.n)
    throw Error(ErrorCode::DimensionMismatch, "baseline has " + std::to_string(baseline.buses()) +
                                                  " buses, feeder has " + std::to_string(feeder.n));
  if (baseline.horizon() != fleet.horizon())
    throw Error(ErrorCode::DimensionMismatch, "baseline horizon differs from fleet horizon");
  const auto adj = build_adjacency(feeder);
  Problem problem;
  problem.fleet = fleet;
  problem.D = build_sensitivity(adj, fleet, feeder.s_base);
  problem.y_d = baseline_voltages(adj, baseline, feeder.v0, feeder.s_base);
  problem.P_b = baseline.aggregate();
  problem.p_max = fleet.p_max();
  problem.targets = fleet.required_sums();
  problem.v0 = feeder.v0;
  return problem;
}

double SolverConfig::alpha_at(int k) const {
  return diminishing_step ? alpha / std::sqrt(static_cast<double>(k) + 1.0) : alpha;
}

void SolverConfig::check() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw Error(ErrorCode::InvalidConfig, "step sizes must be positive");
  if (!(tau_c > 0.0 && tau_c <= 1.0) || !(tau_l > 0.0 && tau_l <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "shrink factors must lie in (0,1]");
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "eps must be positive");
  if (k_max < 0) throw Error(ErrorCode::InvalidConfig, "k_max must be nonnegative");
  if (!(v_min > 0.0 && v_min < 1.1)) throw Error(ErrorCode::InvalidConfig, "v_min must lie in (0, 1.1)");
  if (!(lambda_max > 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda_max must be positive");
}

SolverState SolverState::initial(const Problem& problem) {
  SolverState state;
  state.profiles = RowMatrix::Zero(problem.agents(), problem.horizon());
  state.dual = RowMatrix::Zero(problem.buses(), problem.horizon());
  return state;
}

double objective(const RowMatrix& profiles, const Vector& P_b, std::span<const double> p_max) {
  return 0.5 * aggregate_load(profiles, P_b, p_max).squaredNorm();
}

double penalized_objective(const Problem& problem, const RowMatrix& profiles) {
  double value = objective(profiles, problem.P_b, problem.p_max);
  for (const auto& term : problem.interests) {
    value += term.omega * (term.weights.array() * profiles.row(term.agent).transpose().array().square()).sum();
  }
  return value;
}

double lagrangian(const Problem& problem, const RowMatrix& profiles, const RowMatrix& dual, double v_min) {
  const RowMatrix g = dual_gradient(profiles, problem.y_d, problem.D, v_min, problem.v0);
  return penalized_objective(problem, profiles) + (dual.array() * g.array()).sum();
}

Vector primal_gradient(int i, const RowMatrix& profiles, const RowMatrix& dual, const Vector& P_b,
                       const Matrix& D, std::span<const double> p_max) {
  if (i < 0 || i >= profiles.rows()) throw Error(ErrorCode::IndexOutOfRange, "agent " + std::to_string(i));
  if (D.cols() != profiles.rows() || D.rows() != dual.rows() || dual.cols() != profiles.cols())
    throw Error(ErrorCode::DimensionMismatch, "primal_gradient operand sizes");
  const Vector load = aggregate_load(profiles, P_b, p_max);
  return p_max[static_cast<std::size_t>(i)] * load - dual.transpose() * D.col(i);
}

RowMatrix dual_gradient(const RowMatrix& profiles, const RowMatrix& y_d, const Matrix& D, double v_min,
                        double v0) {
  if (D.cols() != profiles.rows() || D.rows() != y_d.rows() || y_d.cols() != profiles.cols())
    throw Error(ErrorCode::DimensionMismatch, "dual_gradient operand sizes");
  const double bound = v_min * v_min * v0 * v0;
  RowMatrix g = -(y_d + D * profiles);
  g.array() += bound;
  return g;
}

Vector primal_step(const Problem& problem, int i, const SolverState& state, const SolverConfig& config,
                   std::span<const double> injection) {
  if (i < 0 || i >= problem.agents()) throw Error(ErrorCode::IndexOutOfRange, "agent " + std::to_string(i));
  const Vector load = aggregate_load(state.profiles, problem.P_b, problem.p_max);
  Vector next(problem.horizon());
  agent_update(problem, i, state.profiles, state.dual, load, config.alpha_at(state.k), config.tau_c, injection,
               std::span<double>(next.data(), static_cast<std::size_t>(next.size())));
  return next;
}

RowMatrix dual_step(const Problem& problem, const SolverState& state, const SolverConfig& config) {
  const RowMatrix g = dual_gradient(state.profiles, problem.y_d, problem.D, config.v_min, problem.v0);
  const double cap = config.lambda_max;
  RowMatrix next = (config.tau_l * state.dual + config.beta * g).cwiseMax(0.0).cwiseMin(cap);
  next = (next / config.tau_l).cwiseMax(0.0).cwiseMin(cap);
  return next;
}

void Wiretap::publish(int iteration, const RowMatrix* profiles) {
  iteration_ = iteration;
  profiles_ = profiles;
}

const RowMatrix& Wiretap::snapshot(int agent, int iteration) {
  if (profiles_ == nullptr || iteration != iteration_) {
    throw Error(ErrorCode::WiretapUnavailable,
                "iterate " + std::to_string(iteration) + " is not on the channel (current " +
                    std::to_string(iteration_) + ")");
  }
  log_.push_back({agent, iteration});
  return *profiles_;
}

RunResult run(const Problem& problem, const SolverConfig& config, std::span<const std::unique_ptr<PrimalHook>> hooks,
              const RunOptions& options) {
  config.check();
  const int agents = problem.agents();
  const int horizon = problem.horizon();
  if (!hooks.empty() && static_cast<int>(hooks.size()) != agents)
    throw Error(ErrorCode::DimensionMismatch, "need one hook slot per agent");

  SolverState state = SolverState::initial(problem);
  RowMatrix next(agents, horizon);
  RowMatrix injections = RowMatrix::Zero(agents, horizon);
  WorkerPool pool(options.workers);
  Wiretap tap;

  RunResult result;
  result.criterion = "iteration_cap";
  for (int k = 0; k < config.k_max; ++k) {
    state.k = k;
    const Vector load = aggregate_load(state.profiles, problem.P_b, problem.p_max);
    const double alpha = config.alpha_at(k);

    pool.parallel_for(agents, [&](int i) {
      std::span<const double> injection;
      if (!hooks.empty() && hooks[static_cast<std::size_t>(i)]) {
        auto row = std::span<double>(injections.row(i).data(), static_cast<std::size_t>(horizon));
        std::fill(row.begin(), row.end(), 0.0);
        hooks[static_cast<std::size_t>(i)]->inject(
            k, std::span<const double>(state.profiles.row(i).data(), static_cast<std::size_t>(horizon)), row);
        injection = row;
      }
      agent_update(problem, i, state.profiles, state.dual, load, alpha, config.tau_c, injection,
                   std::span<double>(next.row(i).data(), static_cast<std::size_t>(horizon)));
    });

    RowMatrix next_dual = dual_step(problem, state, config);
    if (!next.allFinite() || !next_dual.allFinite())
      throw Error(ErrorCode::NumericalDivergence, "non-finite iterate at k=" + std::to_string(k));

    // Barrier: residuals, attacker bookkeeping, then commit.
    const double residual = (next - state.profiles).norm();
    tap.publish(k, &state.profiles);
    if (!hooks.empty()) {
      for (int i = 0; i < agents; ++i) {
        if (!hooks[static_cast<std::size_t>(i)]) continue;
        const double own = (next.row(i) - state.profiles.row(i)).norm();
        hooks[static_cast<std::size_t>(i)]->observe(k, own, tap);
      }
    }
    tap.publish(k, nullptr);

    state.profiles.swap(next);
    state.dual = std::move(next_dual);
    state.residuals.push_back(residual);
    const double obj = objective(state.profiles, problem.P_b, problem.p_max);
    result.objectives.push_back(obj);
    if (options.trace) {
      const RowMatrix y = problem.y_d + problem.D * state.profiles;
      options.trace({k, residual, obj, min_voltage_magnitude(y)});
    }
    result.iterations = k + 1;
    if (residual < config.eps) {
      result.converged = true;
      result.criterion = "tolerance";
      break;
    }
  }

  result.profiles = std::move(state.profiles);
  result.dual = std::move(state.dual);
  result.residuals = std::move(state.residuals);
  result.wiretap_log = tap.log();
  return result;
}

}  // namespace evattack
