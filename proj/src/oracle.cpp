#include "evattack/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evattack {

namespace {

// Gradient of F + interests - sum multipliers^T D C, i.e. the Lagrangian
// gradient for the given nonnegative multipliers.
RowMatrix lagrangian_gradient(const Problem& problem, const RowMatrix& profiles, const RowMatrix& multipliers) {
  Vector load = problem.P_b;
  for (int i = 0; i < problem.agents(); ++i) load += problem.p_max[static_cast<std::size_t>(i)] * profiles.row(i).transpose();
  RowMatrix grad(problem.agents(), problem.horizon());
  for (int i = 0; i < problem.agents(); ++i) grad.row(i) = problem.p_max[static_cast<std::size_t>(i)] * load.transpose();
  grad -= problem.D.transpose() * multipliers;
  for (const auto& term : problem.interests)
    grad.row(term.agent).array() += 2.0 * term.omega * term.weights.transpose().array() * profiles.row(term.agent).array();
  return grad;
}

// Voltage constraint residual h = v_min^2 v0^2 - y (feasible when <= 0).
RowMatrix constraint(const Problem& problem, const RowMatrix& profiles, double v_min) {
  RowMatrix h = -(problem.y_d + problem.D * profiles);
  h.array() += v_min * v_min * problem.v0 * problem.v0;
  return h;
}

void project_rows(const Problem& problem, RowMatrix& m) {
  const auto horizon = static_cast<std::size_t>(m.cols());
  for (int i = 0; i < problem.agents(); ++i)
    project_feasible_inplace(std::span<double>(m.row(i).data(), horizon), problem.targets[static_cast<std::size_t>(i)]);
}

double certificate(const Problem& problem, const RowMatrix& profiles, const RowMatrix& multipliers) {
  RowMatrix step = profiles - lagrangian_gradient(problem, profiles, multipliers);
  project_rows(problem, step);
  return (step - profiles).norm();
}

double lipschitz(const Problem& problem, double rho) {
  double L = 0.0;
  for (double p : problem.p_max) L += p * p;
  double interest = 0.0;
  for (const auto& term : problem.interests) interest = std::max(interest, 2.0 * term.omega * term.weights.maxCoeff());
  L += interest;
  if (rho > 0.0) {
    const double d = Eigen::JacobiSVD<Matrix>(problem.D).singularValues()(0);
    L += rho * d * d;
  }
  return std::max(L, 1e-12);
}

}  // namespace

double projected_gradient_norm(const Problem& problem, const RowMatrix& profiles, const RowMatrix& dual) {
  return certificate(problem, profiles, dual);
}

ReferenceSolution solve_reference(const Problem& problem, const OracleOptions& options) {
  const int agents = problem.agents();
  const int horizon = problem.horizon();
  for (double k : problem.targets) {
    if (!(k >= 0.0 && k <= horizon)) throw Error(ErrorCode::InfeasibleTarget, "reference problem target outside [0, T]");
  }

  double rho = 0.0;
  if (options.voltage_constraint && problem.D.norm() > 0.0) {
    double pp = 0.0;
    for (double p : problem.p_max) pp += p * p;
    const double d = Eigen::JacobiSVD<Matrix>(problem.D).singularValues()(0);
    rho = d > 0.0 ? std::max(pp, 1.0) / (d * d) : 0.0;
  }
  const double L = lipschitz(problem, rho);
  const double inner_tol = 0.1 * options.tol;

  RowMatrix x = RowMatrix::Zero(agents, horizon);
  project_rows(problem, x);
  RowMatrix lambda = RowMatrix::Zero(problem.buses(), horizon);

  auto multipliers = [&](const RowMatrix& c) -> RowMatrix {
    if (rho == 0.0) return RowMatrix::Zero(problem.buses(), horizon);
    return (lambda + rho * constraint(problem, c, options.v_min)).cwiseMax(0.0);
  };

  ReferenceSolution best;
  best.residual = std::numeric_limits<double>::infinity();
  int used = 0;
  while (used < options.max_iterations) {
    // Restarted FISTA on the augmented Lagrangian for the current multipliers.
    RowMatrix x_prev = x;
    RowMatrix y = x;
    double t = 1.0;
    while (used < options.max_iterations) {
      ++used;
      RowMatrix next = y - lagrangian_gradient(problem, y, multipliers(y)) / L;
      project_rows(problem, next);
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      if (((y - next).array() * (next - x).array()).sum() > 0.0) {
        y = next;
        t = 1.0;
      } else {
        y = next + ((t - 1.0) / t_next) * (next - x);
        t = t_next;
      }
      x_prev = std::move(x);
      x = std::move(next);
      if (used % 25 == 0 || (x - x_prev).norm() < 1e-14) {
        if (certificate(problem, x, multipliers(x)) <= inner_tol) break;
      }
    }

    const RowMatrix updated = multipliers(x);
    const double dual_move = rho > 0.0 ? (updated - lambda).norm() / rho : 0.0;
    lambda = updated;
    const double violation =
        options.voltage_constraint ? std::max(0.0, constraint(problem, x, options.v_min).maxCoeff()) : 0.0;
    const double primal = certificate(problem, x, lambda);
    const double residual = std::max({primal, violation, dual_move});
    if (residual < best.residual) {
      best.profiles = x;
      best.dual = lambda;
      best.residual = residual;
    }
    if (residual <= options.tol) break;
    if (rho == 0.0 && primal <= options.tol) break;
  }

  best.method = "high-precision-pd";
  best.iterations = used;
  best.objective = objective(best.profiles, problem.P_b, problem.p_max);
  best.penalized = penalized_objective(problem, best.profiles);
  if (best.residual > options.tol && !options.accept_unconverged) {
    throw Error(ErrorCode::OracleNotConverged,
                "reference residual " + std::to_string(best.residual) + " after " + std::to_string(used) + " iterations");
  }
  return best;
}

namespace {

// Naive evaluation of the penalized objective with the grid-search voltage penalty.
double grid_cost(const Problem& problem, const std::vector<double>& c, double v_min, bool voltage) {
  const int agents = problem.agents();
  const int horizon = problem.horizon();
  double value = 0.0;
  for (int t = 0; t < horizon; ++t) {
    double load = problem.P_b[t];
    for (int i = 0; i < agents; ++i) load += problem.p_max[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i * horizon + t)];
    value += 0.5 * load * load;
  }
  for (const auto& term : problem.interests) {
    for (int t = 0; t < horizon; ++t) {
      const double v = c[static_cast<std::size_t>(term.agent * horizon + t)];
      value += term.omega * term.weights[t] * v * v;
    }
  }
  if (voltage) {
    const double bound = v_min * v_min * problem.v0 * problem.v0;
    double violation = 0.0;
    for (int b = 0; b < problem.buses(); ++b) {
      for (int t = 0; t < horizon; ++t) {
        double y = problem.y_d(b, t);
        for (int i = 0; i < agents; ++i) y += problem.D(b, i) * c[static_cast<std::size_t>(i * horizon + t)];
        violation += std::max(0.0, bound - y);
      }
    }
    value += 1e9 * violation;
  }
  return value;
}

}  // namespace

ReferenceSolution grid_brute_force(const Problem& problem, double resolution, double v_min, bool voltage_constraint) {
  const int agents = problem.agents();
  const int horizon = problem.horizon();
  if (agents * horizon > 8) throw Error(ErrorCode::ProblemTooLarge, "grid search needs s*T <= 8");
  if (!(resolution >= 1e-3)) throw Error(ErrorCode::InvalidConfig, "grid resolution must be >= 1e-3");
  for (double k : problem.targets) {
    if (!(k >= 0.0 && k <= horizon)) throw Error(ErrorCode::InfeasibleTarget, "grid problem target outside [0, T]");
  }

  // Free coordinates: the first T-1 entries of every EV; the last closes the sum.
  const int free_per_ev = horizon - 1;
  const int dims = agents * free_per_ev;
  int points = 2;
  while (dims > 0 && std::pow(points + 1, dims) <= 2e6) ++points;
  if (dims == 0) points = 1;

  std::vector<double> lo(static_cast<std::size_t>(dims), 0.0);
  std::vector<double> hi(static_cast<std::size_t>(dims), 1.0);
  std::vector<double> best_c;
  double best_cost = std::numeric_limits<double>::infinity();
  double spacing = 1.0;

  while (true) {
    std::vector<int> index(static_cast<std::size_t>(dims), 0);
    std::vector<double> c(static_cast<std::size_t>(agents * horizon));
    std::vector<double> level_best;
    double level_cost = std::numeric_limits<double>::infinity();
    while (true) {
      bool feasible = true;
      for (int i = 0; i < agents && feasible; ++i) {
        double sum = 0.0;
        for (int t = 0; t < free_per_ev; ++t) {
          const auto d = static_cast<std::size_t>(i * free_per_ev + t);
          const double v = points == 1 ? lo[d] : lo[d] + (hi[d] - lo[d]) * index[d] / (points - 1);
          c[static_cast<std::size_t>(i * horizon + t)] = v;
          sum += v;
        }
        const double last = problem.targets[static_cast<std::size_t>(i)] - sum;
        if (last < -1e-12 || last > 1.0 + 1e-12) feasible = false;
        c[static_cast<std::size_t>(i * horizon + free_per_ev)] = std::clamp(last, 0.0, 1.0);
      }
      if (feasible) {
        const double cost = grid_cost(problem, c, v_min, voltage_constraint);
        if (cost < level_cost) {
          level_cost = cost;
          level_best = c;
        }
      }
      int d = 0;
      while (d < dims && ++index[static_cast<std::size_t>(d)] == points) index[static_cast<std::size_t>(d++)] = 0;
      if (d == dims) break;
    }
    if (level_best.empty()) {
      // Grid too coarse to hit the plane; widen nothing, just refine.
      if (best_c.empty() && points < 2) break;
    } else if (level_cost < best_cost) {
      best_cost = level_cost;
      best_c = level_best;
    }
    if (dims == 0) break;
    double widest = 0.0;
    for (int d = 0; d < dims; ++d) widest = std::max(widest, hi[static_cast<std::size_t>(d)] - lo[static_cast<std::size_t>(d)]);
    spacing = widest / (points - 1);
    if (spacing <= resolution || best_c.empty()) break;
    // Zoom to two cells around the incumbent.
    for (int i = 0; i < agents; ++i) {
      for (int t = 0; t < free_per_ev; ++t) {
        const auto d = static_cast<std::size_t>(i * free_per_ev + t);
        const double centre = best_c[static_cast<std::size_t>(i * horizon + t)];
        lo[d] = std::max(0.0, centre - 2.0 * spacing);
        hi[d] = std::min(1.0, centre + 2.0 * spacing);
      }
    }
  }
  if (best_c.empty()) throw Error(ErrorCode::InfeasibleTarget, "grid search found no feasible point");

  ReferenceSolution sol;
  sol.profiles = RowMatrix(agents, horizon);
  for (int i = 0; i < agents; ++i)
    for (int t = 0; t < horizon; ++t) sol.profiles(i, t) = best_c[static_cast<std::size_t>(i * horizon + t)];
  sol.dual = RowMatrix::Zero(problem.buses(), horizon);
  sol.method = "grid-brute-force";
  sol.residual = spacing;
  sol.objective = objective(sol.profiles, problem.P_b, problem.p_max);
  sol.penalized = penalized_objective(problem, sol.profiles);
  return sol;
}

}  // namespace evattack
