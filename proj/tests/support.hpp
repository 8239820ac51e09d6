#pragma once

#include "evattack/engine.hpp"
#include "evattack/feeder.hpp"
#include "evattack/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace evtest {

using namespace evattack;

// Seeded draws for property tests. Failures print the seed via doctest CAPTURE.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  std::vector<double> vec(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  // Random tree on {0..n}: every bus attaches to an earlier one.
  FeederModel feeder(int n, double r_hi = 0.02, double x_hi = 0.04) {
    FeederModel f;
    f.n = n;
    for (int b = 1; b <= n; ++b) f.lines.push_back({integer(0, b - 1), b, uniform(0.0, r_hi), uniform(0.0, x_hi)});
    return f;
  }

  BaselineLoad baseline(int n, int horizon, double lo, double hi) {
    BaselineLoad b{RowMatrix(n, horizon), RowMatrix(n, horizon)};
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < horizon; ++t) {
        b.p(i, t) = uniform(lo, hi);
        b.q(i, t) = 0.3 * b.p(i, t);
      }
    return b;
  }

  // EVs sorted by node with targets well inside (0, T).
  std::vector<EvSpec> evs(int count, int n, int horizon, double dt) {
    std::vector<int> nodes(static_cast<std::size_t>(count));
    for (auto& v : nodes) v = integer(1, n);
    std::sort(nodes.begin(), nodes.end());
    std::vector<EvSpec> out;
    for (int i = 0; i < count; ++i) {
      EvSpec ev;
      ev.id = i;
      ev.node = nodes[static_cast<std::size_t>(i)];
      ev.p_max = uniform(3.0, 7.0);
      ev.eta = uniform(0.9, 1.0);
      ev.soc_ini = uniform(0.2, 0.4);
      const double k = uniform(0.2, 0.8) * horizon;
      ev.capacity = 20.0;
      ev.soc_des = ev.soc_ini + k * ev.eta * dt * ev.p_max / ev.capacity;
      if (ev.soc_des > 1.0) {
        ev.capacity = k * ev.eta * dt * ev.p_max / (0.95 - ev.soc_ini);
        ev.soc_des = 0.95;
      }
      out.push_back(ev);
    }
    return out;
  }

  RowMatrix profiles(const Problem& problem) {
    RowMatrix c(problem.agents(), problem.horizon());
    for (int i = 0; i < problem.agents(); ++i) {
      auto row = vec(static_cast<std::size_t>(problem.horizon()), 0.0, 1.0);
      project_feasible_inplace(row, problem.targets[static_cast<std::size_t>(i)]);
      for (int t = 0; t < problem.horizon(); ++t) c(i, t) = row[static_cast<std::size_t>(t)];
    }
    return c;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Problem random_problem(Gen& gen, int n, int agents, int horizon, double dt = 0.25) {
  const auto feeder = gen.feeder(n);
  const Fleet fleet(gen.evs(agents, n, horizon, dt), dt, horizon);
  return Problem::assemble(feeder, fleet, gen.baseline(n, horizon, 5.0, 40.0));
}

// 2-bus chain, 2 EVs, T=4: the small instance shared by the solver and oracle tests.
inline Problem small_problem() {
  FeederModel feeder;
  feeder.n = 2;
  feeder.s_base = 1000.0;
  feeder.lines = {{0, 1, 0.05, 0.05}, {1, 2, 0.05, 0.05}};
  std::vector<EvSpec> evs(2);
  evs[0] = {0, 1, 6.6, 20.0, 0.3, 0.7, 1.0};
  evs[1] = {1, 2, 6.6, 20.0, 0.4, 0.7, 1.0};
  const Fleet fleet(evs, 1.0, 4);
  BaselineLoad baseline{RowMatrix(2, 4), RowMatrix::Zero(2, 4)};
  baseline.p << 6.0, 2.0, 1.0, 4.0,
                5.0, 3.0, 1.0, 2.0;
  return Problem::assemble(feeder, fleet, baseline);
}

// Deterministic relative error used for finite-difference checks; the floor
// keeps near-zero entries from dominating.
inline double rel_err(double a, double b, double floor = 1.0) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace evtest

namespace evtest {

// Closest grid point of {z in [0,1]^T, sum z = K} to c, found by exhaustive
// search over the first T-1 coordinates with zooming down to `resolution`.
inline std::vector<double> grid_projection(const std::vector<double>& c, double K, double resolution = 1e-3) {
  const std::size_t T = c.size();
  const std::size_t dims = T - 1;
  std::vector<double> lo(dims, 0.0), best;
  double best_cost = std::numeric_limits<double>::infinity();
  const int points = dims <= 1 ? 1001 : (dims == 2 ? 201 : 41);
  double width = 1.0;
  for (;;) {
    const double h = width / (points - 1);
    std::vector<int> idx(dims, 0);
    std::vector<double> z(T);
    for (;;) {
      double sum = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        z[d] = lo[d] + h * idx[d];
        sum += z[d];
      }
      z[T - 1] = K - sum;
      if (z[T - 1] >= -1e-12 && z[T - 1] <= 1.0 + 1e-12) {
        double cost = 0.0;
        for (std::size_t t = 0; t < T; ++t) cost += (z[t] - c[t]) * (z[t] - c[t]);
        if (cost < best_cost) best_cost = cost, best = z;
      }
      std::size_t d = 0;
      while (d < dims && ++idx[d] == points) idx[d++] = 0;
      if (d == dims) break;
    }
    if (dims == 0 || h <= resolution || best.empty()) break;
    // Next box is 0.4 of the current width, centred on the incumbent and
    // shifted back inside [0, 1].
    width *= 0.4;
    for (std::size_t d = 0; d < dims; ++d)
      lo[d] = std::clamp(best[d] - 0.5 * width, 0.0, 1.0 - width);
  }
  return best;
}

}  // namespace evtest

namespace evtest {

// Lagrangian recomputed from the problem data in long double, independent of
// the library's evaluators: F + interests + sum lambda (v_min^2 v0^2 - y).
inline long double naive_lagrangian(const Problem& p, const RowMatrix& c, const RowMatrix& l, double v_min) {
  long double value = 0.0L;
  for (int t = 0; t < p.horizon(); ++t) {
    long double load = p.P_b[t];
    for (int i = 0; i < p.agents(); ++i) load += static_cast<long double>(p.p_max[static_cast<std::size_t>(i)]) * c(i, t);
    value += 0.5L * load * load;
  }
  for (const auto& term : p.interests)
    for (int t = 0; t < p.horizon(); ++t)
      value += static_cast<long double>(term.omega) * term.weights[t] * c(term.agent, t) * c(term.agent, t);
  const long double floor = static_cast<long double>(v_min) * v_min * p.v0 * p.v0;
  for (int b = 0; b < p.buses(); ++b)
    for (int t = 0; t < p.horizon(); ++t) {
      long double y = p.y_d(b, t);
      for (int i = 0; i < p.agents(); ++i) y += static_cast<long double>(p.D(b, i)) * c(i, t);
      value += static_cast<long double>(l(b, t)) * (floor - y);
    }
  return value;
}

}  // namespace evtest
