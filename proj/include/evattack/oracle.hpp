#pragma once

#include "evattack/engine.hpp"

#include <string>

namespace evattack {

struct ReferenceSolution {
  RowMatrix profiles;   // s x T
  RowMatrix dual;       // n x T
  double objective = 0.0;  // F(C)
  double penalized = 0.0;  // F(C) plus the problem's interest terms
  std::string method;      // "high-precision-pd" or "grid-brute-force"
  double residual = 0.0;   // optimality certificate achieved
  int iterations = 0;
};

struct OracleOptions {
  double tol = 1e-9;
  int max_iterations = 1'000'000;
  double v_min = 0.954;
  bool voltage_constraint = true;
  /// Return the best iterate instead of throwing OracleNotConverged.
  bool accept_unconverged = false;
};

/// ||P(C - grad_C L(C, lambda)) - C||, the unit-step projected gradient of the
/// Lagrangian (including the problem's interest terms).
double projected_gradient_norm(const Problem& problem, const RowMatrix& profiles, const RowMatrix& dual);

/// High-precision solution of min F + interests s.t. C_i in its feasible set
/// and the voltage floor: multiplier iterations on the voltage constraint with
/// restarted accelerated projected-gradient inner solves.
ReferenceSolution solve_reference(const Problem& problem, const OracleOptions& options = {});

/// Exhaustive search over each EV's constraint plane, refined by zooming
/// until the grid spacing reaches `resolution`. Requires s * T <= 8.
ReferenceSolution grid_brute_force(const Problem& problem, double resolution, double v_min = 0.954,
                                   bool voltage_constraint = true);

}  // namespace evattack
