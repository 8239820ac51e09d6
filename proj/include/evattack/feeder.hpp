#pragma once

#include "evattack/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace evattack {

class Fleet;

struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
};

/// Radial feeder. Bus 0 is the feeder head; buses 1..n carry load.
struct FeederModel {
  int n = 0;
  std::vector<Line> lines;
  double v0 = 1.0;
  double s_base = 1000.0;  // kW
};

/// Shared-path resistance and reactance matrices (n x n, p.u.).
struct AdjacencyMatrices {
  Matrix R;
  Matrix X;
};

/// Per-bus baseline demand over the horizon. Row b-1 holds bus b.
struct BaselineLoad {
  RowMatrix p;  // kW, n x T
  RowMatrix q;  // kvar, n x T

  int buses() const { return static_cast<int>(p.rows()); }
  int horizon() const { return static_cast<int>(p.cols()); }
  /// Aggregate real demand P_b(t), the column sums of p.
  Vector aggregate() const;
};

/// Depth-first parent of every bus (index 0 unused) after validating that the
/// lines form a tree rooted at the head.
std::vector<int> radial_parents(const FeederModel& feeder);

AdjacencyMatrices build_adjacency(const FeederModel& feeder);

/// D = -2 R G diag(p_max / s_base), n x s.
Matrix build_sensitivity(const AdjacencyMatrices& adj, const Fleet& fleet, double s_base);

/// Squared voltages with no EV load at step t: v0^2 - 2 R p_b(t) - 2 X q_b(t) in p.u.^2.
Vector baseline_voltage(const AdjacencyMatrices& adj, const BaselineLoad& baseline, int t,
                        double v0, double s_base);

/// baseline_voltage for every step, n x T.
RowMatrix baseline_voltages(const AdjacencyMatrices& adj, const BaselineLoad& baseline, double v0,
                            double s_base);

/// y(t) = y_d(t) + D C(t). Rates are normalized charging rates in [0, 1].
Vector nodal_voltages(const Matrix& D, const Vector& y_d, std::span<const double> rates);

FeederModel load_feeder(const std::filesystem::path& path);
void save_feeder(const FeederModel& feeder, const std::filesystem::path& path);

/// CSV with header `bus,t0,...`; the bus cell is `p<k>` or `q<k>` for bus k.
/// Buses without a reactive row get q = 0.
BaselineLoad load_baseline(const std::filesystem::path& path, int n);
void save_baseline(const BaselineLoad& baseline, const std::filesystem::path& path);

}  // namespace evattack
