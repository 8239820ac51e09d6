#include "evattack/feeder.hpp"

#include "evattack/fleet.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace evattack {

namespace {

int find_root(std::vector<int>& up, int a) {
  while (up[a] != a) {
    up[a] = up[up[a]];
    a = up[a];
  }
  return a;
}

}  // namespace

Vector BaselineLoad::aggregate() const {
  Vector total = Vector::Zero(p.cols());
  for (Eigen::Index b = 0; b < p.rows(); ++b) total += p.row(b).transpose();
  return total;
}

std::vector<int> radial_parents(const FeederModel& feeder) {
  const int n = feeder.n;
  if (n <= 0) throw Error(ErrorCode::InvalidConfig, "feeder needs at least one bus");
  if (!(feeder.v0 > 0.0)) throw Error(ErrorCode::InvalidConfig, "v0 must be positive");

  std::vector<int> up(static_cast<std::size_t>(n + 1));
  std::iota(up.begin(), up.end(), 0);
  std::vector<std::vector<int>> neighbours(static_cast<std::size_t>(n + 1));
  for (const auto& line : feeder.lines) {
    if (line.from < 0 || line.from > n || line.to < 0 || line.to > n)
      throw Error(ErrorCode::BadNodeIndex, "line endpoint outside 0.." + std::to_string(n));
    if (line.r < 0.0 || line.x < 0.0)
      throw Error(ErrorCode::InvalidConfig, "negative line impedance");
    const int a = find_root(up, line.from);
    const int b = find_root(up, line.to);
    if (a == b) {
      throw Error(ErrorCode::NonRadialTopology, "line " + std::to_string(line.from) + "-" +
                                                    std::to_string(line.to) + " closes a loop");
    }
    up[a] = b;
    neighbours[line.from].push_back(line.to);
    neighbours[line.to].push_back(line.from);
  }

  std::vector<int> parent(static_cast<std::size_t>(n + 1), -1);
  std::vector<int> stack{0};
  parent[0] = 0;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : neighbours[u]) {
      if (parent[v] >= 0) continue;
      parent[v] = u;
      stack.push_back(v);
    }
  }
  for (int b = 1; b <= n; ++b) {
    if (parent[b] < 0)
      throw Error(ErrorCode::DisconnectedBus, "bus " + std::to_string(b) + " unreachable from head");
  }
  return parent;
}

AdjacencyMatrices build_adjacency(const FeederModel& feeder) {
  const auto parent = radial_parents(feeder);
  const int n = feeder.n;

  // Impedance of the line feeding each bus from its parent.
  std::vector<double> r_up(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> x_up(static_cast<std::size_t>(n + 1), 0.0);
  for (const auto& line : feeder.lines) {
    const int child = parent[line.to] == line.from ? line.to : line.from;
    r_up[child] = line.r;
    x_up[child] = line.x;
  }

  // Every line (parent(c), c) lies on the head path of all buses in subtree(c),
  // so it contributes to R[a][b] for every pair a, b in that subtree.
  std::vector<std::vector<int>> ancestors(static_cast<std::size_t>(n + 1));
  for (int b = 1; b <= n; ++b) {
    for (int u = b; u != 0; u = parent[u]) ancestors[b].push_back(u);
  }

  AdjacencyMatrices adj{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (int a = 1; a <= n; ++a) {
    for (int b = a; b <= n; ++b) {
      double r = 0.0;
      double x = 0.0;
      for (int u : ancestors[a]) {
        for (int v : ancestors[b]) {
          if (u == v) {
            r += r_up[u];
            x += x_up[u];
          }
        }
      }
      adj.R(a - 1, b - 1) = adj.R(b - 1, a - 1) = r;
      adj.X(a - 1, b - 1) = adj.X(b - 1, a - 1) = x;
    }
  }
  return adj;
}

Matrix build_sensitivity(const AdjacencyMatrices& adj, const Fleet& fleet, double s_base) {
  const auto n = adj.R.rows();
  Matrix D(n, fleet.size());
  for (int i = 0; i < fleet.size(); ++i) {
    const int node = fleet[i].node;
    if (node < 1 || node > n)
      throw Error(ErrorCode::BadNodeIndex, "EV " + std::to_string(fleet[i].id) + " at node " +
                                               std::to_string(node));
    D.col(i) = -2.0 * (fleet[i].p_max / s_base) * adj.R.col(node - 1);
  }
  return D;
}

Vector baseline_voltage(const AdjacencyMatrices& adj, const BaselineLoad& baseline, int t,
                        double v0, double s_base) {
  if (t < 0 || t >= baseline.horizon())
    throw Error(ErrorCode::IndexOutOfRange, "time step " + std::to_string(t));
  if (baseline.buses() != adj.R.rows())
    throw Error(ErrorCode::DimensionMismatch, "baseline bus count differs from feeder");
  const Vector p = baseline.p.col(t) / s_base;
  const Vector q = baseline.q.col(t) / s_base;
  return Vector::Constant(adj.R.rows(), v0 * v0) - 2.0 * adj.R * p - 2.0 * adj.X * q;
}

RowMatrix baseline_voltages(const AdjacencyMatrices& adj, const BaselineLoad& baseline, double v0,
                            double s_base) {
  RowMatrix y(baseline.buses(), baseline.horizon());
  for (int t = 0; t < baseline.horizon(); ++t) y.col(t) = baseline_voltage(adj, baseline, t, v0, s_base);
  return y;
}

Vector nodal_voltages(const Matrix& D, const Vector& y_d, std::span<const double> rates) {
  if (static_cast<Eigen::Index>(rates.size()) != D.cols() || y_d.size() != D.rows())
    throw Error(ErrorCode::DimensionMismatch, "nodal_voltages operand sizes");
  const Eigen::Map<const Vector> c(rates.data(), static_cast<Eigen::Index>(rates.size()));
  return y_d + D * c;
}

FeederModel load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open feeder file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  FeederModel feeder;
  feeder.v0 = j.value("v0", 1.0);
  feeder.s_base = j.value("s_base", 1000.0);
  for (const auto& l : j.at("lines")) {
    feeder.lines.push_back({l.at("from").get<int>(), l.at("to").get<int>(), l.at("r").get<double>(),
                            l.at("x").get<double>()});
  }
  feeder.n = j.contains("n") ? j.at("n").get<int>() : static_cast<int>(feeder.lines.size());
  return feeder;
}

void save_feeder(const FeederModel& feeder, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["n"] = feeder.n;
  j["v0"] = feeder.v0;
  j["s_base"] = feeder.s_base;
  j["lines"] = nlohmann::ordered_json::array();
  for (const auto& l : feeder.lines)
    j["lines"].push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  std::ofstream(path) << j.dump(2) << '\n';
}

BaselineLoad load_baseline(const std::filesystem::path& path, int n) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open baseline file " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("bus,", 0) != 0)
    throw Error(ErrorCode::InvalidConfig, path.string() + ": header must start with 'bus,'");
  const auto horizon = static_cast<int>(std::count(line.begin(), line.end(), ','));

  BaselineLoad baseline{RowMatrix::Zero(n, horizon), RowMatrix::Zero(n, horizon)};
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream cells(line);
    std::string key;
    std::getline(cells, key, ',');
    if (key.size() < 2 || (key[0] != 'p' && key[0] != 'q'))
      throw Error(ErrorCode::InvalidConfig, path.string() + " row " + std::to_string(row) +
                                                ": bus cell must be p<k> or q<k>");
    const int bus = std::stoi(key.substr(1));
    if (bus < 1 || bus > n) throw Error(ErrorCode::BadNodeIndex, "baseline row for bus " + key);
    auto& target = key[0] == 'p' ? baseline.p : baseline.q;
    if (key[0] == 'p') seen[static_cast<std::size_t>(bus - 1)] = true;
    std::string cell;
    int t = 0;
    while (std::getline(cells, cell, ',')) {
      if (t >= horizon) throw Error(ErrorCode::DimensionMismatch, "baseline row too long: " + key);
      target(bus - 1, t++) = std::stod(cell);
    }
    if (t != horizon) throw Error(ErrorCode::DimensionMismatch, "baseline row too short: " + key);
  }
  for (int b = 0; b < n; ++b) {
    if (!seen[static_cast<std::size_t>(b)])
      throw Error(ErrorCode::InvalidConfig, "baseline has no real-power row for bus " + std::to_string(b + 1));
  }
  if (!baseline.p.allFinite() || !baseline.q.allFinite())
    throw Error(ErrorCode::InvalidConfig, "baseline contains non-finite values");
  return baseline;
}

void save_baseline(const BaselineLoad& baseline, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  out << "bus";
  for (int t = 0; t < baseline.horizon(); ++t) out << ",t" << t;
  out << '\n';
  for (const auto* kind : {"p", "q"}) {
    const auto& m = kind[0] == 'p' ? baseline.p : baseline.q;
    for (int b = 0; b < baseline.buses(); ++b) {
      out << kind << b + 1;
      for (int t = 0; t < baseline.horizon(); ++t) out << ',' << m(b, t);
      out << '\n';
    }
  }
}

}  // namespace evattack
