#include "evattack/scenario.hpp"

#include "evattack/oracle.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>

namespace evattack {

namespace {

using ojson = nlohmann::ordered_json;

std::array<double, 2> range_of(const ojson& j, const char* key, std::array<double, 2> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be [lo, hi]");
  return {r[0].get<double>(), r[1].get<double>()};
}

std::vector<int> parse_attackers(const ojson& j) {
  std::vector<int> out;
  if (j.is_array()) {
    for (const auto& a : j) out.push_back(a.get<int>());
  } else if (j.is_object()) {
    const int first = j.at("first").get<int>();
    const int count = j.at("count").get<int>();
    for (int a = first; a < first + count; ++a) out.push_back(a);
  } else {
    throw Error(ErrorCode::InvalidConfig, "attackers must be a list or {first, count}");
  }
  return out;
}

AttackSpec parse_attack(const ojson& j) {
  AttackSpec spec;
  spec.variant = parse_variant(j.at("variant").get<std::string>());
  spec.attackers = parse_attackers(j.at("attackers"));
  spec.omega1 = j.value("omega1", 0.0);
  spec.omega2 = j.value("omega2", 0.0);
  spec.t_d = j.value("t_d", 0);
  spec.m = j.value("m", spec.m);
  spec.M = j.value("M", spec.M);
  spec.eps_att = j.value("eps_att", 0.0);
  return spec;
}

SolverConfig parse_solver(const ojson& j) {
  SolverConfig s;
  s.alpha = j.value("alpha", s.alpha);
  s.beta = j.value("beta", s.beta);
  s.tau_c = j.value("tau_c", s.tau_c);
  s.tau_l = j.value("tau_l", s.tau_l);
  s.k_max = j.value("k_max", s.k_max);
  s.eps = j.value("eps", s.eps);
  if (j.contains("lambda_max") && !j.at("lambda_max").is_null()) s.lambda_max = j.at("lambda_max").get<double>();
  s.v_min = j.value("v_min", s.v_min);
  s.diminishing_step = j.value("diminishing_step", false);
  return s;
}

FleetGenerator parse_fleet_generator(const ojson& j) {
  FleetGenerator g;
  g.rng = j.value("rng", g.rng);
  g.seed = j.value("seed", g.seed);
  g.counts = j.at("counts").get<std::vector<int>>();
  g.p_max = j.value("p_max", g.p_max);
  g.capacity = range_of(j, "capacity", g.capacity);
  g.soc_ini = range_of(j, "soc_ini", g.soc_ini);
  g.soc_des = range_of(j, "soc_des", g.soc_des);
  g.eta = j.value("eta", g.eta);
  return g;
}

BaselineParams parse_baseline_params(const ojson& j) {
  BaselineParams b;
  b.peak_kw = j.value("peak_kw", b.peak_kw);
  b.valley_kw = j.value("valley_kw", b.valley_kw);
  b.morning_kw = j.value("morning_kw", b.morning_kw);
  b.start_hour = j.value("start_hour", b.start_hour);
  b.valley_hour = j.value("valley_hour", b.valley_hour);
  b.scale = j.value("scale", b.scale);
  b.reactive_ratio = j.value("reactive_ratio", b.reactive_ratio);
  b.weight_jitter = j.value("weight_jitter", b.weight_jitter);
  b.noise = j.value("noise", b.noise);
  b.seed = j.value("seed", b.seed);
  if (j.contains("bus_weights")) b.bus_weights = j.at("bus_weights").get<std::vector<double>>();
  return b;
}

std::string code_name(ErrorCode code) { return std::string(to_string(code)); }

}  // namespace

PinnedRng::PinnedRng(std::uint64_t seed) : engine_(seed) {}

double PinnedRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::vector<EvSpec> generate_fleet(const FleetGenerator& gen, int buses) {
  if (gen.rng != PinnedRng::kAlgorithm)
    throw Error(ErrorCode::InvalidConfig, "unsupported rng '" + gen.rng + "', expected mt19937_64");
  if (static_cast<int>(gen.counts.size()) != buses)
    throw Error(ErrorCode::DimensionMismatch, "fleet counts list has " + std::to_string(gen.counts.size()) +
                                                  " entries for " + std::to_string(buses) + " buses");
  PinnedRng rng(gen.seed);
  std::vector<EvSpec> evs;
  for (int b = 0; b < buses; ++b) {
    for (int j = 0; j < gen.counts[static_cast<std::size_t>(b)]; ++j) {
      EvSpec ev;
      ev.id = static_cast<int>(evs.size());
      ev.node = b + 1;
      ev.p_max = gen.p_max;
      ev.eta = gen.eta;
      ev.capacity = rng.uniform(gen.capacity[0], gen.capacity[1]);
      ev.soc_ini = rng.uniform(gen.soc_ini[0], gen.soc_ini[1]);
      ev.soc_des = rng.uniform(gen.soc_des[0], gen.soc_des[1]);
      evs.push_back(ev);
    }
  }
  return evs;
}

BaselineLoad generate_baseline(const BaselineParams& params, int buses, int horizon, double dt) {
  if (buses <= 0 || horizon <= 0 || !(dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "baseline dimensions");
  if (!params.bus_weights.empty() && static_cast<int>(params.bus_weights.size()) != buses)
    throw Error(ErrorCode::DimensionMismatch, "bus_weights length differs from bus count");

  PinnedRng rng(params.seed);
  std::vector<double> weights(static_cast<std::size_t>(buses));
  double total = 0.0;
  for (int b = 0; b < buses; ++b) {
    const double w = params.bus_weights.empty() ? 1.0 : params.bus_weights[static_cast<std::size_t>(b)];
    weights[static_cast<std::size_t>(b)] = w * (1.0 + params.weight_jitter * (rng.uniform() - 0.5));
    total += weights[static_cast<std::size_t>(b)];
  }
  for (auto& w : weights) w /= total;

  const double span = horizon * dt;
  double to_valley = std::fmod(params.valley_hour - params.start_hour + 48.0, 24.0);
  to_valley = std::clamp(to_valley, dt, std::max(dt, span - dt));

  BaselineLoad baseline{RowMatrix(buses, horizon), RowMatrix(buses, horizon)};
  for (int t = 0; t < horizon; ++t) {
    const double h = (t + 0.5) * dt;
    double aggregate = 0.0;
    if (h <= to_valley) {
      const double s = 0.5 * (1.0 + std::cos(std::numbers::pi * h / to_valley));
      aggregate = params.valley_kw + (params.peak_kw - params.valley_kw) * s;
    } else {
      const double s = 0.5 * (1.0 - std::cos(std::numbers::pi * (h - to_valley) / (span - to_valley)));
      aggregate = params.valley_kw + (params.morning_kw - params.valley_kw) * s;
    }
    for (int b = 0; b < buses; ++b) {
      const double jitter = params.noise > 0.0 ? 1.0 + params.noise * (2.0 * rng.uniform() - 1.0) : 1.0;
      const double p = params.scale * aggregate * weights[static_cast<std::size_t>(b)] * jitter;
      baseline.p(b, t) = p;
      baseline.q(b, t) = params.reactive_ratio * p;
    }
  }
  return baseline;
}

std::filesystem::path ScenarioConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

ScenarioConfig parse_scenario(const ojson& doc, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  c.raw = doc;
  c.base_dir = base_dir;
  try {
    c.name = doc.value("name", c.name);
    c.feeder = doc.at("feeder").get<std::string>();
    const auto& fleet = doc.at("fleet");
    if (fleet.contains("file")) c.fleet_file = fleet.at("file").get<std::string>();
    if (fleet.contains("generator")) c.fleet_generator = parse_fleet_generator(fleet.at("generator"));
    if (c.fleet_file.has_value() == c.fleet_generator.has_value())
      throw Error(ErrorCode::InvalidConfig, "fleet needs exactly one of 'file' or 'generator'");
    const auto& baseline = doc.at("baseline");
    if (baseline.contains("file")) c.baseline_file = baseline.at("file").get<std::string>();
    if (baseline.contains("synthetic")) c.baseline_generator = parse_baseline_params(baseline.at("synthetic"));
    if (c.baseline_file.has_value() == c.baseline_generator.has_value())
      throw Error(ErrorCode::InvalidConfig, "baseline needs exactly one of 'file' or 'synthetic'");
    if (doc.contains("horizon")) {
      c.horizon = doc.at("horizon").value("T", c.horizon);
      c.dt = doc.at("horizon").value("dt", c.dt);
    }
    if (doc.contains("solver")) c.solver = parse_solver(doc.at("solver"));
    if (doc.contains("attacks")) {
      for (const auto& a : doc.at("attacks")) c.attacks.push_back(parse_attack(a));
    }
    if (doc.contains("output")) {
      c.output_dir = doc.at("output").value("dir", c.output_dir.string());
      c.trace = doc.at("output").value("trace", false);
    }
    c.workers = doc.value("workers", 1);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  ojson doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_scenario(doc, path.parent_path());
}

ScenarioConfig attack_free_twin(const ScenarioConfig& config) {
  ScenarioConfig twin = config;
  twin.attacks.clear();
  twin.raw["attacks"] = ojson::array();
  return twin;
}

ScenarioConfig single_attack(const ScenarioConfig& config, std::size_t index) {
  ScenarioConfig one = config;
  one.attacks = {config.attacks.at(index)};
  one.raw["attacks"] = ojson::array({config.raw.at("attacks").at(index)});
  return one;
}

ValidationReport validate(const ScenarioConfig& config) {
  ValidationReport report;
  auto add = [&](std::string code, std::string message) { report.diagnostics.push_back({std::move(code), std::move(message)}); };

  FeederModel feeder;
  bool feeder_ok = false;
  try {
    feeder = load_feeder(config.resolve(config.feeder));
    build_adjacency(feeder);
    feeder_ok = true;
  } catch (const Error& e) {
    add(code_name(e.code()), e.what());
  }

  try {
    config.solver.check();
  } catch (const Error& e) {
    add(code_name(e.code()), e.what());
  }
  if (config.horizon <= 0) add("InvalidConfig", "horizon T must be positive");
  if (!(config.dt > 0.0)) add("InvalidConfig", "dt must be positive");
  if (config.workers < 1) add("InvalidConfig", "workers must be >= 1");

  int agents = 0;
  if (feeder_ok && config.horizon > 0 && config.dt > 0.0) {
    try {
      auto evs = config.fleet_file ? load_fleet(config.resolve(*config.fleet_file))
                                   : generate_fleet(*config.fleet_generator, feeder.n);
      agents = static_cast<int>(evs.size());
      for (const auto& ev : evs) {
        if (ev.node < 1 || ev.node > feeder.n)
          add("BadNodeIndex", "EV " + std::to_string(ev.id) + " at node " + std::to_string(ev.node));
      }
      const Fleet fleet(evs, config.dt, config.horizon);
      for (const auto& ev : fleet.evs()) {
        const double k = required_sum(ev, config.dt);
        if (k > config.horizon) {
          add("InfeasibleTarget", "EV " + std::to_string(ev.id) + " needs " + std::to_string(k) +
                                      " full-rate steps but the horizon has " + std::to_string(config.horizon));
        }
      }
    } catch (const Error& e) {
      add(code_name(e.code()), e.what());
    }
    try {
      const auto baseline = config.baseline_file
                                ? load_baseline(config.resolve(*config.baseline_file), feeder.n)
                                : generate_baseline(*config.baseline_generator, feeder.n, config.horizon, config.dt);
      if (baseline.horizon() != config.horizon)
        add("DimensionMismatch", "baseline has " + std::to_string(baseline.horizon()) + " steps, horizon is " +
                                     std::to_string(config.horizon));
    } catch (const Error& e) {
      add(code_name(e.code()), e.what());
    }
  }

  std::set<int> seen;
  for (std::size_t a = 0; a < config.attacks.size(); ++a) {
    const auto& spec = config.attacks[a];
    for (const auto& v : spec.violations(config.solver.eps, agents, config.horizon))
      add("InvalidAttack", "attacks[" + std::to_string(a) + "]: " + v);
    for (int i : spec.attackers) {
      if (!seen.insert(i).second) add("InvalidAttack", "agent " + std::to_string(i) + " listed in two attacks");
    }
  }
  return report;
}

Scenario build_scenario(const ScenarioConfig& config) {
  Scenario s;
  s.feeder = load_feeder(config.resolve(config.feeder));
  auto evs = config.fleet_file ? load_fleet(config.resolve(*config.fleet_file))
                               : generate_fleet(*config.fleet_generator, s.feeder.n);
  s.fleet = Fleet(std::move(evs), config.dt, config.horizon);
  s.baseline = config.baseline_file
                   ? load_baseline(config.resolve(*config.baseline_file), s.feeder.n)
                   : generate_baseline(*config.baseline_generator, s.feeder.n, config.horizon, config.dt);
  s.problem = Problem::assemble(s.feeder, s.fleet, s.baseline);
  return s;
}

RunArtifacts execute(const ScenarioConfig& config, int workers, const std::filesystem::path& trace_file) {
  RunArtifacts out;
  out.scenario = build_scenario(config);
  const auto& problem = out.scenario.problem;
  auto hooks = make_hooks(config.attacks, problem.agents(), problem.horizon());

  RunOptions options;
  options.workers = workers > 0 ? workers : config.workers;
  std::ofstream trace;
  if (!trace_file.empty()) {
    const bool fresh = !std::filesystem::exists(trace_file) || std::filesystem::file_size(trace_file) == 0;
    trace.open(trace_file, std::ios::app);
    if (!trace) throw Error(ErrorCode::Io, "cannot open trace file " + trace_file.string());
    trace.precision(17);
    if (fresh) trace << "k,residual,objective,min_voltage\n";
    options.trace = [&trace](const TraceRecord& r) {
      trace << r.k << ',' << r.residual << ',' << r.objective << ',' << r.min_voltage << '\n';
    };
  }

  const auto result = run(problem, config.solver, hooks, options);
  out.report = make_report(problem, result, hooks);
  out.report.scenario = config.name;
  out.report.config = config.raw;
  return out;
}

namespace {

void write_json(const ojson& j, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int report_invalid(const ValidationReport& validation) {
  for (const auto& d : validation.diagnostics) std::cerr << "error[" << d.code << "]: " << d.message << '\n';
  return kExitInvalid;
}

}  // namespace

int run_command(const ScenarioConfig& config, const std::filesystem::path& out_dir, int workers, bool trace) {
  const auto validation = validate(config);
  if (!validation.ok()) return report_invalid(validation);
  try {
    std::filesystem::create_directories(out_dir);
    const bool tracing = trace || config.trace;
    auto artifacts = execute(config, workers, tracing ? out_dir / "trace.csv" : std::filesystem::path{});
    write_json(to_json(artifacts.report), out_dir / "report.json");
    write_traces(artifacts.report, out_dir);
    std::cout << config.name << ": " << (artifacts.report.converged ? "converged" : "not converged") << " after "
              << artifacts.report.iterations << " iterations (" << artifacts.report.criterion
              << "), objective " << artifacts.report.objective << '\n';
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::NumericalDivergence ? kExitDivergence : kExitFailure;
  }
  return kExitOk;
}

int compare_command(const ScenarioConfig& config, const std::filesystem::path& out_dir, int workers) {
  const auto validation = validate(config);
  if (!validation.ok()) return report_invalid(validation);
  try {
    const auto twin = execute(attack_free_twin(config), workers);
    write_json(to_json(twin.report), out_dir / "attack_free" / "report.json");
    write_traces(twin.report, out_dir / "attack_free");

    OracleOptions oracle_options;
    oracle_options.v_min = config.solver.v_min;
    oracle_options.accept_unconverged = true;
    oracle_options.max_iterations = 200'000;
    const auto reference = solve_reference(twin.scenario.problem, oracle_options);

    ojson summary;
    summary["scenario"] = config.name;
    summary["reference"] = {{"objective", reference.objective}, {"residual", reference.residual}};
    summary["variants"] = ojson::array();
    for (std::size_t a = 0; a < config.attacks.size(); ++a) {
      const auto variant_config = single_attack(config, a);
      auto attacked = execute(variant_config, workers);
      const auto cmp = compare(twin.scenario.problem, attacked.report, twin.report, variant_config.attacks,
                               &reference.profiles);
      attacked.report.bound = cmp.bound;
      const auto dir = out_dir / ("attack_" + std::to_string(a) + "_" + std::string(to_string(config.attacks[a].variant)));
      write_json(to_json(attacked.report), dir / "report.json");
      write_traces(attacked.report, dir);
      auto entry = to_json(cmp);
      entry["variant"] = std::string(to_string(config.attacks[a].variant));
      entry["converged"] = attacked.report.converged;
      write_json(entry, dir / "comparison.json");
      summary["variants"].push_back(entry);
      std::cout << to_string(config.attacks[a].variant) << ": zeta=" << cmp.zeta
                << " objective_delta=" << cmp.objective_delta << " bound "
                << (cmp.bound && cmp.bound->holds ? "holds" : "VIOLATED") << '\n';
    }
    write_json(summary, out_dir / "comparison.json");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::NumericalDivergence ? kExitDivergence : kExitFailure;
  }
  return kExitOk;
}

int gen_baseline_command(const BaselineParams& params, int buses, int horizon, double dt,
                         const std::filesystem::path& out_file) {
  try {
    if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());
    save_baseline(generate_baseline(params, buses, horizon, dt), out_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

}  // namespace evattack
