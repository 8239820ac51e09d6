#include "support.hpp"

#include "evattack/scenario.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace evtest;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = EVATTACK_SCENARIO_DIR;

nlohmann::ordered_json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::ordered_json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scratch directory holding an edited copy of a bundled scenario.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("evattack_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::copy_file(kScenarios / "feeder_13bus.json", dir / "feeder_13bus.json");
  }
  ~Scratch() { fs::remove_all(dir); }

  fs::path write(const nlohmann::ordered_json& doc, const std::string& file = "config.json") const {
    std::ofstream(dir / file) << doc.dump(2);
    return dir / file;
  }
};

int cli(const std::string& args) {
  const std::string cmd = std::string(EVATTACK_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool has_code(const ValidationReport& r, const std::string& code) {
  for (const auto& d : r.diagnostics)
    if (d.code == code) return true;
  return false;
}

}  // namespace

TEST_CASE("pinned generator") {
  std::mt19937_64 reference(1);
  PinnedRng rng(1);
  for (int i = 0; i < 5; ++i) CHECK(rng.uniform() == static_cast<double>(reference() >> 11) / 9007199254740992.0);

  // The standard fixes the 10000th output of a default-seeded engine.
  std::mt19937_64 standard;
  standard.discard(9999);
  CHECK(standard() == 9981545732273789042ULL);
  CHECK(PinnedRng::kAlgorithm == "mt19937_64");
}

TEST_CASE("fleet generator") {
  FleetGenerator gen;
  gen.seed = 7;
  gen.counts = {2, 0, 3};
  const auto a = generate_fleet(gen, 3);
  const auto b = generate_fleet(gen, 3);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].capacity == b[i].capacity);
    CHECK(a[i].soc_ini == b[i].soc_ini);
    CHECK(a[i].id == static_cast<int>(i));
    CHECK(a[i].capacity >= 18.0);
    CHECK(a[i].capacity < 20.0);
    CHECK(a[i].soc_ini >= 0.3);
    CHECK(a[i].soc_des >= 0.7);
    CHECK(a[i].soc_des < 0.9);
  }
  CHECK(a[1].node == 1);
  CHECK(a[2].node == 3);

  // Draw order per EV: capacity, soc_ini, soc_des.
  PinnedRng rng(7);
  const double cap = rng.uniform(18.0, 20.0);
  const double ini = rng.uniform(0.3, 0.5);
  CHECK(a[0].capacity == cap);
  CHECK(a[0].soc_ini == ini);

  gen.counts = {1, 1};
  CHECK_THROWS_AS(generate_fleet(gen, 3), Error);
  gen.counts = {1, 1, 1};
  gen.rng = "pcg64";
  CHECK_THROWS_AS(generate_fleet(gen, 3), Error);
}

TEST_CASE("baseline generator") {
  BaselineParams params;
  const auto base = generate_baseline(params, 12, 52, 0.25);
  CHECK(base.p.minCoeff() > 0.0);
  const Vector agg = base.aggregate();
  Eigen::Index low = 0;
  agg.minCoeff(&low);
  CHECK(low > 0);
  CHECK(low < 51);
  CHECK(agg[0] == doctest::Approx(params.peak_kw).epsilon(0.01));
  CHECK(agg.minCoeff() == doctest::Approx(params.valley_kw).epsilon(0.01));
  CHECK((base.q - 0.3 * base.p).cwiseAbs().maxCoeff() <= 1e-12);

  params.scale = 0.0;
  const auto zero = generate_baseline(params, 12, 52, 0.25);
  CHECK(zero.p.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.q.cwiseAbs().maxCoeff() == 0.0);

  BaselineParams noisy;
  noisy.noise = 0.1;
  noisy.seed = 5;
  CHECK(generate_baseline(noisy, 4, 10, 0.25).p == generate_baseline(noisy, 4, 10, 0.25).p);
  BaselineParams other = noisy;
  other.seed = 6;
  CHECK(generate_baseline(noisy, 4, 10, 0.25).p != generate_baseline(other, 4, 10, 0.25).p);

  noisy.bus_weights = {1.0, 2.0};
  CHECK_THROWS_AS(generate_baseline(noisy, 4, 10, 0.25), Error);
}

TEST_CASE("bundled scenarios validate") {
  for (const char* name : {"attack_free.json", "smooth.json", "rush.json", "stealthy_smooth.json"}) {
    CAPTURE(name);
    const auto config = load_scenario(kScenarios / name);
    const auto report = validate(config);
    for (const auto& d : report.diagnostics) MESSAGE(d.code << ": " << d.message);
    CHECK(report.ok());
    const auto s = build_scenario(config);
    CHECK(s.problem.agents() == 50);
    CHECK(s.problem.buses() == 12);
    CHECK(s.problem.horizon() == 52);
  }
}

TEST_CASE("validation diagnostics") {
  Scratch scratch("validate");
  auto doc = read_json(kScenarios / "stealthy_smooth.json");
  doc["attacks"][0]["eps_att"] = 1e-5;
  const auto stealth = validate(load_scenario(scratch.write(doc)));
  CHECK(has_code(stealth, "InvalidAttack"));

  doc = read_json(kScenarios / "attack_free.json");
  doc["horizon"]["T"] = 4;
  const auto short_horizon = validate(load_scenario(scratch.write(doc)));
  CHECK(has_code(short_horizon, "InfeasibleTarget"));
  CHECK(short_horizon.diagnostics.size() >= 10);  // one per EV that cannot finish

  doc = read_json(kScenarios / "attack_free.json");
  doc["feeder"] = "missing.json";
  CHECK(has_code(validate(load_scenario(scratch.write(doc))), "Io"));

  auto feeder = read_json(kScenarios / "feeder_13bus.json");
  feeder["lines"][3]["from"] = 3;
  feeder["lines"][3]["to"] = 2;  // 2-3 already exists
  scratch.write(feeder, "loop.json");
  doc = read_json(kScenarios / "attack_free.json");
  doc["feeder"] = "loop.json";
  CHECK(has_code(validate(load_scenario(scratch.write(doc))), "NonRadialTopology"));

  doc = read_json(kScenarios / "smooth.json");
  doc["attacks"].push_back(doc["attacks"][0]);
  CHECK(has_code(validate(load_scenario(scratch.write(doc))), "InvalidAttack"));

  doc = read_json(kScenarios / "attack_free.json");
  doc["solver"]["alpha"] = -1.0;
  doc["workers"] = 0;
  CHECK(validate(load_scenario(scratch.write(doc))).diagnostics.size() == 2);

  doc = read_json(kScenarios / "attack_free.json");
  doc.erase("fleet");
  CHECK_THROWS_AS(load_scenario(scratch.write(doc)), Error);
}

TEST_CASE("attack-free twin differs only in the attack section") {
  const auto config = load_scenario(kScenarios / "stealthy_smooth.json");
  const auto twin = attack_free_twin(config);
  CHECK(twin.attacks.empty());
  auto a = config.raw, b = twin.raw;
  a.erase("attacks");
  b.erase("attacks");
  CHECK(a == b);
  CHECK(twin.raw["attacks"].empty());
  CHECK(single_attack(config, 0).attacks.size() == 1);
}

TEST_CASE("cli exit codes and determinism") {
  Scratch scratch("cli");
  const auto cfg = (kScenarios / "attack_free.json").string();
  CHECK(cli("validate --config " + cfg) == 0);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("run") == 2);

  auto doc = read_json(kScenarios / "stealthy_smooth.json");
  doc["attacks"][0]["eps_att"] = 1e-5;
  const auto bad = scratch.write(doc, "bad.json");
  CHECK(cli("validate --config " + bad.string()) == 2);
  CHECK(cli("run --config " + bad.string() + " --out " + (scratch.dir / "bad").string()) == 2);

  doc = read_json(kScenarios / "attack_free.json");
  doc["solver"]["alpha"] = 1e308;
  const auto diverging = scratch.write(doc, "diverge.json");
  CHECK(cli("run --config " + diverging.string() + " --out " + (scratch.dir / "div").string()) == 3);

  const auto one = scratch.dir / "one", two = scratch.dir / "two";
  REQUIRE(cli("run --config " + cfg + " --out " + one.string() + " --trace") == 0);
  REQUIRE(cli("run --config " + cfg + " --out " + two.string() + " --workers 4") == 0);
  CHECK(slurp(one / "report.json") == slurp(two / "report.json"));
  CHECK(slurp(one / "load.csv") == slurp(two / "load.csv"));
  for (const char* f : {"load.csv", "voltage.csv", "profiles.csv", "residuals.csv", "trace.csv"})
    CHECK(fs::exists(one / f));
  CHECK_FALSE(fs::exists(two / "trace.csv"));
  const auto trace = slurp(one / "trace.csv");
  CHECK(trace.rfind("k,residual,objective,min_voltage\n", 0) == 0);

  REQUIRE(cli("gen-baseline --config " + cfg + " --out " + (scratch.dir / "a.csv").string()) == 0);
  REQUIRE(cli("gen-baseline --config " + cfg + " --out " + (scratch.dir / "b.csv").string()) == 0);
  CHECK(slurp(scratch.dir / "a.csv") == slurp(scratch.dir / "b.csv"));
  REQUIRE(cli("gen-baseline --config " + cfg + " --seed 99 --out " + (scratch.dir / "c.csv").string()) == 0);
  CHECK(slurp(scratch.dir / "a.csv") != slurp(scratch.dir / "c.csv"));
  CHECK(load_baseline(scratch.dir / "a.csv", 12).horizon() == 52);
}

TEST_CASE("compare writes one comparison per attack") {
  Scratch scratch("compare");
  const auto out = scratch.dir / "cmp";
  REQUIRE(cli("compare --config " + (kScenarios / "smooth.json").string() + " --out " + out.string()) == 0);
  const auto summary = read_json(out / "comparison.json");
  REQUIRE(summary["variants"].size() == 1);
  CHECK(summary["variants"][0]["bound"]["holds"].get<bool>());
  CHECK(summary["variants"][0]["objective_delta"].get<double>() > 0.0);
  CHECK(fs::exists(out / "attack_free" / "report.json"));
  CHECK(fs::exists(out / "attack_0_smooth" / "report.json"));
}
