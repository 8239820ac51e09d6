#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <numeric>

using namespace evtest;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Recovers the multiplier from the output and checks z = clip(c + mu, 0, 1).
bool satisfies_kkt(const std::vector<double>& c, const std::vector<double>& z, double K) {
  double lo = -1e300, hi = 1e300;
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (z[t] <= 1e-12) hi = std::min(hi, -c[t]);
    else if (z[t] >= 1.0 - 1e-12) lo = std::max(lo, 1.0 - c[t]);
    else lo = std::max(lo, z[t] - c[t] - 1e-9), hi = std::min(hi, z[t] - c[t] + 1e-9);
  }
  return lo <= hi + 1e-9 && std::abs(sum(z) - K) <= 1e-9;
}

}  // namespace

TEST_CASE("required energy") {
  CHECK(required_energy({0, 1, 6.6, 20, 0.5, 0.9, 1.0}) == doctest::Approx(8.0));
  CHECK(required_energy({0, 1, 6.6, 18, 0.3, 0.7, 1.0}) == doctest::Approx(7.2));
  CHECK(required_energy({0, 1, 6.6, 18, 0.6, 0.6, 1.0}) == 0.0);
  CHECK(required_sum({0, 1, 6.6, 20, 0.5, 0.9, 0.8}, 0.25) == doctest::Approx(8.0 / (0.8 * 0.25 * 6.6)));
}

TEST_CASE("fleet validation") {
  const EvSpec ok{0, 1, 6.6, 19, 0.4, 0.8, 1.0};
  CHECK_NOTHROW(Fleet({ok}, 0.25, 52));
  auto bad = ok;
  bad.p_max = 0.0;
  CHECK_THROWS_AS(Fleet({bad}, 0.25, 52), Error);
  bad = ok;
  bad.soc_des = 0.3;
  CHECK_THROWS_AS(Fleet({bad}, 0.25, 52), Error);
  bad = ok;
  bad.eta = 1.2;
  CHECK_THROWS_AS(Fleet({bad}, 0.25, 52), Error);
  auto second = ok;
  second.node = 3;
  CHECK_THROWS_AS(Fleet({second, ok}, 0.25, 52), Error);
  CHECK_THROWS_AS(Fleet({ok}, 0.0, 52), Error);

  // 19 * 0.4 / (0.25 * 6.6) = 4.6 full-rate steps do not fit in 4.
  try {
    Fleet({ok}, 0.25, 4).required_sums();
    FAIL("expected InfeasibleTarget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleTarget);
  }
}

TEST_CASE("projection examples") {
  const std::vector<double> feasible{0.2, 0.5, 0.8};
  CHECK(dist(project_feasible(feasible, 1.5), feasible) < 1e-12);
  CHECK(project_feasible(std::vector<double>{0.3, -2.0, 5.0}, 3.0) == std::vector<double>{1.0, 1.0, 1.0});

  const std::vector<double> c{1.2, 0.4, 0.1};
  const auto z = project_feasible(c, 1.5);
  const auto ref = grid_projection(c, 1.5);
  CHECK(dist(z, ref) <= 5e-3);
  // mu = 0 already clips to the target sum.
  CHECK(z[0] == doctest::Approx(1.0));
  CHECK(z[1] == doctest::Approx(0.4));
  CHECK(z[2] == doctest::Approx(0.1));

  CHECK_THROWS_AS(project_feasible(c, 3.5), Error);
  CHECK_THROWS_AS(project_feasible(c, -0.1), Error);
}

TEST_CASE("projection agrees with grid search and satisfies its invariants") {
  Gen gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    CAPTURE(trial);
    const auto T = static_cast<std::size_t>(gen.integer(2, 4));
    const auto c = gen.vec(T, -1.0, 2.0);
    const double K = gen.uniform(0.0, static_cast<double>(T));
    const auto z = project_feasible(c, K);
    CHECK(dist(z, grid_projection(c, K)) <= 5e-3);
    CHECK(dist(project_feasible(z, K), z) <= 1e-9);
    CHECK(satisfies_kkt(c, z, K));

    const auto d = gen.vec(T, -1.0, 2.0);
    CHECK(dist(project_feasible(c, K), project_feasible(d, K)) <= dist(c, d) + 1e-9);
  }
}

TEST_CASE("projection invariants at horizon length") {
  Gen gen(23);
  for (int trial = 0; trial < 200; ++trial) {
    CAPTURE(trial);
    const auto c = gen.vec(52, -3.0, 3.0);
    const double K = gen.uniform(0.0, 52.0);
    const auto z = project_feasible(c, K);
    CHECK(satisfies_kkt(c, z, K));
    CHECK(dist(project_feasible(z, K), z) <= 1e-9);
    const auto d = gen.vec(52, -3.0, 3.0);
    CHECK(dist(z, project_feasible(d, K)) <= dist(c, d) + 1e-9);
  }
}

TEST_CASE("shrink projection") {
  const std::vector<double> x{0.9, -0.2, 0.6};
  CHECK(dist(shrink_project(x, 1.0, 1.2), project_feasible(x, 1.2)) <= 1e-15);
  const auto half = shrink_project(std::vector<double>{0.5, 0.5}, 0.5, 1.0);
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(shrink_project(x, 0.0, 1.0), Error);
  CHECK_THROWS_AS(shrink_project(x, 1.5, 1.0), Error);

  Gen gen(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto T = static_cast<std::size_t>(gen.integer(1, 52));
    const auto v = gen.vec(T, -5.0, 5.0);
    const double K = gen.uniform(0.0, static_cast<double>(T));
    const auto z = shrink_project(v, gen.uniform(0.05, 1.0), K);
    CHECK(*std::min_element(z.begin(), z.end()) >= 0.0);
    CHECK(*std::max_element(z.begin(), z.end()) <= 1.0);
    CHECK(std::abs(sum(z) - K) <= 1e-8);
  }
}

TEST_CASE("fleet file round-trip") {
  const auto path = std::filesystem::temp_directory_path() / "evattack_fleet_test.json";
  Gen gen(2);
  const auto evs = gen.evs(5, 4, 20, 0.25);
  save_fleet(evs, path);
  const auto back = load_fleet(path);
  REQUIRE(back.size() == evs.size());
  CHECK(back[2].capacity == evs[2].capacity);
  CHECK(back[4].node == evs[4].node);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_fleet(path), Error);
}
