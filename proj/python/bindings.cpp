#include "evattack/attacks.hpp"
#include "evattack/fleet.hpp"
#include "evattack/metrics.hpp"
#include "evattack/oracle.hpp"
#include "evattack/scenario.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace evattack;

namespace {

// Reports cross the boundary as JSON text; the Python side parses them.
std::string run_json(const std::filesystem::path& config, int workers) {
  py::gil_scoped_release release;
  return to_json(execute(load_scenario(config), workers).report).dump();
}

std::string reference_json(const std::filesystem::path& config, double tol, bool accept_unconverged) {
  py::gil_scoped_release release;
  const auto cfg = load_scenario(config);
  const auto scenario = build_scenario(cfg);
  OracleOptions options;
  options.tol = tol;
  options.v_min = cfg.solver.v_min;
  options.accept_unconverged = accept_unconverged;
  const auto solution = solve_reference(scenario.problem, options);
  nlohmann::ordered_json doc;
  doc["method"] = solution.method;
  doc["objective"] = solution.objective;
  doc["penalized"] = solution.penalized;
  doc["residual"] = solution.residual;
  doc["iterations"] = solution.iterations;
  auto& rows = doc["profiles"] = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < solution.profiles.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index t = 0; t < solution.profiles.cols(); ++t) row.push_back(solution.profiles(i, t));
    rows.push_back(std::move(row));
  }
  return doc.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Decentralized EV charging simulator core";

  static py::exception<Error> error(m, "EvattackError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(std::string(to_string(e.code())), e.what()).ptr());
    }
  });

  m.def("validate", [](const std::filesystem::path& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& d : validate(load_scenario(config)).diagnostics) out.emplace_back(d.code, d.message);
    return out;
  }, py::arg("config"));

  m.def("run_json", &run_json, py::arg("config"), py::arg("workers") = 0);

  m.def("run_command", [](const std::filesystem::path& config, const std::filesystem::path& out, int workers, bool trace) {
    py::gil_scoped_release release;
    return run_command(load_scenario(config), out, workers, trace);
  }, py::arg("config"), py::arg("out"), py::arg("workers") = 0, py::arg("trace") = false);

  m.def("compare_command", [](const std::filesystem::path& config, const std::filesystem::path& out, int workers) {
    py::gil_scoped_release release;
    return compare_command(load_scenario(config), out, workers);
  }, py::arg("config"), py::arg("out"), py::arg("workers") = 0);

  m.def("reference_json", &reference_json, py::arg("config"), py::arg("tol") = 1e-9,
        py::arg("accept_unconverged") = false);

  m.def("project_feasible", [](const std::vector<double>& c, double target) { return project_feasible(c, target); },
        py::arg("c"), py::arg("target"));
  m.def("shrink_project", [](const std::vector<double>& x, double tau, double target) {
    return shrink_project(x, tau, target);
  }, py::arg("x"), py::arg("tau"), py::arg("target"));
  m.def("max_interest", [](const std::vector<double>& w, double target) {
    return max_interest(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())), target);
  }, py::arg("weights"), py::arg("target"));
}
