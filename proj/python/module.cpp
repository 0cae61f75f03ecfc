#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>

#include "adeye/adi.hpp"
#include "adeye/error.hpp"
#include "adeye/harness.hpp"
#include "adeye/nominal.hpp"
#include "adeye/rng.hpp"
#include "adeye/safety.hpp"
#include "adeye/scenario.hpp"
#include "adeye/trace.hpp"

namespace py = pybind11;
using namespace adeye;

namespace {

// Results cross the boundary as plain dicts/lists via the json module.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

scenario::ScenarioSpec load(const std::string& path, const std::map<std::string, std::string>& overrides,
                            std::optional<std::uint64_t> seed) {
  auto spec = scenario::load_scenario_file(path);
  if (!overrides.empty()) {
    spec = scenario::apply_overrides(spec, {overrides.begin(), overrides.end()});
  }
  if (seed) spec.seed = *seed;
  return spec;
}

adi::Profile profile(const std::optional<std::string>& adi_path) {
  return adi_path ? adi::load_profile(*adi_path) : adi::Profile{};
}

}  // namespace

PYBIND11_MODULE(_adeye, m) {
  m.doc() = "Scenario-driven simulation of a two-channel driving stack";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<RunError>(m, "RunError", PyExc_RuntimeError);

  m.def(
      "validate",
      [](const std::string& path, const std::map<std::string, std::string>& overrides,
         const std::optional<std::string>& adi) {
        const auto spec = load(path, overrides, std::nullopt);
        adi::check_scenario(spec, profile(adi));
        const auto plan = scenario::expand_sweep(spec);
        py::dict out;
        out["name"] = spec.name;
        out["runs"] = plan.runs.size();
        return out;
      },
      py::arg("path"), py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("adi") = py::none());

  m.def(
      "load_scenario",
      [](const std::string& path) { return to_py(scenario::to_json(scenario::load_scenario_file(path))); },
      py::arg("path"), "Canonical scenario document as a dict.");

  m.def(
      "run",
      [](const std::string& path, const std::optional<std::string>& adi,
         const std::map<std::string, std::string>& overrides, std::optional<std::uint64_t> seed, std::size_t run_id) {
        const auto spec = load(path, overrides, seed);
        harness::RunOptions options;
        options.profile = profile(adi);
        adi::check_scenario(spec, options.profile);
        scenario::RunManifest manifest{0, spec};
        if (!spec.sweep.empty()) {
          auto plan = scenario::expand_sweep(spec);
          if (run_id >= plan.runs.size()) {
            throw ValidationError("run_id", "sweep has " + std::to_string(plan.runs.size()) + " runs");
          }
          manifest = std::move(plan.runs[run_id]);
        }
        harness::RunResult result;
        {
          py::gil_scoped_release release;
          result = harness::run_manifest(manifest, options);
        }
        py::dict out;
        out["report"] = to_py(harness::to_json(result.report));
        out["trace"] = result.trace.text();
        return out;
      },
      py::arg("path"), py::arg("adi") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("seed") = py::none(), py::arg("run_id") = 0,
      "Runs one scenario (or one run of its sweep); returns {'report': dict, 'trace': str}.");

  m.def(
      "sweep",
      [](const std::string& path, const std::optional<std::string>& adi, int jobs,
         const std::optional<std::string>& out_dir, bool resume) {
        const auto spec = load(path, {}, std::nullopt);
        harness::RunOptions options;
        options.profile = profile(adi);
        adi::check_scenario(spec, options.profile);
        harness::SweepOptions sweep;
        sweep.parallelism = jobs;
        if (out_dir) sweep.out_dir = *out_dir;
        sweep.resume = resume;
        harness::SweepReport report;
        {
          py::gil_scoped_release release;
          report = harness::run_sweep(spec, scenario::expand_sweep(spec), options, sweep);
        }
        auto out = to_py(harness::to_json(report));
        out["reused"] = report.reused;
        return out;
      },
      py::arg("path"), py::arg("adi") = py::none(), py::arg("jobs") = 1, py::arg("out_dir") = py::none(),
      py::arg("resume") = false);

  m.def(
      "build_map",
      [](const std::string& path, double spacing, const std::optional<std::string>& out_dir) {
        const auto spec = scenario::load_scenario_file(path);
        const auto maps = nominal::build_map(scenario::resolve_world(spec), spacing);
        if (out_dir) nominal::save_maps(maps, *out_dir, spec.name);
        py::dict out;
        out["pointmap"] = to_py(nominal::to_json(maps.points));
        out["lanemap"] = to_py(nominal::to_json(maps.lanes));
        return out;
      },
      py::arg("path"), py::arg("spacing") = 0.25, py::arg("out_dir") = py::none());

  m.def(
      "compute_metrics",
      [](const std::string& trace) { return to_py(harness::to_json(harness::compute_metrics(TraceLog::parse(trace)))); },
      py::arg("trace"), "Report recomputed from trace text alone.");

  m.def(
      "replay_check",
      [](const std::string& trace) {
        const auto log = TraceLog::parse(trace);
        harness::ReplayCheck rc;
        {
          py::gil_scoped_release release;
          rc = harness::replay_check(log);
        }
        py::dict out;
        out["digest_matches"] = rc.digest_matches;
        out["invariants_hold"] = rc.invariants_hold;
        out["recorded_digest"] = rc.recorded_digest;
        out["replayed_digest"] = rc.replayed_digest;
        out["problems"] = rc.problems;
        return out;
      },
      py::arg("trace"));

  m.def("trace_digest", [](const std::string& trace) { return TraceLog::parse(trace).digest_hex(); }, py::arg("trace"));

  m.def(
      "braking_envelope",
      [](double v, double a_max, double t_react, double margin, double j_max) {
        safety::MonitorConfig c;
        c.a_max = a_max;
        c.t_react = t_react;
        c.margin = margin;
        c.j_max = j_max;
        return safety::braking_envelope(v, c);
      },
      py::arg("v"), py::arg("a_max") = 6.0, py::arg("t_react") = 0.1, py::arg("margin") = 1.0, py::arg("j_max") = 10.0);

  m.def("fnv1a64", [](const py::bytes& b) { return fnv1a64(std::string(b)); }, py::arg("data"));
  m.def("splitmix64_mix", [](std::uint64_t z) { return splitmix64_mix(z); }, py::arg("z"));
  m.def(
      "derive_run_seed", [](std::uint64_t s, std::uint64_t r) { return derive_run_seed(s, r); }, py::arg("scenario_seed"), py::arg("run_id"));
  m.def(
      "derive_stream_seed", [](std::uint64_t rs, const std::string& name) { return derive_stream_seed(rs, name); },
      py::arg("run_seed"), py::arg("name"));

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("next_u64", &Rng::next_u64)
      .def("uniform", &Rng::uniform)
      .def("gaussian", py::overload_cast<double>(&Rng::gaussian), py::arg("sigma") = 1.0);
}
