#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "adeye/adi.hpp"
#include "adeye/error.hpp"
#include "adeye/harness.hpp"
#include "adeye/nominal.hpp"
#include "adeye/scenario.hpp"
#include "adeye/trace.hpp"

namespace fs = std::filesystem;
using namespace adeye;

namespace {

enum Exit { kOk = 0, kValidation = 1, kRunError = 2, kAcceptance = 3 };

fs::path default_out() {
  if (const char* env = std::getenv("ADEYE_OUT"); env && *env) return env;
  return "out";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<std::pair<std::string, std::string>> split_overrides(const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set", "expected path=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

struct Common {
  std::string scenario;
  std::string adi;
  std::string maps;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

struct Loaded {
  scenario::ScenarioSpec spec;
  adi::Profile profile;
  std::shared_ptr<const nominal::MapArtifacts> maps;
};

Loaded load(const Common& c) {
  Loaded l;
  l.spec = scenario::load_scenario_file(c.scenario);
  if (!c.sets.empty()) l.spec = scenario::apply_overrides(l.spec, split_overrides(c.sets));
  if (c.seed) l.spec.seed = *c.seed;
  if (!c.adi.empty()) l.profile = adi::load_profile(c.adi);
  adi::check_scenario(l.spec, l.profile);
  if (!c.maps.empty()) {
    l.maps = std::make_shared<const nominal::MapArtifacts>(nominal::load_maps(c.maps, l.spec.name));
  } else if (l.profile.nominal) {
    l.maps = std::make_shared<const nominal::MapArtifacts>(
        nominal::build_map(scenario::resolve_world(l.spec), l.profile.nominal->map_spacing));
  }
  return l;
}

int cmd_validate(const Common& c) {
  const auto l = load(c);
  const auto plan = scenario::expand_sweep(l.spec);
  std::cout << "ok: " << l.spec.name << " (" << plan.runs.size() << " run" << (plan.runs.size() == 1 ? "" : "s")
            << ")\n";
  return kOk;
}

int cmd_map(const Common& c, const std::string& out) {
  const auto spec = scenario::load_scenario_file(c.scenario);
  adi::Profile profile;
  if (!c.adi.empty()) profile = adi::load_profile(c.adi);
  const double spacing = profile.nominal ? profile.nominal->map_spacing : 0.25;
  const auto maps = nominal::build_map(scenario::resolve_world(spec), spacing);
  const auto paths = nominal::save_maps(maps, out.empty() ? default_out() : fs::path(out), spec.name);
  std::cout << paths.pointmap.string() << " (" << maps.points.points.size() << " points)\n"
            << paths.lanemap.string() << " (" << maps.lanes.lanes.size() << " lanes)\n";
  return kOk;
}

int cmd_run(const Common& c, const std::string& out, std::uint64_t run_id) {
  const auto l = load(c);
  scenario::RunManifest manifest{0, l.spec};
  if (!l.spec.sweep.empty()) {
    auto plan = scenario::expand_sweep(l.spec);
    if (run_id >= plan.runs.size()) {
      throw ValidationError("--run-id", "sweep has " + std::to_string(plan.runs.size()) + " runs");
    }
    manifest = std::move(plan.runs[run_id]);
  }
  harness::RunOptions options;
  options.profile = l.profile;
  options.maps = l.maps;
  const auto result = harness::run_manifest(manifest, options);
  const fs::path dir = (out.empty() ? default_out() : fs::path(out)) / l.spec.name;
  fs::create_directories(dir);
  result.trace.save(dir / "trace.ndjson");
  write_text(dir / "report.json", harness::to_json(result.report).dump(2) + "\n");

  const auto agg = harness::aggregate({harness::SweepRow{manifest.run_id, manifest.spec.seed, result.report, {}}},
                                      l.spec.acceptance);
  std::cout << l.spec.name << " run " << manifest.run_id << ": " << harness::to_string(result.report.outcome)
            << " after " << result.report.metrics.ticks << " ticks, digest " << result.report.digest << "\n"
            << "wrote " << (dir / "trace.ndjson").string() << "\n";
  for (const auto& [name, ok] : agg.acceptance) {
    if (!ok) std::cout << "acceptance failed: " << name << "\n";
  }
  return agg.passed ? kOk : kAcceptance;
}

int cmd_sweep(const Common& c, const std::string& out, int jobs, bool resume, bool traces) {
  const auto l = load(c);
  const auto plan = scenario::expand_sweep(l.spec);
  const fs::path dir = (out.empty() ? default_out() : fs::path(out)) / l.spec.name;
  harness::RunOptions options;
  options.profile = l.profile;
  options.maps = l.maps;
  harness::SweepOptions sweep;
  sweep.parallelism = jobs;
  sweep.out_dir = dir;
  sweep.resume = resume;
  sweep.write_traces = traces;
  const auto report = harness::run_sweep(l.spec, plan, options, sweep);
  write_text(dir / "sweep.json", harness::to_json(report).dump(2) + "\n");
  write_text(dir / "sweep.csv", harness::to_csv(report));
  const auto& a = report.aggregates;
  std::cout << l.spec.name << ": " << a.runs << " runs (" << report.reused << " reused), " << a.collisions
            << " collisions, " << a.goals << " goals, " << a.safety_triggers << " safety triggers, " << a.errored
            << " errored\n";
  for (const auto& [name, ok] : a.acceptance) std::cout << "  " << name << ": " << (ok ? "pass" : "FAIL") << "\n";
  std::cout << "wrote " << (dir / "sweep.json").string() << "\n";
  return a.passed ? kOk : kAcceptance;
}

int cmd_replay(const std::string& path, const std::string& maps_dir, bool check) {
  const auto trace = TraceLog::load(path);
  if (!check) {
    const auto report = harness::compute_metrics(trace);
    std::cout << harness::to_json(report).dump(2) << "\n";
    return kOk;
  }
  std::shared_ptr<const nominal::MapArtifacts> maps;
  if (!maps_dir.empty()) {
    const auto name = trace.header().at("scenario").at("name").get<std::string>();
    maps = std::make_shared<const nominal::MapArtifacts>(nominal::load_maps(maps_dir, name));
  }
  const auto check_result = harness::replay_check(trace, maps);
  std::cout << "recorded " << check_result.recorded_digest << ", replayed " << check_result.replayed_digest << "\n"
            << "digest: " << (check_result.digest_matches ? "match" : "MISMATCH") << "\n"
            << "invariants: " << (check_result.invariants_hold ? "hold" : "VIOLATED") << "\n";
  for (const auto& p : check_result.problems) std::cout << "  " << p << "\n";
  return check_result.digest_matches && check_result.invariants_hold ? kOk : kAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adeye: scenario-driven simulation and test harness for a two-channel driving stack"};
  app.require_subcommand(1);

  Common common;
  std::string out;
  std::string maps_dir;
  std::uint64_t run_id = 0;
  int jobs = 1;
  bool resume = false;
  bool traces = false;
  bool check = false;
  std::string trace_path;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", common.scenario, "scenario document")->required()->check(CLI::ExistingFile);
    sub->add_option("--adi", common.adi, "ADI profile (channel configuration) JSON")->check(CLI::ExistingFile);
  };

  auto* validate = app.add_subcommand("validate", "check a scenario document and its sweep");
  add_common(validate);
  validate->add_option("--set", common.sets, "override path=value (repeatable)");

  auto* map = app.add_subcommand("map", "build the point map and lane map of a scenario world");
  add_common(map);
  map->add_option("-o,--out", out, "output directory (default $ADEYE_OUT or ./out)");

  auto* run = app.add_subcommand("run", "run one scenario and write its trace and report");
  add_common(run);
  run->add_option("--set", common.sets, "override path=value (repeatable)");
  run->add_option("--seed", common.seed, "scenario seed");
  run->add_option("--run-id", run_id, "which run of a sweeping scenario (default 0)");
  run->add_option("--maps", common.maps, "directory with prebuilt maps")->check(CLI::ExistingDirectory);
  run->add_option("-o,--out", out, "output directory (default $ADEYE_OUT or ./out)");

  auto* sweep = app.add_subcommand("sweep", "expand and run a scenario sweep");
  add_common(sweep);
  sweep->add_option("--set", common.sets, "override path=value (repeatable)");
  sweep->add_option("--seed", common.seed, "base seed");
  sweep->add_option("-j,--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  sweep->add_flag("--resume", resume, "reuse finished per-run reports");
  sweep->add_flag("--traces", traces, "also keep every run's trace");
  sweep->add_option("--maps", common.maps, "directory with prebuilt maps")->check(CLI::ExistingDirectory);
  sweep->add_option("-o,--out", out, "output directory (default $ADEYE_OUT or ./out)");

  auto* replay = app.add_subcommand("replay", "recompute a trace's report, or re-simulate and check it");
  replay->add_option("trace", trace_path, "trace file (NDJSON)")->required()->check(CLI::ExistingFile);
  replay->add_flag("--check", check, "re-simulate and verify digest and invariants");
  replay->add_option("--maps", maps_dir, "directory with prebuilt maps")->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (validate->parsed()) return cmd_validate(common);
    if (map->parsed()) return cmd_map(common, out);
    if (run->parsed()) return cmd_run(common, out, run_id);
    if (sweep->parsed()) return cmd_sweep(common, out, jobs, resume, traces);
    if (replay->parsed()) return cmd_replay(trace_path, maps_dir, check);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "run error: " << e.what() << "\n";
    return kRunError;
  }
  return kOk;
}
