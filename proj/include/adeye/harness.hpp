#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "adeye/adi.hpp"
#include "adeye/kernel.hpp"
#include "adeye/nominal.hpp"
#include "adeye/scenario.hpp"
#include "adeye/trace.hpp"

namespace adeye::harness {

enum class Outcome { goal_reached, collision, timeout, stopped_by_safety };

std::string_view to_string(Outcome o);
Outcome outcome_from(std::string_view name);

struct SafetyTrigger {
  std::int64_t tick = 0;
  std::string reason;
  bool operator==(const SafetyTrigger&) const = default;
};

struct RunMetrics {
  std::optional<double> min_clearance;  // nullopt: no other body ever present
  std::optional<double> time_to_goal;
  double distance_traveled = 0.0;
  std::optional<SafetyTrigger> safety_trigger;
  std::vector<std::size_t> fault_windows_active;  // declaration indices
  std::int64_t ticks = 0;
  bool operator==(const RunMetrics&) const = default;
};

struct RunReport {
  std::uint64_t run_id = 0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::timeout;
  RunMetrics metrics;
  std::string digest;
  bool operator==(const RunReport&) const = default;
};

nlohmann::json to_json(const RunReport& r);
RunReport report_from(const nlohmann::json& j);

// Recomputes everything from the trace alone (header scenario + state
// records). Throws RunError for a trace without an end record.
RunReport compute_metrics(const TraceLog& trace);

// Ego footprint vs every other body; 0 on overlap, nullopt with no bodies.
std::optional<double> ego_clearance(const world::World& world, std::span<const world::Actor> actors);

struct RunOptions {
  adi::Profile profile;
  // Prebuilt map artifacts; when null each run maps its own world.
  std::shared_ptr<const nominal::MapArtifacts> maps;
  kernel::TickObserver observer;
};

struct RunResult {
  TraceLog trace;
  RunReport report;
};

RunResult run_manifest(const scenario::RunManifest& manifest, const RunOptions& options);
// Convenience for a sweepless scenario (or one run of it).
RunResult run_scenario(const scenario::ScenarioSpec& spec, const RunOptions& options);

struct SweepRow {
  std::uint64_t run_id = 0;
  std::uint64_t seed = 0;
  std::optional<RunReport> report;
  std::string error;  // non-empty for errored runs
  bool operator==(const SweepRow&) const = default;
};

struct Aggregates {
  std::size_t runs = 0;
  std::size_t errored = 0;
  std::size_t collisions = 0;
  std::size_t goals = 0;
  std::size_t safety_triggers = 0;
  std::size_t stopped_by_safety = 0;
  std::size_t timeouts = 0;
  std::optional<double> worst_min_clearance;
  std::map<std::string, bool> acceptance;  // declared predicates plus "all_runs_completed"
  bool passed = true;
  bool operator==(const Aggregates&) const = default;
};

Aggregates aggregate(const std::vector<SweepRow>& rows, const scenario::Acceptance& acceptance);

struct SweepReport {
  std::string scenario;
  int format_version = scenario::kFormatVersion;
  std::vector<SweepRow> rows;
  Aggregates aggregates;
  std::size_t reused = 0;  // rows taken from a previous partial sweep (not serialized)
};

struct SweepOptions {
  int parallelism = 1;
  std::optional<std::filesystem::path> out_dir;  // per-run reports land in <out>/runs/
  bool resume = false;
  bool write_traces = false;
  // Stop handing out runs after this many have started (simulates a killed
  // sweep in tests; the report then only holds the finished rows).
  std::optional<std::size_t> stop_after;
};

SweepReport run_sweep(const scenario::ScenarioSpec& spec, const scenario::SweepPlan& plan, const RunOptions& options,
                      const SweepOptions& sweep);

nlohmann::json to_json(const SweepRow& row);
SweepRow row_from(const nlohmann::json& j);
nlohmann::json to_json(const Aggregates& a);
nlohmann::json to_json(const SweepReport& r);
// Columns: run_id,seed,status,outcome,min_clearance,time_to_goal,
// distance_traveled,trigger_tick,trigger_reason,ticks,digest,error
std::string to_csv(const SweepReport& r);

std::filesystem::path run_report_path(const std::filesystem::path& out_dir, std::uint64_t run_id);

// Re-simulates the trace's own header (scenario, seed, run id, ADI profile)
// and compares bytes; also checks the per-tick invariants below.
struct ReplayCheck {
  bool digest_matches = false;
  bool invariants_hold = false;
  std::string recorded_digest;
  std::string replayed_digest;
  std::vector<std::string> problems;
};

// Per-tick invariants of a trace: exactly one applied command per executed
// tick, safety dominance, latch permanence, collision flags agreeing with
// the geometry.
std::vector<std::string> check_invariants(const TraceLog& trace);
ReplayCheck replay_check(const TraceLog& trace, std::shared_ptr<const nominal::MapArtifacts> maps = nullptr);

}  // namespace adeye::harness
