#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "adeye/faults.hpp"
#include "adeye/sensors.hpp"
#include "adeye/world.hpp"

namespace adeye::scenario {

inline constexpr int kFormatVersion = 1;
inline constexpr double kDefaultDt = 0.01;
inline constexpr std::size_t kDefaultSweepCap = 100000;
inline constexpr double kAsciiLaneWidth = 3.5;

// Inline ASCII world layer, one string per row, top row first. Cell (c, r)
// covers [c, c+1] x [H-1-r, H-r] metres, shifted by `origin`.
struct AsciiGrid {
  std::vector<std::string> rows;
  Vec2 origin;
  bool operator==(const AsciiGrid&) const = default;
};

struct Goal {
  Pose2D pose;
  double radius = 2.0;
  bool operator==(const Goal&) const = default;
};

struct Termination {
  double max_time = 30.0;
  bool stop_on_collision = true;
  std::optional<Goal> goal;
  bool operator==(const Termination&) const = default;
};

// Pass/fail predicates evaluated by the harness over run reports.
struct Acceptance {
  bool no_collisions = false;
  bool require_goal = false;
  std::optional<int> max_safety_triggers;
  std::optional<double> min_clearance;
  bool operator==(const Acceptance&) const = default;
};

struct SweepVariable {
  std::string path;                     // dotted; array elements by "id" or index
  std::vector<nlohmann::json> values;  // numbers, booleans or {x, y, heading} poses
  bool operator==(const SweepVariable&) const = default;
};

struct ScenarioSpec {
  std::string name;
  std::string description;
  double dt = kDefaultDt;
  std::uint64_t seed = 0;
  // Inline world; actors[0] is the ego. The ASCII layer, if any, is kept
  // separately so documents re-serialize the way they were written.
  world::World world;
  std::optional<AsciiGrid> ascii;
  std::vector<sensors::SensorConfig> sensors;
  sensors::RoutingTable routing;
  std::vector<faults::FaultSpec> faults;
  std::vector<SweepVariable> sweep;
  Termination termination;
  Acceptance acceptance;
  bool operator==(const ScenarioSpec&) const = default;
};

struct RunManifest {
  std::uint64_t run_id = 0;
  ScenarioSpec spec;  // sweepless, seed already derived
};

struct SweepPlan {
  std::vector<RunManifest> runs;
};

// Strict JSON (no duplicate keys, no unknown keys). Throws ParseError for
// malformed text and ValidationError naming the offending path otherwise.
ScenarioSpec parse_scenario(std::string_view text);
// Like parse_scenario, but also resolves a "world.ascii.file" reference
// relative to the document's directory and inlines its rows.
ScenarioSpec load_scenario_file(const std::filesystem::path& path);

ScenarioSpec from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ScenarioSpec& spec);
// Canonical text: sorted keys, two-space indent, trailing newline.
std::string serialize_scenario(const ScenarioSpec& spec);

world::World parse_ascii_world(std::string_view text, Vec2 origin = {});

// Inline world plus the ASCII layer, validated.
world::World resolve_world(const ScenarioSpec& spec);

// Full cartesian product in declaration order (first variable slowest).
SweepPlan expand_sweep(const ScenarioSpec& spec, std::size_t cap = kDefaultSweepCap);
std::size_t sweep_size(const ScenarioSpec& spec);

// `--set path=value` style overrides; value is JSON text (bare words are
// treated as strings).
ScenarioSpec apply_overrides(const ScenarioSpec& spec,
                             const std::vector<std::pair<std::string, std::string>>& overrides);

// Resolves a dotted path inside a document; nullptr when absent.
const nlohmann::json* find_path(const nlohmann::json& doc, std::string_view path);
nlohmann::json* find_path(nlohmann::json& doc, std::string_view path);

// Every key the scenario grammar accepts, as dotted schema paths.
std::vector<std::string> grammar_keys();

nlohmann::json to_json(const SweepPlan& plan);

}  // namespace adeye::scenario
