#include "adeye/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "adeye/error.hpp"

namespace adeye::harness {

using nlohmann::json;

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::goal_reached: return "goal_reached";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
    case Outcome::stopped_by_safety: return "stopped_by_safety";
  }
  return "timeout";
}

Outcome outcome_from(std::string_view name) {
  for (auto o : {Outcome::goal_reached, Outcome::collision, Outcome::timeout, Outcome::stopped_by_safety}) {
    if (to_string(o) == name) return o;
  }
  throw std::invalid_argument("unknown outcome '" + std::string(name) + "'");
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

enum class RecordKind { header, msg, state, end, other };

RecordKind kind_of(const std::string& line) {
  // Keys are sorted, so each record type starts with a fixed key.
  if (line.rfind("{\"active_faults\"", 0) == 0) return RecordKind::state;
  if (line.rfind("{\"payload\"", 0) == 0) return RecordKind::msg;
  if (line.rfind("{\"adi\"", 0) == 0) return RecordKind::header;
  if (line.rfind("{\"reason\"", 0) == 0) return RecordKind::end;
  return RecordKind::other;
}

std::string msg_topic(const std::string& line) {
  static const std::string key = ",\"topic\":\"";
  const auto pos = line.rfind(key);
  if (pos == std::string::npos) return {};
  const auto start = pos + key.size();
  return line.substr(start, line.find('"', start) - start);
}

std::vector<world::Actor> actors_from_state(const json& state, const world::World& world) {
  std::vector<world::Actor> actors;
  const auto& arr = state.at("actors");
  actors.reserve(arr.size());
  for (const auto& a : arr) {
    const std::string id = a.at("id").get<std::string>();
    const auto it = std::find_if(world.actors.begin(), world.actors.end(), [&](const auto& w) { return w.id == id; });
    if (it == world.actors.end()) throw RunError("trace names unknown actor '" + id + "'");
    world::Actor actor = *it;
    auto& s = actor.state;
    s.pose = {a.at("x").get<double>(), a.at("y").get<double>(), a.at("heading").get<double>()};
    s.speed = a.at("speed").get<double>();
    s.accel = a.at("accel").get<double>();
    s.steer = a.at("steer").get<double>();
    s.yaw_rate = a.at("yaw_rate").get<double>();
    actors.push_back(std::move(actor));
  }
  return actors;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RunError("cannot write '" + tmp + "'");
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

json to_json(const RunReport& r) {
  const auto& m = r.metrics;
  json trigger = nullptr;
  if (m.safety_trigger) trigger = {{"tick", m.safety_trigger->tick}, {"reason", m.safety_trigger->reason}};
  return {{"run_id", r.run_id},
          {"seed", r.seed},
          {"outcome", to_string(r.outcome)},
          {"digest", r.digest},
          {"metrics",
           {{"min_clearance", optional_json(m.min_clearance)},
            {"time_to_goal", optional_json(m.time_to_goal)},
            {"distance_traveled", m.distance_traveled},
            {"safety_trigger", std::move(trigger)},
            {"fault_windows_active", m.fault_windows_active},
            {"ticks", m.ticks}}}};
}

RunReport report_from(const json& j) {
  RunReport r;
  r.run_id = j.at("run_id").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.outcome = outcome_from(j.at("outcome").get<std::string>());
  r.digest = j.at("digest").get<std::string>();
  const auto& m = j.at("metrics");
  r.metrics.min_clearance = optional_from(m.at("min_clearance"));
  r.metrics.time_to_goal = optional_from(m.at("time_to_goal"));
  r.metrics.distance_traveled = m.at("distance_traveled").get<double>();
  if (const auto& t = m.at("safety_trigger"); !t.is_null()) {
    r.metrics.safety_trigger = SafetyTrigger{t.at("tick").get<std::int64_t>(), t.at("reason").get<std::string>()};
  }
  r.metrics.fault_windows_active = m.at("fault_windows_active").get<std::vector<std::size_t>>();
  r.metrics.ticks = m.at("ticks").get<std::int64_t>();
  return r;
}

std::optional<double> ego_clearance(const world::World& world, std::span<const world::Actor> actors) {
  const auto ego_it = std::find_if(actors.begin(), actors.end(), [](const auto& a) { return a.kind == world::ActorKind::ego; });
  if (ego_it == actors.end()) throw RunError("state without ego");
  const Shape ego = world::footprint_shape(*ego_it);
  std::optional<double> best;
  const auto consider = [&](const Shape& other) {
    const double d = overlaps(ego, other) ? 0.0 : shape_distance(ego, other);
    if (!best || d < *best) best = d;
  };
  for (const auto& o : world.obstacles) consider(o.shape);
  for (const auto& a : actors) {
    if (&a != &*ego_it) consider(world::footprint_shape(a));
  }
  return best;
}

RunReport compute_metrics(const TraceLog& trace) {
  const auto& lines = trace.lines();
  if (lines.empty() || kind_of(lines.front()) != RecordKind::header) throw RunError("trace without header");
  const json header = json::parse(lines.front());
  const auto spec = scenario::from_json(header.at("scenario"));
  const world::World world = scenario::resolve_world(spec);

  RunReport r;
  r.run_id = header.at("run_id").get<std::uint64_t>();
  r.seed = header.at("seed").get<std::uint64_t>();
  r.digest = trace.digest_hex();

  bool collision = false;
  bool goal = false;
  bool ended = false;
  bool stopped_after_latch = false;
  std::int64_t last_tick = -1;
  std::optional<Vec2> last_pos;
  std::set<std::size_t> faults_seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto kind = kind_of(lines[i]);
    if (kind == RecordKind::msg) {
      if (msg_topic(lines[i]) != "verdict" || r.metrics.safety_trigger) continue;
      const json m = json::parse(lines[i]);
      const auto& p = m.at("payload");
      if (p.at("status") == "trigger") {
        r.metrics.safety_trigger = SafetyTrigger{m.at("tick").get<std::int64_t>(), p.at("reason").get<std::string>()};
      }
    } else if (kind == RecordKind::state) {
      const json s = json::parse(lines[i]);
      last_tick = s.at("tick").get<std::int64_t>();
      const auto actors = actors_from_state(s, world);
      const auto clearance = ego_clearance(world, actors);
      if (clearance) {
        if (!r.metrics.min_clearance || *clearance < *r.metrics.min_clearance) r.metrics.min_clearance = clearance;
        if (*clearance <= 0.0) collision = true;
      }
      const auto& ego = actors.front();
      const Vec2 pos = ego.state.pose.position();
      if (last_pos) r.metrics.distance_traveled += distance(*last_pos, pos);
      last_pos = pos;
      if (s.at("goal").get<bool>() && !goal) {
        goal = true;
        r.metrics.time_to_goal = s.at("time").get<double>();
      }
      if (r.metrics.safety_trigger && last_tick > r.metrics.safety_trigger->tick && ego.state.speed <= 1e-9) {
        stopped_after_latch = true;
      }
      for (const auto& f : s.at("active_faults")) faults_seen.insert(f.get<std::size_t>());
    } else if (kind == RecordKind::end) {
      const json e = json::parse(lines[i]);
      r.metrics.ticks = e.at("ticks").get<std::int64_t>();
      ended = true;
    } else {
      throw RunError("unexpected trace record at line " + std::to_string(i + 1));
    }
  }
  if (!ended) throw RunError("truncated trace: no end record (last valid tick " + std::to_string(last_tick) + ")");
  r.metrics.fault_windows_active.assign(faults_seen.begin(), faults_seen.end());

  if (collision) r.outcome = Outcome::collision;
  else if (goal) r.outcome = Outcome::goal_reached;
  else if (stopped_after_latch) r.outcome = Outcome::stopped_by_safety;
  else r.outcome = Outcome::timeout;
  return r;
}

// ---------------------------------------------------------------------------
// runs

RunResult run_manifest(const scenario::RunManifest& manifest, const RunOptions& options) {
  std::shared_ptr<const nominal::MapArtifacts> maps = options.maps;
  if (!maps && options.profile.nominal) {
    maps = std::make_shared<const nominal::MapArtifacts>(
        nominal::build_map(scenario::resolve_world(manifest.spec), options.profile.nominal->map_spacing));
  }
  auto channels = adi::make_channels(options.profile, maps);
  kernel::KernelOptions ko;
  ko.staleness = options.profile.staleness;
  ko.observer = options.observer;
  ko.adi = adi::to_json(options.profile);
  RunResult result;
  result.trace = kernel::run(manifest, channels.ordered, ko);
  result.report = compute_metrics(result.trace);
  return result;
}

RunResult run_scenario(const scenario::ScenarioSpec& spec, const RunOptions& options) {
  if (!spec.sweep.empty()) throw ConfigError("scenario declares a sweep; use run_sweep or pick a run");
  return run_manifest({0, spec}, options);
}

// ---------------------------------------------------------------------------
// sweeps

json to_json(const SweepRow& row) {
  json j{{"run_id", row.run_id}, {"seed", row.seed}};
  if (row.report) {
    j["status"] = "ok";
    j["report"] = to_json(*row.report);
    j["error"] = nullptr;
  } else {
    j["status"] = "error";
    j["report"] = nullptr;
    j["error"] = row.error;
  }
  return j;
}

SweepRow row_from(const json& j) {
  SweepRow row;
  row.run_id = j.at("run_id").get<std::uint64_t>();
  row.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("status") == "ok") row.report = report_from(j.at("report"));
  else row.error = j.at("error").get<std::string>();
  return row;
}

Aggregates aggregate(const std::vector<SweepRow>& rows, const scenario::Acceptance& acceptance) {
  Aggregates a;
  a.runs = rows.size();
  for (const auto& row : rows) {
    if (!row.report) {
      ++a.errored;
      continue;
    }
    const auto& r = *row.report;
    switch (r.outcome) {
      case Outcome::collision: ++a.collisions; break;
      case Outcome::goal_reached: ++a.goals; break;
      case Outcome::stopped_by_safety: ++a.stopped_by_safety; break;
      case Outcome::timeout: ++a.timeouts; break;
    }
    if (r.metrics.safety_trigger) ++a.safety_triggers;
    if (r.metrics.min_clearance && (!a.worst_min_clearance || *r.metrics.min_clearance < *a.worst_min_clearance)) {
      a.worst_min_clearance = r.metrics.min_clearance;
    }
  }
  a.acceptance["all_runs_completed"] = a.errored == 0;
  if (acceptance.no_collisions) a.acceptance["no_collisions"] = a.collisions == 0;
  if (acceptance.require_goal) a.acceptance["require_goal"] = a.goals == a.runs;
  if (acceptance.max_safety_triggers) {
    a.acceptance["max_safety_triggers"] = a.safety_triggers <= static_cast<std::size_t>(*acceptance.max_safety_triggers);
  }
  if (acceptance.min_clearance) {
    a.acceptance["min_clearance"] = !a.worst_min_clearance || *a.worst_min_clearance >= *acceptance.min_clearance;
  }
  for (const auto& [name, ok] : a.acceptance) a.passed = a.passed && ok;
  return a;
}

json to_json(const Aggregates& a) {
  return {{"runs", a.runs},
          {"errored", a.errored},
          {"collisions", a.collisions},
          {"goals", a.goals},
          {"safety_triggers", a.safety_triggers},
          {"stopped_by_safety", a.stopped_by_safety},
          {"timeouts", a.timeouts},
          {"worst_min_clearance", optional_json(a.worst_min_clearance)},
          {"acceptance", a.acceptance},
          {"passed", a.passed}};
}

json to_json(const SweepReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back(to_json(row));
  return {{"scenario", r.scenario}, {"format_version", r.format_version}, {"rows", std::move(rows)},
          {"aggregates", to_json(r.aggregates)}};
}

std::string to_csv(const SweepReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "run_id,seed,status,outcome,min_clearance,time_to_goal,distance_traveled,trigger_tick,trigger_reason,ticks,"
        "digest,error\n";
  const auto opt = [&os](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& row : r.rows) {
    os << row.run_id << ',' << row.seed << ',';
    if (!row.report) {
      std::string err = row.error;
      std::replace(err.begin(), err.end(), '"', '\'');
      os << "error,,,,,,,,,\"" << err << "\"\n";
      continue;
    }
    const auto& rep = *row.report;
    const auto& m = rep.metrics;
    os << "ok," << to_string(rep.outcome) << ',';
    opt(m.min_clearance);
    os << ',';
    opt(m.time_to_goal);
    os << ',' << m.distance_traveled << ',';
    if (m.safety_trigger) os << m.safety_trigger->tick << ',' << m.safety_trigger->reason;
    else os << ',';
    os << ',' << m.ticks << ',' << rep.digest << ",\n";
  }
  return os.str();
}

std::filesystem::path run_report_path(const std::filesystem::path& out_dir, std::uint64_t run_id) {
  return out_dir / "runs" / ("run_" + std::to_string(run_id) + ".json");
}

SweepReport run_sweep(const scenario::ScenarioSpec& spec, const scenario::SweepPlan& plan, const RunOptions& options,
                      const SweepOptions& sweep) {
  SweepReport report;
  report.scenario = spec.name;
  const std::size_t n = plan.runs.size();
  std::vector<std::optional<SweepRow>> rows(n);
  std::vector<char> reused(n, 0);

  if (sweep.out_dir) std::filesystem::create_directories(*sweep.out_dir / "runs");
  if (sweep.out_dir && sweep.resume) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto path = run_report_path(*sweep.out_dir, plan.runs[i].run_id);
      std::ifstream in(path, std::ios::binary);
      if (!in) continue;
      try {
        std::stringstream buf;
        buf << in.rdbuf();
        SweepRow row = row_from(json::parse(buf.str()));
        if (row.run_id == plan.runs[i].run_id && row.seed == plan.runs[i].spec.seed && row.report) {
          rows[i] = std::move(row);
          reused[i] = 1;
        }
      } catch (const std::exception&) {
        // unreadable leftovers are recomputed
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> started{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      if (rows[i]) continue;
      if (sweep.stop_after && started.fetch_add(1) >= *sweep.stop_after) return;
      const auto& manifest = plan.runs[i];
      SweepRow row{manifest.run_id, manifest.spec.seed, std::nullopt, {}};
      try {
        RunOptions opts = options;
        opts.observer = nullptr;
        auto result = run_manifest(manifest, opts);
        row.report = std::move(result.report);
        if (sweep.out_dir && sweep.write_traces) {
          result.trace.save(*sweep.out_dir / "runs" / ("run_" + std::to_string(manifest.run_id) + ".ndjson"));
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      if (sweep.out_dir) write_atomic(run_report_path(*sweep.out_dir, manifest.run_id), to_json(row).dump(2) + "\n");
      rows[i] = std::move(row);
    }
  };

  const int workers = std::max(1, std::min<int>(sweep.parallelism, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i]) continue;
    report.rows.push_back(std::move(*rows[i]));
    report.reused += reused[i] ? 1 : 0;
  }
  report.aggregates = aggregate(report.rows, spec.acceptance);
  return report;
}

// ---------------------------------------------------------------------------
// replay

std::vector<std::string> check_invariants(const TraceLog& trace) {
  std::vector<std::string> problems;
  const auto& lines = trace.lines();
  const json header = trace.header();
  const auto spec = scenario::from_json(header.at("scenario"));
  const world::World world = scenario::resolve_world(spec);
  const int staleness = header.at("staleness").get<int>();
  std::string safety_id;
  if (const auto& s = header.at("adi").at("safety"); !s.is_null()) safety_id = s.at("id").get<std::string>();

  std::map<std::string, ChannelCommand> held;
  std::optional<std::int64_t> latch;
  std::string end_reason;
  std::int64_t last_state = -1;
  bool last_applied_null = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto kind = kind_of(lines[i]);
    if (kind == RecordKind::msg) {
      const std::string topic = msg_topic(lines[i]);
      if (topic.rfind("command/", 0) == 0) {
        const json m = json::parse(lines[i]);
        const auto& p = m.at("payload");
        ChannelCommand c{p.at("channel_id").get<std::string>(), p.at("priority").get<int>(), p.at("accel").get<double>(),
                         p.at("steer").get<double>(), p.at("tick").get<std::int64_t>()};
        held.insert_or_assign(c.channel_id, c);
      } else if (topic == "verdict") {
        const json m = json::parse(lines[i]);
        if (latch) problems.push_back("verdict published after latch at tick " + std::to_string(m.at("tick").get<std::int64_t>()));
        if (m.at("payload").at("status") == "trigger" && !latch) latch = m.at("tick").get<std::int64_t>();
      }
    } else if (kind == RecordKind::state) {
      const json s = json::parse(lines[i]);
      const auto tick = s.at("tick").get<std::int64_t>();
      last_state = tick;
      const auto actors = actors_from_state(s, world);
      const auto clearance = ego_clearance(world, actors);
      const bool geometric = clearance && *clearance <= 0.0;
      if (geometric != s.at("collision").get<bool>()) {
        problems.push_back("tick " + std::to_string(tick) + ": collision flag disagrees with geometry");
      }
      const auto& applied = s.at("applied");
      last_applied_null = applied.is_null();
      if (applied.is_null()) continue;
      std::vector<ChannelCommand> cmds;
      for (const auto& [id, c] : held) cmds.push_back(c);
      const auto expected = kernel::arbitrate(cmds, tick, staleness);
      const bool coast = applied.at("channel").is_null();
      if (!expected) {
        if (!coast || applied.at("accel").get<double>() != 0.0 || applied.at("steer").get<double>() != 0.0) {
          problems.push_back("tick " + std::to_string(tick) + ": applied command without a fresh command");
        }
      } else if (coast || applied.at("channel").get<std::string>() != expected->channel_id ||
                 applied.at("accel").get<double>() != expected->accel ||
                 applied.at("steer").get<double>() != expected->steer) {
        problems.push_back("tick " + std::to_string(tick) + ": applied command is not the arbitration winner");
      }
      if (!safety_id.empty()) {
        const auto it = held.find(safety_id);
        const bool fresh = it != held.end() && tick - it->second.tick <= staleness;
        if (fresh && (coast || applied.at("channel").get<std::string>() != safety_id)) {
          problems.push_back("tick " + std::to_string(tick) + ": fresh safety command overridden");
        }
        if (latch && tick >= *latch && (coast || applied.at("channel").get<std::string>() != safety_id)) {
          problems.push_back("tick " + std::to_string(tick) + ": control left the safety channel after latch");
        }
      }
    } else if (kind == RecordKind::end) {
      const json e = json::parse(lines[i]);
      end_reason = e.at("reason").get<std::string>();
      if (e.at("ticks").get<std::int64_t>() != last_state + 1) problems.push_back("end tick count mismatch");
    }
  }
  if (end_reason == "max_time" && last_applied_null) problems.push_back("final tick has no applied command");
  if (end_reason != "max_time" && !last_applied_null) problems.push_back("terminating tick applied a command");
  return problems;
}

ReplayCheck replay_check(const TraceLog& trace, std::shared_ptr<const nominal::MapArtifacts> maps) {
  ReplayCheck check;
  const json header = trace.header();
  scenario::RunManifest manifest{header.at("run_id").get<std::uint64_t>(), scenario::from_json(header.at("scenario"))};
  RunOptions options;
  options.profile = adi::profile_from(header.at("adi"));
  options.maps = std::move(maps);
  auto replayed = run_manifest(manifest, options);
  check.recorded_digest = trace.digest_hex();
  check.replayed_digest = replayed.trace.digest_hex();
  check.digest_matches = replayed.trace == trace;
  if (!check.digest_matches) {
    const auto& a = trace.lines();
    const auto& b = replayed.trace.lines();
    std::size_t i = 0;
    while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
    check.problems.push_back("replay diverges at trace line " + std::to_string(i + 1));
  }
  for (auto& p : check_invariants(trace)) check.problems.push_back(std::move(p));
  check.invariants_hold = check.problems.empty() || (check.problems.size() == 1 && !check.digest_matches);
  return check;
}

}  // namespace adeye::harness
