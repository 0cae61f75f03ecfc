#include "adeye/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adeye/error.hpp"
#include "adeye/rng.hpp"

namespace adeye::kernel {

using nlohmann::json;

std::string_view to_string(PayloadType type) {
  switch (type) {
    case PayloadType::scene: return "Scene";
    case PayloadType::sensor_frame: return "SensorFrame";
    case PayloadType::command: return "ChannelCommand";
    case PayloadType::heartbeat: return "Heartbeat";
    case PayloadType::verdict: return "Verdict";
    case PayloadType::fault: return "FaultEvent";
    case PayloadType::metric: return "MetricEvent";
  }
  return "MetricEvent";
}

PayloadType type_of(const Payload& payload) { return static_cast<PayloadType>(payload.index()); }

// ---------------------------------------------------------------------------
// Bus

void Bus::declare(const std::string& topic, PayloadType type) {
  const auto [it, inserted] = topics_.emplace(topic, type);
  if (!inserted && it->second != type) {
    throw ConfigError("topic '" + topic + "' declared as both " + std::string(to_string(it->second)) + " and " +
                      std::string(to_string(type)));
  }
}

bool Bus::declared(std::string_view topic) const { return topics_.find(topic) != topics_.end(); }

std::optional<PayloadType> Bus::topic_type(std::string_view topic) const {
  const auto it = topics_.find(topic);
  if (it == topics_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Bus::topics() const {
  std::vector<std::string> out;
  for (const auto& [name, type] : topics_) out.push_back(name);
  return out;
}

void Bus::begin_tick(std::int64_t tick) {
  current_.clear();
  tick_ = tick;
  seq_ = 0;
}

void Bus::publish(int phase, const std::string& publisher, const std::string& topic, Payload payload) {
  const auto it = topics_.find(topic);
  if (it == topics_.end()) throw RunError("publish on undeclared topic '" + topic + "' by '" + publisher + "'");
  if (it->second != type_of(payload)) {
    throw RunError("topic '" + topic + "' carries " + std::string(to_string(it->second)) + ", got " +
                   std::string(to_string(type_of(payload))));
  }
  BusMessage msg{tick_, phase, publisher, seq_++, topic, std::move(payload)};
  latest_.insert_or_assign(topic, msg);
  current_.push_back(std::move(msg));
}

const BusMessage* Bus::latest(std::string_view topic) const {
  const auto it = latest_.find(topic);
  return it == latest_.end() ? nullptr : &it->second;
}

std::vector<const BusMessage*> Bus::ordered() const {
  std::vector<const BusMessage*> out;
  out.reserve(current_.size());
  for (const auto& m : current_) out.push_back(&m);
  std::stable_sort(out.begin(), out.end(), [](const BusMessage* a, const BusMessage* b) {
    if (a->phase != b->phase) return a->phase < b->phase;
    if (a->publisher != b->publisher) return a->publisher < b->publisher;
    return a->seq < b->seq;
  });
  return out;
}

const BusMessage* BusView::latest(std::string_view topic) const {
  if (allowed_.find(topic) == allowed_.end()) {
    throw RunError("read of unsubscribed topic '" + std::string(topic) + "'");
  }
  return bus_.latest(topic);
}

// ---------------------------------------------------------------------------
// Arbitration

std::optional<ChannelCommand> arbitrate(std::span<const ChannelCommand> commands, std::int64_t tick, int staleness) {
  const ChannelCommand* best = nullptr;
  for (const auto& c : commands) {
    if (tick - c.tick > staleness || c.tick > tick) continue;
    if (!best || c.priority > best->priority || (c.priority == best->priority && c.channel_id < best->channel_id)) {
      best = &c;
    }
  }
  if (best) {
    for (const auto& c : commands) {
      if (&c == best || tick - c.tick > staleness || c.tick > tick) continue;
      if (c.priority == best->priority && c.channel_id == best->channel_id) {
        throw RunError("arbitration: two fresh commands from channel '" + c.channel_id + "' with priority " +
                       std::to_string(c.priority) + " at tick " + std::to_string(tick));
      }
    }
    return *best;
  }
  return std::nullopt;
}

std::int64_t tick_count(double max_time, double dt) {
  return static_cast<std::int64_t>(std::ceil(max_time / dt - 1e-9));
}

// ---------------------------------------------------------------------------
// Run

namespace {

json scene_summary(const world::Scene& scene) {
  return {{"tick", scene.tick}, {"time", scene.time}, {"actors", scene.actors.size()}};
}

json payload_json(const Payload& p) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ScenePtr>) {
          return scene_summary(*v);
        } else if constexpr (std::is_same_v<T, sensors::FramePtr>) {
          return sensors::to_json(*v);
        } else {
          return to_json(v);
        }
      },
      p);
}

json actor_json(const world::Actor& a) {
  const auto& s = a.state;
  return {{"id", a.id},          {"x", s.pose.x},       {"y", s.pose.y},         {"heading", s.pose.heading},
          {"speed", s.speed},    {"accel", s.accel},    {"steer", s.steer},      {"yaw_rate", s.yaw_rate}};
}

bool ego_collides(const world::Scene& scene) {
  const auto& ego = scene.ego();
  const Shape shape = world::footprint_shape(ego);
  const Aabb box = bounding_box(shape);
  for (const auto& body : world::collect_bodies(scene.world->obstacles, scene.actors, ego.id)) {
    if (!body.box.intersects(box)) continue;
    if (overlaps(shape, body.shape)) return true;
  }
  return false;
}

struct ChannelSlot {
  Channel* channel;
  std::string id;
  int priority;
  std::set<std::string, std::less<>> subscriptions;
  std::set<std::string> publications;
  std::string command_topic;
  std::string heartbeat_topic;
  faults::ChannelFaultHistory fault_history;
  std::uint64_t heartbeats = 0;
};

std::string list_topics(const Bus& bus) {
  std::ostringstream os;
  bool first = true;
  for (const auto& t : bus.topics()) {
    os << (first ? "" : ", ") << t;
    first = false;
  }
  return os.str();
}

}  // namespace

TraceLog run(const scenario::RunManifest& manifest, std::span<Channel* const> channel_list, const KernelOptions& options) {
  const auto& spec = manifest.spec;
  if (channel_list.empty()) throw ConfigError("no channels registered");
  if (!spec.sweep.empty()) throw ConfigError("manifest still carries sweep variables; expand it first");

  auto world_ptr = std::make_shared<const world::World>(scenario::resolve_world(spec));
  const double dt = spec.dt;
  const std::int64_t ticks = tick_count(spec.termination.max_time, dt);

  // --- setup: channels, topics, routing, fault targets ---------------------
  Bus bus;
  bus.declare("ground_truth", PayloadType::scene);
  bus.declare("fault", PayloadType::fault);
  bus.declare("metric", PayloadType::metric);
  std::vector<std::string> sensor_ids;
  for (const auto& s : spec.sensors) {
    bus.declare("sensor/" + s.id, PayloadType::sensor_frame);
    sensor_ids.push_back(s.id);
  }

  std::vector<ChannelSlot> slots;
  std::set<std::string> channel_ids;
  for (Channel* ch : channel_list) {
    if (!ch) throw ConfigError("null channel registered");
    ChannelSlot slot{ch, ch->id(), ch->priority(), {}, {}, {}, {}, {}, 0};
    if (slot.id.empty()) throw ConfigError("channel with empty id");
    if (!channel_ids.insert(slot.id).second) throw ConfigError("duplicate channel id '" + slot.id + "'");
    slot.command_topic = "command/" + slot.id;
    slot.heartbeat_topic = "heartbeat/" + slot.id;
    bus.declare(slot.command_topic, PayloadType::command);
    bus.declare(slot.heartbeat_topic, PayloadType::heartbeat);
    slots.push_back(std::move(slot));
  }
  for (auto& slot : slots) {
    for (const auto& pub : slot.channel->publications()) {
      bus.declare(pub.name, pub.type);
      slot.publications.insert(pub.name);
    }
  }
  for (auto& slot : slots) {
    for (const auto& sub : slot.channel->subscriptions()) {
      const auto type = bus.topic_type(sub.name);
      if (!type) {
        throw ConfigError("channel '" + slot.id + "' subscribes to undeclared topic '" + sub.name +
                          "'; declared topics: " + list_topics(bus));
      }
      if (*type != sub.type) {
        throw ConfigError("channel '" + slot.id + "' expects " + std::string(to_string(sub.type)) + " on '" +
                          sub.name + "', which carries " + std::string(to_string(*type)));
      }
      slot.subscriptions.insert(sub.name);
    }
  }

  for (const auto& [source, targets] : spec.routing) {
    for (const auto& t : targets) {
      if (!channel_ids.count(t)) {
        std::string known;
        for (const auto& id : channel_ids) known += (known.empty() ? "" : ", ") + id;
        throw ConfigError("routing." + source + " names unregistered channel '" + t + "'; registered: " + known);
      }
    }
  }
  for (std::size_t i = 0; i < spec.faults.size(); ++i) {
    const auto& f = spec.faults[i];
    if (faults::is_channel_fault(f.kind) && !channel_ids.count(f.target)) {
      throw ConfigError("faults[" + std::to_string(i) + "].target names unregistered channel '" + f.target + "'");
    }
  }

  const auto gt_it = spec.routing.find(std::string(sensors::kGroundTruthSource));
  const auto gt_routed = [&](const std::string& ch) {
    return gt_it != spec.routing.end() &&
           std::find(gt_it->second.begin(), gt_it->second.end(), ch) != gt_it->second.end();
  };

  for (auto& slot : slots) {
    RunContext ctx;
    ctx.dt = dt;
    ctx.seed = spec.seed;
    ctx.sensors = spec.sensors;
    ctx.initial_ego = world_ptr->ego();
    ctx.goal = spec.termination.goal;
    ctx.ground_truth_routed = gt_routed(slot.id);
    slot.channel->start(ctx);
  }

  // Sensors sample in id order; each owns an RNG stream keyed by its id.
  std::vector<const sensors::SensorConfig*> sensor_order;
  for (const auto& s : spec.sensors) sensor_order.push_back(&s);
  std::sort(sensor_order.begin(), sensor_order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::map<std::string, Rng> rngs;
  std::map<std::string, faults::SensorFaultHistory> sensor_history;
  for (const auto* s : sensor_order) rngs.emplace(s->id, Rng(derive_stream_seed(spec.seed, s->id)));

  const faults::ChannelLimits limits{world_ptr->ego().vehicle.steer_max, world_ptr->ego().vehicle.accel_limit};

  // --- trace header -------------------------------------------------------
  TraceLog trace;
  trace.append({{"type", "header"},
                {"trace_format", kTraceFormat},
                {"run_id", manifest.run_id},
                {"seed", spec.seed},
                {"dt", dt},
                {"staleness", options.staleness},
                {"channels", channel_ids},
                {"scenario", scenario::to_json(spec)},
                {"adi", options.adi}});

  std::vector<world::Actor> actors = world_ptr->actors;
  const std::size_t ego_index = 0;
  std::map<std::string, ChannelCommand> held;
  std::vector<std::size_t> previous_active;
  std::string end_reason = "max_time";
  std::int64_t executed = 0;

  for (std::int64_t tick = 0; tick < ticks; ++tick) {
    const double time = static_cast<double>(tick) * dt;
    bus.begin_tick(tick);
    TickRecord rec;
    rec.tick = tick;
    rec.time = time;

    // Phase 1: scripted actors advance to this tick; fault windows open/close.
    std::vector<std::string> contained;
    if (tick > 0) {
      for (std::size_t i = 0; i < actors.size(); ++i) {
        if (i == ego_index) continue;
        actors[i] = world::advance_scripted(actors[i], dt, world_ptr->environment);
        if (world::contain(actors[i], world_ptr->bounds)) contained.push_back(actors[i].id);
      }
    }
    const auto active = faults::active_faults(spec.faults, time);
    rec.active_faults = active;
    for (std::size_t i : previous_active) {
      if (!std::binary_search(active.begin(), active.end(), i)) {
        const auto& f = spec.faults[i];
        bus.publish(kPhaseActors, "faults", "fault",
                    FaultEvent{f.target, std::string(faults::to_string(f.kind)), "deactivated", "faults[" + std::to_string(i) + "]"});
      }
    }
    for (std::size_t i : active) {
      if (!std::binary_search(previous_active.begin(), previous_active.end(), i)) {
        const auto& f = spec.faults[i];
        bus.publish(kPhaseActors, "faults", "fault",
                    FaultEvent{f.target, std::string(faults::to_string(f.kind)), "activated", "faults[" + std::to_string(i) + "]"});
      }
    }
    previous_active = active;
    for (const auto& id : contained) {
      bus.publish(kPhaseActors, "world", "fault", FaultEvent{id, "contained", "raised", "clamped to world bounds"});
    }

    // Phase 2: ground truth.
    auto scene = std::make_shared<const world::Scene>(world::ground_truth(world_ptr, actors, tick, dt));
    rec.scene = scene;
    bus.publish(kPhaseGroundTruth, "kernel", "ground_truth", scene);

    const bool collision = ego_collides(*scene);
    bool goal = false;
    if (spec.termination.goal) {
      goal = distance(scene->ego().state.pose.position(), spec.termination.goal->pose.position()) <=
             spec.termination.goal->radius;
    }
    const bool stop = (collision && spec.termination.stop_on_collision) || goal;

    std::optional<ChannelCommand> applied;
    if (!stop) {
      // Phase 3: sensors.
      for (const auto* cfg : sensor_order) {
        const auto mine = faults::faults_for(spec.faults, active, cfg->id);
        sensors::FramePtr frame;
        if (tick % cfg->rate_divisor == 0) {
          const double factor = faults::noise_factor(mine);
          auto& rng = rngs.at(cfg->id);
          frame = std::make_shared<const sensors::SensorFrame>(
              factor == 1.0 ? sensors::sample(*scene, *cfg, rng)
                            : sensors::sample(*scene, sensors::scale_noise(*cfg, factor), rng));
        }
        for (auto& f : faults::apply_sensor_fault(std::move(frame), mine, tick, sensor_history[cfg->id])) {
          bus.publish(kPhaseSensors, cfg->id, "sensor/" + cfg->id, f);
          rec.delivered.push_back(std::move(f));
        }
      }
      const auto routed = sensors::route(rec.delivered, spec.routing, sensor_ids);

      // Phase 4: channels in registration order.
      for (auto& slot : slots) {
        ChannelInputs in{tick, time, dt, nullptr, {}, BusView(bus, slot.subscriptions)};
        if (gt_routed(slot.id)) in.scene = scene;
        if (const auto it = routed.find(slot.id); it != routed.end()) in.frames = it->second;

        ChannelOutput out;
        bool failed = false;
        try {
          out = slot.channel->step(in);
        } catch (const std::exception& e) {
          failed = true;
          bus.publish(kPhaseChannels, slot.id, "fault", FaultEvent{slot.id, "channel_failure", "raised", e.what()});
        }
        if (failed) continue;

        std::optional<ChannelCommand> cmd = out.command;
        if (cmd) {
          cmd->channel_id = slot.id;
          cmd->priority = slot.priority;
          cmd->tick = tick;
          if (!std::isfinite(cmd->accel) || !std::isfinite(cmd->steer)) {
            bus.publish(kPhaseChannels, slot.id, "fault",
                        FaultEvent{slot.id, "channel_failure", "raised", "non-finite command"});
            continue;
          }
        }
        const auto mine = faults::faults_for(spec.faults, active, slot.id);
        cmd = faults::apply_channel_fault(cmd, mine, tick, limits, slot.fault_history);
        const bool silenced = faults::silences(mine);

        for (auto& [topic, payload] : out.messages) {
          if (!slot.publications.count(topic)) {
            throw RunError("channel '" + slot.id + "' published on undeclared topic '" + topic + "'");
          }
          bus.publish(kPhaseChannels, slot.id, topic, std::move(payload));
        }
        if (cmd) {
          bus.publish(kPhaseChannels, slot.id, slot.command_topic, *cmd);
          held.insert_or_assign(slot.id, *cmd);
          rec.emitted.emplace(slot.id, *cmd);
        }
        if (out.heartbeat && !silenced) {
          bus.publish(kPhaseChannels, slot.id, slot.heartbeat_topic, Heartbeat{slot.id, ++slot.heartbeats, tick});
        }
      }

      // Phase 5: arbitration over the held per-channel commands.
      std::vector<ChannelCommand> candidates;
      for (const auto& [id, c] : held) candidates.push_back(c);
      applied = arbitrate(candidates, tick, options.staleness);

      // Phase 6: ego.
      const world::Control control = applied ? world::Control{applied->accel, applied->steer} : world::Control{};
      actors[ego_index] = world::step_actor(actors[ego_index], control, dt, world_ptr->environment);
      if (world::contain(actors[ego_index], world_ptr->bounds)) {
        bus.publish(kPhaseEgo, "world", "fault",
                    FaultEvent{actors[ego_index].id, "contained", "raised", "clamped to world bounds"});
      }
    }
    rec.held = held;
    rec.applied = applied;
    rec.terminated = stop;

    // Phase 7: log.
    const auto ordered = bus.ordered();
    for (const BusMessage* m : ordered) {
      trace.append({{"type", "msg"},
                    {"tick", m->tick},
                    {"phase", m->phase},
                    {"publisher", m->publisher},
                    {"topic", m->topic},
                    {"payload", payload_json(m->payload)}});
    }
    json actors_json = json::array();
    for (const auto& a : scene->actors) actors_json.push_back(actor_json(a));
    json applied_json = nullptr;
    if (!stop) {
      applied_json = applied ? json{{"channel", applied->channel_id}, {"accel", applied->accel}, {"steer", applied->steer}}
                             : json{{"channel", nullptr}, {"accel", 0.0}, {"steer", 0.0}};
    }
    trace.append({{"type", "state"},
                  {"tick", tick},
                  {"time", time},
                  {"actors", std::move(actors_json)},
                  {"applied", std::move(applied_json)},
                  {"active_faults", active},
                  {"collision", collision},
                  {"goal", goal}});
    rec.messages = ordered;
    if (options.observer) options.observer(rec);

    executed = tick + 1;
    if (stop) {
      end_reason = collision && spec.termination.stop_on_collision ? "collision" : "goal_reached";
      break;
    }
  }

  trace.append({{"type", "end"}, {"ticks", executed}, {"reason", end_reason}});
  return trace;
}

}  // namespace adeye::kernel
