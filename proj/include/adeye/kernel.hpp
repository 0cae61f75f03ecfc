#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "adeye/faults.hpp"
#include "adeye/messages.hpp"
#include "adeye/scenario.hpp"
#include "adeye/sensors.hpp"
#include "adeye/trace.hpp"
#include "adeye/world.hpp"

namespace adeye::kernel {

inline constexpr int kDefaultStaleness = 5;

// Phase numbers as they appear in the trace.
enum Phase : int {
  kPhaseActors = 1,
  kPhaseGroundTruth = 2,
  kPhaseSensors = 3,
  kPhaseChannels = 4,
  kPhaseArbitrate = 5,
  kPhaseEgo = 6,
  kPhaseLog = 7,
};

using ScenePtr = std::shared_ptr<const world::Scene>;

using Payload = std::variant<ScenePtr, sensors::FramePtr, ChannelCommand, Heartbeat, Verdict, FaultEvent, MetricEvent>;

enum class PayloadType { scene, sensor_frame, command, heartbeat, verdict, fault, metric };

std::string_view to_string(PayloadType type);
PayloadType type_of(const Payload& payload);

struct TopicDecl {
  std::string name;
  PayloadType type = PayloadType::metric;
};

struct BusMessage {
  std::int64_t tick = 0;
  int phase = 0;
  std::string publisher;
  std::uint64_t seq = 0;  // publication order within the tick
  std::string topic;
  Payload payload;
};

// Typed topic registry plus the current tick's messages. Topics are fixed
// before the first tick; publishing to an unknown topic or with the wrong
// payload type is a RunError (the static checks happen in Kernel setup).
class Bus {
 public:
  void declare(const std::string& topic, PayloadType type);
  bool declared(std::string_view topic) const;
  std::optional<PayloadType> topic_type(std::string_view topic) const;
  std::vector<std::string> topics() const;

  void begin_tick(std::int64_t tick);
  void publish(int phase, const std::string& publisher, const std::string& topic, Payload payload);

  // Most recent message ever published on `topic`, or nullptr.
  const BusMessage* latest(std::string_view topic) const;
  // This tick's messages ordered by (phase, publisher, seq).
  std::vector<const BusMessage*> ordered() const;

 private:
  std::map<std::string, PayloadType, std::less<>> topics_;
  std::map<std::string, BusMessage, std::less<>> latest_;
  std::vector<BusMessage> current_;
  std::int64_t tick_ = 0;
  std::uint64_t seq_ = 0;
};

// Read access to the subscribed part of the bus.
class BusView {
 public:
  BusView(const Bus& bus, const std::set<std::string, std::less<>>& allowed) : bus_(bus), allowed_(allowed) {}
  const BusMessage* latest(std::string_view topic) const;

 private:
  const Bus& bus_;
  const std::set<std::string, std::less<>>& allowed_;
};

// Static information a channel may use when a run starts. Deliberately
// carries no world geometry; ground truth only arrives through routing.
struct RunContext {
  double dt = 0.01;
  std::uint64_t seed = 0;
  std::vector<sensors::SensorConfig> sensors;
  world::Actor initial_ego;
  std::optional<scenario::Goal> goal;
  bool ground_truth_routed = false;
};

struct ChannelInputs {
  std::int64_t tick = 0;
  double time = 0.0;
  double dt = 0.01;
  ScenePtr scene;                         // only when ground truth is routed here
  std::vector<sensors::FramePtr> frames;  // routed frames delivered this tick
  BusView bus;
};

struct ChannelOutput {
  std::optional<ChannelCommand> command;
  bool heartbeat = true;
  std::vector<std::pair<std::string, Payload>> messages;  // on topics from publications()
};

class Channel {
 public:
  virtual ~Channel() = default;
  virtual std::string id() const = 0;
  virtual int priority() const = 0;
  // Bus topics read through ChannelInputs::bus.
  virtual std::vector<TopicDecl> subscriptions() const { return {}; }
  // Extra topics this channel publishes (beyond command/<id> and heartbeat/<id>).
  virtual std::vector<TopicDecl> publications() const { return {}; }
  virtual void start(const RunContext& context) { (void)context; }
  virtual ChannelOutput step(const ChannelInputs& inputs) = 0;
};

// Fresh commands are those at most `staleness` ticks old. Highest priority
// wins, ties go to the lexicographically smallest channel id. Two fresh
// commands sharing priority and channel id abort the run (RunError).
std::optional<ChannelCommand> arbitrate(std::span<const ChannelCommand> commands, std::int64_t tick,
                                        int staleness = kDefaultStaleness);

// Everything the kernel knows at the end of one tick, for tests and probes.
struct TickRecord {
  std::int64_t tick = 0;
  double time = 0.0;
  ScenePtr scene;
  std::vector<std::size_t> active_faults;
  std::vector<sensors::FramePtr> delivered;
  std::map<std::string, ChannelCommand> emitted;  // this tick, after channel faults
  std::map<std::string, ChannelCommand> held;     // latest per channel
  std::optional<ChannelCommand> applied;          // arbitration winner; nullopt = coast
  bool terminated = false;
  std::vector<const BusMessage*> messages;
};

using TickObserver = std::function<void(const TickRecord&)>;

struct KernelOptions {
  int staleness = kDefaultStaleness;
  TickObserver observer;
  nlohmann::json adi = nlohmann::json::object();  // recorded in the trace header
};

std::int64_t tick_count(double max_time, double dt);

// Runs one manifest to termination. Channels execute in the given order
// each tick. Setup problems (unknown routing targets, unresolved channel
// faults, undeclared subscriptions) raise ConfigError before tick 0.
TraceLog run(const scenario::RunManifest& manifest, std::span<Channel* const> channels,
             const KernelOptions& options = {});

}  // namespace adeye::kernel
