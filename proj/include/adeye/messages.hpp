#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace adeye {

// The single actuation contract every channel emits.
struct ChannelCommand {
  std::string channel_id;
  int priority = 0;  // higher wins
  double accel = 0.0;
  double steer = 0.0;
  std::int64_t tick = 0;
  bool operator==(const ChannelCommand&) const = default;
};

struct Heartbeat {
  std::string channel_id;
  std::uint64_t counter = 0;
  std::int64_t tick = 0;
  bool operator==(const Heartbeat&) const = default;
};

enum class VerdictStatus { ok, trigger };
// Ascending priority: when several predicates hold, the last one listed wins.
enum class TriggerReason { limit_violation, heartbeat_loss, predicted_collision };

std::string_view to_string(VerdictStatus status);
std::string_view to_string(TriggerReason reason);

struct Evidence {
  std::optional<std::array<int, 2>> cell;  // offending grid cell (ix, iy)
  std::optional<double> distance;          // free distance along the predicted path, m
  std::optional<double> required;          // braking envelope it was compared against, m
  std::optional<std::int64_t> age;         // heartbeat age, ticks
  std::string field;                       // offending command field
  bool operator==(const Evidence&) const = default;
};

struct Verdict {
  VerdictStatus status = VerdictStatus::ok;
  std::optional<TriggerReason> reason;
  Evidence evidence;
  bool operator==(const Verdict&) const = default;
};

struct FaultEvent {
  std::string target;
  std::string kind;   // fault kind, or "channel_failure" / "contained"
  std::string event;  // "activated", "deactivated", "raised"
  std::string detail;
  bool operator==(const FaultEvent&) const = default;
};

struct MetricEvent {
  std::string name;
  double value = 0.0;
  std::string detail;
  bool operator==(const MetricEvent&) const = default;
};

nlohmann::json to_json(const ChannelCommand& c);
nlohmann::json to_json(const Heartbeat& h);
nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const FaultEvent& e);
nlohmann::json to_json(const MetricEvent& m);

}  // namespace adeye
