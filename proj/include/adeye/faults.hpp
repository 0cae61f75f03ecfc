#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adeye/messages.hpp"
#include "adeye/sensors.hpp"

namespace adeye::faults {

enum class FaultKind {
  // sensor faults
  dropout,
  stuck,
  bias,
  noise_scale,
  dead_sector,
  delay,
  // channel faults
  freeze,
  silence,
  offset,
};

std::string_view to_string(FaultKind kind);
FaultKind fault_kind_from(std::string_view name);  // throws std::invalid_argument
bool is_channel_fault(FaultKind kind);

// Only the fields relevant to the kind are meaningful (and serialized).
struct FaultParams {
  double value = 0.0;   // bias: additive offset, m (or m/s^2 for imu)
  double factor = 1.0;  // noise_scale
  double from = 0.0;    // dead_sector, sensor-frame radians
  double to = 0.0;
  int ticks = 1;        // delay
  double accel = 0.0;   // offset
  double steer = 0.0;
  bool operator==(const FaultParams&) const = default;
};

// Active on the half-open window [t_start, t_end).
struct FaultSpec {
  std::string target;
  FaultKind kind = FaultKind::dropout;
  FaultParams params;
  double t_start = 0.0;
  double t_end = 0.0;
  bool operator==(const FaultSpec&) const = default;
};

// Declaration indices of the faults active at `time`, ascending.
std::vector<std::size_t> active_faults(std::span<const FaultSpec> schedule, double time);

// Subset of `active` (declaration indices) that targets `target`.
std::vector<const FaultSpec*> faults_for(std::span<const FaultSpec> schedule, std::span<const std::size_t> active,
                                         std::string_view target);

struct SensorFaultHistory {
  sensors::FramePtr last_delivered;
  std::deque<std::pair<std::int64_t, sensors::FramePtr>> delayed;  // (due tick, frame)
};

// Applies the active faults of one sensor, in declaration order, to the frame
// sampled at `tick` (null on ticks where the sensor does not sample) and
// returns what reaches the channels this tick: frames whose delay expires now,
// followed by the current frame unless it was suppressed or deferred.
// noise_scale acts at sampling time (see sensors::scale_noise) and is
// ignored here.
std::vector<sensors::FramePtr> apply_sensor_fault(sensors::FramePtr frame, std::span<const FaultSpec* const> faults,
                                                  std::int64_t tick, SensorFaultHistory& history);

// Product of the active noise_scale factors.
double noise_factor(std::span<const FaultSpec* const> faults);

struct ChannelLimits {
  double steer_max = 0.6;
  double accel_max = 10.0;
};

struct ChannelFaultHistory {
  std::optional<ChannelCommand> last_emitted;
};

// silence drops the command; freeze repeats the last emitted command
// (re-stamped with `tick`); offset shifts accel/steer and re-clamps.
std::optional<ChannelCommand> apply_channel_fault(std::optional<ChannelCommand> command,
                                                  std::span<const FaultSpec* const> faults, std::int64_t tick,
                                                  const ChannelLimits& limits, ChannelFaultHistory& history);

bool silences(std::span<const FaultSpec* const> faults);

}  // namespace adeye::faults
