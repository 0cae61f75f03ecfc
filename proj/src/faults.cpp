#include "adeye/faults.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adeye::faults {

namespace {

// Window comparisons absorb the rounding of tick * dt.
constexpr double kTimeEps = 1e-9;

bool in_sector(double angle, const FaultParams& p) { return angle >= p.from && angle <= p.to; }

sensors::SensorFrame with_bias(const sensors::SensorFrame& in, double b) {
  sensors::SensorFrame out = in;
  std::visit(
      [b](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, sensors::LidarScan>) {
          for (auto& r : p.ranges) {
            if (r) r = std::max(0.0, *r + b);
          }
        } else if constexpr (std::is_same_v<T, sensors::ObjectList>) {
          for (auto& d : p.detections) {
            const double r = norm(d.position);
            if (r > 0.0) d.position = d.position * (std::max(0.0, r + b) / r);
          }
        } else if constexpr (std::is_same_v<T, sensors::GpsFix>) {
          p.x += b;
          p.y += b;
        } else if constexpr (std::is_same_v<T, sensors::ImuSample>) {
          p.accel += b;
        } else {
          if (p.range) p.range = std::max(0.0, *p.range + b);
        }
      },
      out.payload);
  return out;
}

sensors::SensorFrame with_dead_sector(const sensors::SensorFrame& in, const FaultParams& params) {
  sensors::SensorFrame out = in;
  if (auto* scan = std::get_if<sensors::LidarScan>(&out.payload)) {
    for (std::size_t i = 0; i < scan->angles.size(); ++i) {
      if (in_sector(scan->angles[i], params)) scan->ranges[i].reset();
    }
  } else if (auto* objects = std::get_if<sensors::ObjectList>(&out.payload)) {
    std::erase_if(objects->detections, [&params](const sensors::Detection& d) {
      return in_sector(std::atan2(d.position.y, d.position.x), params);
    });
  }
  return out;
}

}  // namespace

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::dropout: return "dropout";
    case FaultKind::stuck: return "stuck";
    case FaultKind::bias: return "bias";
    case FaultKind::noise_scale: return "noise_scale";
    case FaultKind::dead_sector: return "dead_sector";
    case FaultKind::delay: return "delay";
    case FaultKind::freeze: return "freeze";
    case FaultKind::silence: return "silence";
    case FaultKind::offset: return "offset";
  }
  return "dropout";
}

FaultKind fault_kind_from(std::string_view name) {
  for (auto k : {FaultKind::dropout, FaultKind::stuck, FaultKind::bias, FaultKind::noise_scale,
                 FaultKind::dead_sector, FaultKind::delay, FaultKind::freeze, FaultKind::silence,
                 FaultKind::offset}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown fault kind '" + std::string(name) + "'");
}

bool is_channel_fault(FaultKind kind) {
  return kind == FaultKind::freeze || kind == FaultKind::silence || kind == FaultKind::offset;
}

std::vector<std::size_t> active_faults(std::span<const FaultSpec> schedule, double time) {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& f = schedule[i];
    if (f.t_start <= time + kTimeEps && time + kTimeEps < f.t_end) active.push_back(i);
  }
  return active;
}

std::vector<const FaultSpec*> faults_for(std::span<const FaultSpec> schedule, std::span<const std::size_t> active,
                                         std::string_view target) {
  std::vector<const FaultSpec*> out;
  for (std::size_t i : active) {
    if (schedule[i].target == target) out.push_back(&schedule[i]);
  }
  return out;
}

std::vector<sensors::FramePtr> apply_sensor_fault(sensors::FramePtr frame, std::span<const FaultSpec* const> faults,
                                                  std::int64_t tick, SensorFaultHistory& history) {
  std::vector<sensors::FramePtr> delivered;
  while (!history.delayed.empty() && history.delayed.front().first <= tick) {
    delivered.push_back(std::move(history.delayed.front().second));
    history.delayed.pop_front();
  }

  std::optional<int> defer_ticks;
  if (frame) {
    for (const FaultSpec* f : faults) {
      if (!frame) break;
      switch (f->kind) {
        case FaultKind::dropout: frame.reset(); break;
        case FaultKind::stuck: frame = history.last_delivered; break;
        case FaultKind::bias:
          frame = std::make_shared<const sensors::SensorFrame>(with_bias(*frame, f->params.value));
          break;
        case FaultKind::dead_sector:
          frame = std::make_shared<const sensors::SensorFrame>(with_dead_sector(*frame, f->params));
          break;
        case FaultKind::delay: defer_ticks = std::max(defer_ticks.value_or(0), f->params.ticks); break;
        case FaultKind::noise_scale:
        case FaultKind::freeze:
        case FaultKind::silence:
        case FaultKind::offset: break;
      }
    }
  }

  if (frame && defer_ticks) {
    history.delayed.emplace_back(tick + *defer_ticks, std::move(frame));
    frame.reset();
  }
  if (frame) delivered.push_back(std::move(frame));
  if (!delivered.empty()) history.last_delivered = delivered.back();
  return delivered;
}

double noise_factor(std::span<const FaultSpec* const> faults) {
  double factor = 1.0;
  for (const FaultSpec* f : faults) {
    if (f->kind == FaultKind::noise_scale) factor *= f->params.factor;
  }
  return factor;
}

std::optional<ChannelCommand> apply_channel_fault(std::optional<ChannelCommand> command,
                                                  std::span<const FaultSpec* const> faults, std::int64_t tick,
                                                  const ChannelLimits& limits, ChannelFaultHistory& history) {
  for (const FaultSpec* f : faults) {
    switch (f->kind) {
      case FaultKind::silence: command.reset(); break;
      case FaultKind::freeze:
        command = history.last_emitted;
        if (command) command->tick = tick;
        break;
      case FaultKind::offset:
        if (command) {
          command->accel = std::clamp(command->accel + f->params.accel, -limits.accel_max, limits.accel_max);
          command->steer = std::clamp(command->steer + f->params.steer, -limits.steer_max, limits.steer_max);
        }
        break;
      default: break;
    }
  }
  if (command) history.last_emitted = command;
  return command;
}

bool silences(std::span<const FaultSpec* const> faults) {
  return std::any_of(faults.begin(), faults.end(), [](const FaultSpec* f) { return f->kind == FaultKind::silence; });
}

}  // namespace adeye::faults
