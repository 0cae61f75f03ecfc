#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "adeye/kernel.hpp"
#include "adeye/messages.hpp"
#include "adeye/world.hpp"

namespace adeye::safety {

inline constexpr int kPriority = 10;

struct GridConfig {
  double resolution = 0.5;       // m per cell
  double extent = 64.0;          // window side length, m, centred on the ego
  double inflation_radius = 2.0;  // r_inf
  bool operator==(const GridConfig&) const = default;
};

struct MonitorConfig {
  double rating_threshold = 0.8;
  std::int64_t heartbeat_timeout = 20;  // ticks
  double a_max = 6.0;                   // braking capability, m/s^2
  double t_react = 0.1;                 // s
  double margin = 1.0;                  // m
  double j_max = 10.0;                  // jerk limit of the safe stop, m/s^3
  double a_cmd_max = 8.0;               // |accel| limit on nominal commands
  std::optional<double> steer_max;      // defaults to the ego's vehicle limit
  bool operator==(const MonitorConfig&) const = default;
};

struct SafetyConfig {
  std::string id = "safety";
  std::string monitored = "nominal";  // empty: no heartbeat/limit monitoring
  GridConfig grid;
  MonitorConfig monitor;
  bool operator==(const SafetyConfig&) const = default;
};

nlohmann::json to_json(const SafetyConfig& c);
SafetyConfig safety_config_from(const nlohmann::json& j, const std::string& path);

// Row-major dense grid; cell (ix, iy) covers
// [origin.x + ix*res, origin.x + (ix+1)*res] x [origin.y + iy*res, ...].
struct SafetyGrid {
  Vec2 origin;
  double resolution = 0.5;
  int width = 0;
  int height = 0;
  std::vector<double> ratings;

  double at(int ix, int iy) const { return ratings[static_cast<std::size_t>(iy) * width + ix]; }
  double& at(int ix, int iy) { return ratings[static_cast<std::size_t>(iy) * width + ix]; }
  bool in_range(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width && iy < height; }
  Vec2 cell_center(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * resolution, origin.y + (iy + 0.5) * resolution};
  }
  Aabb cell_box(int ix, int iy) const {
    return {{origin.x + ix * resolution, origin.y + iy * resolution},
            {origin.x + (ix + 1) * resolution, origin.y + (iy + 1) * resolution}};
  }
  // Cell containing p (floor); may be out of range.
  std::array<int, 2> cell_of(Vec2 p) const;
};

// Cells are occupied (1.0) when their closed square meets a non-ego body;
// others get max(0, 1 - d/r_inf) over occupied cells o, d = centre distance.
SafetyGrid build_grid(const world::Scene& scene, const GridConfig& config);

// Whether the closed, axis-aligned `box` meets `shape`.
bool box_overlaps(const Aabb& box, const Shape& shape);

// Required free distance ahead of the front bumper at speed v:
// margin + v*t_react + v^2/(2*a_max) + v*a_max/(2*j_max). The last two terms
// are the stop distance of the jerk-limited plan when it reaches a_max; below
// v = a_max^2/j_max they still bound it (AM-GM).
double braking_envelope(double v, const MonitorConfig& config);

struct FreeDistance {
  double distance = 0.0;  // from the front bumper along the heading
  std::optional<std::array<int, 2>> cell;
};

// Scans an ego-width corridor straight ahead (constant-velocity prediction)
// for the first cell rated >= threshold, up to `max_distance`.
FreeDistance free_distance(const SafetyGrid& grid, const world::Actor& ego, double threshold, double max_distance);

struct MonitorInputs {
  std::int64_t heartbeat_age = 0;            // ticks since the monitored heartbeat
  std::optional<ChannelCommand> last_command;  // monitored channel's latest
  double steer_max = 0.6;
};

Verdict monitor(const world::Scene& scene, const SafetyGrid& grid, const MonitorInputs& inputs,
                const MonitorConfig& config);

// Symmetric jerk-limited deceleration from v0 to rest: jerk ramp to the peak
// deceleration, hold, ramp back. The peak is a_max unless v0 < a_max^2/j_max,
// in which case it is sqrt(v0 * j_max) and the hold phase vanishes.
class SafeStopPlan {
 public:
  SafeStopPlan() = default;
  SafeStopPlan(double v0, double a_max, double j_max);

  double v0() const { return v0_; }
  double peak_decel() const { return a_peak_; }
  double duration() const { return total_; }
  double speed_at(double t) const;
  double decel_at(double t) const;  // positive magnitude
  // Closed form: v0^2/(2a) + v0*a/(2j) (trapezoidal) or v0*sqrt(v0/j).
  double distance() const;
  // Accel command for the interval [k*dt, (k+1)*dt): the profile's mean there.
  double command(std::int64_t k, double dt, double a_hold) const;

 private:
  double v0_ = 0.0;
  double j_ = 1.0;
  double a_peak_ = 0.0;
  double ramp_ = 0.0;
  double hold_ = 0.0;
  double total_ = 0.0;
};

enum class Mode { nominal_active, safety_latched };

struct SwitchState {
  Mode mode = Mode::nominal_active;
  std::optional<std::int64_t> latch_tick;
};

class SafetyChannel final : public kernel::Channel {
 public:
  explicit SafetyChannel(SafetyConfig config = {});

  std::string id() const override { return config_.id; }
  int priority() const override { return kPriority; }
  std::vector<kernel::TopicDecl> subscriptions() const override;
  std::vector<kernel::TopicDecl> publications() const override;
  void start(const kernel::RunContext& context) override;
  kernel::ChannelOutput step(const kernel::ChannelInputs& inputs) override;

  const SwitchState& switch_state() const { return switch_; }
  const std::optional<Verdict>& last_verdict() const { return last_verdict_; }
  const SafeStopPlan& plan() const { return plan_; }
  const SafetyConfig& config() const { return config_; }

 private:
  SafetyConfig config_;
  double steer_max_ = 0.6;
  double dt_ = 0.01;
  SwitchState switch_;
  SafeStopPlan plan_;
  std::optional<Verdict> last_verdict_;
};

}  // namespace adeye::safety
