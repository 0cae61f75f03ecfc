#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adeye/geometry.hpp"

namespace adeye::world {

enum class ObstacleKind { building, tree, barrier, other };

struct StaticObstacle {
  std::string id;
  Shape shape;
  ObstacleKind kind = ObstacleKind::other;
  // Unmapped obstacles are left out of the nominal channel's prior map
  // (e.g. a barrier placed after the mapping drive).
  bool mapped = true;
  bool operator==(const StaticObstacle&) const = default;
};

struct Lane {
  std::string id;
  std::vector<Vec2> centerline;
  double width = 3.5;
  std::vector<std::string> successors;
  double speed_limit = 10.0;  // m/s
  bool operator==(const Lane&) const = default;
};

enum class ActorKind { ego, vehicle, pedestrian };

struct VehicleParams {
  double wheelbase = 2.7;       // m
  double steer_max = 0.6;       // rad
  double capture_radius = 2.0;  // m, waypoint capture for scripted actors
  double accel_limit = 10.0;    // m/s^2, actuator command bound
  bool operator==(const VehicleParams&) const = default;
};

struct ActorState {
  Pose2D pose;
  double speed = 0.0;     // m/s, >= 0
  double accel = 0.0;     // realized over the last step
  double steer = 0.0;     // rad
  double yaw_rate = 0.0;  // realized over the last step
  bool operator==(const ActorState&) const = default;
};

struct Footprint {
  double length = 4.5;
  double width = 1.8;
  bool operator==(const Footprint&) const = default;
};

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double speed = 0.0;  // target speed while approaching
  bool operator==(const Waypoint&) const = default;
};

struct Actor {
  std::string id;
  ActorKind kind = ActorKind::vehicle;
  ActorState state;
  Footprint footprint;
  VehicleParams vehicle;
  std::vector<Waypoint> script;
  std::size_t next_waypoint = 0;
  bool operator==(const Actor&) const = default;
};

struct Environment {
  double friction = 1.0;    // (0, 1.5]
  double visibility = 1.0;  // (0, 1]
  double light = 1.0;       // (0, 1]
  bool operator==(const Environment&) const = default;
};

struct World {
  std::vector<StaticObstacle> obstacles;
  std::vector<Lane> lanes;
  std::vector<Actor> actors;
  Environment environment;
  Aabb bounds{{0.0, 0.0}, {100.0, 100.0}};

  const Actor& ego() const;
  bool operator==(const World&) const = default;
};

// Ground-truth snapshot at one tick. Static geometry is shared with the run.
struct Scene {
  std::int64_t tick = 0;
  double time = 0.0;
  std::vector<Actor> actors;
  Environment environment;
  std::shared_ptr<const World> world;

  const Actor& ego() const;
  const Actor* find_actor(std::string_view id) const;
};

struct Control {
  double accel = 0.0;
  double steer = 0.0;
};

// Throws ValidationError naming the first violated invariant.
void validate(const World& world);

std::string_view to_string(ObstacleKind kind);
std::string_view to_string(ActorKind kind);
ObstacleKind obstacle_kind_from(std::string_view name);  // throws std::invalid_argument
ActorKind actor_kind_from(std::string_view name);

Shape footprint_shape(const Actor& actor);

// Kinematic bicycle step (explicit Euler on the pre-step heading and speed).
// Acceleration is capped at +/- friction * g, steering at +/- steer_max, and
// speed never drops below zero.
Actor step_actor(const Actor& actor, Control control, double dt, const Environment& env);

// One step of a non-ego actor following its own waypoint script.
Actor advance_scripted(const Actor& actor, double dt, const Environment& env);

// Clamps the actor into `bounds`; when clamped, speed drops to zero and the
// function returns true.
bool contain(Actor& actor, const Aabb& bounds);

enum class TargetKind { obstacle, actor };

struct Body {
  TargetKind kind;
  std::string_view id;
  Shape shape;
  Aabb box;
};

// Collision geometry of every obstacle and actor except `exclude`. Ids are
// views into the source containers, which must outlive the result.
std::vector<Body> collect_bodies(std::span<const StaticObstacle> obstacles, std::span<const Actor> actors,
                                 std::string_view exclude = {});

struct Hit {
  double distance = 0.0;
  TargetKind kind = TargetKind::obstacle;
  std::string id;
  bool operator==(const Hit&) const = default;
};

std::optional<Hit> ray_cast(std::span<const Body> bodies, Vec2 origin, double angle, double max_range);
std::optional<Hit> ray_cast(const World& world, Vec2 origin, double angle, double max_range,
                            std::string_view exclude = {});
std::optional<Hit> ray_cast(const Scene& scene, Vec2 origin, double angle, double max_range,
                            std::string_view exclude = {});

Scene ground_truth(const std::shared_ptr<const World>& world, std::int64_t tick, double dt);
Scene ground_truth(const std::shared_ptr<const World>& world, std::span<const Actor> actors, std::int64_t tick,
                   double dt);

}  // namespace adeye::world
