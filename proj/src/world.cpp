#include "adeye/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "adeye/error.hpp"

namespace adeye::world {

namespace {

constexpr double kComfortAccel = 3.0;    // m/s^2, scripted actors
constexpr double kSpeedTimeConstant = 1.0;  // s

const Actor* find_ego(std::span<const Actor> actors) {
  for (const auto& a : actors) {
    if (a.kind == ActorKind::ego) return &a;
  }
  return nullptr;
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path, what);
}

bool finite(Pose2D p) { return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.heading); }

bool heading_normalized(double h) { return h > -kPi && h <= kPi; }

}  // namespace

const Actor& World::ego() const {
  const Actor* e = find_ego(actors);
  if (!e) throw ValidationError("actors", "world has no ego actor");
  return *e;
}

const Actor& Scene::ego() const {
  const Actor* e = find_ego(actors);
  if (!e) throw ValidationError("actors", "scene has no ego actor");
  return *e;
}

const Actor* Scene::find_actor(std::string_view id) const {
  for (const auto& a : actors) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

std::string_view to_string(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::building: return "building";
    case ObstacleKind::tree: return "tree";
    case ObstacleKind::barrier: return "barrier";
    case ObstacleKind::other: return "other";
  }
  return "other";
}

std::string_view to_string(ActorKind kind) {
  switch (kind) {
    case ActorKind::ego: return "ego";
    case ActorKind::vehicle: return "vehicle";
    case ActorKind::pedestrian: return "pedestrian";
  }
  return "vehicle";
}

ObstacleKind obstacle_kind_from(std::string_view name) {
  for (auto k : {ObstacleKind::building, ObstacleKind::tree, ObstacleKind::barrier, ObstacleKind::other}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown obstacle kind '" + std::string(name) + "'");
}

ActorKind actor_kind_from(std::string_view name) {
  for (auto k : {ActorKind::ego, ActorKind::vehicle, ActorKind::pedestrian}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown actor kind '" + std::string(name) + "'");
}

void validate(const World& world) {
  const Aabb& b = world.bounds;
  require(std::isfinite(b.min.x) && std::isfinite(b.min.y) && std::isfinite(b.max.x) && std::isfinite(b.max.y) &&
              b.min.x < b.max.x && b.min.y < b.max.y,
          "world.bounds", "bounds must be finite with min < max");

  const auto& env = world.environment;
  require(env.friction > 0.0 && env.friction <= 1.5, "world.environment.friction", "must lie in (0, 1.5]");
  require(env.visibility > 0.0 && env.visibility <= 1.0, "world.environment.visibility", "must lie in (0, 1]");
  require(env.light > 0.0 && env.light <= 1.0, "world.environment.light", "must lie in (0, 1]");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
    const auto& o = world.obstacles[i];
    const std::string path = "world.obstacles[" + std::to_string(i) + "]";
    require(!o.id.empty(), path + ".id", "must be non-empty");
    require(ids.insert(o.id).second, path + ".id", "duplicate obstacle id '" + o.id + "'");
    if (const auto* c = std::get_if<Circle>(&o.shape)) {
      require(std::isfinite(c->center.x) && std::isfinite(c->center.y), path + ".circle.center", "must be finite");
      require(c->radius > 0.0 && std::isfinite(c->radius), path + ".circle.radius", "must be > 0");
    } else {
      const auto& v = std::get<Polygon>(o.shape).vertices;
      for (Vec2 p : v) require(std::isfinite(p.x) && std::isfinite(p.y), path + ".polygon", "vertices must be finite");
      require(is_convex_ccw(v), path + ".polygon",
              "must be a convex counterclockwise polygon with >= 3 vertices and positive area");
    }
    const Aabb box = bounding_box(o.shape);
    require(b.contains(box.min) && b.contains(box.max), path, "obstacle '" + o.id + "' extends outside world bounds");
  }

  ids.clear();
  for (const auto& lane : world.lanes) ids.insert(lane.id);
  std::set<std::string> lane_ids;
  for (std::size_t i = 0; i < world.lanes.size(); ++i) {
    const auto& lane = world.lanes[i];
    const std::string path = "world.lanes[" + std::to_string(i) + "]";
    require(!lane.id.empty(), path + ".id", "must be non-empty");
    require(lane_ids.insert(lane.id).second, path + ".id", "duplicate lane id '" + lane.id + "'");
    require(lane.centerline.size() >= 2, path + ".centerline", "needs at least 2 points");
    for (std::size_t k = 0; k + 1 < lane.centerline.size(); ++k) {
      require(!(lane.centerline[k] == lane.centerline[k + 1]), path + ".centerline",
              "consecutive points must be distinct (index " + std::to_string(k) + ")");
    }
    require(lane.width > 0.0 && std::isfinite(lane.width), path + ".width", "must be > 0");
    require(lane.speed_limit >= 0.0 && std::isfinite(lane.speed_limit), path + ".speed_limit", "must be >= 0");
    for (const auto& s : lane.successors) {
      require(ids.count(s) > 0, path + ".successors", "unknown lane id '" + s + "'");
    }
  }

  std::set<std::string> actor_ids;
  int egos = 0;
  std::size_t scripted_index = 0;
  for (const auto& a : world.actors) {
    const std::string path =
        a.kind == ActorKind::ego ? std::string("ego") : "actors[" + std::to_string(scripted_index++) + "]";
    require(!a.id.empty(), path + ".id", "must be non-empty");
    require(actor_ids.insert(a.id).second, path + ".id", "duplicate actor id '" + a.id + "'");
    if (a.kind == ActorKind::ego) ++egos;
    require(finite(a.state.pose), path + ".state.pose", "must be finite");
    require(heading_normalized(a.state.pose.heading), path + ".state.pose.heading", "must lie in (-pi, pi]");
    require(a.state.speed >= 0.0 && std::isfinite(a.state.speed), path + ".state.speed", "must be >= 0");
    require(a.vehicle.wheelbase > 0.0, path + ".vehicle.wheelbase", "must be > 0");
    require(a.vehicle.steer_max > 0.0 && a.vehicle.steer_max < kPi / 2, path + ".vehicle.steer_max",
            "must lie in (0, pi/2)");
    require(a.vehicle.capture_radius > 0.0, path + ".vehicle.capture_radius", "must be > 0");
    require(a.vehicle.accel_limit > 0.0, path + ".vehicle.accel_limit", "must be > 0");
    require(std::abs(a.state.steer) <= a.vehicle.steer_max, path + ".state.steer", "exceeds steer_max");
    require(a.footprint.length > 0.0 && a.footprint.width > 0.0, path + ".footprint", "dimensions must be > 0");
    require(b.contains(a.state.pose.position()), path + ".state.pose", "actor '" + a.id + "' starts outside bounds");
    if (a.kind == ActorKind::ego) require(a.script.empty(), path + ".script", "ego actor cannot carry a script");
    for (const auto& w : a.script) {
      require(std::isfinite(w.x) && std::isfinite(w.y) && w.speed >= 0.0, path + ".script",
              "waypoints need finite coordinates and speed >= 0");
    }
  }
  require(egos == 1, "ego", "exactly one ego actor required, found " + std::to_string(egos));
}

Shape footprint_shape(const Actor& actor) {
  return oriented_rectangle(actor.state.pose, actor.footprint.length, actor.footprint.width);
}

Actor step_actor(const Actor& actor, Control control, double dt, const Environment& env) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt", "must be finite and > 0");
  if (!std::isfinite(control.accel)) throw ValidationError("control.accel", "must be finite");
  if (!std::isfinite(control.steer)) throw ValidationError("control.steer", "must be finite");

  const double cap = env.friction * kGravity;
  const double accel = std::clamp(control.accel, -cap, cap);
  const double steer = std::clamp(control.steer, -actor.vehicle.steer_max, actor.vehicle.steer_max);

  Actor next = actor;
  auto& s = next.state;
  const double v = actor.state.speed;
  const double h = actor.state.pose.heading;
  const double yaw_rate = v / actor.vehicle.wheelbase * std::tan(steer);
  s.pose.x += v * std::cos(h) * dt;
  s.pose.y += v * std::sin(h) * dt;
  s.pose.heading = normalize_angle(h + yaw_rate * dt);
  s.speed = std::max(0.0, v + accel * dt);
  s.accel = (s.speed - v) / dt;
  s.steer = steer;
  s.yaw_rate = yaw_rate;
  return next;
}

Actor advance_scripted(const Actor& actor, double dt, const Environment& env) {
  if (actor.kind == ActorKind::ego) throw ValidationError("actor", "advance_scripted called on the ego actor");
  if (actor.script.empty()) {
    Actor held = actor;
    held.state.speed = 0.0;
    held.state.accel = 0.0;
    held.state.yaw_rate = 0.0;
    return held;
  }

  Actor current = actor;
  const Vec2 pos = current.state.pose.position();
  while (current.next_waypoint < current.script.size()) {
    const auto& w = current.script[current.next_waypoint];
    if (distance(pos, {w.x, w.y}) > current.vehicle.capture_radius) break;
    ++current.next_waypoint;
  }

  Control control;
  const double v = current.state.speed;
  if (current.next_waypoint >= current.script.size()) {
    control.accel = -std::min(kComfortAccel, v / dt);
    return step_actor(current, control, dt, env);
  }

  const auto& target = current.script[current.next_waypoint];
  const Vec2 to_target = Vec2{target.x, target.y} - pos;
  const double bearing = std::atan2(to_target.y, to_target.x);
  const double alpha = normalize_angle(bearing - current.state.pose.heading);
  control.accel = std::clamp((target.speed - v) / kSpeedTimeConstant, -kComfortAccel, kComfortAccel);
  if (std::abs(target.speed - v) < kComfortAccel * dt) control.accel = (target.speed - v) / dt;

  if (current.kind == ActorKind::pedestrian) {
    // Pedestrians turn in place.
    current.state.pose.heading = normalize_angle(bearing);
    control.steer = 0.0;
  } else if (std::abs(alpha) > kPi / 2) {
    control.steer = alpha > 0.0 ? current.vehicle.steer_max : -current.vehicle.steer_max;
  } else {
    control.steer = std::atan(2.0 * current.vehicle.wheelbase * std::sin(alpha) / norm(to_target));
  }
  return step_actor(current, control, dt, env);
}

bool contain(Actor& actor, const Aabb& bounds) {
  auto& p = actor.state.pose;
  if (bounds.contains(p.position())) return false;
  p.x = std::clamp(p.x, bounds.min.x, bounds.max.x);
  p.y = std::clamp(p.y, bounds.min.y, bounds.max.y);
  actor.state.speed = 0.0;
  return true;
}

std::vector<Body> collect_bodies(std::span<const StaticObstacle> obstacles, std::span<const Actor> actors,
                                 std::string_view exclude) {
  std::vector<Body> bodies;
  bodies.reserve(obstacles.size() + actors.size());
  for (const auto& o : obstacles) {
    if (!exclude.empty() && o.id == exclude) continue;
    bodies.push_back({TargetKind::obstacle, o.id, o.shape, bounding_box(o.shape)});
  }
  for (const auto& a : actors) {
    if (!exclude.empty() && a.id == exclude) continue;
    Shape s = footprint_shape(a);
    const Aabb box = bounding_box(s);
    bodies.push_back({TargetKind::actor, a.id, std::move(s), box});
  }
  return bodies;
}

std::optional<Hit> ray_cast(std::span<const Body> bodies, Vec2 origin, double angle, double max_range) {
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  const Vec2 end = origin + dir * max_range;
  const Aabb ray_box{{std::min(origin.x, end.x), std::min(origin.y, end.y)},
                     {std::max(origin.x, end.x), std::max(origin.y, end.y)}};
  const Body* best = nullptr;
  double best_t = max_range;
  for (const auto& body : bodies) {
    if (!body.box.intersects(ray_box)) continue;
    const auto t = ray_intersect(body.shape, origin, dir);
    if (t && *t <= best_t && (best == nullptr || *t < best_t)) {
      best = &body;
      best_t = *t;
    }
  }
  if (!best) return std::nullopt;
  return Hit{best_t, best->kind, std::string(best->id)};
}

std::optional<Hit> ray_cast(const World& world, Vec2 origin, double angle, double max_range,
                            std::string_view exclude) {
  const auto bodies = collect_bodies(world.obstacles, world.actors, exclude);
  return ray_cast(bodies, origin, angle, max_range);
}

std::optional<Hit> ray_cast(const Scene& scene, Vec2 origin, double angle, double max_range,
                            std::string_view exclude) {
  const auto bodies = collect_bodies(scene.world->obstacles, scene.actors, exclude);
  return ray_cast(bodies, origin, angle, max_range);
}

Scene ground_truth(const std::shared_ptr<const World>& world, std::int64_t tick, double dt) {
  return ground_truth(world, world->actors, tick, dt);
}

Scene ground_truth(const std::shared_ptr<const World>& world, std::span<const Actor> actors, std::int64_t tick,
                   double dt) {
  Scene scene;
  scene.tick = tick;
  scene.time = static_cast<double>(tick) * dt;
  scene.actors.assign(actors.begin(), actors.end());
  scene.environment = world->environment;
  scene.world = world;
  return scene;
}

}  // namespace adeye::world
