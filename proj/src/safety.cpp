#include "adeye/safety.hpp"

#include <algorithm>
#include <cmath>

#include "adeye/detail/json_util.hpp"
#include "adeye/error.hpp"

namespace adeye::safety {

using nlohmann::json;
using namespace adeye::detail;

// ---------------------------------------------------------------------------
// config

json to_json(const SafetyConfig& c) {
  const auto& m = c.monitor;
  return {{"id", c.id},
          {"monitored", c.monitored},
          {"grid", {{"resolution", c.grid.resolution}, {"extent", c.grid.extent}, {"inflation_radius", c.grid.inflation_radius}}},
          {"monitor",
           {{"rating_threshold", m.rating_threshold},
            {"heartbeat_timeout", m.heartbeat_timeout},
            {"a_max", m.a_max},
            {"t_react", m.t_react},
            {"margin", m.margin},
            {"j_max", m.j_max},
            {"a_cmd_max", m.a_cmd_max},
            {"steer_max", m.steer_max ? json(*m.steer_max) : json(nullptr)}}}};
}

SafetyConfig safety_config_from(const json& j, const std::string& path) {
  SafetyConfig c;
  ObjectReader r(j, path);
  c.id = r.string("id", c.id);
  c.monitored = r.string("monitored", c.monitored);
  if (const json* g = r.optional("grid")) {
    ObjectReader gr(*g, r.path_of("grid"));
    c.grid.resolution = gr.number("resolution", c.grid.resolution);
    c.grid.extent = gr.number("extent", c.grid.extent);
    c.grid.inflation_radius = gr.number("inflation_radius", c.grid.inflation_radius);
    gr.finish();
  }
  if (const json* m = r.optional("monitor")) {
    ObjectReader mr(*m, r.path_of("monitor"));
    auto& mc = c.monitor;
    mc.rating_threshold = mr.number("rating_threshold", mc.rating_threshold);
    mc.heartbeat_timeout = mr.integer("heartbeat_timeout", mc.heartbeat_timeout);
    mc.a_max = mr.number("a_max", mc.a_max);
    mc.t_react = mr.number("t_react", mc.t_react);
    mc.margin = mr.number("margin", mc.margin);
    mc.j_max = mr.number("j_max", mc.j_max);
    mc.a_cmd_max = mr.number("a_cmd_max", mc.a_cmd_max);
    if (const json* s = mr.optional("steer_max"); s && !s->is_null()) mc.steer_max = as_finite(*s, mr.path_of("steer_max"));
    mr.finish();
  }
  r.finish();

  const auto positive = [&](double v, const std::string& p) {
    if (!(v > 0.0)) throw ValidationError(p, "must be > 0");
  };
  if (c.id.empty()) throw ValidationError(r.path_of("id"), "must be non-empty");
  positive(c.grid.resolution, path + ".grid.resolution");
  positive(c.grid.extent, path + ".grid.extent");
  positive(c.grid.inflation_radius, path + ".grid.inflation_radius");
  positive(c.monitor.a_max, path + ".monitor.a_max");
  positive(c.monitor.a_cmd_max, path + ".monitor.a_cmd_max");
  positive(c.monitor.j_max, path + ".monitor.j_max");
  if (!(c.monitor.rating_threshold > 0.0 && c.monitor.rating_threshold <= 1.0)) {
    throw ValidationError(path + ".monitor.rating_threshold", "must lie in (0, 1]");
  }
  if (c.monitor.heartbeat_timeout < 1) throw ValidationError(path + ".monitor.heartbeat_timeout", "must be >= 1");
  if (c.monitor.t_react < 0.0) throw ValidationError(path + ".monitor.t_react", "must be >= 0");
  if (c.monitor.margin < 0.0) throw ValidationError(path + ".monitor.margin", "must be >= 0");
  if (c.monitor.steer_max && !(*c.monitor.steer_max > 0.0)) throw ValidationError(path + ".monitor.steer_max", "must be > 0");
  return c;
}

// ---------------------------------------------------------------------------
// grid

std::array<int, 2> SafetyGrid::cell_of(Vec2 p) const {
  return {static_cast<int>(std::floor((p.x - origin.x) / resolution)),
          static_cast<int>(std::floor((p.y - origin.y) / resolution))};
}

bool box_overlaps(const Aabb& box, const Shape& shape) {
  if (const auto* c = std::get_if<Circle>(&shape)) {
    const double cx = std::clamp(c->center.x, box.min.x, box.max.x);
    const double cy = std::clamp(c->center.y, box.min.y, box.max.y);
    const double dx = c->center.x - cx, dy = c->center.y - cy;
    return dx * dx + dy * dy <= c->radius * c->radius;
  }
  const auto& v = std::get<Polygon>(shape).vertices;
  // Box axes.
  double minx = v[0].x, maxx = v[0].x, miny = v[0].y, maxy = v[0].y;
  for (const auto& p : v) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  if (maxx < box.min.x || minx > box.max.x || maxy < box.min.y || miny > box.max.y) return false;
  // Polygon edge normals.
  const Vec2 corners[4] = {box.min, {box.max.x, box.min.y}, box.max, {box.min.x, box.max.y}};
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i];
    const Vec2 e = v[(i + 1) % v.size()] - a;
    const Vec2 n{e.y, -e.x};  // outward for CCW polygons
    double poly_max = -INFINITY;
    for (const auto& p : v) poly_max = std::max(poly_max, dot(p - a, n));
    double box_min = INFINITY;
    for (const auto& q : corners) box_min = std::min(box_min, dot(q - a, n));
    if (box_min > poly_max) return false;
  }
  return true;
}

SafetyGrid build_grid(const world::Scene& scene, const GridConfig& config) {
  const auto& ego = scene.ego();
  const double res = config.resolution;
  SafetyGrid g;
  g.resolution = res;
  g.width = g.height = static_cast<int>(std::ceil(config.extent / res - 1e-9));
  const Vec2 c = ego.state.pose.position();
  g.origin = {std::floor((c.x - 0.5 * config.extent) / res) * res, std::floor((c.y - 0.5 * config.extent) / res) * res};
  g.ratings.assign(static_cast<std::size_t>(g.width) * g.height, 0.0);

  std::vector<char> occupied(g.ratings.size(), 0);
  for (const auto& body : world::collect_bodies(scene.world->obstacles, scene.actors, ego.id)) {
    const auto lo = g.cell_of(body.box.min);
    const auto hi = g.cell_of(body.box.max);
    const int x0 = std::max(lo[0], 0), x1 = std::min(hi[0], g.width - 1);
    const int y0 = std::max(lo[1], 0), y1 = std::min(hi[1], g.height - 1);
    // A box edge exactly on a cell boundary also touches the cell below it.
    for (int iy = std::max(y0 - 1, 0); iy <= y1; ++iy) {
      for (int ix = std::max(x0 - 1, 0); ix <= x1; ++ix) {
        const std::size_t k = static_cast<std::size_t>(iy) * g.width + ix;
        if (occupied[k]) continue;
        if (box_overlaps(g.cell_box(ix, iy), body.shape)) occupied[k] = 1;
      }
    }
  }

  // The nearest occupied cell of any free cell is always on the occupied
  // boundary, so only boundary cells need to spread their rating.
  const double r_inf = config.inflation_radius;
  const int reach = static_cast<int>(std::ceil(r_inf / res));
  const auto occ = [&](int ix, int iy) { return occupied[static_cast<std::size_t>(iy) * g.width + ix] != 0; };
  for (int iy = 0; iy < g.height; ++iy) {
    for (int ix = 0; ix < g.width; ++ix) {
      if (!occ(ix, iy)) continue;
      g.at(ix, iy) = 1.0;
      const bool boundary = (ix > 0 && !occ(ix - 1, iy)) || (ix + 1 < g.width && !occ(ix + 1, iy)) ||
                            (iy > 0 && !occ(ix, iy - 1)) || (iy + 1 < g.height && !occ(ix, iy + 1));
      if (!boundary) continue;
      for (int dy = -reach; dy <= reach; ++dy) {
        const int ny = iy + dy;
        if (ny < 0 || ny >= g.height) continue;
        for (int dx = -reach; dx <= reach; ++dx) {
          const int nx = ix + dx;
          if (nx < 0 || nx >= g.width || occ(nx, ny)) continue;
          const double d = res * std::hypot(static_cast<double>(dx), static_cast<double>(dy));
          const double rating = std::max(0.0, 1.0 - d / r_inf);
          double& cell = g.at(nx, ny);
          if (rating > cell) cell = rating;
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// monitor

double braking_envelope(double v, const MonitorConfig& config) {
  return config.margin + v * config.t_react + v * v / (2.0 * config.a_max) + v * config.a_max / (2.0 * config.j_max);
}

FreeDistance free_distance(const SafetyGrid& grid, const world::Actor& ego, double threshold, double max_distance) {
  const auto& pose = ego.state.pose;
  const Vec2 dir{std::cos(pose.heading), std::sin(pose.heading)};
  const Vec2 left{-dir.y, dir.x};
  const Vec2 bumper = pose.position() + dir * (0.5 * ego.footprint.length);
  const double half_w = 0.5 * ego.footprint.width;
  const int lateral = static_cast<int>(std::ceil(ego.footprint.width / (0.5 * grid.resolution))) + 1;
  const double ds = 0.25 * grid.resolution;
  const int steps = static_cast<int>(std::ceil(max_distance / ds));
  for (int k = 0; k <= steps; ++k) {
    const double s = std::min(k * ds, max_distance);
    for (int i = 0; i < lateral; ++i) {
      const double l = -half_w + ego.footprint.width * i / (lateral - 1);
      const auto cell = grid.cell_of(bumper + dir * s + left * l);
      if (!grid.in_range(cell[0], cell[1])) continue;
      if (grid.at(cell[0], cell[1]) >= threshold) return {s, cell};
    }
  }
  return {max_distance, std::nullopt};
}

Verdict monitor(const world::Scene& scene, const SafetyGrid& grid, const MonitorInputs& inputs,
                const MonitorConfig& config) {
  Verdict v;
  const auto& ego = scene.ego();
  const double required = braking_envelope(ego.state.speed, config);
  const FreeDistance free = free_distance(grid, ego, config.rating_threshold, required + grid.resolution);
  if (free.distance < required) {
    v.reason = TriggerReason::predicted_collision;
    v.evidence.cell = free.cell;
    v.evidence.distance = free.distance;
    v.evidence.required = required;
  } else if (inputs.heartbeat_age > config.heartbeat_timeout) {
    v.reason = TriggerReason::heartbeat_loss;
    v.evidence.age = inputs.heartbeat_age;
  } else if (inputs.last_command) {
    const double steer_max = config.steer_max.value_or(inputs.steer_max);
    if (std::abs(inputs.last_command->steer) > steer_max) {
      v.reason = TriggerReason::limit_violation;
      v.evidence.field = "steer";
    } else if (std::abs(inputs.last_command->accel) > config.a_cmd_max) {
      v.reason = TriggerReason::limit_violation;
      v.evidence.field = "accel";
    }
  }
  if (v.reason) v.status = VerdictStatus::trigger;
  return v;
}

// ---------------------------------------------------------------------------
// safe stop

SafeStopPlan::SafeStopPlan(double v0, double a_max, double j_max) : v0_(std::max(0.0, v0)), j_(j_max) {
  if (v0_ <= 0.0) return;
  a_peak_ = v0_ >= a_max * a_max / j_max ? a_max : std::sqrt(v0_ * j_max);
  ramp_ = a_peak_ / j_max;
  total_ = v0_ / a_peak_ + ramp_;
  hold_ = std::max(0.0, total_ - 2.0 * ramp_);
}

double SafeStopPlan::speed_at(double t) const {
  if (v0_ <= 0.0 || t >= total_) return 0.0;
  if (t <= 0.0) return v0_;
  if (t <= ramp_) return v0_ - 0.5 * j_ * t * t;
  if (t <= ramp_ + hold_) return v0_ - 0.5 * a_peak_ * ramp_ - a_peak_ * (t - ramp_);
  const double u = total_ - t;
  return 0.5 * j_ * u * u;
}

double SafeStopPlan::decel_at(double t) const {
  if (v0_ <= 0.0 || t <= 0.0 || t >= total_) return 0.0;
  if (t <= ramp_) return j_ * t;
  if (t <= ramp_ + hold_) return a_peak_;
  return j_ * (total_ - t);
}

double SafeStopPlan::distance() const { return v0_ * total_ / 2.0; }

double SafeStopPlan::command(std::int64_t k, double dt, double a_hold) const {
  const double t0 = static_cast<double>(k) * dt;
  if (t0 >= total_) return -a_hold;
  return (speed_at(t0 + dt) - speed_at(t0)) / dt;
}

// ---------------------------------------------------------------------------
// channel

SafetyChannel::SafetyChannel(SafetyConfig config) : config_(std::move(config)) {}

std::vector<kernel::TopicDecl> SafetyChannel::subscriptions() const {
  if (config_.monitored.empty()) return {};
  return {{"heartbeat/" + config_.monitored, kernel::PayloadType::heartbeat},
          {"command/" + config_.monitored, kernel::PayloadType::command}};
}

std::vector<kernel::TopicDecl> SafetyChannel::publications() const {
  return {{"verdict", kernel::PayloadType::verdict}};
}

void SafetyChannel::start(const kernel::RunContext& context) {
  if (!context.ground_truth_routed) {
    throw ConfigError("channel '" + config_.id + "' needs ground truth; add it under routing.ground_truth");
  }
  steer_max_ = context.initial_ego.vehicle.steer_max;
  dt_ = context.dt;
  switch_ = {};
  plan_ = {};
  last_verdict_.reset();
}

kernel::ChannelOutput SafetyChannel::step(const kernel::ChannelInputs& in) {
  kernel::ChannelOutput out;
  if (!in.scene) throw RunError("safety channel stepped without ground truth");

  if (switch_.mode == Mode::nominal_active) {
    MonitorInputs mi;
    mi.steer_max = steer_max_;
    if (!config_.monitored.empty()) {
      const auto* hb = in.bus.latest("heartbeat/" + config_.monitored);
      mi.heartbeat_age = in.tick - (hb ? std::get<Heartbeat>(hb->payload).tick : -1);
      if (const auto* cmd = in.bus.latest("command/" + config_.monitored)) {
        mi.last_command = std::get<ChannelCommand>(cmd->payload);
      }
    }
    const SafetyGrid grid = build_grid(*in.scene, config_.grid);
    Verdict verdict = monitor(*in.scene, grid, mi, config_.monitor);
    out.messages.emplace_back("verdict", verdict);
    const bool trigger = verdict.status == VerdictStatus::trigger;
    last_verdict_ = std::move(verdict);
    if (!trigger) return out;
    switch_.mode = Mode::safety_latched;
    switch_.latch_tick = in.tick;
    plan_ = SafeStopPlan(in.scene->ego().state.speed, config_.monitor.a_max, config_.monitor.j_max);
  }

  ChannelCommand cmd;
  cmd.accel = plan_.command(in.tick - *switch_.latch_tick, in.dt, config_.monitor.a_max);
  cmd.steer = 0.0;
  out.command = cmd;
  return out;
}

}  // namespace adeye::safety
