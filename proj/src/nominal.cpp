#include "adeye/nominal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "adeye/detail/json_util.hpp"
#include "adeye/error.hpp"

namespace adeye::nominal {

using nlohmann::json;
using namespace adeye::detail;

// ---------------------------------------------------------------------------
// config

json to_json(const NominalConfig& c) {
  return {{"id", c.id},
          {"map_spacing", c.map_spacing},
          {"alpha", c.alpha},
          {"dropout_tolerance", c.dropout_tolerance},
          {"cluster_distance", c.cluster_distance},
          {"cluster_min_points", c.cluster_min_points},
          {"map_margin", c.map_margin},
          {"candidates", c.candidates},
          {"horizon", c.horizon},
          {"sample_dt", c.sample_dt},
          {"lane_margin", c.lane_margin},
          {"min_plan_speed", c.min_plan_speed},
          {"w_clear", c.w_clear},
          {"w_off", c.w_off},
          {"w_smooth", c.w_smooth},
          {"d_collide", c.d_collide},
          {"clear_cap", c.clear_cap},
          {"lookahead_min", c.lookahead_min},
          {"lookahead_gain", c.lookahead_gain},
          {"speed_gain", c.speed_gain},
          {"comfort_accel", c.comfort_accel},
          {"brake_accel", c.brake_accel},
          {"goal_decel", c.goal_decel}};
}

NominalConfig nominal_config_from(const json& j, const std::string& path) {
  NominalConfig c;
  ObjectReader r(j, path);
  const auto positive = [&](const char* key, double& field) {
    field = r.number(key, field);
    if (!(field > 0.0)) throw ValidationError(r.path_of(key), "must be > 0");
  };
  const auto non_negative = [&](const char* key, double& field) {
    field = r.number(key, field);
    if (field < 0.0) throw ValidationError(r.path_of(key), "must be >= 0");
  };
  c.id = r.string("id", c.id);
  if (c.id.empty()) throw ValidationError(r.path_of("id"), "must be non-empty");
  positive("map_spacing", c.map_spacing);
  c.alpha = r.number("alpha", c.alpha);
  if (c.alpha < 0.0 || c.alpha > 1.0) throw ValidationError(r.path_of("alpha"), "must lie in [0, 1]");
  c.dropout_tolerance = static_cast<int>(r.integer("dropout_tolerance", c.dropout_tolerance));
  if (c.dropout_tolerance < 0) throw ValidationError(r.path_of("dropout_tolerance"), "must be >= 0");
  positive("cluster_distance", c.cluster_distance);
  c.cluster_min_points = static_cast<int>(r.integer("cluster_min_points", c.cluster_min_points));
  if (c.cluster_min_points < 1) throw ValidationError(r.path_of("cluster_min_points"), "must be >= 1");
  non_negative("map_margin", c.map_margin);
  c.candidates = static_cast<int>(r.integer("candidates", c.candidates));
  if (c.candidates < 1) throw ValidationError(r.path_of("candidates"), "must be >= 1");
  positive("horizon", c.horizon);
  positive("sample_dt", c.sample_dt);
  non_negative("lane_margin", c.lane_margin);
  positive("min_plan_speed", c.min_plan_speed);
  non_negative("w_clear", c.w_clear);
  non_negative("w_off", c.w_off);
  non_negative("w_smooth", c.w_smooth);
  non_negative("d_collide", c.d_collide);
  positive("clear_cap", c.clear_cap);
  positive("lookahead_min", c.lookahead_min);
  non_negative("lookahead_gain", c.lookahead_gain);
  positive("speed_gain", c.speed_gain);
  positive("comfort_accel", c.comfort_accel);
  positive("brake_accel", c.brake_accel);
  positive("goal_decel", c.goal_decel);
  r.finish();
  return c;
}

// ---------------------------------------------------------------------------
// maps

namespace {

void sample_boundary(const Shape& shape, double s, std::vector<Vec2>& out) {
  if (const auto* c = std::get_if<Circle>(&shape)) {
    const auto n = static_cast<int>(std::max(1.0, std::ceil(2.0 * kPi * c->radius / s - 1e-9)));
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * kPi * i / n;
      out.push_back(c->center + Vec2{std::cos(a), std::sin(a)} * c->radius);
    }
    return;
  }
  const auto& v = std::get<Polygon>(shape).vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i], b = v[(i + 1) % v.size()];
    const auto n = static_cast<int>(std::max(1.0, std::ceil(distance(a, b) / s - 1e-9)));
    for (int k = 0; k < n; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / n));
  }
}

json read_map_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open map file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_strict(buf.str());
}

void check_header(ObjectReader& r, const char* format) {
  if (r.string("format") != format) throw ValidationError(r.path_of("format"), std::string("expected '") + format + "'");
  if (r.integer("version", 0) != kMapFormatVersion) throw ValidationError(r.path_of("version"), "unsupported map version");
}

}  // namespace

MapArtifacts build_map(const world::World& world, double spacing) {
  if (!(spacing > 0.0)) throw ValidationError("map_spacing", "must be > 0");
  MapArtifacts maps;
  maps.points.spacing = spacing;
  for (const auto& o : world.obstacles) {
    if (o.mapped) sample_boundary(o.shape, spacing, maps.points.points);
  }
  maps.lanes.lanes = world.lanes;
  return maps;
}

json to_json(const PointMap& m) {
  json pts = json::array();
  for (Vec2 p : m.points) pts.push_back(vec2_json(p));
  return {{"format", "adeye.pointmap"}, {"version", kMapFormatVersion}, {"spacing", m.spacing}, {"points", std::move(pts)}};
}

json to_json(const LaneMap& m) {
  json lanes = json::array();
  for (const auto& l : m.lanes) {
    json c = json::array();
    for (Vec2 p : l.centerline) c.push_back(vec2_json(p));
    lanes.push_back({{"id", l.id}, {"centerline", std::move(c)}, {"width", l.width}, {"speed_limit", l.speed_limit},
                     {"successors", l.successors}});
  }
  return {{"format", "adeye.lanemap"}, {"version", kMapFormatVersion}, {"lanes", std::move(lanes)}};
}

PointMap pointmap_from(const json& j) {
  ObjectReader r(j, "");
  check_header(r, "adeye.pointmap");
  PointMap m;
  m.spacing = r.number("spacing");
  const auto& pts = as_array(r.required("points"), "points");
  for (std::size_t i = 0; i < pts.size(); ++i) m.points.push_back(as_vec2(pts[i], index_path("points", i)));
  r.finish();
  return m;
}

LaneMap lanemap_from(const json& j) {
  ObjectReader r(j, "");
  check_header(r, "adeye.lanemap");
  LaneMap m;
  const auto& lanes = as_array(r.required("lanes"), "lanes");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    ObjectReader lr(lanes[i], index_path("lanes", i));
    world::Lane l;
    l.id = lr.string("id");
    const auto& c = as_array(lr.required("centerline"), lr.path_of("centerline"));
    for (std::size_t k = 0; k < c.size(); ++k) l.centerline.push_back(as_vec2(c[k], index_path(lr.path_of("centerline"), k)));
    l.width = lr.number("width");
    l.speed_limit = lr.number("speed_limit");
    const auto& s = as_array(lr.required("successors"), lr.path_of("successors"));
    for (std::size_t k = 0; k < s.size(); ++k) l.successors.push_back(as_string(s[k], index_path(lr.path_of("successors"), k)));
    lr.finish();
    m.lanes.push_back(std::move(l));
  }
  r.finish();
  return m;
}

MapPaths map_paths(const std::filesystem::path& dir, const std::string& name) {
  return {dir / (name + ".pointmap.json"), dir / (name + ".lanemap.json")};
}

MapPaths save_maps(const MapArtifacts& maps, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto paths = map_paths(dir, name);
  std::ofstream(paths.pointmap, std::ios::binary) << to_json(maps.points).dump() << '\n';
  std::ofstream(paths.lanemap, std::ios::binary) << to_json(maps.lanes).dump(2) << '\n';
  return paths;
}

MapArtifacts load_maps(const std::filesystem::path& dir, const std::string& name) {
  const auto paths = map_paths(dir, name);
  return {pointmap_from(read_map_file(paths.pointmap)), lanemap_from(read_map_file(paths.lanemap))};
}

MapIndex::MapIndex(const PointMap& map, double radius) : cell_(std::max(radius, 1e-3)), radius_(radius) {
  for (Vec2 p : map.points) {
    buckets_[key(static_cast<std::int64_t>(std::floor(p.x / cell_)), static_cast<std::int64_t>(std::floor(p.y / cell_)))]
        .push_back(p);
  }
}

bool MapIndex::near(Vec2 p) const {
  const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell_));
  const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell_));
  for (std::int64_t dy = -1; dy <= 1; ++dy) {
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      const auto it = buckets_.find(key(cx + dx, cy + dy));
      if (it == buckets_.end()) continue;
      for (Vec2 q : it->second) {
        if (distance(p, q) <= radius_) return true;
      }
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// localization and perception

Estimate localize(const std::optional<sensors::GpsFix>& gps, const std::optional<sensors::ImuSample>& imu,
                  const Estimate& prev, double dt, double alpha) {
  Estimate e = prev;
  e.pose.x += prev.speed * std::cos(prev.pose.heading) * dt;
  e.pose.y += prev.speed * std::sin(prev.pose.heading) * dt;
  if (imu) {
    e.pose.heading = normalize_angle(prev.pose.heading + imu->yaw_rate * dt);
    e.speed = std::max(0.0, prev.speed + imu->accel * dt);
  }
  if (gps) {
    e.pose.x = alpha * gps->x + (1.0 - alpha) * e.pose.x;
    e.pose.y = alpha * gps->y + (1.0 - alpha) * e.pose.y;
  }
  return e;
}

std::vector<Cluster> cluster(std::span<const Vec2> points, double d_c, int n_min) {
  const std::size_t n = points.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&parent](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance(points[i], points[j]) <= d_c) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  // Roots are the smallest member index of each component.
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[find(i)].push_back(i);
  std::vector<Cluster> out;
  for (std::size_t root = 0; root < n; ++root) {
    const auto& m = members[root];
    if (m.empty() || static_cast<int>(m.size()) < n_min) continue;
    Vec2 sum;
    for (auto i : m) sum = sum + points[i];
    Cluster c;
    c.size = m.size();
    c.centroid = sum * (1.0 / static_cast<double>(m.size()));
    for (auto i : m) c.radius = std::max(c.radius, distance(points[i], c.centroid));
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// planning

namespace {

struct Projection {
  double distance = INFINITY;
  double station = 0.0;
  Vec2 tangent{1.0, 0.0};
};

Projection project(const std::vector<Vec2>& line, Vec2 p) {
  Projection best;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Vec2 a = line[i], b = line[i + 1];
    const Vec2 ab = b - a;
    const double len = norm(ab);
    if (len <= 0.0) continue;
    const double t = std::clamp(dot(p - a, ab) / (len * len), 0.0, 1.0);
    const double d = distance(p, a + ab * t);
    if (d < best.distance) best = {d, s + t * len, ab * (1.0 / len)};
    s += len;
  }
  return best;
}

// Polyline with cumulative arc length.
struct Path {
  std::vector<Vec2> pts;
  std::vector<double> s;

  void add(Vec2 p) {
    if (!pts.empty() && distance(pts.back(), p) <= 1e-12) return;
    s.push_back(pts.empty() ? 0.0 : s.back() + distance(pts.back(), p));
    pts.push_back(p);
  }
  double length() const { return s.empty() ? 0.0 : s.back(); }

  // Position and unit tangent at arc length `at` (clamped).
  std::pair<Vec2, Vec2> at(double at) const {
    if (pts.size() < 2) return {pts.empty() ? Vec2{} : pts.front(), {1.0, 0.0}};
    at = std::clamp(at, 0.0, length());
    auto it = std::upper_bound(s.begin(), s.end(), at);
    std::size_t i = it == s.begin() ? 0 : static_cast<std::size_t>(it - s.begin()) - 1;
    i = std::min(i, pts.size() - 2);
    const double len = s[i + 1] - s[i];
    const Vec2 tangent = (pts[i + 1] - pts[i]) * (1.0 / len);
    return {pts[i] + tangent * (at - s[i]), tangent};
  }
};

const world::Lane* find_lane(const LaneMap& lanes, const std::string& id) {
  for (const auto& l : lanes.lanes) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

}  // namespace

std::optional<LaneMatch> match_lane(const LaneMap& lanes, const Pose2D& pose) {
  std::optional<LaneMatch> aligned, any;
  double best_aligned = INFINITY, best_any = INFINITY;
  const Vec2 heading{std::cos(pose.heading), std::sin(pose.heading)};
  for (std::size_t i = 0; i < lanes.lanes.size(); ++i) {
    const auto& lane = lanes.lanes[i];
    const auto proj = project(lane.centerline, pose.position());
    if (!(proj.distance < lane.width)) continue;
    if (proj.distance < best_any) {
      best_any = proj.distance;
      any = LaneMatch{i, proj.distance, proj.station};
    }
    if (dot(proj.tangent, heading) > 0.0 && proj.distance < best_aligned) {
      best_aligned = proj.distance;
      aligned = LaneMatch{i, proj.distance, proj.station};
    }
  }
  return aligned ? aligned : any;
}

std::vector<CandidateTrajectory> generate_candidates(const LaneMap& lanes, const Estimate& estimate,
                                                     const NominalConfig& config) {
  const auto match = match_lane(lanes, estimate.pose);
  if (!match) return {};
  const world::Lane& lane = lanes.lanes[match->lane];

  const double plan_speed = std::max(estimate.speed, config.min_plan_speed);
  const double reach = plan_speed * config.horizon;

  // Current lane from the projection onwards, then first successors.
  Path path;
  {
    Path own;
    for (Vec2 p : lane.centerline) own.add(p);
    path.add(own.at(match->station).first);
    for (std::size_t i = 1; i < own.pts.size(); ++i) {
      if (own.s[i] > match->station) path.add(own.pts[i]);
    }
  }
  const world::Lane* cur = &lane;
  for (int depth = 0; depth < 64 && path.length() < reach && !cur->successors.empty(); ++depth) {
    cur = find_lane(lanes, cur->successors.front());
    if (!cur) break;
    for (Vec2 p : cur->centerline) path.add(p);
  }

  const double half = std::max(0.0, 0.5 * lane.width - config.lane_margin);
  const int k_count = config.candidates;
  const auto n_points = static_cast<int>(std::llround(config.horizon / config.sample_dt));
  std::vector<CandidateTrajectory> out;
  out.reserve(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    CandidateTrajectory c;
    c.offset = k_count == 1 ? 0.0 : -half + 2.0 * half * k / (k_count - 1);
    if (k_count % 2 == 1 && k == k_count / 2) c.offset = 0.0;
    c.points.reserve(static_cast<std::size_t>(n_points) + 1);
    for (int i = 0; i <= n_points; ++i) {
      const auto [p, t] = path.at(plan_speed * config.sample_dt * i);
      const Vec2 left{-t.y, t.x};
      const Vec2 q = p + left * c.offset;
      c.points.push_back({q.x, q.y, std::atan2(t.y, t.x)});
    }
    out.push_back(std::move(c));
  }
  return out;
}

double mean_abs_curvature(std::span<const Pose2D> points) {
  if (points.size() < 3) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    const Vec2 a = points[i - 1].position(), b = points[i].position(), c = points[i + 1].position();
    const double denom = distance(a, b) * distance(b, c) * distance(a, c);
    if (denom > 1e-12) sum += std::abs(2.0 * cross(b - a, c - b) / denom);
  }
  return sum / static_cast<double>(points.size() - 2);
}

void score(std::vector<CandidateTrajectory>& candidates, std::span<const Cluster> clusters, double ego_half_width,
           const NominalConfig& config) {
  for (auto& c : candidates) {
    double clearance = INFINITY;
    for (const auto& p : c.points) {
      for (const auto& cl : clusters) {
        clearance = std::min(clearance, distance(p.position(), cl.centroid) - cl.radius - ego_half_width);
      }
    }
    c.clearance = clearance;
    c.mean_curvature = mean_abs_curvature(c.points);
    c.colliding = clearance < config.d_collide;
    if (c.colliding) {
      c.cost = INFINITY;
      continue;
    }
    c.cost = config.w_clear * std::max(0.0, 1.0 / clearance - 1.0 / config.clear_cap) +
             config.w_off * std::abs(c.offset) + config.w_smooth * c.mean_curvature;
  }
}

std::optional<std::size_t> select(std::span<const CandidateTrajectory> candidates) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].colliding) continue;
    if (!best || candidates[i].cost < candidates[*best].cost) best = i;
  }
  return best;
}

double lookahead_distance(double speed, const NominalConfig& config) {
  return std::max(config.lookahead_min, config.lookahead_gain * speed);
}

double pursuit_steer(const Pose2D& pose, Vec2 target, double wheelbase) {
  const Vec2 local = to_local(pose, target);
  const double ld = norm(local);
  if (ld < 1e-9) return 0.0;
  const double alpha = std::atan2(local.y, local.x);
  return std::atan(2.0 * wheelbase * std::sin(alpha) / ld);
}

TrackCommand track(const CandidateTrajectory& selected, const Estimate& estimate, double target_speed,
                   const world::VehicleParams& vehicle, const NominalConfig& config) {
  TrackCommand cmd;
  const double l = lookahead_distance(estimate.speed, config);
  const Vec2 here = estimate.pose.position();
  Vec2 target = selected.points.back().position();
  for (std::size_t i = 1; i < selected.points.size(); ++i) {
    if (distance(selected.points[i].position(), here) >= l) {
      target = selected.points[i].position();
      break;
    }
  }
  cmd.steer = std::clamp(pursuit_steer(estimate.pose, target, vehicle.wheelbase), -vehicle.steer_max, vehicle.steer_max);
  cmd.accel = std::clamp(config.speed_gain * (target_speed - estimate.speed), -config.comfort_accel, config.comfort_accel);
  return cmd;
}

// ---------------------------------------------------------------------------
// channel

NominalChannel::NominalChannel(NominalConfig config, std::shared_ptr<const MapArtifacts> maps)
    : config_(std::move(config)), maps_(std::move(maps)) {
  if (!maps_) throw ConfigError("nominal channel needs map artifacts");
  index_ = std::make_unique<MapIndex>(maps_->points, config_.map_margin);
}

void NominalChannel::start(const kernel::RunContext& context) {
  if (context.ground_truth_routed) {
    throw ConfigError("channel '" + config_.id + "' must not receive ground truth; remove it from routing.ground_truth");
  }
  sensors_ = context.sensors;
  ego_template_ = context.initial_ego;
  goal_ = context.goal;
  estimate_ = {context.initial_ego.state.pose, context.initial_ego.state.speed};
  started_ = false;
  blind_ticks_ = 0;
  steps_ = 0;
  last_plan_.reset();
}

kernel::ChannelOutput NominalChannel::step(const kernel::ChannelInputs& in) {
  std::optional<sensors::GpsFix> gps;
  std::optional<sensors::ImuSample> imu;
  std::vector<const sensors::SensorFrame*> scans;
  for (const auto& f : in.frames) {
    if (const auto* g = std::get_if<sensors::GpsFix>(&f->payload)) gps = *g;
    else if (const auto* m = std::get_if<sensors::ImuSample>(&f->payload)) imu = *m;
    else if (std::holds_alternative<sensors::LidarScan>(f->payload)) scans.push_back(f.get());
  }

  if (started_) {
    estimate_ = localize(gps, imu, estimate_, in.dt, config_.alpha);
  } else if (gps) {
    estimate_ = localize(gps, std::nullopt, estimate_, 0.0, config_.alpha);
  }
  started_ = true;
  blind_ticks_ = (gps || imu) ? 0 : blind_ticks_ + 1;

  PlanRecord plan;
  plan.tick = in.tick;
  plan.estimate = estimate_;
  kernel::ChannelOutput out;
  if (blind_ticks_ > config_.dropout_tolerance) {
    plan.degraded = true;
    last_plan_ = std::move(plan);
    out.heartbeat = false;
    return out;
  }

  for (const auto* frame : scans) {
    const auto cfg = std::find_if(sensors_.begin(), sensors_.end(), [&](const auto& s) { return s.id == frame->sensor_id; });
    if (cfg == sensors_.end()) continue;
    const Pose2D sp = sensors::sensor_pose(estimate_.pose, *cfg);
    const auto& scan = std::get<sensors::LidarScan>(frame->payload);
    for (std::size_t i = 0; i < scan.angles.size(); ++i) {
      if (!scan.ranges[i]) continue;
      const double a = sp.heading + scan.angles[i];
      const Vec2 p = sp.position() + Vec2{std::cos(a), std::sin(a)} * *scan.ranges[i];
      if (!index_->near(p)) plan.obstacle_points.push_back(p);
    }
  }
  plan.clusters = cluster(plan.obstacle_points, config_.cluster_distance, config_.cluster_min_points);
  plan.candidates = generate_candidates(maps_->lanes, estimate_, config_);
  score(plan.candidates, plan.clusters, 0.5 * ego_template_.footprint.width, config_);
  plan.selected = select(plan.candidates);

  double target = 0.0;
  if (const auto match = match_lane(maps_->lanes, estimate_.pose)) target = maps_->lanes.lanes[match->lane].speed_limit;
  if (goal_) {
    const double d = distance(estimate_.pose.position(), goal_->pose.position());
    target = std::min(target, std::sqrt(2.0 * config_.goal_decel * d));
  }
  plan.target_speed = target;

  ChannelCommand cmd;
  if (plan.selected) {
    const auto t = track(plan.candidates[*plan.selected], estimate_, target, ego_template_.vehicle, config_);
    cmd.accel = t.accel;
    cmd.steer = t.steer;
  } else {
    cmd.accel = -config_.brake_accel;
    cmd.steer = 0.0;
  }
  out.command = cmd;
  ++steps_;
  last_plan_ = std::move(plan);
  return out;
}

}  // namespace adeye::nominal
