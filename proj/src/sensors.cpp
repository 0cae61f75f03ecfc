#include "adeye/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "adeye/error.hpp"

namespace adeye::sensors {

namespace {

constexpr int kUltrasonicRays = 21;

Vec2 body_center(const Shape& shape) {
  if (const auto* c = std::get_if<Circle>(&shape)) return c->center;
  const auto& v = std::get<Polygon>(shape).vertices;
  Vec2 sum;
  for (Vec2 p : v) sum = sum + p;
  return sum * (1.0 / static_cast<double>(v.size()));
}

Vec2 velocity_of(const world::Actor& a) {
  return Vec2{std::cos(a.state.pose.heading), std::sin(a.state.pose.heading)} * a.state.speed;
}

struct ObjectSamplingParams {
  double fov;
  double max_range;
  double detection_prob;
  double range_noise_sigma = 0.0;
  double rate_noise_sigma = 0.0;
  bool with_range_rate = false;
};

// Shared by camera and radar. A target is a geometric candidate when its
// center lies inside the fov cone within max_range and the line of sight to
// that center hits the target first. Candidates consume a fixed number of
// draws whether or not they end up detected.
ObjectList sample_objects(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config,
                          const ObjectSamplingParams& p, Rng& rng) {
  const auto& ego = scene.ego();
  const Pose2D sp = sensor_pose(ego_pose, config);
  const auto bodies = world::collect_bodies(scene.world->obstacles, scene.actors, ego.id);

  Vec2 sensor_velocity;
  if (p.with_range_rate) {
    const Vec2 lever = rotate({config.mount.x, config.mount.y}, ego_pose.heading);
    const double w = ego.state.yaw_rate;
    sensor_velocity = velocity_of(ego) + Vec2{-w * lever.y, w * lever.x};
  }

  ObjectList out;
  for (const auto& body : bodies) {
    const Vec2 center = body.kind == world::TargetKind::actor ? scene.find_actor(body.id)->state.pose.position()
                                                              : body_center(body.shape);
    const Vec2 rel = to_local(sp, center);
    const double range = norm(rel);
    const double bearing = std::atan2(rel.y, rel.x);
    if (range > p.max_range || std::abs(bearing) > 0.5 * p.fov) continue;
    const double world_angle = sp.heading + bearing;
    const auto hit = world::ray_cast(bodies, sp.position(), world_angle, range + 1e-9);
    if (!hit || hit->id != body.id || hit->kind != body.kind) continue;

    const double u = rng.uniform();
    const double range_noise = p.with_range_rate ? rng.gaussian(p.range_noise_sigma) : 0.0;
    const double rate_noise = p.with_range_rate ? rng.gaussian(p.rate_noise_sigma) : 0.0;
    if (!(u < p.detection_prob)) continue;

    Detection d;
    d.extent = {body.box.width(), body.box.height()};
    if (p.with_range_rate) {
      const double noisy_range = std::max(0.0, range + range_noise);
      d.position = range > 0.0 ? rel * (noisy_range / range) : rel;
      Vec2 target_velocity;
      if (body.kind == world::TargetKind::actor) target_velocity = velocity_of(*scene.find_actor(body.id));
      const Vec2 los = range > 0.0 ? (center - sp.position()) * (1.0 / range) : Vec2{1.0, 0.0};
      d.range_rate = dot(target_velocity - sensor_velocity, los) + rate_noise;
    } else {
      d.position = rel;
    }
    out.detections.push_back(d);
  }
  return out;
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string_view to_string(SensorType type) {
  switch (type) {
    case SensorType::lidar: return "lidar";
    case SensorType::camera: return "camera";
    case SensorType::radar: return "radar";
    case SensorType::gps: return "gps";
    case SensorType::imu: return "imu";
    case SensorType::ultrasonic: return "ultrasonic";
  }
  return "lidar";
}

SensorType sensor_type_from(std::string_view name) {
  for (auto t : {SensorType::lidar, SensorType::camera, SensorType::radar, SensorType::gps, SensorType::imu,
                 SensorType::ultrasonic}) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown sensor type '" + std::string(name) + "'");
}

SensorParams default_params(SensorType type) {
  switch (type) {
    case SensorType::lidar: return LidarParams{};
    case SensorType::camera: return CameraParams{};
    case SensorType::radar: return RadarParams{};
    case SensorType::gps: return GpsParams{};
    case SensorType::imu: return ImuParams{};
    case SensorType::ultrasonic: return UltrasonicParams{};
  }
  return LidarParams{};
}

SensorConfig scale_noise(const SensorConfig& config, double factor) {
  SensorConfig out = config;
  std::visit(
      [factor](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LidarParams>) {
          p.range_noise_sigma *= factor;
        } else if constexpr (std::is_same_v<T, RadarParams>) {
          p.range_noise_sigma *= factor;
          p.rate_noise_sigma *= factor;
        } else if constexpr (std::is_same_v<T, GpsParams>) {
          p.pos_noise_sigma *= factor;
        } else if constexpr (std::is_same_v<T, ImuParams>) {
          p.accel_noise_sigma *= factor;
          p.gyro_noise_sigma *= factor;
        }
      },
      out.params);
  return out;
}

double field_of_view(const SensorConfig& config) {
  if (const auto* p = std::get_if<LidarParams>(&config.params)) return p->fov;
  if (const auto* p = std::get_if<CameraParams>(&config.params)) return p->fov;
  if (const auto* p = std::get_if<RadarParams>(&config.params)) return p->fov;
  if (const auto* p = std::get_if<UltrasonicParams>(&config.params)) return p->beam_width;
  return 2.0 * kPi;
}

Pose2D sensor_pose(const Pose2D& ego_pose, const SensorConfig& config) { return compose(ego_pose, config.mount); }

LidarScan sample_lidar(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config, Rng& rng) {
  const auto& p = std::get<LidarParams>(config.params);
  const Pose2D sp = sensor_pose(ego_pose, config);
  const auto bodies = world::collect_bodies(scene.world->obstacles, scene.actors, scene.ego().id);
  const double effective_range = p.max_range * scene.environment.visibility;
  const bool full_circle = p.fov >= 2.0 * kPi;
  const double step = full_circle ? p.fov / p.beams : (p.beams > 1 ? p.fov / (p.beams - 1) : 0.0);
  const double start = p.beams == 1 && !full_circle ? 0.0 : -0.5 * p.fov;

  LidarScan scan;
  scan.angles.reserve(p.beams);
  scan.ranges.reserve(p.beams);
  for (int i = 0; i < p.beams; ++i) {
    const double angle = start + step * i;
    const auto hit = world::ray_cast(bodies, sp.position(), sp.heading + angle, effective_range);
    const double noise = rng.gaussian(p.range_noise_sigma);
    scan.angles.push_back(angle);
    scan.ranges.push_back(hit ? std::optional<double>(std::max(0.0, hit->distance + noise)) : std::nullopt);
  }
  return scan;
}

ObjectList sample_camera(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config, Rng& rng) {
  const auto& p = std::get<CameraParams>(config.params);
  const double prob = p.base_detection_prob * scene.environment.visibility * scene.environment.light;
  return sample_objects(scene, ego_pose, config, {p.fov, p.max_range, prob}, rng);
}

ObjectList sample_radar(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config, Rng& rng) {
  const auto& p = std::get<RadarParams>(config.params);
  return sample_objects(scene, ego_pose, config,
                        {p.fov, p.max_range, p.detection_prob, p.range_noise_sigma, p.rate_noise_sigma, true}, rng);
}

GpsFix sample_gps(const world::Scene& scene, const SensorConfig& config, Rng& rng) {
  const auto& p = std::get<GpsParams>(config.params);
  const auto& pose = scene.ego().state.pose;
  const double nx = rng.gaussian(p.pos_noise_sigma);
  const double ny = rng.gaussian(p.pos_noise_sigma);
  return {pose.x + nx, pose.y + ny};
}

ImuSample sample_imu(const world::Scene& scene, const SensorConfig& config, Rng& rng) {
  const auto& p = std::get<ImuParams>(config.params);
  const auto& s = scene.ego().state;
  const double na = rng.gaussian(p.accel_noise_sigma);
  const double ng = rng.gaussian(p.gyro_noise_sigma);
  return {s.accel + p.accel_bias + na, s.yaw_rate + p.gyro_bias + ng};
}

UltrasonicRange sample_ultrasonic(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config,
                                  Rng& /*rng*/) {
  const auto& p = std::get<UltrasonicParams>(config.params);
  const Pose2D sp = sensor_pose(ego_pose, config);
  const auto bodies = world::collect_bodies(scene.world->obstacles, scene.actors, scene.ego().id);
  std::optional<double> best;
  for (int i = 0; i < kUltrasonicRays; ++i) {
    const double angle = -0.5 * p.beam_width + p.beam_width * i / (kUltrasonicRays - 1);
    if (const auto hit = world::ray_cast(bodies, sp.position(), sp.heading + angle, p.max_range)) {
      if (!best || hit->distance < *best) best = hit->distance;
    }
  }
  return {best};
}

SensorFrame sample(const world::Scene& scene, const SensorConfig& config, Rng& rng) {
  SensorFrame frame{config.id, config.type, scene.tick, {}};
  const Pose2D& ego_pose = scene.ego().state.pose;
  switch (config.type) {
    case SensorType::lidar: frame.payload = sample_lidar(scene, ego_pose, config, rng); break;
    case SensorType::camera: frame.payload = sample_camera(scene, ego_pose, config, rng); break;
    case SensorType::radar: frame.payload = sample_radar(scene, ego_pose, config, rng); break;
    case SensorType::gps: frame.payload = sample_gps(scene, config, rng); break;
    case SensorType::imu: frame.payload = sample_imu(scene, config, rng); break;
    case SensorType::ultrasonic: frame.payload = sample_ultrasonic(scene, ego_pose, config, rng); break;
  }
  return frame;
}

std::map<std::string, std::vector<FramePtr>> route(const std::vector<FramePtr>& frames, const RoutingTable& table,
                                                   const std::vector<std::string>& declared) {
  std::map<std::string, std::vector<FramePtr>> out;
  for (const auto& [source, channels] : table) {
    for (const auto& ch : channels) out[ch];
  }
  const std::set<std::string> known(declared.begin(), declared.end());
  for (const auto& frame : frames) {
    if (!known.count(frame->sensor_id)) throw ConfigError("frame from undeclared sensor '" + frame->sensor_id + "'");
    const auto it = table.find(frame->sensor_id);
    if (it == table.end()) continue;
    for (const auto& ch : it->second) out[ch].push_back(frame);
  }
  return out;
}

nlohmann::json to_json(const SensorFrame& frame) {
  nlohmann::json j;
  j["sensor_id"] = frame.sensor_id;
  j["type"] = to_string(frame.type);
  j["tick"] = frame.tick;
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LidarScan>) {
          auto ranges = nlohmann::json::array();
          for (const auto& r : p.ranges) ranges.push_back(optional_number(r));
          j["angles"] = p.angles;
          j["ranges"] = std::move(ranges);
        } else if constexpr (std::is_same_v<T, ObjectList>) {
          auto dets = nlohmann::json::array();
          for (const auto& d : p.detections) {
            nlohmann::json dj{{"x", d.position.x}, {"y", d.position.y}, {"extent", {d.extent.x, d.extent.y}}};
            if (d.range_rate) dj["range_rate"] = *d.range_rate;
            dets.push_back(std::move(dj));
          }
          j["detections"] = std::move(dets);
        } else if constexpr (std::is_same_v<T, GpsFix>) {
          j["x"] = p.x;
          j["y"] = p.y;
        } else if constexpr (std::is_same_v<T, ImuSample>) {
          j["accel"] = p.accel;
          j["yaw_rate"] = p.yaw_rate;
        } else {
          j["range"] = optional_number(p.range);
        }
      },
      frame.payload);
  return j;
}

}  // namespace adeye::sensors
