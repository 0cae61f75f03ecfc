#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "adeye/geometry.hpp"
#include "adeye/rng.hpp"
#include "adeye/world.hpp"

namespace adeye::sensors {

enum class SensorType { lidar, camera, radar, gps, imu, ultrasonic };

std::string_view to_string(SensorType type);
SensorType sensor_type_from(std::string_view name);  // throws std::invalid_argument

struct LidarParams {
  int beams = 180;
  double fov = 2.0 * kPi;
  double max_range = 40.0;
  double range_noise_sigma = 0.02;
  bool operator==(const LidarParams&) const = default;
};

struct CameraParams {
  double fov = kPi / 2.0;
  double max_range = 50.0;
  double base_detection_prob = 0.9;
  bool operator==(const CameraParams&) const = default;
};

struct RadarParams {
  double fov = 0.6;
  double max_range = 80.0;
  double range_noise_sigma = 0.1;
  double rate_noise_sigma = 0.05;
  double detection_prob = 1.0;
  bool operator==(const RadarParams&) const = default;
};

struct GpsParams {
  double pos_noise_sigma = 0.1;
  bool operator==(const GpsParams&) const = default;
};

struct ImuParams {
  double accel_noise_sigma = 0.01;
  double gyro_noise_sigma = 0.001;
  double accel_bias = 0.0;
  double gyro_bias = 0.0;
  bool operator==(const ImuParams&) const = default;
};

struct UltrasonicParams {
  double max_range = 3.0;
  double beam_width = 0.5;
  bool operator==(const UltrasonicParams&) const = default;
};

using SensorParams = std::variant<LidarParams, CameraParams, RadarParams, GpsParams, ImuParams, UltrasonicParams>;

struct SensorConfig {
  std::string id;
  SensorType type = SensorType::lidar;
  Pose2D mount;  // relative to the ego reference point
  int rate_divisor = 1;
  SensorParams params = LidarParams{};
  bool operator==(const SensorConfig&) const = default;
};

SensorParams default_params(SensorType type);
// Copy of `config` with every noise sigma multiplied by `factor`.
SensorConfig scale_noise(const SensorConfig& config, double factor);
double field_of_view(const SensorConfig& config);

// Angles are in the sensor frame; a missing range is a no-return.
struct LidarScan {
  std::vector<double> angles;
  std::vector<std::optional<double>> ranges;
  bool operator==(const LidarScan&) const = default;
};

struct Detection {
  Vec2 position;  // sensor frame
  Vec2 extent;    // world-aligned bounding size
  std::optional<double> range_rate;
  bool operator==(const Detection&) const = default;
};

struct ObjectList {
  std::vector<Detection> detections;
  bool operator==(const ObjectList&) const = default;
};

struct GpsFix {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const GpsFix&) const = default;
};

struct ImuSample {
  double accel = 0.0;  // longitudinal, m/s^2
  double yaw_rate = 0.0;
  bool operator==(const ImuSample&) const = default;
};

struct UltrasonicRange {
  std::optional<double> range;
  bool operator==(const UltrasonicRange&) const = default;
};

using FramePayload = std::variant<LidarScan, ObjectList, GpsFix, ImuSample, UltrasonicRange>;

struct SensorFrame {
  std::string sensor_id;
  SensorType type = SensorType::lidar;
  std::int64_t tick = 0;
  FramePayload payload;
  bool operator==(const SensorFrame&) const = default;
};

using FramePtr = std::shared_ptr<const SensorFrame>;

Pose2D sensor_pose(const Pose2D& ego_pose, const SensorConfig& config);

LidarScan sample_lidar(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config, Rng& rng);
ObjectList sample_camera(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config, Rng& rng);
ObjectList sample_radar(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config, Rng& rng);
GpsFix sample_gps(const world::Scene& scene, const SensorConfig& config, Rng& rng);
ImuSample sample_imu(const world::Scene& scene, const SensorConfig& config, Rng& rng);
UltrasonicRange sample_ultrasonic(const world::Scene& scene, const Pose2D& ego_pose, const SensorConfig& config,
                                  Rng& rng);

// Dispatches on config.type and stamps the frame with scene.tick.
SensorFrame sample(const world::Scene& scene, const SensorConfig& config, Rng& rng);

// sensor id (or the reserved "ground_truth" source) -> sorted channel ids.
using RoutingTable = std::map<std::string, std::vector<std::string>>;

inline constexpr std::string_view kGroundTruthSource = "ground_truth";

// Per-channel inputs. Every channel named anywhere in `table` gets an entry,
// possibly empty. A frame whose sensor is not in `declared` is a ConfigError.
std::map<std::string, std::vector<FramePtr>> route(const std::vector<FramePtr>& frames, const RoutingTable& table,
                                                   const std::vector<std::string>& declared);

nlohmann::json to_json(const SensorFrame& frame);

}  // namespace adeye::sensors
