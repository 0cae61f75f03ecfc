#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "adeye/error.hpp"
#include "adeye/sensors.hpp"

using namespace adeye;
using namespace adeye::sensors;

namespace {

world::World base_world() {
  world::World w;
  w.bounds = {{-100, -100}, {100, 100}};
  world::Actor ego;
  ego.id = "ego";
  ego.kind = world::ActorKind::ego;
  w.actors.push_back(ego);
  return w;
}

world::Scene scene_of(const world::World& w) {
  return world::ground_truth(std::make_shared<const world::World>(w), 0, 0.01);
}

SensorConfig config(SensorType type, std::string id = "s") {
  SensorConfig c;
  c.id = std::move(id);
  c.type = type;
  c.params = default_params(type);
  return c;
}

}  // namespace

TEST(Lidar, EmptyWorldAllNoReturn) {
  const auto scene = scene_of(base_world());
  Rng rng(1);
  const auto scan = sample_lidar(scene, scene.ego().state.pose, config(SensorType::lidar), rng);
  ASSERT_EQ(scan.ranges.size(), 180u);
  for (const auto& r : scan.ranges) EXPECT_FALSE(r);
}

TEST(Lidar, ForcedGeometryNoiseless) {
  auto w = base_world();
  w.obstacles.push_back({"c", Circle{{5, 0}, 1.0}});
  const auto scene = scene_of(w);
  auto c = config(SensorType::lidar);
  std::get<LidarParams>(c.params).range_noise_sigma = 0.0;
  Rng rng(1);
  const auto scan = sample_lidar(scene, scene.ego().state.pose, c, rng);
  // Full circle, 180 beams: beam 90 points along +x.
  EXPECT_NEAR(scan.angles[90], 0.0, 1e-12);
  ASSERT_TRUE(scan.ranges[90]);
  EXPECT_DOUBLE_EQ(*scan.ranges[90], 4.0);
}

TEST(Lidar, OcclusionReturnsNearerSurface) {
  auto w = base_world();
  w.obstacles.push_back({"near", Circle{{5, 0}, 1.0}});
  w.obstacles.push_back({"far", Circle{{9, 0}, 2.0}});
  const auto scene = scene_of(w);
  auto c = config(SensorType::lidar);
  std::get<LidarParams>(c.params).range_noise_sigma = 0.0;
  Rng rng(1);
  const auto scan = sample_lidar(scene, scene.ego().state.pose, c, rng);
  EXPECT_DOUBLE_EQ(*scan.ranges[90], 4.0);
}

TEST(Lidar, VisibilityShortensRange) {
  auto w = base_world();
  w.obstacles.push_back({"c", Circle{{30, 0}, 1.0}});
  w.environment.visibility = 0.5;  // 40 m -> 20 m
  const auto scene = scene_of(w);
  Rng rng(1);
  const auto scan = sample_lidar(scene, scene.ego().state.pose, config(SensorType::lidar), rng);
  EXPECT_FALSE(scan.ranges[90]);
}

TEST(Camera, AlwaysDetectsWithUnitProbability) {
  auto w = base_world();
  w.obstacles.push_back({"c", Circle{{10, 0}, 1.0}});
  const auto scene = scene_of(w);
  auto c = config(SensorType::camera);
  std::get<CameraParams>(c.params).base_detection_prob = 1.0;
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto list = sample_camera(scene, scene.ego().state.pose, c, rng);
    ASSERT_EQ(list.detections.size(), 1u);
    EXPECT_EQ(list.detections[0].position, (Vec2{10, 0}));
    EXPECT_FALSE(list.detections[0].range_rate);
  }
}

TEST(Camera, OutsideFovNeverDetected) {
  auto w = base_world();
  w.obstacles.push_back({"behind", Circle{{-10, 0}, 1.0}});
  w.obstacles.push_back({"side", Circle{{0, 10}, 1.0}});
  const auto scene = scene_of(w);
  auto c = config(SensorType::camera);
  std::get<CameraParams>(c.params).base_detection_prob = 1.0;
  Rng rng(2);
  EXPECT_TRUE(sample_camera(scene, scene.ego().state.pose, c, rng).detections.empty());
}

TEST(Camera, OccludedCenterNotDetected) {
  auto w = base_world();
  w.obstacles.push_back({"wall", Polygon{{{4, -3}, {5, -3}, {5, 3}, {4, 3}}}});
  w.obstacles.push_back({"hidden", Circle{{10, 0}, 1.0}});
  const auto scene = scene_of(w);
  auto c = config(SensorType::camera);
  std::get<CameraParams>(c.params).base_detection_prob = 1.0;
  Rng rng(2);
  const auto list = sample_camera(scene, scene.ego().state.pose, c, rng);
  ASSERT_EQ(list.detections.size(), 1u);
  EXPECT_EQ(list.detections[0].position, (Vec2{4.5, 0}));
}

TEST(Radar, StaticWorldZeroRangeRate) {
  auto w = base_world();
  w.obstacles.push_back({"c", Circle{{20, 1}, 1.0}});
  const auto scene = scene_of(w);
  auto c = config(SensorType::radar);
  auto& p = std::get<RadarParams>(c.params);
  p.range_noise_sigma = p.rate_noise_sigma = 0.0;
  Rng rng(3);
  const auto list = sample_radar(scene, scene.ego().state.pose, c, rng);
  ASSERT_EQ(list.detections.size(), 1u);
  EXPECT_EQ(*list.detections[0].range_rate, 0.0);
}

TEST(Radar, RecedingTargetAlongBoresight) {
  auto w = base_world();
  world::Actor car;
  car.id = "lead";
  car.state.pose = {20, 0, 0};
  car.state.speed = 5.0;
  w.actors.push_back(car);
  const auto scene = scene_of(w);
  auto c = config(SensorType::radar);
  auto& p = std::get<RadarParams>(c.params);
  p.range_noise_sigma = p.rate_noise_sigma = 0.0;
  Rng rng(3);
  const auto list = sample_radar(scene, scene.ego().state.pose, c, rng);
  ASSERT_EQ(list.detections.size(), 1u);
  EXPECT_DOUBLE_EQ(*list.detections[0].range_rate, 5.0);
}

TEST(Radar, ObliqueRangeRateMatchesFiniteDifference) {
  auto w = base_world();
  w.actors[0].state.speed = 3.0;
  world::Actor car;
  car.id = "crossing";
  car.state.pose = {25, -4, 1.2};
  car.state.speed = 6.0;
  w.actors.push_back(car);
  auto c = config(SensorType::radar);
  auto& p = std::get<RadarParams>(c.params);
  p.range_noise_sigma = p.rate_noise_sigma = 0.0;
  c.mount = {2.0, 0.0, 0.0};
  const auto scene = scene_of(w);
  Rng rng(3);
  const auto list = sample_radar(scene, scene.ego().state.pose, c, rng);
  ASSERT_EQ(list.detections.size(), 1u);
  // Analytic projection of the relative velocity on the line of sight.
  const Vec2 sensor{2.0, 0.0}, target{25, -4};
  const Vec2 rel_v = Vec2{6.0 * std::cos(1.2), 6.0 * std::sin(1.2)} - Vec2{3.0, 0.0};
  const Vec2 los = (target - sensor) * (1.0 / distance(target, sensor));
  EXPECT_NEAR(*list.detections[0].range_rate, dot(rel_v, los), 1e-9);
  // Central finite difference of the true range.
  const double h = 1e-5;
  const auto range_at = [&](double t) {
    return distance(target + Vec2{6.0 * std::cos(1.2), 6.0 * std::sin(1.2)} * t, sensor + Vec2{3.0, 0.0} * t);
  };
  EXPECT_NEAR(*list.detections[0].range_rate, (range_at(h) - range_at(-h)) / (2 * h), 1e-6);
}

TEST(GpsImu, NoiselessIdentity) {
  auto w = base_world();
  w.actors[0].state.pose = {3.5, -2.0, 0.4};
  w.actors[0].state.accel = 1.25;
  w.actors[0].state.yaw_rate = -0.05;
  const auto scene = scene_of(w);
  auto g = config(SensorType::gps);
  std::get<GpsParams>(g.params).pos_noise_sigma = 0.0;
  auto i = config(SensorType::imu);
  auto& ip = std::get<ImuParams>(i.params);
  ip.accel_noise_sigma = ip.gyro_noise_sigma = 0.0;
  Rng rng(4);
  const auto fix = sample_gps(scene, g, rng);
  EXPECT_EQ(fix.x, 3.5);
  EXPECT_EQ(fix.y, -2.0);
  const auto imu = sample_imu(scene, i, rng);
  EXPECT_EQ(imu.accel, 1.25);
  EXPECT_EQ(imu.yaw_rate, -0.05);
  ip.accel_bias = 0.5;
  EXPECT_EQ(sample_imu(scene, i, rng).accel, 1.75);
}

TEST(Ultrasonic, NearestSurfaceInCone) {
  auto w = base_world();
  w.obstacles.push_back({"post", Circle{{2.25 + 0.4 + 0.1, 0.0}, 0.1}});
  const auto scene = scene_of(w);
  auto c = config(SensorType::ultrasonic);
  c.mount = {2.25, 0.0, 0.0};
  Rng rng(5);
  const auto r = sample_ultrasonic(scene, scene.ego().state.pose, c, rng);
  ASSERT_TRUE(r.range);
  EXPECT_NEAR(*r.range, 0.4, 1e-12);
  c.mount.heading = kPi;
  EXPECT_FALSE(sample_ultrasonic(scene, scene.ego().state.pose, c, rng).range);
}

TEST(Sample, StampsAndTypes) {
  auto w = base_world();
  const auto shared = std::make_shared<const world::World>(w);
  const auto scene = world::ground_truth(shared, 42, 0.01);
  Rng rng(6);
  for (auto type : {SensorType::lidar, SensorType::camera, SensorType::radar, SensorType::gps, SensorType::imu,
                    SensorType::ultrasonic}) {
    const auto frame = sample(scene, config(type, "x"), rng);
    EXPECT_EQ(frame.tick, 42);
    EXPECT_EQ(frame.sensor_id, "x");
    EXPECT_EQ(frame.type, type);
  }
}

TEST(Sample, ScaleNoiseMultipliesEverySigma) {
  auto r = config(SensorType::radar);
  const auto s = scale_noise(r, 3.0);
  EXPECT_DOUBLE_EQ(std::get<RadarParams>(s.params).range_noise_sigma, 0.3);
  EXPECT_DOUBLE_EQ(std::get<RadarParams>(s.params).rate_noise_sigma, 0.15);
  EXPECT_DOUBLE_EQ(std::get<GpsParams>(scale_noise(config(SensorType::gps), 0.0).params).pos_noise_sigma, 0.0);
}

TEST(Route, Basics) {
  auto f = std::make_shared<const SensorFrame>(SensorFrame{"lidar1", SensorType::lidar, 0, LidarScan{}});
  const std::vector<FramePtr> frames{f};
  const auto out = route(frames, {{"lidar1", {"nominal"}}, {"ground_truth", {"safety"}}}, {"lidar1"});
  EXPECT_EQ(out.at("nominal").size(), 1u);
  EXPECT_TRUE(out.at("safety").empty());

  EXPECT_TRUE(route(frames, {}, {"lidar1"}).empty());

  const auto both = route(frames, {{"lidar1", {"nominal", "safety"}}}, {"lidar1"});
  EXPECT_EQ(both.at("nominal")[0].get(), both.at("safety")[0].get());

  EXPECT_THROW(route(frames, {}, {"other"}), ConfigError);
}
