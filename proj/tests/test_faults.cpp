#include <gtest/gtest.h>

#include <memory>

#include "adeye/faults.hpp"

using namespace adeye;
using namespace adeye::faults;

namespace {

FaultSpec spec(std::string target, FaultKind kind, double t0, double t1) {
  FaultSpec f;
  f.target = std::move(target);
  f.kind = kind;
  f.t_start = t0;
  f.t_end = t1;
  return f;
}

sensors::FramePtr lidar_frame(std::int64_t tick, double range) {
  sensors::LidarScan scan;
  scan.angles = {-0.5, 0.0, 0.5};
  scan.ranges = {range, range, std::nullopt};
  return std::make_shared<const sensors::SensorFrame>(sensors::SensorFrame{"lidar", sensors::SensorType::lidar, tick, scan});
}

std::vector<const FaultSpec*> ptrs(const std::vector<FaultSpec>& v) {
  std::vector<const FaultSpec*> out;
  for (const auto& f : v) out.push_back(&f);
  return out;
}

}  // namespace

TEST(ActiveFaults, HalfOpenWindowsInDeclarationOrder) {
  EXPECT_TRUE(active_faults({}, 1.0).empty());
  const std::vector<FaultSpec> s{spec("a", FaultKind::dropout, 1.0, 2.0), spec("a", FaultKind::bias, 0.5, 3.0),
                                 spec("b", FaultKind::silence, 2.0, 4.0)};
  EXPECT_EQ(active_faults(s, 0.0), (std::vector<std::size_t>{}));
  EXPECT_EQ(active_faults(s, 1.0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(active_faults(s, 2.0), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(active_faults(s, 4.0), (std::vector<std::size_t>{}));
  const auto active = active_faults(s, 1.5);
  EXPECT_EQ(faults_for(s, active, "a").size(), 2u);
  EXPECT_TRUE(faults_for(s, active, "b").empty());
}

TEST(SensorFault, NoFaultsIsIdentity) {
  SensorFaultHistory h;
  const auto f = lidar_frame(0, 4.0);
  const auto out = apply_sensor_fault(f, {}, 0, h);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].get(), f.get());
}

TEST(SensorFault, DropoutSuppresses) {
  SensorFaultHistory h;
  const std::vector<FaultSpec> s{spec("lidar", FaultKind::dropout, 0, 1)};
  EXPECT_TRUE(apply_sensor_fault(lidar_frame(0, 4.0), ptrs(s), 0, h).empty());
}

TEST(SensorFault, BiasIsAdditive) {
  SensorFaultHistory h;
  auto s = std::vector<FaultSpec>{spec("lidar", FaultKind::bias, 0, 1)};
  s[0].params.value = 0.5;
  const auto out = apply_sensor_fault(lidar_frame(0, 4.0), ptrs(s), 0, h);
  ASSERT_EQ(out.size(), 1u);
  const auto& scan = std::get<sensors::LidarScan>(out[0]->payload);
  EXPECT_EQ(*scan.ranges[0], 4.5);
  EXPECT_FALSE(scan.ranges[2]);
}

TEST(SensorFault, StuckRepeatsLastDelivered) {
  SensorFaultHistory h;
  const std::vector<FaultSpec> s{spec("lidar", FaultKind::stuck, 0, 1)};
  // Nothing delivered yet: stuck suppresses.
  EXPECT_TRUE(apply_sensor_fault(lidar_frame(0, 1.0), ptrs(s), 0, h).empty());
  const auto before = lidar_frame(1, 2.0);
  apply_sensor_fault(before, {}, 1, h);
  for (int t = 2; t < 6; ++t) {
    const auto out = apply_sensor_fault(lidar_frame(t, 3.0 + t), ptrs(s), t, h);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(*out[0], *before);
  }
}

TEST(SensorFault, DeadSectorRemovesReturns) {
  SensorFaultHistory h;
  auto s = std::vector<FaultSpec>{spec("lidar", FaultKind::dead_sector, 0, 1)};
  s[0].params.from = -0.1;
  s[0].params.to = 0.6;
  const auto out = apply_sensor_fault(lidar_frame(0, 4.0), ptrs(s), 0, h);
  const auto& scan = std::get<sensors::LidarScan>(out[0]->payload);
  EXPECT_TRUE(scan.ranges[0]);
  EXPECT_FALSE(scan.ranges[1]);
}

TEST(SensorFault, DeadSectorOnObjects) {
  SensorFaultHistory h;
  sensors::ObjectList list;
  list.detections = {{{10, 0}, {1, 1}, std::nullopt}, {{0, 10}, {1, 1}, std::nullopt}};
  auto frame = std::make_shared<const sensors::SensorFrame>(sensors::SensorFrame{"cam", sensors::SensorType::camera, 0, list});
  auto s = std::vector<FaultSpec>{spec("cam", FaultKind::dead_sector, 0, 1)};
  s[0].params.from = 1.0;
  s[0].params.to = 2.0;
  const auto out = apply_sensor_fault(frame, ptrs(s), 0, h);
  const auto& got = std::get<sensors::ObjectList>(out[0]->payload);
  ASSERT_EQ(got.detections.size(), 1u);
  EXPECT_EQ(got.detections[0].position, (Vec2{10, 0}));
}

TEST(SensorFault, DelayDeliversLate) {
  SensorFaultHistory h;
  auto s = std::vector<FaultSpec>{spec("lidar", FaultKind::delay, 0, 1)};
  s[0].params.ticks = 3;
  const auto f0 = lidar_frame(0, 1.0);
  EXPECT_TRUE(apply_sensor_fault(f0, ptrs(s), 0, h).empty());
  EXPECT_TRUE(apply_sensor_fault(nullptr, ptrs(s), 1, h).empty());
  EXPECT_TRUE(apply_sensor_fault(nullptr, ptrs(s), 2, h).empty());
  const auto out = apply_sensor_fault(lidar_frame(3, 2.0), {}, 3, h);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].get(), f0.get());
  EXPECT_EQ(out[1]->tick, 3);
}

TEST(SensorFault, OrderMatters) {
  auto bias_then_stuck = std::vector<FaultSpec>{spec("lidar", FaultKind::bias, 0, 1), spec("lidar", FaultKind::stuck, 0, 1)};
  bias_then_stuck[0].params.value = 1.0;
  auto stuck_then_bias = std::vector<FaultSpec>{bias_then_stuck[1], bias_then_stuck[0]};
  SensorFaultHistory h1, h2;
  apply_sensor_fault(lidar_frame(0, 2.0), {}, 0, h1);
  apply_sensor_fault(lidar_frame(0, 2.0), {}, 0, h2);
  const auto a = apply_sensor_fault(lidar_frame(1, 5.0), ptrs(bias_then_stuck), 1, h1);
  const auto b = apply_sensor_fault(lidar_frame(1, 5.0), ptrs(stuck_then_bias), 1, h2);
  EXPECT_EQ(*std::get<sensors::LidarScan>(a[0]->payload).ranges[0], 2.0);
  EXPECT_EQ(*std::get<sensors::LidarScan>(b[0]->payload).ranges[0], 3.0);
}

TEST(SensorFault, NoiseFactorMultiplies) {
  auto s = std::vector<FaultSpec>{spec("x", FaultKind::noise_scale, 0, 1), spec("x", FaultKind::noise_scale, 0, 1)};
  s[0].params.factor = 2.0;
  s[1].params.factor = 1.5;
  EXPECT_DOUBLE_EQ(noise_factor(ptrs(s)), 3.0);
  EXPECT_DOUBLE_EQ(noise_factor({}), 1.0);
}

TEST(ChannelFault, SilenceFreezeOffset) {
  const ChannelLimits limits;
  ChannelCommand cmd{"nominal", 1, 1.0, 0.05, 10};
  {
    ChannelFaultHistory h;
    const std::vector<FaultSpec> s{spec("nominal", FaultKind::silence, 0, 1)};
    EXPECT_FALSE(apply_channel_fault(cmd, ptrs(s), 10, limits, h));
    EXPECT_TRUE(silences(ptrs(s)));
  }
  {
    ChannelFaultHistory h;
    const std::vector<FaultSpec> s{spec("nominal", FaultKind::freeze, 0, 1)};
    EXPECT_FALSE(apply_channel_fault(cmd, ptrs(s), 10, limits, h));  // no prior command
    apply_channel_fault(cmd, {}, 10, limits, h);
    ChannelCommand later{"nominal", 1, -2.0, 0.3, 11};
    const auto out = apply_channel_fault(later, ptrs(s), 11, limits, h);
    ASSERT_TRUE(out);
    EXPECT_EQ(out->accel, 1.0);
    EXPECT_EQ(out->steer, 0.05);
    EXPECT_EQ(out->tick, 11);
  }
  {
    ChannelFaultHistory h;
    auto s = std::vector<FaultSpec>{spec("nominal", FaultKind::offset, 0, 1)};
    s[0].params.steer = 0.1;
    const auto out = apply_channel_fault(ChannelCommand{"nominal", 1, 0.0, 0.0, 3}, ptrs(s), 3, limits, h);
    EXPECT_EQ(out->steer, 0.1);
    s[0].params.steer = 5.0;
    EXPECT_EQ(apply_channel_fault(ChannelCommand{"nominal", 1, 0.0, 0.0, 4}, ptrs(s), 4, limits, h)->steer, 0.6);
  }
  ChannelFaultHistory h;
  EXPECT_EQ(apply_channel_fault(cmd, {}, 10, limits, h), cmd);
}

TEST(FaultKind, NamesRoundTrip) {
  for (auto k : {FaultKind::dropout, FaultKind::stuck, FaultKind::bias, FaultKind::noise_scale, FaultKind::dead_sector,
                 FaultKind::delay, FaultKind::freeze, FaultKind::silence, FaultKind::offset}) {
    EXPECT_EQ(fault_kind_from(to_string(k)), k);
  }
  EXPECT_THROW(fault_kind_from("gremlin"), std::invalid_argument);
  EXPECT_TRUE(is_channel_fault(FaultKind::offset));
  EXPECT_FALSE(is_channel_fault(FaultKind::delay));
}
