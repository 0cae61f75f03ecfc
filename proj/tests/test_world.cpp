#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "adeye/error.hpp"
#include "adeye/world.hpp"

using namespace adeye;
using namespace adeye::world;

namespace {

Actor car(double x, double y, double heading, double speed) {
  Actor a;
  a.id = "car";
  a.kind = ActorKind::vehicle;
  a.state.pose = {x, y, heading};
  a.state.speed = speed;
  return a;
}

World simple_world() {
  World w;
  w.bounds = {{-50, -50}, {50, 50}};
  Actor ego;
  ego.id = "ego";
  ego.kind = ActorKind::ego;
  w.actors.push_back(ego);
  return w;
}

}  // namespace

TEST(StepActor, FixedPoint) {
  const Actor a = car(1.0, 2.0, 0.3, 0.0);
  const Actor b = step_actor(a, {0.0, 0.0}, 0.01, {});
  EXPECT_EQ(b.state.pose, a.state.pose);
  EXPECT_EQ(b.state.speed, 0.0);
}

TEST(StepActor, StraightLine) {
  const Actor b = step_actor(car(0, 0, 0, 10.0), {0.0, 0.0}, 1.0, {});
  EXPECT_DOUBLE_EQ(b.state.pose.x, 10.0);
  EXPECT_DOUBLE_EQ(b.state.pose.y, 0.0);
}

TEST(StepActor, FrictionCapThenZeroClamp) {
  Environment env;
  env.friction = 0.3;
  const Actor b = step_actor(car(0, 0, 0, 1.0), {-5.0, 0.0}, 1.0, env);
  EXPECT_EQ(b.state.speed, 0.0);
  // Cap is 0.3 * 9.81 = 2.943: a half-second step leaves 1 - 1.4715.
  const Actor c = step_actor(car(0, 0, 0, 2.0), {-5.0, 0.0}, 0.5, env);
  EXPECT_NEAR(c.state.speed, 2.0 - 0.5 * 2.943, 1e-12);
  EXPECT_NEAR(c.state.accel, -2.943, 1e-12);
}

TEST(StepActor, BicycleYaw) {
  const Actor b = step_actor(car(0, 0, 0, 5.0), {0.0, 0.2}, 0.1, {});
  EXPECT_NEAR(b.state.pose.heading, 5.0 / 2.7 * std::tan(0.2) * 0.1, 1e-12);
  const Actor c = step_actor(car(0, 0, 0, 5.0), {0.0, 3.0}, 0.1, {});
  EXPECT_DOUBLE_EQ(c.state.steer, 0.6);
}

TEST(StepActor, RejectsNonFiniteControl) {
  try {
    step_actor(car(0, 0, 0, 1.0), {NAN, 0.0}, 0.01, {});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.path(), "control.accel");
  }
  EXPECT_THROW(step_actor(car(0, 0, 0, 1.0), {0.0, INFINITY}, 0.01, {}), ValidationError);
}

TEST(StepActor, ForwardOnlyAndFrictionCapProperty) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> acc(-30, 30), st(-1, 1), v(0, 20), mu(0.1, 1.5);
  for (int i = 0; i < 2000; ++i) {
    Environment env;
    env.friction = mu(gen);
    const Actor b = step_actor(car(0, 0, 0, v(gen)), {acc(gen), st(gen)}, 0.01, env);
    ASSERT_GE(b.state.speed, 0.0);
    ASSERT_LE(std::abs(b.state.accel), env.friction * kGravity + 1e-9);
  }
}

TEST(AdvanceScripted, StraightApproachHasNoLateralDeviation) {
  Actor a = car(0, 0, 0, 3.0);
  a.script = {{10.0, 0.0, 3.0}};
  for (int i = 0; i < 200; ++i) {
    a = advance_scripted(a, 0.01, {});
    ASSERT_EQ(a.state.pose.y, 0.0);
  }
}

TEST(AdvanceScripted, WaypointBehindTurnsAtSteerMax) {
  Actor a = car(0, 0, 0, 3.0);
  a.script = {{-20.0, 0.1, 3.0}};
  a = advance_scripted(a, 0.01, {});
  EXPECT_DOUBLE_EQ(std::abs(a.state.steer), a.vehicle.steer_max);
  double prev_err = INFINITY;
  bool reversed = false;
  for (int i = 0; i < 500; ++i) {
    a = advance_scripted(a, 0.01, {});
    const double bearing = std::atan2(0.1 - a.state.pose.y, -20.0 - a.state.pose.x);
    const double err = std::abs(normalize_angle(bearing - a.state.pose.heading));
    if (!reversed && err < kPi / 2) reversed = true;
    if (reversed) {
      EXPECT_LE(err, prev_err + 1e-9) << "tick " << i;
      prev_err = err;
    }
  }
  EXPECT_TRUE(reversed);
}

TEST(AdvanceScripted, StopsAfterLastWaypoint) {
  Actor a = car(0, 0, 0, 2.0);
  a.script = {{1.0, 0.0, 2.0}};
  for (int i = 0; i < 300; ++i) a = advance_scripted(a, 0.01, {});
  EXPECT_EQ(a.state.speed, 0.0);
  const Actor b = advance_scripted(a, 0.01, {});
  EXPECT_EQ(b.state.speed, 0.0);
  EXPECT_EQ(b.state.pose, a.state.pose);
}

TEST(AdvanceScripted, EmptyScriptIsStatic) {
  const Actor a = car(4, 5, 0.1, 0.0);
  const Actor b = advance_scripted(a, 0.01, {});
  EXPECT_EQ(b.state.pose, a.state.pose);
}

TEST(AdvanceScripted, PedestrianTurnsInPlace) {
  Actor p = car(0, 0, 0, 1.0);
  p.kind = ActorKind::pedestrian;
  p.script = {{0.0, 10.0, 1.0}};
  p = advance_scripted(p, 0.01, {});
  EXPECT_NEAR(p.state.pose.heading, kPi / 2, 1e-12);
}

TEST(Contain, ClampsAndStops) {
  Actor a = car(60, 0, 0, 5.0);
  EXPECT_TRUE(contain(a, {{-50, -50}, {50, 50}}));
  EXPECT_EQ(a.state.pose.x, 50.0);
  EXPECT_EQ(a.state.speed, 0.0);
  Actor b = car(0, 0, 0, 5.0);
  EXPECT_FALSE(contain(b, {{-50, -50}, {50, 50}}));
}

TEST(RayCast, ForcedGeometry) {
  World w = simple_world();
  w.obstacles.push_back({"c1", Circle{{5, 0}, 1.0}});
  auto hit = ray_cast(w, {0, 0}, 0.0, 100.0, "ego");
  ASSERT_TRUE(hit);
  EXPECT_DOUBLE_EQ(hit->distance, 4.0);
  EXPECT_EQ(hit->id, "c1");
  EXPECT_FALSE(ray_cast(w, {0, 0}, kPi, 100.0, "ego"));
  EXPECT_FALSE(ray_cast(w, {0, 0}, 0.0, 3.9, "ego"));
}

TEST(RayCast, NearerTargetOccludes) {
  World w = simple_world();
  w.obstacles.push_back({"far", Circle{{8, 0}, 1.0}});
  w.obstacles.push_back({"near", Circle{{5, 0}, 1.0}});
  const auto hit = ray_cast(w, {0, 0}, 0.0, 100.0, "ego");
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->id, "near");
  EXPECT_DOUBLE_EQ(hit->distance, 4.0);
}

TEST(RayCast, ExcludesOwnFootprint) {
  World w = simple_world();
  const auto self = ray_cast(w, {0, 0}, 0.0, 100.0);
  ASSERT_TRUE(self);
  EXPECT_EQ(self->id, "ego");
  EXPECT_EQ(self->kind, TargetKind::actor);
  EXPECT_FALSE(ray_cast(w, {0, 0}, 0.0, 100.0, "ego"));
}

TEST(GroundTruth, IdentityAtTickZeroAndTime) {
  World w = simple_world();
  Actor other = car(10, 3, 0.5, 2.0);
  w.actors.push_back(other);
  auto shared = std::make_shared<const World>(w);
  const Scene s0 = ground_truth(shared, 0, 0.01);
  EXPECT_EQ(s0.actors, w.actors);
  EXPECT_EQ(s0.time, 0.0);
  const Scene s = ground_truth(shared, 137, 0.01);
  EXPECT_DOUBLE_EQ(s.time, 137 * 0.01);
  EXPECT_EQ(s.actors.size(), w.actors.size());
  EXPECT_EQ(s.ego().id, "ego");
  EXPECT_NE(s.find_actor("car"), nullptr);
}

TEST(Validate, RejectsBadWorlds) {
  World w = simple_world();
  EXPECT_NO_THROW(validate(w));
  World two = w;
  two.actors.push_back(w.actors.front());
  two.actors.back().id = "ego2";
  EXPECT_THROW(validate(two), ValidationError);
  World bad_circle = w;
  bad_circle.obstacles.push_back({"c", Circle{{0, 0}, 0.0}});
  EXPECT_THROW(validate(bad_circle), ValidationError);
  World cw = w;
  cw.obstacles.push_back({"p", Polygon{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}}});
  EXPECT_THROW(validate(cw), ValidationError);
  World outside = w;
  outside.obstacles.push_back({"far", Circle{{100, 0}, 1.0}});
  EXPECT_THROW(validate(outside), ValidationError);
  World env = w;
  env.environment.friction = 2.0;
  EXPECT_THROW(validate(env), ValidationError);
}
