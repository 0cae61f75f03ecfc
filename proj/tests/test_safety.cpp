#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "adeye/rng.hpp"
#include "adeye/safety.hpp"

using namespace adeye;
using namespace adeye::safety;

namespace {

world::Actor make_ego(double x, double y, double heading, double speed) {
  world::Actor a;
  a.id = "ego";
  a.kind = world::ActorKind::ego;
  a.state.pose = {x, y, heading};
  a.state.speed = speed;
  return a;
}

world::Scene scene_with(std::vector<world::StaticObstacle> obstacles, world::Actor ego) {
  auto w = std::make_shared<world::World>();
  w->bounds = {{-500, -500}, {500, 500}};
  w->obstacles = std::move(obstacles);
  w->actors = {std::move(ego)};
  return world::ground_truth(w, 0, 0.01);
}

world::StaticObstacle box_obstacle(std::string id, Vec2 lo, Vec2 hi) {
  return {std::move(id), axis_rectangle(lo, hi), world::ObstacleKind::barrier, true};
}

Shape random_shape(Rng& rng, Vec2 centre) {
  if (rng.uniform() < 0.5) return Circle{centre, 0.2 + 2.0 * rng.uniform()};
  const Pose2D pose{centre.x, centre.y, rng.uniform() * 6.283185307179586};
  return oriented_rectangle(pose, 0.3 + 4.0 * rng.uniform(), 0.3 + 3.0 * rng.uniform());
}

}  // namespace

TEST(Envelope, ClosedForm) {
  MonitorConfig c;
  EXPECT_DOUBLE_EQ(braking_envelope(0.0, c), 1.0);
  // 1 + 1 + 100/12 + 3
  EXPECT_NEAR(braking_envelope(10.0, c), 13.0 + 1.0 / 3.0, 1e-12);
  for (double v = 0.0; v < 30.0; v += 0.37) EXPECT_LE(braking_envelope(v, c), braking_envelope(v + 0.37, c));
}

// Soundness against dense sampling, exactness against the geometry kernel,
// and inflation against an all-pairs scan.
TEST(Grid, MatchesBruteForce) {
  Rng rng(2024);
  GridConfig cfg;
  cfg.extent = 16.0;
  cfg.resolution = 0.5;
  cfg.inflation_radius = 1.5;
  for (int scene_i = 0; scene_i < 40; ++scene_i) {
    std::vector<world::StaticObstacle> obs;
    const int n = 1 + static_cast<int>(rng.uniform() * 4);
    for (int i = 0; i < n; ++i) {
      obs.push_back({"o" + std::to_string(i), random_shape(rng, {rng.uniform() * 16 - 8, rng.uniform() * 16 - 8}),
                     world::ObstacleKind::other, true});
    }
    const auto scene = scene_with(obs, make_ego(0.3, -0.2, 0.0, 0.0));
    const auto g = build_grid(scene, cfg);
    ASSERT_EQ(g.width, 32);

    std::vector<char> occ(g.ratings.size(), 0);
    for (int iy = 0; iy < g.height; ++iy) {
      for (int ix = 0; ix < g.width; ++ix) {
        const auto box = g.cell_box(ix, iy);
        const Shape cell = axis_rectangle(box.min, box.max);
        bool touches = false;
        for (const auto& o : obs) touches = touches || shape_distance(cell, o.shape) <= 1e-12;
        bool sampled = false;
        for (int sy = 0; sy <= 8 && !sampled; ++sy)
          for (int sx = 0; sx <= 8 && !sampled; ++sx) {
            const Vec2 p{box.min.x + (box.max.x - box.min.x) * sx / 8.0, box.min.y + (box.max.y - box.min.y) * sy / 8.0};
            for (const auto& o : obs) sampled = sampled || contains(o.shape, p);
          }
        const bool occupied = g.at(ix, iy) == 1.0;
        if (sampled) ASSERT_TRUE(occupied) << scene_i << " " << ix << "," << iy;
        ASSERT_EQ(occupied, touches) << scene_i << " " << ix << "," << iy;
        occ[static_cast<std::size_t>(iy) * g.width + ix] = touches;
      }
    }
    for (int iy = 0; iy < g.height; ++iy) {
      for (int ix = 0; ix < g.width; ++ix) {
        if (occ[static_cast<std::size_t>(iy) * g.width + ix]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int oy = 0; oy < g.height; ++oy)
          for (int ox = 0; ox < g.width; ++ox)
            if (occ[static_cast<std::size_t>(oy) * g.width + ox])
              best = std::min(best, distance(g.cell_center(ix, iy), g.cell_center(ox, oy)));
        const double want = std::isinf(best) ? 0.0 : std::max(0.0, 1.0 - best / cfg.inflation_radius);
        ASSERT_NEAR(g.at(ix, iy), want, 1e-9);
      }
    }
  }
}

TEST(Grid, BoxOverlapIsClosed) {
  const Aabb cell{{0, 0}, {1, 1}};
  EXPECT_TRUE(box_overlaps(cell, Circle{{2, 0.5}, 1.0}));
  EXPECT_FALSE(box_overlaps(cell, Circle{{2, 0.5}, 0.999}));
  EXPECT_TRUE(box_overlaps(cell, Shape{axis_rectangle({1, 1}, {2, 2})}));
  EXPECT_FALSE(box_overlaps(cell, Shape{axis_rectangle({1.001, 0}, {2, 2})}));
}

TEST(Monitor, AllEightCombinations) {
  MonitorConfig cfg;
  GridConfig gcfg;
  for (int mask = 0; mask < 8; ++mask) {
    const bool obstacle = mask & 1, stale = mask & 2, limit = mask & 4;
    std::vector<world::StaticObstacle> obs;
    // Ego front bumper at x = 2.25; the envelope at 10 m/s is 13.33 m.
    if (obstacle) obs.push_back(box_obstacle("wall", {10, -3}, {11, 3}));
    else obs.push_back(box_obstacle("far", {25, -3}, {26, 3}));
    const auto scene = scene_with(obs, make_ego(0, 0, 0, 10.0));
    MonitorInputs in;
    in.heartbeat_age = stale ? cfg.heartbeat_timeout + 1 : cfg.heartbeat_timeout;
    in.last_command = ChannelCommand{"nominal", 1, limit ? 9.0 : 1.0, 0.0, 0};
    const auto v = monitor(scene, build_grid(scene, gcfg), in, cfg);
    std::optional<TriggerReason> want;
    if (limit) want = TriggerReason::limit_violation;
    if (stale) want = TriggerReason::heartbeat_loss;
    if (obstacle) want = TriggerReason::predicted_collision;
    EXPECT_EQ(v.reason, want) << mask;
    EXPECT_EQ(v.status == VerdictStatus::trigger, want.has_value()) << mask;
    if (obstacle) {
      EXPECT_NEAR(*v.evidence.required, 13.0 + 1.0 / 3.0, 1e-12);
      EXPECT_LT(*v.evidence.distance, *v.evidence.required);
    }
  }
}

TEST(Monitor, SteerLimitAndFreeDistance) {
  MonitorConfig cfg;
  const auto scene = scene_with({box_obstacle("far", {20, -3}, {21, 3})}, make_ego(0, 0, 0, 2.0));
  MonitorInputs in;
  in.last_command = ChannelCommand{"nominal", 1, 0.0, 0.61, 0};
  EXPECT_EQ(monitor(scene, build_grid(scene, {}), in, cfg).evidence.field, "steer");
  in.last_command->steer = 0.6;
  EXPECT_FALSE(monitor(scene, build_grid(scene, {}), in, cfg).reason);

  // Rated band starts r_inf*(1-threshold) = 0.4 m before the wall face at
  // x=20, give or take one cell.
  const auto g = build_grid(scene, {});
  const auto fd = free_distance(g, scene.ego(), 0.8, 30.0);
  EXPECT_NEAR(fd.distance, 20.0 - 2.25 - 0.4, 0.5 + 1e-9);
  EXPECT_EQ(free_distance(g, scene.ego(), 0.8, 10.0).distance, 10.0);
}

TEST(StopPlan, DistanceMatchesNumericIntegration) {
  for (double v0 : {0.5, 1.0, 3.6, 5.0, 10.0, 15.0, 25.0}) {
    const SafeStopPlan p(v0, 6.0, 10.0);
    const int n = 200000;
    const double h = p.duration() / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = i * h;
      s += h / 6.0 * (p.speed_at(t) + 4.0 * p.speed_at(t + 0.5 * h) + p.speed_at(t + h));
    }
    EXPECT_NEAR(p.distance(), s, 1e-6) << v0;
    const double closed = v0 >= 3.6 ? v0 * v0 / 12.0 + v0 * 6.0 / 20.0 : v0 * std::sqrt(v0 / 10.0);
    EXPECT_NEAR(p.distance(), closed, 1e-9) << v0;
    EXPECT_LE(p.peak_decel(), 6.0 + 1e-12);
    // Jerk bound: finite differences of the deceleration.
    double prev = p.decel_at(0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double d = p.decel_at(p.duration() * i / 1000.0);
      EXPECT_LE(std::abs(d - prev), 10.0 * p.duration() / 1000.0 + 1e-9);
      prev = d;
    }
    EXPECT_EQ(p.speed_at(p.duration()), 0.0);
    EXPECT_LE(p.distance() + 1.0 + 0.1 * v0, braking_envelope(v0, MonitorConfig{}) + 1e-9);
  }
}

TEST(StopPlan, CommandsIntegrateToRest) {
  const double dt = 0.01;
  const SafeStopPlan p(10.0, 6.0, 10.0);
  double v = 10.0;
  std::int64_t k = 0;
  for (; k * dt < p.duration(); ++k) v += p.command(k, dt, 6.0) * dt;
  EXPECT_NEAR(v, 0.0, 1e-9);
  EXPECT_EQ(p.command(k, dt, 6.0), -6.0);
}

TEST(StopPlan, InfiniteJerkLimit) {
  for (double j : {1e3, 1e5, 1e7}) {
    const SafeStopPlan p(10.0, 6.0, j);
    EXPECT_NEAR(p.distance(), 100.0 / 12.0, 60.0 / (2.0 * j) + 1e-12);
  }
  MonitorConfig c;
  c.j_max = 1e12;
  EXPECT_NEAR(braking_envelope(10.0, c), 1.0 + 1.0 + 100.0 / 12.0, 1e-9);
}
