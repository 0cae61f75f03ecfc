#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <queue>

#include "adeye/error.hpp"
#include "adeye/nominal.hpp"
#include "adeye/rng.hpp"

using namespace adeye;
using namespace adeye::nominal;

namespace {

world::Lane straight_lane(double length = 100.0) {
  world::Lane l;
  l.id = "main";
  l.centerline = {{0, 0}, {length, 0}};
  l.width = 3.5;
  return l;
}

}  // namespace

TEST(Map, SquareAndCircleSampling) {
  world::World w;
  w.obstacles.push_back({"sq", axis_rectangle({0, 0}, {2, 2}), world::ObstacleKind::building, true});
  w.obstacles.push_back({"c", Circle{{10, 10}, 1.0}, world::ObstacleKind::tree, true});
  w.obstacles.push_back({"new", Circle{{20, 10}, 1.0}, world::ObstacleKind::barrier, false});
  w.lanes.push_back(straight_lane());
  const auto m = build_map(w, 0.25);
  // 4 edges * 2 m / 0.25 m, then ceil(2*pi / 0.25) = 26 on the circle
  ASSERT_EQ(m.points.points.size(), 32u + 26u);
  for (std::size_t i = 0; i < 32; ++i) {
    const auto p = m.points.points[i];
    const bool on_edge = p.x == 0 || p.x == 2 || p.y == 0 || p.y == 2;
    EXPECT_TRUE(on_edge) << i;
  }
  for (std::size_t i = 32; i < m.points.points.size(); ++i) {
    EXPECT_NEAR(distance(m.points.points[i], {10, 10}), 1.0, 1e-12);
  }
  EXPECT_EQ(m.lanes.lanes, w.lanes);

  const auto dir = std::filesystem::temp_directory_path() / "adeye_test_maps";
  save_maps(m, dir, "t");
  EXPECT_EQ(load_maps(dir, "t"), m);
  std::filesystem::remove_all(dir);
}

TEST(Localize, ComplementaryFilter) {
  const Estimate prev{{10, 5, 0.0}, 4.0};
  const auto dr = localize(std::nullopt, std::nullopt, prev, 0.1, 0.1);
  EXPECT_DOUBLE_EQ(dr.pose.x, 10.4);
  EXPECT_EQ(dr.speed, 4.0);
  const auto with_imu = localize(std::nullopt, sensors::ImuSample{2.0, 0.5}, prev, 0.1, 0.1);
  EXPECT_DOUBLE_EQ(with_imu.speed, 4.2);
  EXPECT_DOUBLE_EQ(with_imu.pose.heading, 0.05);
  const auto with_gps = localize(sensors::GpsFix{20.0, 15.0}, std::nullopt, prev, 0.1, 0.1);
  EXPECT_DOUBLE_EQ(with_gps.pose.x, 0.1 * 20.0 + 0.9 * 10.4);
  EXPECT_DOUBLE_EQ(with_gps.pose.y, 0.1 * 15.0 + 0.9 * 5.0);
  const auto trust_gps = localize(sensors::GpsFix{20.0, 15.0}, std::nullopt, prev, 0.1, 1.0);
  EXPECT_EQ(trust_gps.pose.position(), (Vec2{20.0, 15.0}));
}

TEST(Cluster, MatchesComponentSearch) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec2> pts;
    const int n = static_cast<int>(rng.uniform() * 60);
    for (int i = 0; i < n; ++i) pts.push_back({rng.uniform() * 10, rng.uniform() * 10});
    const double dc = 0.7;
    const int nmin = 3;
    // Oracle: BFS from each unvisited point in index order.
    std::vector<int> comp(pts.size(), -1);
    std::vector<Cluster> want;
    for (std::size_t s = 0; s < pts.size(); ++s) {
      if (comp[s] >= 0) continue;
      std::vector<std::size_t> members;
      std::queue<std::size_t> q;
      q.push(s);
      comp[s] = 1;
      while (!q.empty()) {
        const auto i = q.front();
        q.pop();
        members.push_back(i);
        for (std::size_t j = 0; j < pts.size(); ++j) {
          if (comp[j] < 0 && distance(pts[i], pts[j]) <= dc) {
            comp[j] = 1;
            q.push(j);
          }
        }
      }
      if (static_cast<int>(members.size()) < nmin) continue;
      std::sort(members.begin(), members.end());
      Vec2 sum;
      for (auto i : members) sum = sum + pts[i];
      Cluster c;
      c.size = members.size();
      c.centroid = sum * (1.0 / members.size());
      for (auto i : members) c.radius = std::max(c.radius, distance(pts[i], c.centroid));
      want.push_back(c);
    }
    const auto got = cluster(pts, dc, nmin);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].size, want[k].size);
      EXPECT_NEAR(got[k].centroid.x, want[k].centroid.x, 1e-12);
      EXPECT_NEAR(got[k].centroid.y, want[k].centroid.y, 1e-12);
      EXPECT_NEAR(got[k].radius, want[k].radius, 1e-12);
    }
  }
}

TEST(Candidates, SevenOffsetsCentreFirstClass) {
  LaneMap lanes;
  lanes.lanes.push_back(straight_lane());
  NominalConfig cfg;
  const auto cs = generate_candidates(lanes, Estimate{{5, 0.2, 0.0}, 5.0}, cfg);
  ASSERT_EQ(cs.size(), 7u);
  EXPECT_EQ(cs[3].offset, 0.0);
  for (int k = 0; k < 7; ++k) {
    EXPECT_NEAR(cs[k].offset, -0.75 + 0.25 * k, 1e-12);
    ASSERT_EQ(cs[k].points.size(), 31u);
    EXPECT_NEAR(cs[k].points.front().x, 5.0, 1e-12);
    EXPECT_NEAR(cs[k].points.back().x, 5.0 + 15.0, 1e-9);  // speed * horizon
    for (const auto& p : cs[k].points) EXPECT_NEAR(p.y, cs[k].offset, 1e-12);
  }
  EXPECT_TRUE(generate_candidates(lanes, Estimate{{5, 30, 0.0}, 5.0}, cfg).empty());
}

TEST(Candidates, ScoreAndSelect) {
  LaneMap lanes;
  lanes.lanes.push_back(straight_lane());
  NominalConfig cfg;
  auto cs = generate_candidates(lanes, Estimate{{0, 0, 0.0}, 5.0}, cfg);
  score(cs, {}, 0.9, cfg);
  ASSERT_EQ(select(cs), 3u);  // no obstacles: straight, zero offset is cheapest
  // Obstacle left of the lane edge pushes the choice to the right.
  const std::vector<Cluster> cl{{{8.0, 1.7}, 0.2, 5}};
  score(cs, cl, 0.9, cfg);
  const auto sel = select(cs);
  ASSERT_TRUE(sel);
  EXPECT_LT(cs[*sel].offset, 0.0);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (!cs[i].colliding) EXPECT_GE(cs[i].cost, cs[*sel].cost);
    // Clearance oracle.
    double c = INFINITY;
    for (const auto& p : cs[i].points) c = std::min(c, distance(p.position(), {8.0, 1.7}) - 0.2 - 0.9);
    EXPECT_NEAR(cs[i].clearance, c, 1e-12);
  }
  for (auto& c : cs) c.colliding = true;
  EXPECT_FALSE(select(cs));
  std::vector<CandidateTrajectory> tie(3);
  EXPECT_EQ(select(tie), 0u);
}

TEST(Tracking, PurePursuitClosedForm) {
  const double L = 2.7;
  EXPECT_NEAR(pursuit_steer({0, 0, 0}, {0, 4}, L), std::atan(2.0 * L / 4.0), 1e-12);
  EXPECT_NEAR(pursuit_steer({0, 0, 0}, {0, -4}, L), -std::atan(2.0 * L / 4.0), 1e-12);
  EXPECT_NEAR(pursuit_steer({1, 1, kPi / 2}, {1, 9}, L), 0.0, 1e-12);
  const double a = 0.3;
  EXPECT_NEAR(pursuit_steer({0, 0, 0}, {5 * std::cos(a), 5 * std::sin(a)}, L), std::atan(2 * L * std::sin(a) / 5), 1e-12);
  NominalConfig cfg;
  EXPECT_EQ(lookahead_distance(2.0, cfg), 3.0);
  EXPECT_EQ(lookahead_distance(10.0, cfg), 5.0);
}

TEST(Channel, RefusesGroundTruth) {
  auto maps = std::make_shared<const MapArtifacts>();
  NominalChannel ch({}, maps);
  kernel::RunContext ctx;
  ctx.ground_truth_routed = true;
  EXPECT_THROW(ch.start(ctx), ConfigError);
  EXPECT_THROW(NominalChannel({}, nullptr), ConfigError);
}

TEST(Channel, BlindBeyondToleranceDropsHeartbeat) {
  auto maps = std::make_shared<MapArtifacts>();
  maps->lanes.lanes.push_back(straight_lane());
  NominalChannel ch({}, maps);
  kernel::RunContext ctx;
  ctx.initial_ego.state.speed = 3.0;
  ch.start(ctx);
  const kernel::Bus bus;
  const std::set<std::string, std::less<>> none;
  for (int t = 0; t < 12; ++t) {
    const auto out = ch.step(kernel::ChannelInputs{t, t * 0.01, 0.01, nullptr, {}, kernel::BusView(bus, none)});
    EXPECT_EQ(out.heartbeat, t < 10) << t;
    EXPECT_EQ(out.command.has_value(), t < 10) << t;
  }
  EXPECT_TRUE(ch.last_plan()->degraded);
}
