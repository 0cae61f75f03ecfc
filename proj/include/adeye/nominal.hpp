#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "adeye/kernel.hpp"
#include "adeye/world.hpp"

namespace adeye::nominal {

inline constexpr int kPriority = 1;
inline constexpr int kMapFormatVersion = 1;

struct NominalConfig {
  std::string id = "nominal";
  double map_spacing = 0.25;       // s
  double alpha = 0.1;              // gps weight in the complementary filter
  int dropout_tolerance = 10;      // ticks without gps or imu before degrading
  double cluster_distance = 0.7;   // d_c
  int cluster_min_points = 3;      // n_min
  double map_margin = 0.3;         // background removal radius
  int candidates = 7;              // K
  double horizon = 3.0;            // T, s
  double sample_dt = 0.1;          // spacing of trajectory points in time
  double lane_margin = 1.0;        // kept from the lane edge
  double min_plan_speed = 1.0;     // candidates never collapse to a point
  double w_clear = 2.0;
  double w_off = 0.5;
  double w_smooth = 1.0;
  double d_collide = 0.5;
  double clear_cap = 5.0;
  double lookahead_min = 3.0;      // L_min
  double lookahead_gain = 0.5;     // k_v, s
  double speed_gain = 1.0;         // 1/s
  double comfort_accel = 3.0;
  double brake_accel = 6.0;        // used when no candidate survives
  double goal_decel = 2.0;         // speed taper towards the goal
  bool operator==(const NominalConfig&) const = default;
};

nlohmann::json to_json(const NominalConfig& c);
NominalConfig nominal_config_from(const nlohmann::json& j, const std::string& path);

// ---------------------------------------------------------------------------
// maps

struct PointMap {
  double spacing = 0.25;
  std::vector<Vec2> points;
  bool operator==(const PointMap&) const = default;
};

struct LaneMap {
  std::vector<world::Lane> lanes;
  bool operator==(const LaneMap&) const = default;
};

struct MapArtifacts {
  PointMap points;
  LaneMap lanes;
  bool operator==(const MapArtifacts&) const = default;
};

// Noise-free boundary sampling of every mapped obstacle. Each polygon edge of
// length l gets ceil(l/s) evenly spaced points starting at its first vertex;
// a circle of radius r gets ceil(2*pi*r/s) points.
MapArtifacts build_map(const world::World& world, double spacing = 0.25);

nlohmann::json to_json(const PointMap& m);
nlohmann::json to_json(const LaneMap& m);
PointMap pointmap_from(const nlohmann::json& j);
LaneMap lanemap_from(const nlohmann::json& j);

struct MapPaths {
  std::filesystem::path pointmap;
  std::filesystem::path lanemap;
};
MapPaths map_paths(const std::filesystem::path& dir, const std::string& name);
MapPaths save_maps(const MapArtifacts& maps, const std::filesystem::path& dir, const std::string& name);
MapArtifacts load_maps(const std::filesystem::path& dir, const std::string& name);

// Spatial hash over map points for background removal.
class MapIndex {
 public:
  MapIndex(const PointMap& map, double radius);
  bool near(Vec2 p) const;

 private:
  std::int64_t key(std::int64_t ix, std::int64_t iy) const { return ix * 73856093LL ^ iy * 19349663LL; }
  double cell_;
  double radius_;
  std::unordered_map<std::int64_t, std::vector<Vec2>> buckets_;
};

// ---------------------------------------------------------------------------
// pipeline stages

struct Estimate {
  Pose2D pose;
  double speed = 0.0;
  bool operator==(const Estimate&) const = default;
};

// Dead reckoning from the previous estimate (Euler on its heading and speed),
// heading/speed updated from the imu, position blended with the gps.
Estimate localize(const std::optional<sensors::GpsFix>& gps, const std::optional<sensors::ImuSample>& imu,
                  const Estimate& prev, double dt, double alpha);

struct Cluster {
  Vec2 centroid;
  double radius = 0.0;  // max member distance from the centroid
  std::size_t size = 0;
  bool operator==(const Cluster&) const = default;
};

// Single-linkage clustering; clusters with fewer than n_min members dropped.
// Output is ordered by the smallest member index.
std::vector<Cluster> cluster(std::span<const Vec2> points, double d_c, int n_min);

struct CandidateTrajectory {
  double offset = 0.0;
  std::vector<Pose2D> points;
  double clearance = 0.0;
  double mean_curvature = 0.0;
  double cost = 0.0;
  bool colliding = false;
};

struct LaneMatch {
  std::size_t lane = 0;
  double lateral = 0.0;  // distance to the centreline
  double station = 0.0;  // arc length of the projection
};

// Closest lane within its own width, preferring lanes running along the
// heading.
std::optional<LaneMatch> match_lane(const LaneMap& lanes, const Pose2D& pose);

std::vector<CandidateTrajectory> generate_candidates(const LaneMap& lanes, const Estimate& estimate,
                                                     const NominalConfig& config);

double mean_abs_curvature(std::span<const Pose2D> points);

// Fills clearance/cost/colliding for every candidate.
void score(std::vector<CandidateTrajectory>& candidates, std::span<const Cluster> clusters, double ego_half_width,
           const NominalConfig& config);

// Lowest-cost non-colliding candidate, ties to the lowest index.
std::optional<std::size_t> select(std::span<const CandidateTrajectory> candidates);

struct TrackCommand {
  double accel = 0.0;
  double steer = 0.0;
};

double lookahead_distance(double speed, const NominalConfig& config);
// Pure pursuit: steer = atan(2 * wheelbase * sin(alpha) / l_d).
double pursuit_steer(const Pose2D& pose, Vec2 target, double wheelbase);
TrackCommand track(const CandidateTrajectory& selected, const Estimate& estimate, double target_speed,
                   const world::VehicleParams& vehicle, const NominalConfig& config);

// ---------------------------------------------------------------------------
// channel

struct PlanRecord {
  std::int64_t tick = 0;
  Estimate estimate;
  std::vector<Vec2> obstacle_points;  // lidar returns left after background removal
  std::vector<Cluster> clusters;
  std::vector<CandidateTrajectory> candidates;
  std::optional<std::size_t> selected;
  double target_speed = 0.0;
  bool degraded = false;
};

class NominalChannel final : public kernel::Channel {
 public:
  NominalChannel(NominalConfig config, std::shared_ptr<const MapArtifacts> maps);

  std::string id() const override { return config_.id; }
  int priority() const override { return kPriority; }
  void start(const kernel::RunContext& context) override;
  kernel::ChannelOutput step(const kernel::ChannelInputs& inputs) override;

  const std::optional<PlanRecord>& last_plan() const { return last_plan_; }
  const Estimate& estimate() const { return estimate_; }
  const NominalConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }

 private:
  NominalConfig config_;
  std::shared_ptr<const MapArtifacts> maps_;
  std::unique_ptr<MapIndex> index_;
  std::vector<sensors::SensorConfig> sensors_;
  world::Actor ego_template_;
  std::optional<scenario::Goal> goal_;
  Estimate estimate_;
  bool started_ = false;
  int blind_ticks_ = 0;
  std::uint64_t steps_ = 0;
  std::optional<PlanRecord> last_plan_;
};

}  // namespace adeye::nominal
