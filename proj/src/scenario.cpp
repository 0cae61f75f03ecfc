#include "adeye/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "adeye/detail/json_util.hpp"
#include "adeye/error.hpp"

namespace adeye::scenario {

using nlohmann::json;
using namespace adeye::detail;

namespace {

constexpr double kDefaultHalfExtent = 500.0;

// ---------------------------------------------------------------------------
// reading

Pose2D read_pose(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  Pose2D p{r.number("x", 0.0), r.number("y", 0.0), r.number("heading", 0.0)};
  r.finish();
  return p;
}

world::VehicleParams read_vehicle(const json* j, const std::string& path) {
  world::VehicleParams v;
  if (!j) return v;
  ObjectReader r(*j, path);
  v.wheelbase = r.number("wheelbase", v.wheelbase);
  v.steer_max = r.number("steer_max", v.steer_max);
  v.capture_radius = r.number("capture_radius", v.capture_radius);
  v.accel_limit = r.number("accel_limit", v.accel_limit);
  r.finish();
  return v;
}

world::Footprint read_footprint(const json* j, const std::string& path, world::Footprint fallback) {
  if (!j) return fallback;
  ObjectReader r(*j, path);
  world::Footprint f{r.number("length", fallback.length), r.number("width", fallback.width)};
  r.finish();
  return f;
}

world::ActorState read_state(const json* j, const std::string& path) {
  world::ActorState s;
  if (!j) return s;
  ObjectReader r(*j, path);
  if (const json* p = r.optional("pose")) s.pose = read_pose(*p, r.path_of("pose"));
  s.speed = r.number("speed", 0.0);
  s.steer = r.number("steer", 0.0);
  r.finish();
  return s;
}

world::Actor read_ego(const json& j) {
  ObjectReader r(j, "ego");
  world::Actor a;
  a.kind = world::ActorKind::ego;
  a.id = r.string("id", "ego");
  a.state = read_state(r.optional("state"), r.path_of("state"));
  a.footprint = read_footprint(r.optional("footprint"), r.path_of("footprint"), world::Footprint{});
  a.vehicle = read_vehicle(r.optional("vehicle"), r.path_of("vehicle"));
  r.finish();
  return a;
}

world::Actor read_actor(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  world::Actor a;
  a.id = r.string("id");
  const std::string kind = r.string("kind", "vehicle");
  try {
    a.kind = world::actor_kind_from(kind);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(r.path_of("kind"), e.what());
  }
  if (a.kind == world::ActorKind::ego) throw ValidationError(r.path_of("kind"), "the ego is declared under 'ego'");
  a.state = read_state(r.optional("state"), r.path_of("state"));
  const world::Footprint fallback =
      a.kind == world::ActorKind::pedestrian ? world::Footprint{0.5, 0.5} : world::Footprint{};
  a.footprint = read_footprint(r.optional("footprint"), r.path_of("footprint"), fallback);
  a.vehicle = read_vehicle(r.optional("vehicle"), r.path_of("vehicle"));
  if (const json* s = r.optional("script")) {
    const auto& arr = as_array(*s, r.path_of("script"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader w(arr[i], index_path(r.path_of("script"), i));
      a.script.push_back({w.number("x"), w.number("y"), w.number("speed", 0.0)});
      w.finish();
    }
  }
  r.finish();
  return a;
}

world::StaticObstacle read_obstacle(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  world::StaticObstacle o;
  o.id = r.string("id");
  try {
    o.kind = world::obstacle_kind_from(r.string("kind", "other"));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(r.path_of("kind"), e.what());
  }
  o.mapped = r.boolean("mapped", true);
  const json* circle = r.optional("circle");
  const json* polygon = r.optional("polygon");
  if ((circle != nullptr) == (polygon != nullptr)) {
    throw ValidationError(path, "exactly one of 'circle' or 'polygon' is required");
  }
  if (circle) {
    ObjectReader c(*circle, r.path_of("circle"));
    o.shape = Circle{as_vec2(c.required("center"), c.path_of("center")), c.number("radius")};
    c.finish();
  } else {
    Polygon poly;
    const auto& arr = as_array(*polygon, r.path_of("polygon"));
    for (std::size_t i = 0; i < arr.size(); ++i) poly.vertices.push_back(as_vec2(arr[i], index_path(r.path_of("polygon"), i)));
    o.shape = std::move(poly);
  }
  r.finish();
  return o;
}

world::Lane read_lane(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  world::Lane lane;
  lane.id = r.string("id");
  const auto& pts = as_array(r.required("centerline"), r.path_of("centerline"));
  for (std::size_t i = 0; i < pts.size(); ++i) lane.centerline.push_back(as_vec2(pts[i], index_path(r.path_of("centerline"), i)));
  lane.width = r.number("width", lane.width);
  lane.speed_limit = r.number("speed_limit", lane.speed_limit);
  if (const json* s = r.optional("successors")) {
    const auto& arr = as_array(*s, r.path_of("successors"));
    for (std::size_t i = 0; i < arr.size(); ++i) lane.successors.push_back(as_string(arr[i], index_path(r.path_of("successors"), i)));
  }
  r.finish();
  return lane;
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path, what);
}

void require_sigma(double v, const std::string& path) { require(v >= 0.0, path, "noise sigma must be >= 0"); }
void require_fov(double v, const std::string& path) {
  require(v > 0.0 && v <= 2.0 * kPi + 1e-12, path, "must lie in (0, 2*pi]");
}
void require_range(double v, const std::string& path) { require(v > 0.0, path, "must be > 0"); }
void require_prob(double v, const std::string& path) { require(v >= 0.0 && v <= 1.0, path, "must lie in [0, 1]"); }

sensors::SensorParams read_params(sensors::SensorType type, const json* j, const std::string& path) {
  sensors::SensorParams params = sensors::default_params(type);
  static const json kEmpty = json::object();
  ObjectReader r(j ? *j : kEmpty, path);
  std::visit(
      [&r](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, sensors::LidarParams>) {
          p.beams = static_cast<int>(r.integer("beams", p.beams));
          p.fov = r.number("fov", p.fov);
          p.max_range = r.number("max_range", p.max_range);
          p.range_noise_sigma = r.number("range_noise_sigma", p.range_noise_sigma);
          require(p.beams >= 1, r.path_of("beams"), "must be >= 1");
          require_fov(p.fov, r.path_of("fov"));
          require_range(p.max_range, r.path_of("max_range"));
          require_sigma(p.range_noise_sigma, r.path_of("range_noise_sigma"));
        } else if constexpr (std::is_same_v<T, sensors::CameraParams>) {
          p.fov = r.number("fov", p.fov);
          p.max_range = r.number("max_range", p.max_range);
          p.base_detection_prob = r.number("base_detection_prob", p.base_detection_prob);
          require_fov(p.fov, r.path_of("fov"));
          require_range(p.max_range, r.path_of("max_range"));
          require_prob(p.base_detection_prob, r.path_of("base_detection_prob"));
        } else if constexpr (std::is_same_v<T, sensors::RadarParams>) {
          p.fov = r.number("fov", p.fov);
          p.max_range = r.number("max_range", p.max_range);
          p.range_noise_sigma = r.number("range_noise_sigma", p.range_noise_sigma);
          p.rate_noise_sigma = r.number("rate_noise_sigma", p.rate_noise_sigma);
          p.detection_prob = r.number("detection_prob", p.detection_prob);
          require_fov(p.fov, r.path_of("fov"));
          require_range(p.max_range, r.path_of("max_range"));
          require_sigma(p.range_noise_sigma, r.path_of("range_noise_sigma"));
          require_sigma(p.rate_noise_sigma, r.path_of("rate_noise_sigma"));
          require_prob(p.detection_prob, r.path_of("detection_prob"));
        } else if constexpr (std::is_same_v<T, sensors::GpsParams>) {
          p.pos_noise_sigma = r.number("pos_noise_sigma", p.pos_noise_sigma);
          require_sigma(p.pos_noise_sigma, r.path_of("pos_noise_sigma"));
        } else if constexpr (std::is_same_v<T, sensors::ImuParams>) {
          p.accel_noise_sigma = r.number("accel_noise_sigma", p.accel_noise_sigma);
          p.gyro_noise_sigma = r.number("gyro_noise_sigma", p.gyro_noise_sigma);
          p.accel_bias = r.number("accel_bias", p.accel_bias);
          p.gyro_bias = r.number("gyro_bias", p.gyro_bias);
          require_sigma(p.accel_noise_sigma, r.path_of("accel_noise_sigma"));
          require_sigma(p.gyro_noise_sigma, r.path_of("gyro_noise_sigma"));
        } else {
          p.max_range = r.number("max_range", p.max_range);
          p.beam_width = r.number("beam_width", p.beam_width);
          require_range(p.max_range, r.path_of("max_range"));
          require_fov(p.beam_width, r.path_of("beam_width"));
        }
      },
      params);
  r.finish();
  return params;
}

sensors::SensorConfig read_sensor(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  sensors::SensorConfig s;
  s.id = r.string("id");
  require(!s.id.empty(), r.path_of("id"), "must be non-empty");
  require(s.id != sensors::kGroundTruthSource, r.path_of("id"), "'ground_truth' is a reserved source id");
  try {
    s.type = sensors::sensor_type_from(r.string("type"));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(r.path_of("type"), e.what());
  }
  if (const json* m = r.optional("mount")) s.mount = read_pose(*m, r.path_of("mount"));
  s.rate_divisor = static_cast<int>(r.integer("rate_divisor", 1));
  require(s.rate_divisor >= 1, r.path_of("rate_divisor"), "must be >= 1");
  s.params = read_params(s.type, r.optional("params"), r.path_of("params"));
  r.finish();
  return s;
}

faults::FaultSpec read_fault(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  faults::FaultSpec f;
  f.target = r.string("target");
  require(!f.target.empty(), r.path_of("target"), "must be non-empty");
  try {
    f.kind = faults::fault_kind_from(r.string("kind"));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(r.path_of("kind"), e.what());
  }
  const json& window = r.required("window");
  if (!window.is_array() || window.size() != 2) throw ValidationError(r.path_of("window"), "expected [t_start, t_end]");
  f.t_start = as_finite(window[0], index_path(r.path_of("window"), 0));
  f.t_end = as_finite(window[1], index_path(r.path_of("window"), 1));
  require(f.t_start >= 0.0 && f.t_start < f.t_end, r.path_of("window"), "requires 0 <= t_start < t_end");

  static const json kEmpty = json::object();
  const json* pj = r.optional("params");
  ObjectReader p(pj ? *pj : kEmpty, r.path_of("params"));
  switch (f.kind) {
    case faults::FaultKind::bias: f.params.value = p.number("value"); break;
    case faults::FaultKind::noise_scale:
      f.params.factor = p.number("factor");
      require(f.params.factor >= 0.0, p.path_of("factor"), "must be >= 0");
      break;
    case faults::FaultKind::dead_sector:
      f.params.from = p.number("from");
      f.params.to = p.number("to");
      require(f.params.from < f.params.to, p.path(), "requires from < to");
      break;
    case faults::FaultKind::delay:
      f.params.ticks = static_cast<int>(as_integer(p.required("ticks"), p.path_of("ticks")));
      require(f.params.ticks >= 1, p.path_of("ticks"), "must be >= 1");
      break;
    case faults::FaultKind::offset:
      f.params.accel = p.number("accel", 0.0);
      f.params.steer = p.number("steer", 0.0);
      break;
    default: break;
  }
  p.finish();
  r.finish();
  return f;
}

AsciiGrid read_ascii(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  if (r.optional("file")) {
    throw ValidationError(r.path_of("file"), "file references are only resolved when loading from a file");
  }
  AsciiGrid g;
  const auto& rows = as_array(r.required("rows"), r.path_of("rows"));
  for (std::size_t i = 0; i < rows.size(); ++i) g.rows.push_back(as_string(rows[i], index_path(r.path_of("rows"), i)));
  if (const json* o = r.optional("origin")) g.origin = as_vec2(*o, r.path_of("origin"));
  r.finish();
  return g;
}

std::string join_rows(const std::vector<std::string>& rows) {
  std::string text;
  for (const auto& row : rows) {
    text += row;
    text += '\n';
  }
  return text;
}

bool is_pose_object(const json& j) {
  if (!j.is_object() || j.size() != 3) return false;
  for (const char* k : {"x", "y", "heading"}) {
    const auto it = j.find(k);
    if (it == j.end() || !it->is_number()) return false;
  }
  return true;
}

bool type_compatible(const json& target, const json& value) {
  if (target.is_number()) return value.is_number();
  if (target.is_boolean()) return value.is_boolean();
  if (is_pose_object(target)) return is_pose_object(value);
  return false;
}

void validate_sweep(const ScenarioSpec& spec) {
  if (spec.sweep.empty()) return;
  ScenarioSpec base = spec;
  base.sweep.clear();
  const json doc = to_json(base);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < spec.sweep.size(); ++i) {
    const auto& var = spec.sweep[i];
    const std::string path = index_path("sweep", i);
    require(!var.path.empty(), path + ".path", "must be non-empty");
    require(seen.insert(var.path).second, path + ".path", "duplicate sweep path '" + var.path + "'");
    const std::string head = var.path.substr(0, var.path.find('.'));
    require(head != "seed" && head != "format_version" && head != "sweep", path + ".path",
            "'" + head + "' cannot be swept");
    const json* target = find_path(doc, var.path);
    require(target != nullptr, path + ".path", "'" + var.path + "' does not name a declared parameter");
    require(target->is_number() || target->is_boolean() || is_pose_object(*target), path + ".path",
            "'" + var.path + "' is not a scalar or pose parameter");
    require(!var.values.empty(), path + ".values", "must be non-empty");
    for (std::size_t k = 0; k < var.values.size(); ++k) {
      require(type_compatible(*target, var.values[k]), index_path(path + ".values", k),
              "value type does not match '" + var.path + "'");
    }
  }
}

void validate_spec(ScenarioSpec& spec) {
  require(!spec.name.empty(), "name", "must be non-empty");
  require(spec.dt > 0.0, "dt", "must be > 0");
  require(spec.termination.max_time > 0.0, "termination.max_time", "must be > 0");
  if (spec.termination.goal) {
    require(spec.termination.goal->radius > 0.0, "termination.goal.radius", "must be > 0");
  }

  std::set<std::string> sensor_ids;
  for (std::size_t i = 0; i < spec.sensors.size(); ++i) {
    require(sensor_ids.insert(spec.sensors[i].id).second, index_path("sensors", i) + ".id",
            "duplicate sensor id '" + spec.sensors[i].id + "'");
  }
  for (const auto& [source, channels] : spec.routing) {
    const std::string path = join_path("routing", source);
    require(source == sensors::kGroundTruthSource || sensor_ids.count(source), path,
            "unknown sensor id '" + source + "'");
    std::set<std::string> uniq;
    for (const auto& ch : channels) {
      require(!ch.empty(), path, "channel ids must be non-empty");
      require(uniq.insert(ch).second, path, "duplicate channel id '" + ch + "'");
    }
  }

  for (std::size_t i = 0; i < spec.faults.size(); ++i) {
    const auto& f = spec.faults[i];
    const std::string path = index_path("faults", i);
    if (faults::is_channel_fault(f.kind)) {
      require(!sensor_ids.count(f.target), path + ".target",
              std::string(faults::to_string(f.kind)) + " targets a channel, but '" + f.target + "' is a sensor");
      continue;
    }
    const auto it = std::find_if(spec.sensors.begin(), spec.sensors.end(),
                                 [&f](const auto& s) { return s.id == f.target; });
    require(it != spec.sensors.end(), path + ".target", "unknown sensor id '" + f.target + "'");
    if (f.kind == faults::FaultKind::dead_sector) {
      require(it->type == sensors::SensorType::lidar || it->type == sensors::SensorType::camera ||
                  it->type == sensors::SensorType::radar,
              path + ".kind", "dead_sector applies to lidar, camera and radar only");
      const double half = 0.5 * sensors::field_of_view(*it);
      require(f.params.from >= -half - 1e-12 && f.params.to <= half + 1e-12, path + ".params",
              "dead sector must lie within the sensor field of view");
    }
  }

  const auto& a = spec.acceptance;
  if (a.max_safety_triggers) require(*a.max_safety_triggers >= 0, "acceptance.max_safety_triggers", "must be >= 0");

  resolve_world(spec);
  validate_sweep(spec);
}

// ---------------------------------------------------------------------------
// writing

json pose_json(const Pose2D& p) { return {{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

json vehicle_json(const world::VehicleParams& v) {
  return {{"wheelbase", v.wheelbase},
          {"steer_max", v.steer_max},
          {"capture_radius", v.capture_radius},
          {"accel_limit", v.accel_limit}};
}

json state_json(const world::ActorState& s) {
  return {{"pose", pose_json(s.pose)}, {"speed", s.speed}, {"steer", s.steer}};
}

json footprint_json(const world::Footprint& f) { return {{"length", f.length}, {"width", f.width}}; }

json params_json(const sensors::SensorParams& params) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, sensors::LidarParams>) {
          return {{"beams", p.beams}, {"fov", p.fov}, {"max_range", p.max_range},
                  {"range_noise_sigma", p.range_noise_sigma}};
        } else if constexpr (std::is_same_v<T, sensors::CameraParams>) {
          return {{"fov", p.fov}, {"max_range", p.max_range}, {"base_detection_prob", p.base_detection_prob}};
        } else if constexpr (std::is_same_v<T, sensors::RadarParams>) {
          return {{"fov", p.fov},
                  {"max_range", p.max_range},
                  {"range_noise_sigma", p.range_noise_sigma},
                  {"rate_noise_sigma", p.rate_noise_sigma},
                  {"detection_prob", p.detection_prob}};
        } else if constexpr (std::is_same_v<T, sensors::GpsParams>) {
          return {{"pos_noise_sigma", p.pos_noise_sigma}};
        } else if constexpr (std::is_same_v<T, sensors::ImuParams>) {
          return {{"accel_noise_sigma", p.accel_noise_sigma},
                  {"gyro_noise_sigma", p.gyro_noise_sigma},
                  {"accel_bias", p.accel_bias},
                  {"gyro_bias", p.gyro_bias}};
        } else {
          return {{"max_range", p.max_range}, {"beam_width", p.beam_width}};
        }
      },
      params);
}

json fault_json(const faults::FaultSpec& f) {
  json params = json::object();
  switch (f.kind) {
    case faults::FaultKind::bias: params["value"] = f.params.value; break;
    case faults::FaultKind::noise_scale: params["factor"] = f.params.factor; break;
    case faults::FaultKind::dead_sector:
      params["from"] = f.params.from;
      params["to"] = f.params.to;
      break;
    case faults::FaultKind::delay: params["ticks"] = f.params.ticks; break;
    case faults::FaultKind::offset:
      params["accel"] = f.params.accel;
      params["steer"] = f.params.steer;
      break;
    default: break;
  }
  return {{"target", f.target},
          {"kind", faults::to_string(f.kind)},
          {"window", json::array({f.t_start, f.t_end})},
          {"params", std::move(params)}};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const auto end = dot == std::string_view::npos ? path.size() : dot;
    parts.emplace_back(path.substr(start, end - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

template <typename Json>
Json* find_path_impl(Json& doc, std::string_view path) {
  Json* cur = &doc;
  for (const auto& seg : split_path(path)) {
    if (seg.empty()) return nullptr;
    if (cur->is_object()) {
      const auto it = cur->find(seg);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else if (cur->is_array()) {
      Json* next = nullptr;
      for (auto& el : *cur) {
        if (el.is_object()) {
          const auto id = el.find("id");
          if (id != el.end() && id->is_string() && id->template get<std::string>() == seg) {
            next = &el;
            break;
          }
        }
      }
      if (!next && std::all_of(seg.begin(), seg.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        const std::size_t idx = std::stoul(seg);
        if (idx < cur->size()) next = &(*cur)[idx];
      }
      if (!next) return nullptr;
      cur = next;
    } else {
      return nullptr;
    }
  }
  return cur;
}

}  // namespace

const json* find_path(const json& doc, std::string_view path) { return find_path_impl(doc, path); }
json* find_path(json& doc, std::string_view path) { return find_path_impl(doc, path); }

ScenarioSpec from_json(const json& doc) {
  ObjectReader r(doc, "");
  const json& version = r.required("format_version");
  if (!version.is_number_integer() || version.get<std::int64_t>() != kFormatVersion) {
    throw ValidationError("format_version", "unsupported format version (expected " + std::to_string(kFormatVersion) + ")");
  }

  ScenarioSpec spec;
  spec.name = r.string("name");
  spec.description = r.string("description", "");
  spec.dt = r.number("dt", kDefaultDt);
  if (const json* s = r.optional("seed")) spec.seed = as_unsigned(*s, "seed");

  std::optional<Aabb> bounds;
  if (const json* w = r.optional("world")) {
    ObjectReader wr(*w, "world");
    if (const json* b = wr.optional("bounds")) {
      ObjectReader br(*b, wr.path_of("bounds"));
      bounds = Aabb{as_vec2(br.required("min"), br.path_of("min")), as_vec2(br.required("max"), br.path_of("max"))};
      br.finish();
    }
    if (const json* e = wr.optional("environment")) {
      ObjectReader er(*e, wr.path_of("environment"));
      auto& env = spec.world.environment;
      env.friction = er.number("friction", env.friction);
      env.visibility = er.number("visibility", env.visibility);
      env.light = er.number("light", env.light);
      er.finish();
    }
    if (const json* o = wr.optional("obstacles")) {
      const auto& arr = as_array(*o, wr.path_of("obstacles"));
      for (std::size_t i = 0; i < arr.size(); ++i) spec.world.obstacles.push_back(read_obstacle(arr[i], index_path(wr.path_of("obstacles"), i)));
    }
    if (const json* l = wr.optional("lanes")) {
      const auto& arr = as_array(*l, wr.path_of("lanes"));
      for (std::size_t i = 0; i < arr.size(); ++i) spec.world.lanes.push_back(read_lane(arr[i], index_path(wr.path_of("lanes"), i)));
    }
    if (const json* a = wr.optional("ascii")) spec.ascii = read_ascii(*a, wr.path_of("ascii"));
    wr.finish();
  }
  if (bounds) {
    spec.world.bounds = *bounds;
  } else if (spec.ascii) {
    spec.world.bounds = parse_ascii_world(join_rows(spec.ascii->rows), spec.ascii->origin).bounds;
  } else {
    spec.world.bounds = {{-kDefaultHalfExtent, -kDefaultHalfExtent}, {kDefaultHalfExtent, kDefaultHalfExtent}};
  }

  spec.world.actors.push_back(read_ego(r.required("ego")));
  if (const json* a = r.optional("actors")) {
    const auto& arr = as_array(*a, "actors");
    std::set<std::string> ids{spec.world.actors.front().id};
    for (std::size_t i = 0; i < arr.size(); ++i) {
      auto actor = read_actor(arr[i], index_path("actors", i));
      require(ids.insert(actor.id).second, index_path("actors", i) + ".id", "duplicate actor id '" + actor.id + "'");
      spec.world.actors.push_back(std::move(actor));
    }
  }

  if (const json* s = r.optional("sensors")) {
    const auto& arr = as_array(*s, "sensors");
    for (std::size_t i = 0; i < arr.size(); ++i) spec.sensors.push_back(read_sensor(arr[i], index_path("sensors", i)));
  }

  if (const json* rt = r.optional("routing")) {
    if (!rt->is_object()) throw ValidationError("routing", "expected object");
    for (const auto& item : rt->items()) {
      const std::string path = join_path("routing", item.key());
      const auto& arr = as_array(item.value(), path);
      auto& channels = spec.routing[item.key()];
      for (std::size_t i = 0; i < arr.size(); ++i) channels.push_back(as_string(arr[i], index_path(path, i)));
      std::sort(channels.begin(), channels.end());
    }
  } else {
    spec.routing[std::string(sensors::kGroundTruthSource)] = {"safety"};
  }

  if (const json* f = r.optional("faults")) {
    const auto& arr = as_array(*f, "faults");
    for (std::size_t i = 0; i < arr.size(); ++i) spec.faults.push_back(read_fault(arr[i], index_path("faults", i)));
  }

  if (const json* s = r.optional("sweep")) {
    const auto& arr = as_array(*s, "sweep");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader sr(arr[i], index_path("sweep", i));
      SweepVariable var;
      var.path = sr.string("path");
      const auto& values = as_array(sr.required("values"), sr.path_of("values"));
      var.values.assign(values.begin(), values.end());
      sr.finish();
      spec.sweep.push_back(std::move(var));
    }
  }

  if (const json* t = r.optional("termination")) {
    ObjectReader tr(*t, "termination");
    auto& term = spec.termination;
    term.max_time = tr.number("max_time", term.max_time);
    term.stop_on_collision = tr.boolean("stop_on_collision", term.stop_on_collision);
    if (const json* g = tr.optional("goal"); g && !g->is_null()) {
      ObjectReader gr(*g, tr.path_of("goal"));
      Goal goal;
      goal.pose = read_pose(gr.required("pose"), gr.path_of("pose"));
      goal.radius = gr.number("radius", goal.radius);
      gr.finish();
      term.goal = goal;
    }
    tr.finish();
  }

  if (const json* a = r.optional("acceptance")) {
    ObjectReader ar(*a, "acceptance");
    auto& acc = spec.acceptance;
    acc.no_collisions = ar.boolean("no_collisions", false);
    acc.require_goal = ar.boolean("require_goal", false);
    if (const json* m = ar.optional("max_safety_triggers"); m && !m->is_null()) {
      acc.max_safety_triggers = static_cast<int>(as_integer(*m, ar.path_of("max_safety_triggers")));
    }
    if (const json* m = ar.optional("min_clearance"); m && !m->is_null()) {
      acc.min_clearance = as_finite(*m, ar.path_of("min_clearance"));
    }
    ar.finish();
  }
  r.finish();

  validate_spec(spec);
  return spec;
}

ScenarioSpec parse_scenario(std::string_view text) { return from_json(parse_strict(text)); }

ScenarioSpec load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  json doc = parse_strict(buf.str());
  if (json* ascii = find_path(doc, "world.ascii"); ascii && ascii->is_object() && ascii->contains("file")) {
    const std::string file = as_string((*ascii)["file"], "world.ascii.file");
    const auto grid_path = path.parent_path() / file;
    std::ifstream gin(grid_path, std::ios::binary);
    if (!gin) throw ValidationError("world.ascii.file", "cannot open '" + grid_path.string() + "'");
    json rows = json::array();
    std::string line;
    while (std::getline(gin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      rows.push_back(line);
    }
    while (!rows.empty() && rows.back().get_ref<const std::string&>().empty()) rows.erase(rows.size() - 1);
    ascii->erase("file");
    (*ascii)["rows"] = std::move(rows);
  }
  return from_json(doc);
}

json to_json(const ScenarioSpec& spec) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["name"] = spec.name;
  doc["description"] = spec.description;
  doc["dt"] = spec.dt;
  doc["seed"] = spec.seed;

  json w;
  w["bounds"] = {{"min", vec2_json(spec.world.bounds.min)}, {"max", vec2_json(spec.world.bounds.max)}};
  const auto& env = spec.world.environment;
  w["environment"] = {{"friction", env.friction}, {"visibility", env.visibility}, {"light", env.light}};
  w["obstacles"] = json::array();
  for (const auto& o : spec.world.obstacles) {
    json oj{{"id", o.id}, {"kind", world::to_string(o.kind)}, {"mapped", o.mapped}};
    if (const auto* c = std::get_if<Circle>(&o.shape)) {
      oj["circle"] = {{"center", vec2_json(c->center)}, {"radius", c->radius}};
    } else {
      json verts = json::array();
      for (Vec2 v : std::get<Polygon>(o.shape).vertices) verts.push_back(vec2_json(v));
      oj["polygon"] = std::move(verts);
    }
    w["obstacles"].push_back(std::move(oj));
  }
  w["lanes"] = json::array();
  for (const auto& l : spec.world.lanes) {
    json pts = json::array();
    for (Vec2 v : l.centerline) pts.push_back(vec2_json(v));
    w["lanes"].push_back(
        {{"id", l.id}, {"centerline", std::move(pts)}, {"width", l.width}, {"speed_limit", l.speed_limit}, {"successors", l.successors}});
  }
  if (spec.ascii) w["ascii"] = {{"rows", spec.ascii->rows}, {"origin", vec2_json(spec.ascii->origin)}};
  doc["world"] = std::move(w);

  doc["actors"] = json::array();
  for (const auto& a : spec.world.actors) {
    json aj{{"id", a.id},
            {"state", state_json(a.state)},
            {"footprint", footprint_json(a.footprint)},
            {"vehicle", vehicle_json(a.vehicle)}};
    if (a.kind == world::ActorKind::ego) {
      doc["ego"] = std::move(aj);
      continue;
    }
    aj["kind"] = world::to_string(a.kind);
    json script = json::array();
    for (const auto& wp : a.script) script.push_back({{"x", wp.x}, {"y", wp.y}, {"speed", wp.speed}});
    aj["script"] = std::move(script);
    doc["actors"].push_back(std::move(aj));
  }

  doc["sensors"] = json::array();
  for (const auto& s : spec.sensors) {
    doc["sensors"].push_back({{"id", s.id},
                              {"type", sensors::to_string(s.type)},
                              {"mount", pose_json(s.mount)},
                              {"rate_divisor", s.rate_divisor},
                              {"params", params_json(s.params)}});
  }
  doc["routing"] = json::object();
  for (const auto& [source, channels] : spec.routing) doc["routing"][source] = channels;
  doc["faults"] = json::array();
  for (const auto& f : spec.faults) doc["faults"].push_back(fault_json(f));
  doc["sweep"] = json::array();
  for (const auto& v : spec.sweep) doc["sweep"].push_back({{"path", v.path}, {"values", v.values}});

  const auto& t = spec.termination;
  doc["termination"] = {{"max_time", t.max_time}, {"stop_on_collision", t.stop_on_collision}};
  doc["termination"]["goal"] =
      t.goal ? json{{"pose", pose_json(t.goal->pose)}, {"radius", t.goal->radius}} : json(nullptr);

  const auto& a = spec.acceptance;
  doc["acceptance"] = {{"no_collisions", a.no_collisions}, {"require_goal", a.require_goal}};
  doc["acceptance"]["max_safety_triggers"] = a.max_safety_triggers ? json(*a.max_safety_triggers) : json(nullptr);
  doc["acceptance"]["min_clearance"] = a.min_clearance ? json(*a.min_clearance) : json(nullptr);
  return doc;
}

std::string serialize_scenario(const ScenarioSpec& spec) { return to_json(spec).dump(2) + "\n"; }

world::World parse_ascii_world(std::string_view text, Vec2 origin) {
  std::vector<std::string> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string row(text.substr(start, end - start));
    if (!row.empty() && row.back() == '\r') row.pop_back();
    rows.push_back(std::move(row));
    start = end + 1;
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty() || rows.front().empty()) throw ParseError(1, 1, "empty ASCII world");

  const std::size_t width = rows.front().size();
  const std::size_t height = rows.size();
  for (std::size_t r = 0; r < height; ++r) {
    if (rows[r].size() != width) {
      throw ParseError(static_cast<int>(r + 1), static_cast<int>(std::min(rows[r].size(), width) + 1),
                       "ragged row: expected " + std::to_string(width) + " columns, got " + std::to_string(rows[r].size()));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const char ch = rows[r][c];
      if (ch != '#' && ch != '.' && ch != '-' && ch != '|') {
        throw ParseError(static_cast<int>(r + 1), static_cast<int>(c + 1), std::string("unknown character '") + ch + "'");
      }
    }
  }

  world::World w;
  w.bounds = {origin, origin + Vec2{static_cast<double>(width), static_cast<double>(height)}};
  const auto top_of_row = [&](std::size_t r) { return origin.y + static_cast<double>(height - r); };

  // Greedy maximal rectangles: grow right, then down.
  std::vector<std::vector<bool>> used(height, std::vector<bool>(width, false));
  const auto free_block = [&](std::size_t r, std::size_t c) { return rows[r][c] == '#' && !used[r][c]; };
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (!free_block(r, c)) continue;
      std::size_t w_cells = 1;
      while (c + w_cells < width && free_block(r, c + w_cells)) ++w_cells;
      std::size_t h_cells = 1;
      while (r + h_cells < height) {
        bool full = true;
        for (std::size_t k = 0; k < w_cells && full; ++k) full = free_block(r + h_cells, c + k);
        if (!full) break;
        ++h_cells;
      }
      for (std::size_t rr = r; rr < r + h_cells; ++rr) {
        for (std::size_t cc = c; cc < c + w_cells; ++cc) used[rr][cc] = true;
      }
      const double x0 = origin.x + static_cast<double>(c);
      const double y1 = top_of_row(r);
      world::StaticObstacle o;
      o.id = "ascii_block_" + std::to_string(w.obstacles.size());
      o.kind = world::ObstacleKind::building;
      o.shape = axis_rectangle({x0, y1 - static_cast<double>(h_cells)}, {x0 + static_cast<double>(w_cells), y1});
      w.obstacles.push_back(std::move(o));
    }
  }

  const auto add_lane = [&w](Vec2 a, Vec2 b) {
    world::Lane lane;
    lane.id = "ascii_lane_" + std::to_string(w.lanes.size());
    lane.centerline = {a, b};
    lane.width = kAsciiLaneWidth;
    w.lanes.push_back(std::move(lane));
  };
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width;) {
      if (rows[r][c] != '-') {
        ++c;
        continue;
      }
      std::size_t end = c;
      while (end < width && rows[r][end] == '-') ++end;
      const double y = top_of_row(r) - 0.5;
      add_lane({origin.x + static_cast<double>(c), y}, {origin.x + static_cast<double>(end), y});
      c = end;
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t r = 0; r < height;) {
      if (rows[r][c] != '|') {
        ++r;
        continue;
      }
      std::size_t end = r;
      while (end < height && rows[end][c] == '|') ++end;
      const double x = origin.x + static_cast<double>(c) + 0.5;
      add_lane({x, top_of_row(end - 1) - 1.0}, {x, top_of_row(r)});
      r = end;
    }
  }
  return w;
}

world::World resolve_world(const ScenarioSpec& spec) {
  world::World w = spec.world;
  if (spec.ascii) {
    const auto grid = parse_ascii_world(join_rows(spec.ascii->rows), spec.ascii->origin);
    w.obstacles.insert(w.obstacles.end(), grid.obstacles.begin(), grid.obstacles.end());
    w.lanes.insert(w.lanes.end(), grid.lanes.begin(), grid.lanes.end());
  }
  world::validate(w);
  return w;
}

std::size_t sweep_size(const ScenarioSpec& spec) {
  std::size_t n = 1;
  for (const auto& v : spec.sweep) {
    if (v.values.empty()) return 0;
    if (n > SIZE_MAX / v.values.size()) return SIZE_MAX;
    n *= v.values.size();
  }
  return n;
}

SweepPlan expand_sweep(const ScenarioSpec& spec, std::size_t cap) {
  const std::size_t total = sweep_size(spec);
  if (total > cap) {
    throw ValidationError("sweep", "sweep expands to " + (total == SIZE_MAX ? std::string("more than 2^64") : std::to_string(total)) +
                                       " runs, above the cap of " + std::to_string(cap));
  }
  SweepPlan plan;
  if (spec.sweep.empty()) {
    plan.runs.push_back({0, spec});
    return plan;
  }

  ScenarioSpec base = spec;
  base.sweep.clear();
  const json base_doc = to_json(base);
  plan.runs.reserve(total);
  std::vector<std::size_t> digits(spec.sweep.size(), 0);
  for (std::size_t run = 0; run < total; ++run) {
    std::size_t rem = run;
    for (std::size_t i = spec.sweep.size(); i-- > 0;) {
      digits[i] = rem % spec.sweep[i].values.size();
      rem /= spec.sweep[i].values.size();
    }
    json doc = base_doc;
    for (std::size_t i = 0; i < spec.sweep.size(); ++i) {
      *find_path(doc, spec.sweep[i].path) = spec.sweep[i].values[digits[i]];
    }
    doc["seed"] = derive_run_seed(spec.seed, run);
    plan.runs.push_back({run, from_json(doc)});
  }
  return plan;
}

ScenarioSpec apply_overrides(const ScenarioSpec& spec,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  json doc = to_json(spec);
  for (const auto& [path, text] : overrides) {
    json* target = find_path(doc, path);
    if (!target) throw ValidationError(path, "override path does not name a declared parameter");
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    *target = std::move(value);
  }
  return from_json(doc);
}

std::vector<std::string> grammar_keys() {
  return {
      "format_version", "name", "description", "dt", "seed",
      "world", "world.bounds", "world.bounds.min", "world.bounds.max",
      "world.environment", "world.environment.friction", "world.environment.visibility", "world.environment.light",
      "world.obstacles", "world.obstacles.id", "world.obstacles.kind", "world.obstacles.mapped",
      "world.obstacles.circle", "world.obstacles.circle.center", "world.obstacles.circle.radius",
      "world.obstacles.polygon",
      "world.lanes", "world.lanes.id", "world.lanes.centerline", "world.lanes.width", "world.lanes.speed_limit",
      "world.lanes.successors",
      "world.ascii", "world.ascii.rows", "world.ascii.origin", "world.ascii.file",
      "ego", "ego.id", "ego.state", "ego.state.pose", "ego.state.pose.x", "ego.state.pose.y",
      "ego.state.pose.heading", "ego.state.speed", "ego.state.steer", "ego.footprint", "ego.footprint.length",
      "ego.footprint.width", "ego.vehicle", "ego.vehicle.wheelbase", "ego.vehicle.steer_max",
      "ego.vehicle.capture_radius", "ego.vehicle.accel_limit",
      "actors", "actors.id", "actors.kind", "actors.state", "actors.state.pose", "actors.state.pose.x",
      "actors.state.pose.y", "actors.state.pose.heading", "actors.state.speed", "actors.state.steer",
      "actors.footprint", "actors.footprint.length", "actors.footprint.width", "actors.vehicle",
      "actors.vehicle.wheelbase", "actors.vehicle.steer_max", "actors.vehicle.capture_radius",
      "actors.vehicle.accel_limit", "actors.script", "actors.script.x", "actors.script.y", "actors.script.speed",
      "sensors", "sensors.id", "sensors.type", "sensors.mount", "sensors.mount.x", "sensors.mount.y",
      "sensors.mount.heading", "sensors.rate_divisor", "sensors.params", "sensors.params.beams",
      "sensors.params.fov", "sensors.params.max_range", "sensors.params.range_noise_sigma",
      "sensors.params.base_detection_prob", "sensors.params.rate_noise_sigma", "sensors.params.detection_prob",
      "sensors.params.pos_noise_sigma", "sensors.params.accel_noise_sigma", "sensors.params.gyro_noise_sigma",
      "sensors.params.accel_bias", "sensors.params.gyro_bias", "sensors.params.beam_width",
      "routing",
      "faults", "faults.target", "faults.kind", "faults.window", "faults.params", "faults.params.value",
      "faults.params.factor", "faults.params.from", "faults.params.to", "faults.params.ticks",
      "faults.params.accel", "faults.params.steer",
      "sweep", "sweep.path", "sweep.values",
      "termination", "termination.max_time", "termination.stop_on_collision", "termination.goal",
      "termination.goal.pose", "termination.goal.pose.x", "termination.goal.pose.y", "termination.goal.pose.heading",
      "termination.goal.radius",
      "acceptance", "acceptance.no_collisions", "acceptance.require_goal", "acceptance.max_safety_triggers",
      "acceptance.min_clearance",
  };
}

json to_json(const SweepPlan& plan) {
  json runs = json::array();
  for (const auto& m : plan.runs) {
    runs.push_back({{"run_id", m.run_id}, {"seed", m.spec.seed}, {"scenario", to_json(m.spec)}});
  }
  return runs;
}

}  // namespace adeye::scenario
