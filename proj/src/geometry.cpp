#include "adeye/geometry.hpp"

#include <algorithm>
#include <limits>

namespace adeye {

double normalize_angle(double angle) {
  double a = std::fmod(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Pose2D compose(const Pose2D& base, const Pose2D& local) {
  const Vec2 p = base.position() + rotate({local.x, local.y}, base.heading);
  return {p.x, p.y, normalize_angle(base.heading + local.heading)};
}

Vec2 to_local(const Pose2D& base, Vec2 world_point) {
  return rotate(world_point - base.position(), -base.heading);
}

double signed_area(std::span<const Vec2> v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

bool is_convex_ccw(std::span<const Vec2> v) {
  if (v.size() < 3 || !(signed_area(v) > 0.0)) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i], b = v[(i + 1) % v.size()], c = v[(i + 2) % v.size()];
    if (cross(b - a, c - b) < 0.0) return false;
  }
  return true;
}

Polygon oriented_rectangle(const Pose2D& center, double length, double width) {
  const double hl = 0.5 * length, hw = 0.5 * width;
  Polygon p;
  for (Vec2 corner : {Vec2{hl, -hw}, Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}}) {
    p.vertices.push_back(center.position() + rotate(corner, center.heading));
  }
  return p;
}

Polygon axis_rectangle(Vec2 min, Vec2 max) {
  return Polygon{{min, {max.x, min.y}, max, {min.x, max.y}}};
}

Aabb bounding_box(const Shape& shape) {
  if (const auto* c = std::get_if<Circle>(&shape)) {
    return {{c->center.x - c->radius, c->center.y - c->radius}, {c->center.x + c->radius, c->center.y + c->radius}};
  }
  const auto& v = std::get<Polygon>(shape).vertices;
  Aabb box{v.front(), v.front()};
  for (Vec2 p : v) {
    box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y)};
    box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y)};
  }
  return box;
}

namespace {

bool polygon_contains(const std::vector<Vec2>& v, Vec2 p) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (cross(v[(i + 1) % v.size()] - v[i], p - v[i]) < 0.0) return false;
  }
  return true;
}

// Separating-axis test for two convex polygons (closed sets).
bool polygons_overlap(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  auto separated_on_edges_of = [](const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Vec2 e = p[(i + 1) % p.size()] - p[i];
      const Vec2 axis{e.y, -e.x};  // outward normal for CCW
      const double limit = dot(axis, p[i]);
      bool all_outside = true;
      for (Vec2 v : q) {
        if (dot(axis, v) <= limit) {
          all_outside = false;
          break;
        }
      }
      if (all_outside) return true;
    }
    return false;
  };
  return !separated_on_edges_of(a, b) && !separated_on_edges_of(b, a);
}

double polygon_boundary_distance(const std::vector<Vec2>& v, Vec2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) d = std::min(d, point_segment_distance(p, v[i], v[(i + 1) % v.size()]));
  return d;
}

}  // namespace

bool contains(const Shape& shape, Vec2 p) {
  if (const auto* c = std::get_if<Circle>(&shape)) return distance(p, c->center) <= c->radius;
  return polygon_contains(std::get<Polygon>(shape).vertices, p);
}

double perimeter(const Shape& shape) {
  if (const auto* c = std::get_if<Circle>(&shape)) return 2.0 * kPi * c->radius;
  const auto& v = std::get<Polygon>(shape).vertices;
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += distance(v[i], v[(i + 1) % v.size()]);
  return total;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return distance(p, a + ab * t);
}

double segment_segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  const double d1 = cross(a1 - a0, b0 - a0), d2 = cross(a1 - a0, b1 - a0);
  const double d3 = cross(b1 - b0, a0 - b0), d4 = cross(b1 - b0, a1 - b0);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return 0.0;
  return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                   point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

double distance_to(const Shape& shape, Vec2 p) {
  if (const auto* c = std::get_if<Circle>(&shape)) return std::max(0.0, distance(p, c->center) - c->radius);
  const auto& v = std::get<Polygon>(shape).vertices;
  return polygon_contains(v, p) ? 0.0 : polygon_boundary_distance(v, p);
}

bool overlaps(const Shape& a, const Shape& b) {
  if (const auto* ca = std::get_if<Circle>(&a)) {
    if (const auto* cb = std::get_if<Circle>(&b)) return distance(ca->center, cb->center) <= ca->radius + cb->radius;
    return distance_to(b, ca->center) <= ca->radius;
  }
  if (const auto* cb = std::get_if<Circle>(&b)) return distance_to(a, cb->center) <= cb->radius;
  return polygons_overlap(std::get<Polygon>(a).vertices, std::get<Polygon>(b).vertices);
}

double shape_distance(const Shape& a, const Shape& b) {
  if (overlaps(a, b)) return 0.0;
  if (const auto* ca = std::get_if<Circle>(&a)) {
    if (const auto* cb = std::get_if<Circle>(&b)) return distance(ca->center, cb->center) - ca->radius - cb->radius;
    return distance_to(b, ca->center) - ca->radius;
  }
  if (const auto* cb = std::get_if<Circle>(&b)) return distance_to(a, cb->center) - cb->radius;
  const auto& va = std::get<Polygon>(a).vertices;
  const auto& vb = std::get<Polygon>(b).vertices;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < va.size(); ++i) {
    for (std::size_t j = 0; j < vb.size(); ++j) {
      d = std::min(d, segment_segment_distance(va[i], va[(i + 1) % va.size()], vb[j], vb[(j + 1) % vb.size()]));
    }
  }
  return d;
}

std::optional<double> ray_intersect(const Shape& shape, Vec2 origin, Vec2 dir) {
  if (contains(shape, origin)) return 0.0;
  if (const auto* c = std::get_if<Circle>(&shape)) {
    const Vec2 oc = origin - c->center;
    const double b = dot(oc, dir);
    const double disc = b * b - (dot(oc, oc) - c->radius * c->radius);
    if (disc < 0.0) return std::nullopt;
    const double t = -b - std::sqrt(disc);
    if (t < 0.0) return std::nullopt;
    return t;
  }
  // Slab clipping against each outward half-plane of the convex polygon.
  const auto& v = std::get<Polygon>(shape).vertices;
  double t_enter = 0.0, t_exit = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 e = v[(i + 1) % v.size()] - v[i];
    const Vec2 n{e.y, -e.x};
    const double denom = dot(n, dir);
    const double num = dot(n, v[i] - origin);
    if (denom == 0.0) {
      if (num < 0.0) return std::nullopt;
      continue;
    }
    const double t = num / denom;
    if (denom < 0.0) {
      t_enter = std::max(t_enter, t);
    } else {
      t_exit = std::min(t_exit, t);
    }
    if (t_enter > t_exit) return std::nullopt;
  }
  return t_enter;
}

}  // namespace adeye
