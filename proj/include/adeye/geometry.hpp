#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace adeye {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kGravity = 9.81;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Maps any finite angle into (-pi, pi].
double normalize_angle(double angle);

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // (-pi, pi]

  Vec2 position() const { return {x, y}; }
  bool operator==(const Pose2D&) const = default;
};

// `local` expressed in the frame of `base`, returned in the parent frame.
Pose2D compose(const Pose2D& base, const Pose2D& local);
// Parent-frame point expressed in the frame of `base`.
Vec2 to_local(const Pose2D& base, Vec2 world_point);

struct Aabb {
  Vec2 min;
  Vec2 max;

  bool contains(Vec2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
  bool intersects(const Aabb& o) const {
    return min.x <= o.max.x && o.min.x <= max.x && min.y <= o.max.y && o.min.y <= max.y;
  }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  bool operator==(const Aabb&) const = default;
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
  bool operator==(const Circle&) const = default;
};

// Convex, counterclockwise, at least three vertices.
struct Polygon {
  std::vector<Vec2> vertices;
  bool operator==(const Polygon&) const = default;
};

using Shape = std::variant<Circle, Polygon>;

double signed_area(std::span<const Vec2> vertices);
bool is_convex_ccw(std::span<const Vec2> vertices);

Polygon oriented_rectangle(const Pose2D& center, double length, double width);
Polygon axis_rectangle(Vec2 min, Vec2 max);

Aabb bounding_box(const Shape& shape);
bool contains(const Shape& shape, Vec2 p);
double perimeter(const Shape& shape);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);
double segment_segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1);

// Distance from a point to the shape's solid interior (0 when inside).
double distance_to(const Shape& shape, Vec2 p);
// Closed-set overlap: touching boundaries count as overlap.
bool overlaps(const Shape& a, const Shape& b);
// Minimum distance between two solid shapes; 0 when they overlap.
double shape_distance(const Shape& a, const Shape& b);

// Parametric distance along a unit-direction ray to the first boundary
// crossing of the solid shape. An origin inside the shape hits at 0.
std::optional<double> ray_intersect(const Shape& shape, Vec2 origin, Vec2 direction);

}  // namespace adeye
