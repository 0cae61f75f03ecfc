#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adeye/geometry.hpp"

using namespace adeye;

namespace {

// Dense boundary samples of a shape (oracle helper).
std::vector<Vec2> boundary_samples(const Shape& s, int per_edge = 400) {
  std::vector<Vec2> out;
  if (const auto* c = std::get_if<Circle>(&s)) {
    for (int i = 0; i < 4 * per_edge; ++i) {
      const double a = 2.0 * kPi * i / (4 * per_edge);
      out.push_back(c->center + Vec2{std::cos(a), std::sin(a)} * c->radius);
    }
    return out;
  }
  const auto& v = std::get<Polygon>(s).vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i], b = v[(i + 1) % v.size()];
    for (int k = 0; k < per_edge; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / per_edge));
  }
  return out;
}

Shape random_shape(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> pos(-10.0, 10.0), size(0.3, 3.0), ang(-kPi, kPi);
  if (gen() % 2) return Circle{{pos(gen), pos(gen)}, size(gen)};
  return oriented_rectangle({pos(gen), pos(gen), ang(gen)}, size(gen), size(gen));
}

}  // namespace

TEST(Geometry, NormalizeAngle) {
  EXPECT_DOUBLE_EQ(normalize_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(normalize_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(normalize_angle(-kPi), kPi);
  EXPECT_NEAR(normalize_angle(3.0 * kPi), kPi, 1e-12);
  EXPECT_NEAR(normalize_angle(-0.5 * kPi - 4.0 * kPi), -0.5 * kPi, 1e-12);
  for (double a = -50.0; a < 50.0; a += 0.37) {
    const double n = normalize_angle(a);
    EXPECT_GT(n, -kPi);
    EXPECT_LE(n, kPi);
    EXPECT_NEAR(std::remainder(n - a, 2.0 * kPi), 0.0, 1e-9);
  }
}

TEST(Geometry, ComposeAndToLocalAreInverse) {
  const Pose2D base{3.0, -2.0, 0.7};
  const Pose2D p = compose(base, {1.5, 0.5, 0.2});
  const Vec2 back = to_local(base, p.position());
  EXPECT_NEAR(back.x, 1.5, 1e-12);
  EXPECT_NEAR(back.y, 0.5, 1e-12);
  EXPECT_NEAR(p.heading, 0.9, 1e-12);
}

TEST(Geometry, RectangleIsConvexCcwWithExpectedArea) {
  const auto r = oriented_rectangle({1.0, 2.0, 0.3}, 4.5, 1.8);
  EXPECT_TRUE(is_convex_ccw(r.vertices));
  EXPECT_NEAR(signed_area(r.vertices), 4.5 * 1.8, 1e-12);
  EXPECT_NEAR(perimeter(Shape{r}), 2.0 * (4.5 + 1.8), 1e-12);
  std::vector<Vec2> cw(r.vertices.rbegin(), r.vertices.rend());
  EXPECT_FALSE(is_convex_ccw(cw));
}

TEST(Geometry, TouchingShapesOverlap) {
  const Shape a = axis_rectangle({0, 0}, {1, 1});
  const Shape b = axis_rectangle({1, 0}, {2, 1});
  EXPECT_TRUE(overlaps(a, b));
  EXPECT_DOUBLE_EQ(shape_distance(a, b), 0.0);
  const Shape c = Circle{{3.0, 0.5}, 1.0};
  EXPECT_TRUE(overlaps(b, c));
  const Shape d = Circle{{3.5, 0.5}, 1.0};
  EXPECT_FALSE(overlaps(b, d));
  EXPECT_NEAR(shape_distance(b, d), 0.5, 1e-12);
}

TEST(Geometry, ShapeDistanceMatchesBoundarySampling) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 300; ++trial) {
    const Shape a = random_shape(gen), b = random_shape(gen);
    const double d = shape_distance(a, b);
    ASSERT_GE(d, 0.0);
    if (overlaps(a, b)) {
      EXPECT_EQ(d, 0.0);
      continue;
    }
    double brute = INFINITY;
    for (const Vec2 p : boundary_samples(a)) brute = std::min(brute, distance_to(b, p));
    // Sampling can only overestimate, by at most the sample spacing.
    EXPECT_LE(d, brute + 1e-9);
    EXPECT_NEAR(d, brute, 0.02);
  }
}

TEST(Geometry, RayIntersectMatchesMarching) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int trial = 0; trial < 300; ++trial) {
    const Shape s = random_shape(gen);
    const Vec2 origin{0.0, 0.0};
    if (contains(s, origin)) continue;
    const double a = ang(gen);
    const Vec2 dir{std::cos(a), std::sin(a)};
    const auto hit = ray_intersect(s, origin, dir);
    std::optional<double> brute;
    for (int k = 0; k <= 30000; ++k) {
      const double t = k * 0.001;
      if (contains(s, origin + dir * t)) {
        brute = t;
        break;
      }
    }
    ASSERT_EQ(hit.has_value(), brute.has_value()) << "trial " << trial;
    if (hit) {
      EXPECT_LE(*hit, *brute + 1e-9);
      EXPECT_GT(*hit, *brute - 0.001 - 1e-9);
    }
  }
}

TEST(Geometry, RayFromInsideHitsAtZero) {
  const Shape c = Circle{{0, 0}, 2.0};
  const auto hit = ray_intersect(c, {0.5, 0.0}, {1.0, 0.0});
  ASSERT_TRUE(hit);
  EXPECT_EQ(*hit, 0.0);
}

TEST(Geometry, SegmentDistances) {
  EXPECT_DOUBLE_EQ(point_segment_distance({0, 1}, {-1, 0}, {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(point_segment_distance({3, 0}, {-1, 0}, {1, 0}), 2.0);
  EXPECT_DOUBLE_EQ(segment_segment_distance({0, 0}, {1, 0}, {0, 2}, {1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(segment_segment_distance({0, -1}, {0, 1}, {-1, 0}, {1, 0}), 0.0);
}
