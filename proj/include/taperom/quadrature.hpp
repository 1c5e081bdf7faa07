#pragma once

#include <array>
#include <vector>

#include "taperom/types.hpp"

namespace taperom {

// Symmetric quadrature rule on a triangle in barycentric coordinates.
// Weights sum to one; multiply by the triangle area.
struct TriRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;
  int size() const { return static_cast<int>(bary.size()); }
};

// Supported orders: 1 (centroid), 3 (edge midpoints, degree 2), 7 (degree 5).
const TriRule& tri_rule(int points);

// Gauss-Legendre rule mapped to [0,1]; weights sum to one.
struct GaussRule {
  std::vector<double> x, w;
  int size() const { return static_cast<int>(x.size()); }
};
const GaussRule& gauss_rule(int n);

// A triangle as three position vectors.
using TriXyz = std::array<Vec3, 3>;

inline Vec3 tri_point(const TriXyz& t, const std::array<double, 3>& b) {
  return b[0] * t[0] + b[1] * t[1] + b[2] * t[2];
}
inline double tri_area(const TriXyz& t) {
  return 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
}
double tri_diameter(const TriXyz& t);

// Midpoint subdivision into four children (corner children then center).
std::array<TriXyz, 4> tri_split(const TriXyz& t);

// Closest point of the (closed) triangle to p.
Vec3 closest_point_on_triangle(const TriXyz& t, const Vec3& p);

}  // namespace taperom
