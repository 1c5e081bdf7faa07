#include "taperom/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace taperom {

const TriRule& tri_rule(int points) {
  static const TriRule r1{{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {1.0}};
  static const TriRule r3{
      {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}},
      {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  static const TriRule r7 = [] {
    TriRule r;
    const double a = 0.0597158717897698, b = 0.4701420641051151;
    const double c = 0.7974269853530873, d = 0.1012865073234563;
    const double wc = 9.0 / 40.0;
    const double wa = 0.1323941527885062;  // (155 + sqrt(15)) / 1200
    const double wb = 0.1259391805448271;  // (155 - sqrt(15)) / 1200
    r.bary = {{1.0 / 3, 1.0 / 3, 1.0 / 3},
              {a, b, b}, {b, a, b}, {b, b, a},
              {c, d, d}, {d, c, d}, {d, d, c}};
    r.weights = {wc, wa, wa, wa, wb, wb, wb};
    return r;
  }();
  switch (points) {
    case 1: return r1;
    case 3: return r3;
    case 7: return r7;
    default:
      throw ConfigError("unsupported triangle quadrature rule: " +
                        std::to_string(points) + " (supported: 1, 3, 7)");
  }
}

namespace {

GaussRule make_gauss(int n) {
  // Newton iteration on Legendre polynomials over [-1,1], then map to [0,1].
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.x[n - 1 - i] = 0.5 * (1.0 + x);
    r.w[n - 1 - i] = 1.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

}  // namespace

const GaussRule& gauss_rule(int n) {
  if (n < 1 || n > 64)
    throw ConfigError("Gauss rule size out of range: " + std::to_string(n));
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss(n)).first;
  return it->second;
}

double tri_diameter(const TriXyz& t) {
  return std::max({(t[1] - t[0]).norm(), (t[2] - t[0]).norm(), (t[2] - t[1]).norm()});
}

std::array<TriXyz, 4> tri_split(const TriXyz& t) {
  Vec3 m01 = 0.5 * (t[0] + t[1]);
  Vec3 m12 = 0.5 * (t[1] + t[2]);
  Vec3 m02 = 0.5 * (t[0] + t[2]);
  return {TriXyz{t[0], m01, m02}, TriXyz{m01, t[1], m12},
          TriXyz{m02, m12, t[2]}, TriXyz{m01, m12, m02}};
}

Vec3 closest_point_on_triangle(const TriXyz& t, const Vec3& p) {
  // Ericson-style region classification.
  Vec3 ab = t[1] - t[0], ac = t[2] - t[0], ap = p - t[0];
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return t[0];
  Vec3 bp = p - t[1];
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return t[1];
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return t[0] + (d1 / (d1 - d3)) * ab;
  Vec3 cp = p - t[2];
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return t[2];
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return t[0] + (d2 / (d2 - d6)) * ac;
  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return t[1] + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (t[2] - t[1]);
  double denom = 1.0 / (va + vb + vc);
  return t[0] + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace taperom
