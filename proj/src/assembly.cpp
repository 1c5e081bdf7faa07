#include "taperom/assembly.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace taperom {

void ExcitationSpec::validate() const {
  if (B0 < 0.0) throw ConfigError("excitation.B0 must be >= 0");
  if (!(freq > 0.0)) throw ConfigError("excitation.freq must be > 0");
  if (std::abs(direction.norm() - 1.0) > 1e-9)
    throw ConfigError("excitation.direction must be a unit vector");
}

double b_dot(const ExcitationSpec& e, double t) {
  return 2.0 * kPi * e.freq * e.B0 * std::cos(2.0 * kPi * e.freq * t);
}

void QuadratureConfig::validate() const {
  tri_rule(far_order);
  tri_rule(outer_order);
  if (duffy_order < 2 || duffy_order > 32)
    throw ConfigError("quadrature.duffy_order out of range [2,32]");
  if (near_depth < 0 || near_depth > 8)
    throw ConfigError("quadrature.near_depth out of range [0,8]");
  if (coincident_split < 0 || coincident_split > 4)
    throw ConfigError("quadrature.coincident_split out of range [0,4]");
}

namespace {

// Moments of the weighted kernel over a triangle pair: with effective inner
// point y and combined weight omega (kernel folded in),
//   S0 = sum omega,  Sx = sum omega x,  Sy = sum omega y,  Sxy = sum omega x.y.
// The 3x3 vertex block I[a][b] = integral of k(x,y) (x-va).(y-vb) follows as
//   Sxy - Sx.vb - va.Sy + (va.vb) S0.
struct Moments {
  double s0 = 0.0;
  Vec3 sx = Vec3::Zero();
  Vec3 sy = Vec3::Zero();
  double sxy = 0.0;

  void add(double omega, const Vec3& x, const Vec3& y) {
    s0 += omega;
    sx += omega * x;
    sy += omega * y;
    sxy += omega * x.dot(y);
  }
};

Eigen::Matrix3d block_from_moments(const Moments& m, const TriXyz& ta, const TriXyz& tb) {
  Eigen::Matrix3d blk;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      blk(a, b) = m.sxy - m.sx.dot(tb[b]) - ta[a].dot(m.sy) + ta[a].dot(tb[b]) * m.s0;
  return blk;
}

// Disjoint pair: tensorized Gauss with the static kernel 1/(4 pi r).
void far_moments(const TriXyz& ta, const TriXyz& tb, const TriRule& rule, Moments& m) {
  double aa = tri_area(ta), ab = tri_area(tb);
  for (int qa = 0; qa < rule.size(); ++qa) {
    Vec3 x = tri_point(ta, rule.bary[qa]);
    double wx = rule.weights[qa] * aa;
    for (int qb = 0; qb < rule.size(); ++qb) {
      Vec3 y = tri_point(tb, rule.bary[qb]);
      double r = (x - y).norm();
      m.add(wx * rule.weights[qb] * ab / (4.0 * kPi * r), x, y);
    }
  }
}

// Inner integral over tb via Duffy split about an apex c in the closure of
// tb. For c == x (coincident case) the radial direction integrates the 1/r
// singularity analytically; otherwise a clustered tensor rule is used.
void inner_apex_duffy(const Vec3& x, double wx, const TriXyz& tb, const Vec3& apex,
                      bool apex_is_singularity, const GaussRule& g, Moments& m) {
  double scale = tri_diameter(tb);
  for (int k = 0; k < 3; ++k) {
    const Vec3& va = tb[k];
    const Vec3& vb = tb[(k + 1) % 3];
    double area2 = (va - apex).cross(vb - apex).norm();  // twice apex triangle area
    if (area2 <= 1e-28 * scale * scale) continue;        // degenerate sliver
    if (apex_is_singularity) {
      // y = x + s d(t); kernel 1/(4 pi s |d|), Jacobian area2 * s: the s
      // integral of the (linear in y) integrand is exact, leaving a smooth
      // 1D integral in t.
      for (int qt = 0; qt < g.size(); ++qt) {
        Vec3 d = (1.0 - g.x[qt]) * (va - x) + g.x[qt] * (vb - x);
        double omega = wx * g.w[qt] * area2 / (4.0 * kPi * d.norm());
        m.add(omega, x, x + 0.5 * d);
      }
    } else {
      for (int qs = 0; qs < g.size(); ++qs) {
        double s = g.x[qs];
        for (int qt = 0; qt < g.size(); ++qt) {
          Vec3 d = (1.0 - g.x[qt]) * (va - apex) + g.x[qt] * (vb - apex);
          Vec3 y = apex + s * d;
          double r = (x - y).norm();
          double omega = wx * g.w[qs] * g.w[qt] * area2 * s / (4.0 * kPi * r);
          m.add(omega, x, y);
        }
      }
    }
  }
}

void coincident_moments(const TriXyz& t, const QuadratureConfig& quad, Moments& m) {
  const TriRule& outer = tri_rule(quad.outer_order);
  const GaussRule& g = gauss_rule(quad.duffy_order);
  // Uniformly subdivided outer rule: the inner potential has log-type edge
  // behavior the plain rule resolves poorly.
  std::vector<TriXyz> cells = {t};
  for (int level = 0; level < quad.coincident_split; ++level) {
    std::vector<TriXyz> next;
    next.reserve(cells.size() * 4);
    for (const TriXyz& c : cells)
      for (const TriXyz& child : tri_split(c)) next.push_back(child);
    cells = std::move(next);
  }
  for (const TriXyz& cell : cells) {
    double area = tri_area(cell);
    for (int q = 0; q < outer.size(); ++q) {
      Vec3 x = tri_point(cell, outer.bary[q]);
      inner_apex_duffy(x, outer.weights[q] * area, t, x, true, g, m);
    }
  }
}

bool on_feature(const Vec3& p, const std::vector<Vec3>& feature, double tol) {
  if (feature.size() == 1) return (p - feature[0]).norm() <= tol;
  const Vec3& a = feature[0];
  const Vec3& b = feature[1];
  Vec3 ab = b - a;
  double tt = ab.dot(p - a) / ab.squaredNorm();
  if (tt < -1e-9 || tt > 1.0 + 1e-9) return false;
  return (p - (a + tt * ab)).norm() <= tol;
}

// Shared-vertex or shared-edge pair: the outer triangle is subdivided toward
// the shared feature; each leaf uses outer Gauss x apex-Duffy inner about the
// closest point of tb.
void adjacent_moments(const TriXyz& ta, const TriXyz& tb,
                      const std::vector<Vec3>& feature, double feature_tol,
                      int depth, const QuadratureConfig& quad, Moments& m) {
  int on = 0;
  for (const Vec3& v : ta) on += on_feature(v, feature, feature_tol) ? 1 : 0;
  if (on > 0 && depth < quad.near_depth) {
    for (const TriXyz& child : tri_split(ta))
      adjacent_moments(child, tb, feature, feature_tol, depth + 1, quad, m);
    return;
  }
  const TriRule& outer = tri_rule(quad.outer_order);
  const GaussRule& g = gauss_rule(quad.duffy_order);
  double area = tri_area(ta);
  for (int q = 0; q < outer.size(); ++q) {
    Vec3 x = tri_point(ta, outer.bary[q]);
    Vec3 c = closest_point_on_triangle(tb, x);
    inner_apex_duffy(x, outer.weights[q] * area, tb, c, false, g, m);
  }
}

int shared_vertices(const std::array<int, 3>& a, const std::array<int, 3>& b,
                    std::vector<int>& shared) {
  shared.clear();
  for (int va : a)
    for (int vb : b)
      if (va == vb) shared.push_back(va);
  return static_cast<int>(shared.size());
}

}  // namespace

Mat assemble_inductance(const Mesh& mesh, const QuadratureConfig& quad) {
  quad.validate();
  const int nt = mesh.n_f();
  std::vector<TriXyz> tris(nt);
  for (int t = 0; t < nt; ++t)
    tris[t] = {mesh.vertices[mesh.triangles[t][0]], mesh.vertices[mesh.triangles[t][1]],
               mesh.vertices[mesh.triangles[t][2]]};

  // Pair blocks computed in parallel, scattered serially in pair order so the
  // accumulation is bit-stable regardless of worker count.
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(nt * (nt + 1) / 2);
  for (int a = 0; a < nt; ++a)
    for (int b = a; b < nt; ++b) pairs.emplace_back(a, b);

  std::vector<Eigen::Matrix3d> blocks(pairs.size());
  auto work = [&](size_t p) {
    int a = pairs[p].first, b = pairs[p].second;
    Moments m;
    std::vector<int> shared;
    if (a == b) {
      coincident_moments(tris[a], quad, m);
    } else {
      int ns = shared_vertices(mesh.triangles[a], mesh.triangles[b], shared);
      if (ns == 0) {
        far_moments(tris[a], tris[b], tri_rule(quad.far_order), m);
      } else {
        std::vector<Vec3> feature;
        for (int v : shared) feature.push_back(mesh.vertices[v]);
        double tol = 1e-9 * std::max(tri_diameter(tris[a]), tri_diameter(tris[b]));
        adjacent_moments(tris[a], tris[b], feature, tol, 0, quad, m);
      }
    }
    Eigen::Matrix3d blk = block_from_moments(m, tris[a], tris[b]);
    if (a == b) blk = 0.5 * (blk + blk.transpose()).eval();
    blocks[p] = blk;
  };

  int threads = 1;
  if (const char* env = std::getenv("TAPEROM_THREADS")) threads = std::max(1, std::atoi(env));
  if (threads == 1) {
    for (size_t p = 0; p < pairs.size(); ++p) work(p);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (size_t p = next.fetch_add(1); p < pairs.size(); p = next.fetch_add(1)) work(p);
      });
    for (auto& th : pool) th.join();
  }

  Mat L = Mat::Zero(mesh.n_e(), mesh.n_e());
  for (size_t p = 0; p < pairs.size(); ++p) {
    int a = pairs[p].first, b = pairs[p].second;
    const Eigen::Matrix3d& blk = blocks[p];
    auto local_index = [&](int tri, int vertex) {
      for (int k = 0; k < 3; ++k)
        if (mesh.triangles[tri][k] == vertex) return k;
      return -1;
    };
    for (const Mesh::TriDof& dh : mesh.tri_dofs[a]) {
      int ia = local_index(a, dh.opp_vertex);
      double ca = dh.sign / (2.0 * mesh.tri_area(a));
      for (const Mesh::TriDof& dk : mesh.tri_dofs[b]) {
        int ib = local_index(b, dk.opp_vertex);
        double cb = dk.sign / (2.0 * mesh.tri_area(b));
        double val = kMu0 * ca * cb * blk(ia, ib);
        L(dh.dof, dk.dof) += val;
        if (a != b) L(dk.dof, dh.dof) += val;
      }
    }
  }
  return L;
}

std::vector<ElementTable> build_element_tables(const Mesh& mesh) {
  std::vector<ElementTable> elems(mesh.n_f());
  const TriRule& mid = tri_rule(3);  // exact for products of linear functions
  for (int t = 0; t < mesh.n_f(); ++t) {
    ElementTable& e = elems[t];
    e.area = mesh.tri_area(t);
    e.centroid = mesh.tri_centroid(t);
    const auto& dofs = mesh.tri_dofs[t];
    int nloc = static_cast<int>(dofs.size());
    e.dofs.resize(nloc);
    e.w_centroid.resize(3, nloc);
    e.gram = Mat::Zero(nloc, nloc);
    for (int k = 0; k < nloc; ++k) {
      e.dofs[k] = dofs[k].dof;
      e.w_centroid.col(k) = mesh.basis_unit_flux(dofs[k].dof, t, e.centroid);
    }
    for (int q = 0; q < mid.size(); ++q) {
      Vec3 p = tri_point({mesh.vertices[mesh.triangles[t][0]],
                          mesh.vertices[mesh.triangles[t][1]],
                          mesh.vertices[mesh.triangles[t][2]]},
                         mid.bary[q]);
      double wq = mid.weights[q] * e.area;
      for (int a = 0; a < nloc; ++a) {
        Vec3 wa = mesh.basis_unit_flux(dofs[a].dof, t, p);
        for (int b = 0; b < nloc; ++b) {
          Vec3 wb = mesh.basis_unit_flux(dofs[b].dof, t, p);
          e.gram(a, b) += wq * wa.dot(wb);
        }
      }
    }
  }
  return elems;
}

Vec source_geometry_vector(const Mesh& mesh, const Vec3& direction) {
  Vec geom = Vec::Zero(mesh.n_e());
  const TriRule& mid = tri_rule(3);
  for (int t = 0; t < mesh.n_f(); ++t) {
    double area = mesh.tri_area(t);
    TriXyz tx{mesh.vertices[mesh.triangles[t][0]], mesh.vertices[mesh.triangles[t][1]],
              mesh.vertices[mesh.triangles[t][2]]};
    for (const Mesh::TriDof& td : mesh.tri_dofs[t]) {
      double acc = 0.0;
      for (int q = 0; q < mid.size(); ++q) {
        Vec3 p = tri_point(tx, mid.bary[q]);
        Vec3 w = mesh.basis_unit_flux(td.dof, t, p);
        acc += mid.weights[q] * area * w.dot(p.cross(direction));
      }
      geom[td.dof] += acc;
    }
  }
  return geom;
}

FomOperators assemble_operators(const Mesh& mesh, const MaterialParams& material,
                                const ExcitationSpec& excitation,
                                const QuadratureConfig& quad) {
  material.validate();
  excitation.validate();
  quad.validate();
  FomOperators ops;
  ops.mesh = mesh;
  ops.material = material;
  ops.excitation = excitation;
  ops.quad = quad;
  ops.G = incidence_matrix(mesh);
  ops.elements = build_element_tables(mesh);
  ops.source_geom = source_geometry_vector(mesh, excitation.direction);
  ops.L = assemble_inductance(mesh, quad);
  return ops;
}

Vec3 element_current(const ElementTable& elem, const Vec& i_full) {
  Vec3 k = Vec3::Zero();
  for (size_t c = 0; c < elem.dofs.size(); ++c)
    k += i_full[elem.dofs[c]] * elem.w_centroid.col(c);
  return k;
}

Mat assemble_resistance(const FomOperators& ops, const Vec& i) {
  Mat r = Mat::Zero(ops.n_e(), ops.n_e());
  for (const ElementTable& e : ops.elements) {
    double eta = sheet_resistivity(ops.material, element_current(e, i).norm());
    int nloc = static_cast<int>(e.dofs.size());
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b < nloc; ++b) r(e.dofs[a], e.dofs[b]) += eta * e.gram(a, b);
  }
  return r;
}

Mat assemble_nl_jacobian(const FomOperators& ops, const Vec& i) {
  Mat j = Mat::Zero(ops.n_e(), ops.n_e());
  for (const ElementTable& e : ops.elements) {
    Vec3 k = element_current(e, i);
    double kn = k.norm();
    double eta = sheet_resistivity(ops.material, kn);
    int nloc = static_cast<int>(e.dofs.size());
    Vec iloc(nloc);
    for (int a = 0; a < nloc; ++a) iloc[a] = i[e.dofs[a]];
    Vec mi = e.gram * iloc;
    Vec grad = Vec::Zero(nloc);
    if (kn > 0.0 && ops.material.n_exp > 1.0) {
      double deta = sheet_resistivity_derivative(ops.material, kn);
      grad = (deta / kn) * (e.w_centroid.transpose() * k);
    }
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b < nloc; ++b)
        j(e.dofs[a], e.dofs[b]) += eta * e.gram(a, b) + mi[a] * grad[b];
  }
  return j;
}

Vec nonlinearity(const FomOperators& ops, const Vec& i) {
  Vec f = Vec::Zero(ops.n_e());
  for (const ElementTable& e : ops.elements) {
    double eta = sheet_resistivity(ops.material, element_current(e, i).norm());
    int nloc = static_cast<int>(e.dofs.size());
    for (int a = 0; a < nloc; ++a) {
      double acc = 0.0;
      for (int b = 0; b < nloc; ++b) acc += e.gram(a, b) * i[e.dofs[b]];
      f[e.dofs[a]] += eta * acc;
    }
  }
  return f;
}

Vec assemble_source(const FomOperators& ops, const ExcitationSpec& e, double t) {
  if (t < 0.0) throw DomainError("assemble_source: t must be >= 0");
  Vec geom = (e.direction - ops.excitation.direction).norm() < 1e-15
                 ? ops.source_geom
                 : source_geometry_vector(ops.mesh, e.direction);
  return b_dot(e, t) * geom;
}

}  // namespace taperom
