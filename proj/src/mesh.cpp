#include "taperom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace taperom {

void TapeSpec::validate() const {
  if (!(length > 0.0)) throw ConfigError("mesh.length must be > 0");
  if (!(width > 0.0)) throw ConfigError("mesh.width must be > 0");
  if (nx < 1) throw ConfigError("mesh.nx must be >= 1");
  if (nz < 1) throw ConfigError("mesh.nz must be >= 1");
  if (helix) {
    if (!(helix->radius > width / (2.0 * kPi)))
      throw ConfigError("mesh.helix.radius must exceed width/(2*pi), got " +
                        std::to_string(helix->radius));
  }
}

double Mesh::tri_area(int t) const {
  const auto& tr = triangles[t];
  Vec3 a = vertices[tr[1]] - vertices[tr[0]];
  Vec3 b = vertices[tr[2]] - vertices[tr[0]];
  return 0.5 * a.cross(b).norm();
}

Vec3 Mesh::tri_centroid(int t) const {
  const auto& tr = triangles[t];
  return (vertices[tr[0]] + vertices[tr[1]] + vertices[tr[2]]) / 3.0;
}

Vec3 Mesh::tri_normal(int t) const {
  const auto& tr = triangles[t];
  Vec3 a = vertices[tr[1]] - vertices[tr[0]];
  Vec3 b = vertices[tr[2]] - vertices[tr[0]];
  return a.cross(b).normalized();
}

double Mesh::edge_length(int e) const {
  return (vertices[edges[e].v1] - vertices[edges[e].v0]).norm();
}

void Mesh::finalize() {
  // Edge map keyed by sorted vertex pair; deterministic lexicographic ids.
  std::map<std::pair<int, int>, std::vector<int>> adj;
  for (int t = 0; t < n_f(); ++t) {
    if (!(tri_area(t) > 0.0))
      throw ConfigError("triangle " + std::to_string(t) + " has non-positive area");
    const auto& tr = triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tr[k], b = tr[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      adj[{a, b}].push_back(t);
    }
  }
  edges.clear();
  interior_edge_ids.clear();
  for (const auto& [key, tris] : adj) {
    if (tris.size() > 2)
      throw ConfigError("edge (" + std::to_string(key.first) + "," +
                        std::to_string(key.second) + ") has " +
                        std::to_string(tris.size()) + " adjacent triangles");
    MeshEdge e;
    e.v0 = key.first;
    e.v1 = key.second;
    e.tri_plus = *std::min_element(tris.begin(), tris.end());
    if (tris.size() == 2) e.tri_minus = *std::max_element(tris.begin(), tris.end());
    if (e.interior()) interior_edge_ids.push_back(static_cast<int>(edges.size()));
    edges.push_back(e);
  }

  edge_dof.assign(edges.size(), -1);
  for (int d = 0; d < n_e(); ++d) edge_dof[interior_edge_ids[d]] = d;

  tri_dofs.assign(n_f(), {});
  for (int d = 0; d < n_e(); ++d) {
    const MeshEdge& e = edges[interior_edge_ids[d]];
    for (int side = 0; side < 2; ++side) {
      int t = side == 0 ? e.tri_plus : e.tri_minus;
      const auto& tr = triangles[t];
      int opp = -1;
      for (int v : tr)
        if (v != e.v0 && v != e.v1) opp = v;
      tri_dofs[t].push_back({d, interior_edge_ids[d], side == 0 ? 1.0 : -1.0, opp});
    }
  }
}

bool Mesh::connected() const {
  if (n_f() == 0) return true;
  std::vector<char> seen(n_f(), 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int t = stack.back();
    stack.pop_back();
    for (int e : interior_edge_ids) {
      const MeshEdge& ed = edges[e];
      if (ed.tri_plus == t && !seen[ed.tri_minus]) {
        seen[ed.tri_minus] = 1;
        stack.push_back(ed.tri_minus);
        ++count;
      } else if (ed.tri_minus == t && !seen[ed.tri_plus]) {
        seen[ed.tri_plus] = 1;
        stack.push_back(ed.tri_plus);
        ++count;
      }
    }
  }
  return count == n_f();
}

Mesh generate_tape_mesh(const TapeSpec& spec) {
  spec.validate();
  Mesh mesh;
  mesh.spec = spec;

  const int nx = spec.nx, nz = spec.nz;
  // Flat strip coordinates: u across the width, v along the length, centered.
  auto map_point = [&](double u, double v) -> Vec3 {
    if (!spec.helix) return Vec3(u, 0.0, v);
    const HelixSpec& h = *spec.helix;
    double theta = h.phase + u / h.radius;
    return Vec3(h.radius * std::cos(theta), h.radius * std::sin(theta),
                v + h.pitch * u / (2.0 * kPi * h.radius));
  };

  // Vertices row-major: iz outer, ix inner.
  for (int iz = 0; iz <= nz; ++iz) {
    double v = -0.5 * spec.length + spec.length * iz / nz;
    for (int ix = 0; ix <= nx; ++ix) {
      double u = -0.5 * spec.width + spec.width * ix / nx;
      mesh.vertices.push_back(map_point(u, v));
    }
  }

  // Quads split along the fixed v00-v11 diagonal: lower then upper.
  auto vid = [&](int ix, int iz) { return iz * (nx + 1) + ix; };
  for (int iz = 0; iz < nz; ++iz) {
    for (int ix = 0; ix < nx; ++ix) {
      int v00 = vid(ix, iz), v10 = vid(ix + 1, iz);
      int v01 = vid(ix, iz + 1), v11 = vid(ix + 1, iz + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }

  mesh.finalize();
  return mesh;
}

SpMat incidence_matrix(const Mesh& mesh) {
  SpMat g(mesh.n_f(), mesh.n_e());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * mesh.n_e());
  for (int d = 0; d < mesh.n_e(); ++d) {
    const MeshEdge& e = mesh.edges[mesh.interior_edge_ids[d]];
    trip.emplace_back(e.tri_plus, d, 1.0);
    trip.emplace_back(e.tri_minus, d, -1.0);
  }
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

bool point_in_triangle(const Mesh& mesh, int t, const Vec3& p, double rel_tol) {
  const auto& tr = mesh.triangles[t];
  Vec3 a = mesh.vertices[tr[0]], b = mesh.vertices[tr[1]], c = mesh.vertices[tr[2]];
  Vec3 n = (b - a).cross(c - a);
  double area2 = n.norm();
  double diam = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
  if (std::abs(n.dot(p - a)) > rel_tol * diam * area2) return false;
  // Barycentric via signed sub-areas against the triangle normal.
  double la = (b - p).cross(c - p).dot(n) / (area2 * area2);
  double lb = (c - p).cross(a - p).dot(n) / (area2 * area2);
  double lc = (a - p).cross(b - p).dot(n) / (area2 * area2);
  double lo = -rel_tol;
  return la >= lo && lb >= lo && lc >= lo;
}

Vec3 edge_basis_eval_on(const Mesh& mesh, int edge_id, int tri, const Vec3& point) {
  const MeshEdge& e = mesh.edges[edge_id];
  double sign;
  if (tri == e.tri_plus)
    sign = 1.0;
  else if (tri == e.tri_minus)
    sign = -1.0;
  else
    throw DomainError("triangle " + std::to_string(tri) +
                      " is not adjacent to edge " + std::to_string(edge_id));
  if (!point_in_triangle(mesh, tri, point))
    throw DomainError("point is not on triangle " + std::to_string(tri));
  int opp = -1;
  for (int v : mesh.triangles[tri])
    if (v != e.v0 && v != e.v1) opp = v;
  double len = mesh.edge_length(edge_id);
  double area = mesh.tri_area(tri);
  return sign * (len / (2.0 * area)) * (point - mesh.vertices[opp]);
}

Vec3 edge_basis_eval(const Mesh& mesh, int edge_id, const Vec3& point) {
  const MeshEdge& e = mesh.edges[edge_id];
  if (point_in_triangle(mesh, e.tri_plus, point))
    return edge_basis_eval_on(mesh, edge_id, e.tri_plus, point);
  if (e.interior() && point_in_triangle(mesh, e.tri_minus, point))
    return edge_basis_eval_on(mesh, edge_id, e.tri_minus, point);
  throw DomainError("point is not on a triangle adjacent to edge " +
                    std::to_string(edge_id));
}

Vec3 Mesh::basis_unit_flux(int dof, int t, const Vec3& point) const {
  for (const TriDof& td : tri_dofs[t])
    if (td.dof == dof)
      return td.sign / (2.0 * tri_area(t)) * (point - vertices[td.opp_vertex]);
  throw DomainError("DOF " + std::to_string(dof) + " has no support on triangle " +
                    std::to_string(t));
}

}  // namespace taperom
