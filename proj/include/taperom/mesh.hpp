#pragma once

#include <array>
#include <optional>
#include <vector>

#include "taperom/types.hpp"

namespace taperom {

struct HelixSpec {
  double radius = 0.0;  // m
  double pitch = 0.0;   // m of axial advance per full turn
  double phase = 0.0;   // rad
};

// Flat strip of width x length, nx x nz structured quads, optionally wrapped
// onto a cylinder (width direction follows the circumference).
struct TapeSpec {
  double length = 0.0;  // m
  double width = 0.0;   // m
  int nx = 1;           // divisions across the width
  int nz = 1;           // divisions along the length
  std::optional<HelixSpec> helix;

  void validate() const;  // throws ConfigError naming the offending field
};

struct MeshEdge {
  int v0 = -1, v1 = -1;         // vertex ids, v0 < v1
  int tri_plus = -1;            // lower adjacent triangle index ("+" side)
  int tri_minus = -1;           // second adjacent triangle, -1 on the boundary
  bool interior() const { return tri_minus >= 0; }
};

// Triangulated surface with deterministic edge/face DOF numbering.
// Interior edges carry the current DOFs; boundary edges carry none.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<MeshEdge> edges;          // lexicographic by (v0, v1)
  std::vector<int> interior_edge_ids;   // ascending, duplicate-free
  std::optional<TapeSpec> spec;         // echoed when generated

  int n_f() const { return static_cast<int>(triangles.size()); }
  int n_e() const { return static_cast<int>(interior_edge_ids.size()); }

  // Per-triangle DOF table entry: one interior edge seen from this triangle.
  struct TriDof {
    int dof;         // global DOF index (position in interior_edge_ids)
    int edge_id;     // index into edges
    double sign;     // +1 if this triangle is the "+" side
    int opp_vertex;  // vertex of this triangle opposite the edge
  };
  std::vector<std::vector<TriDof>> tri_dofs;  // built by finalize()
  std::vector<int> edge_dof;                  // edge id -> DOF index or -1

  double tri_area(int t) const;
  Vec3 tri_centroid(int t) const;
  Vec3 tri_normal(int t) const;  // unit normal
  double edge_length(int e) const;

  // Unit-flux edge basis at a point of triangle t: carries one ampere of
  // total current across its edge, so DOF coefficients are currents in A,
  // the incidence matrix is the plain +-1 divergence and L comes out in H.
  // Equals the classic RWG value divided by the edge length.
  Vec3 basis_unit_flux(int dof, int t, const Vec3& point) const;

  // Rebuilds edges, interior ids and DOF tables from vertices/triangles and
  // validates the manifold invariants. Throws ConfigError on violation.
  void finalize();
  bool connected() const;
};

Mesh generate_tape_mesh(const TapeSpec& spec);

// Faces-to-edges incidence matrix G (n_f x n_e): discrete divergence.
// G[f,e] = +1 if face f is the "+" side of interior edge e, -1 if "-".
SpMat incidence_matrix(const Mesh& mesh);

// RWG edge basis evaluated on an explicit adjacent triangle:
// (l_e / 2A+)(r - p+) on the "+" side, -(l_e / 2A-)(r - p-) on the "-" side.
// Throws DomainError if tri is not adjacent to the edge or the point is not
// on the triangle.
Vec3 edge_basis_eval_on(const Mesh& mesh, int edge_id, int tri, const Vec3& point);

// Same, locating the adjacent triangle containing the point (the "+" side
// wins when the point lies on the shared edge).
Vec3 edge_basis_eval(const Mesh& mesh, int edge_id, const Vec3& point);

bool point_in_triangle(const Mesh& mesh, int t, const Vec3& p, double rel_tol = 1e-10);

}  // namespace taperom
