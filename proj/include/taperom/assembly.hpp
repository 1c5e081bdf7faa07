#pragma once

#include <vector>

#include "taperom/material.hpp"
#include "taperom/mesh.hpp"
#include "taperom/quadrature.hpp"

namespace taperom {

// External sinusoidal flux density B0 sin(2 pi f t) along `direction`.
struct ExcitationSpec {
  double B0 = 0.0;           // T
  double freq = 50.0;        // Hz
  Vec3 direction{0, 1, 0};   // unit vector

  void validate() const;
};

// dB/dt = 2 pi f B0 cos(2 pi f t).
double b_dot(const ExcitationSpec& e, double t);

struct QuadratureConfig {
  int far_order = 7;         // triangle rule per factor for disjoint pairs
  int outer_order = 7;       // outer rule on singular pairs
  int duffy_order = 8;       // 1D Gauss points per Duffy direction
  int near_depth = 4;        // outer subdivision levels toward the shared feature
  int coincident_split = 2;  // uniform outer subdivision levels on self pairs

  void validate() const;
};

// Per-triangle local structure reused by R/J/source assembly, the DEIM
// selected-row evaluation and the loss post-processing.
struct ElementTable {
  double area = 0.0;
  Vec3 centroid;
  std::vector<int> dofs;  // global DOF ids with support here
  Mat w_centroid;         // 3 x nloc unit-flux basis values at the centroid
  Mat gram;               // nloc x nloc, exact integral of w_i . w_j over the element
};

// Full-order operators of the J-phi DAE:
//   [R(i) G^T; G 0] [i; phi] + [L 0; 0 0] d/dt [i; phi] = [e_s(t); 0].
struct FomOperators {
  Mesh mesh;
  MaterialParams material;
  ExcitationSpec excitation;
  QuadratureConfig quad;

  Mat L;                  // n_e x n_e inductance [H], symmetric positive definite
  SpMat G;                // n_f x n_e incidence
  std::vector<ElementTable> elements;
  Vec source_geom;        // n_e, integral of w . (r x direction); e_s(t) = b_dot(t) * this

  int n_e() const { return mesh.n_e(); }
  int n_f() const { return mesh.n_f(); }
};

Mat assemble_inductance(const Mesh& mesh, const QuadratureConfig& quad = {});
std::vector<ElementTable> build_element_tables(const Mesh& mesh);
Vec source_geometry_vector(const Mesh& mesh, const Vec3& direction);

FomOperators assemble_operators(const Mesh& mesh, const MaterialParams& material,
                                const ExcitationSpec& excitation,
                                const QuadratureConfig& quad = {});

// Centroid sheet current density K_T [A/m] of element t for full-space currents.
Vec3 element_current(const ElementTable& elem, const Vec& i_full);

// Current-dependent resistance R(i): eta evaluated at each element centroid
// times the exact element Gram matrix. Symmetric PSD, couples only edge
// pairs sharing a triangle.
Mat assemble_resistance(const FomOperators& ops, const Vec& i);

// Jacobian of f(i) = R(i) i.
Mat assemble_nl_jacobian(const FomOperators& ops, const Vec& i);

// f(i) = R(i) i evaluated element-wise (snapshot and DEIM target).
Vec nonlinearity(const FomOperators& ops, const Vec& i);

// Source vector e_s(t) [V].
Vec assemble_source(const FomOperators& ops, const ExcitationSpec& e, double t);

}  // namespace taperom
