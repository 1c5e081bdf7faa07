#pragma once

// Brute-force reference implementations used only by tests. Each oracle is
// written against the definitions, independent of the production code paths
// it checks.

#include <vector>

#include <Eigen/Dense>

#include "taperom/assembly.hpp"
#include "taperom/fom.hpp"

namespace oracles {

using taperom::FomOperators;
using taperom::Mat;
using taperom::Mesh;
using taperom::Vec;
using taperom::Vec3;

// ---- subdivision quadrature for the inductance kernel ---------------------
// I[a][b] = integral over Ta x Tb of (x - va).(y - vb) / (4 pi |x - y|),
// by recursive 4-way subdivision of both triangles; separated sub-pairs use
// a 3x3 midpoint tensor rule, touching pairs at the deepest level are
// dropped (their mass vanishes with depth).

struct OTri {
  Vec3 v[3];
  Vec3 centroid() const { return (v[0] + v[1] + v[2]) / 3.0; }
  double radius() const {
    Vec3 c = centroid();
    return std::max({(v[0] - c).norm(), (v[1] - c).norm(), (v[2] - c).norm()});
  }
  double area() const { return 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm(); }
};

// Exact integrals over a flat triangle for a coplanar observation point x
// (divergence-theorem closed forms):
//   S(x) = integral of 1/|x-y| dy
//   V(x) = integral of (y-x)/|x-y| dy
struct InnerIntegrals {
  double s;
  Vec3 v;
};

inline InnerIntegrals analytic_inner(const OTri& b, const Vec3& x) {
  Vec3 n = (b.v[1] - b.v[0]).cross(b.v[2] - b.v[0]).normalized();
  double diam = 2.0 * b.radius();
  InnerIntegrals out{0.0, Vec3::Zero()};
  for (int i = 0; i < 3; ++i) {
    const Vec3& a0 = b.v[i];
    const Vec3& a1 = b.v[(i + 1) % 3];
    Vec3 lhat = (a1 - a0).normalized();
    Vec3 uhat = lhat.cross(n);  // outward for either winding
    double p0 = uhat.dot(a0 - x);
    double l0 = lhat.dot(a0 - x), l1 = lhat.dot(a1 - x);
    double r0 = (a0 - x).norm(), r1 = (a1 - x).norm();
    double f;
    if (std::abs(p0) < 1e-14 * diam) {
      // x on the edge line: the p0-weighted log terms vanish
      out.v += 0.5 * uhat * (l1 * r1 - l0 * r0);
      continue;
    }
    if (r0 + l0 > 1e-300)
      f = std::log((r1 + l1) / (r0 + l0));
    else  // stable rearrangement when x lies beyond the edge start
      f = std::log((r1 + l1) * (r0 - l0) / (p0 * p0));
    out.s += p0 * f;
    out.v += 0.5 * uhat * (l1 * r1 - l0 * r0 + p0 * p0 * f);
  }
  return out;
}

inline void pair_block_rec(const OTri& a, const OTri& b, int depth,
                           const Vec3 va[3], const Vec3 vb[3], Eigen::Matrix3d& acc) {
  static const double ba_ = 0.0597158717897698, bb_ = 0.4701420641051151;
  static const double bc_ = 0.7974269853530873, bd_ = 0.1012865073234563;
  static const double pts[7][3] = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {ba_, bb_, bb_},
                                   {bb_, ba_, bb_},             {bb_, bb_, ba_},
                                   {bc_, bd_, bd_},             {bd_, bc_, bd_},
                                   {bd_, bd_, bc_}};
  static const double wts[7] = {9.0 / 40,           0.1323941527885062,
                                0.1323941527885062, 0.1323941527885062,
                                0.1259391805448271, 0.1259391805448271,
                                0.1259391805448271};
  double sep = (a.centroid() - b.centroid()).norm();
  if (sep > 1.5 * (a.radius() + b.radius())) {
    for (int qa = 0; qa < 7; ++qa) {
      Vec3 x = pts[qa][0] * a.v[0] + pts[qa][1] * a.v[1] + pts[qa][2] * a.v[2];
      double wa = wts[qa] * a.area();
      for (int qb = 0; qb < 7; ++qb) {
        Vec3 y = pts[qb][0] * b.v[0] + pts[qb][1] * b.v[1] + pts[qb][2] * b.v[2];
        double kern = wa * wts[qb] * b.area() /
                      (4.0 * taperom::kPi * (x - y).norm());
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            acc(i, j) += kern * (x - va[i]).dot(y - vb[j]);
      }
    }
    return;
  }
  if (depth == 0) {
    // singular-pair refinement closure: outer Gauss, exact inner
    for (int qa = 0; qa < 7; ++qa) {
      Vec3 x = pts[qa][0] * a.v[0] + pts[qa][1] * a.v[1] + pts[qa][2] * a.v[2];
      double wa = wts[qa] * a.area() / (4.0 * taperom::kPi);
      InnerIntegrals in = analytic_inner(b, x);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          acc(i, j) += wa * (x - va[i]).dot(in.v + (x - vb[j]) * in.s);
    }
    return;
  }
  auto split = [](const OTri& t) {
    Vec3 m01 = 0.5 * (t.v[0] + t.v[1]);
    Vec3 m12 = 0.5 * (t.v[1] + t.v[2]);
    Vec3 m02 = 0.5 * (t.v[2] + t.v[0]);
    return std::array<OTri, 4>{OTri{{t.v[0], m01, m02}}, OTri{{m01, t.v[1], m12}},
                               OTri{{m02, m12, t.v[2]}}, OTri{{m01, m12, m02}}};
  };
  for (const OTri& ca : split(a))
    for (const OTri& cb : split(b)) pair_block_rec(ca, cb, depth - 1, va, vb, acc);
}

inline Eigen::Matrix3d pair_block(const OTri& a, const OTri& b, int depth) {
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  pair_block_rec(a, b, depth, a.v, b.v, acc);
  return acc;
}

// Full inductance matrix by the subdivision oracle (small meshes only).
inline Mat inductance(const Mesh& mesh, int depth) {
  Mat L = Mat::Zero(mesh.n_e(), mesh.n_e());
  auto local_index = [&](int tri, int vertex) {
    for (int k = 0; k < 3; ++k)
      if (mesh.triangles[tri][k] == vertex) return k;
    return -1;
  };
  for (int a = 0; a < mesh.n_f(); ++a) {
    OTri ta{{mesh.vertices[mesh.triangles[a][0]], mesh.vertices[mesh.triangles[a][1]],
             mesh.vertices[mesh.triangles[a][2]]}};
    for (int b = 0; b < mesh.n_f(); ++b) {
      OTri tb{{mesh.vertices[mesh.triangles[b][0]], mesh.vertices[mesh.triangles[b][1]],
               mesh.vertices[mesh.triangles[b][2]]}};
      Eigen::Matrix3d blk = pair_block(ta, tb, depth);
      for (const Mesh::TriDof& dh : mesh.tri_dofs[a]) {
        double ca = dh.sign / (2.0 * mesh.tri_area(a));
        for (const Mesh::TriDof& dk : mesh.tri_dofs[b]) {
          double cb = dk.sign / (2.0 * mesh.tri_area(b));
          L(dh.dof, dk.dof) += taperom::kMu0 * ca * cb *
                               blk(local_index(a, dh.opp_vertex),
                                   local_index(b, dk.opp_vertex));
        }
      }
    }
  }
  return L;
}

// ---- damped Picard iteration for one backward-Euler step ------------------
// Freezes R at the previous iterate and solves the linear saddle system, with
// under-relaxation; no Jacobians involved.
inline Vec picard_step(const FomOperators& ops, const Vec& i_prev_step, const Vec& es,
                       double dt, int gauge, double relax, int max_iter, double tol) {
  const int ne = ops.n_e(), nf = ops.n_f();
  Mat sys = Mat::Zero(ne + nf, ne + nf);
  sys.block(0, ne, ne, nf) = Mat(ops.G.transpose());
  sys.block(ne, 0, nf, ne) = Mat(ops.G);
  Vec rhs = Vec::Zero(ne + nf);
  rhs.head(ne) = ops.L * i_prev_step / dt + es;

  Vec i = i_prev_step;
  for (int it = 0; it < max_iter; ++it) {
    sys.block(0, 0, ne, ne) = ops.L / dt + taperom::assemble_resistance(ops, i);
    sys.row(ne + gauge).setZero();
    sys(ne + gauge, ne + gauge) = 1.0;
    Vec x = sys.partialPivLu().solve(rhs);
    Vec i_new = (1.0 - relax) * i + relax * x.head(ne);
    double change = (i_new - i).norm() / (1.0 + i_new.norm());
    i = i_new;
    if (change < tol) break;
  }
  return i;
}

// ---- modal superposition for the linear DAE -------------------------------
// With constant R the index-reduced system on the divergence-free subspace
// decouples: y_k' + lambda_k y_k = g_k cos(w t), y_k(0) = 0.
struct ModalSolution {
  Mat modes;   // n_e x m: i(t) = modes * y(t)
  Vec lambda;  // decay rates
  Vec g;       // modal forcing amplitudes
  double omega;

  Vec eval(double t) const {
    Vec y(lambda.size());
    for (int k = 0; k < lambda.size(); ++k) {
      double l = lambda[k];
      y[k] = g[k] *
             (l * std::cos(omega * t) + omega * std::sin(omega * t) -
              l * std::exp(-l * t)) /
             (l * l + omega * omega);
    }
    return modes * y;
  }
};

inline ModalSolution modal_solution(const FomOperators& ops,
                                    const taperom::ExcitationSpec& exc) {
  Mat g_dense(ops.G);
  Eigen::JacobiSVD<Mat> svd(g_dense, Eigen::ComputeFullV);
  int rank = 0;
  double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  for (int k = 0; k < svd.singularValues().size(); ++k)
    if (svd.singularValues()[k] > 1e-12 * smax) ++rank;
  Mat z = svd.matrixV().rightCols(ops.n_e() - rank);  // null(G)

  Mat lt = z.transpose() * ops.L * z;
  Mat rt = z.transpose() * taperom::assemble_resistance(ops, Vec::Zero(ops.n_e())) * z;
  Eigen::LLT<Mat> llt(lt);
  Mat c = llt.matrixL();
  Mat cinv = c.inverse();
  Mat s = cinv * rt * cinv.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (s + s.transpose()));

  ModalSolution sol;
  sol.omega = 2.0 * taperom::kPi * exc.freq;
  sol.lambda = eig.eigenvalues();
  sol.modes = z * cinv.transpose() * eig.eigenvectors();
  sol.g = eig.eigenvectors().transpose() * cinv *
          (z.transpose() * ops.source_geom) * (2.0 * taperom::kPi * exc.freq * exc.B0);
  return sol;
}

// ---- published greedy point selection, reimplemented ----------------------
// Textbook statement with explicit selection matrices and dense solves.
inline std::vector<int> deim_greedy(const Mat& u) {
  const int n = static_cast<int>(u.rows());
  const int r = static_cast<int>(u.cols());
  std::vector<int> p;
  auto argmax_abs = [&](const Vec& v) {
    int best = 0;
    for (int k = 1; k < v.size(); ++k)
      if (std::abs(v[k]) > std::abs(v[best])) best = k;
    return best;
  };
  p.push_back(argmax_abs(u.col(0)));
  for (int l = 1; l < r; ++l) {
    Mat pmat = Mat::Zero(n, l);
    for (int k = 0; k < l; ++k) pmat(p[k], k) = 1.0;
    Mat ptu = pmat.transpose() * u.leftCols(l);
    Vec c = ptu.fullPivLu().solve(pmat.transpose() * u.col(l));
    Vec res = u.col(l) - u.leftCols(l) * c;
    p.push_back(argmax_abs(res));
  }
  return p;
}

}  // namespace oracles
