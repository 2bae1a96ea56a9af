#pragma once

// Independent reference implementations used by the test suites. Everything here is
// written against dense Eigen matrices or brute-force scans and shares no code with
// the library beyond the mesh and mask types.

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "stafem/elasticity.hpp"
#include "stafem/mesh.hpp"
#include "stafem/sparse.hpp"

namespace oracle {

using stafem::ActiveMask;
using stafem::CsrMatrix;
using stafem::SupersetMesh;
using stafem::TetId;
using stafem::Vec3;
using stafem::VertexId;

inline Eigen::MatrixXd dense(const CsrMatrix& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.n), static_cast<Eigen::Index>(a.n));
  for (std::size_t r = 0; r < a.n; ++r) {
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) d(r, a.col[k]) += a.val[k];
  }
  return d;
}

/// Shape-function gradients from the inverse of the 4x4 matrix of rows [1 x y z]; row a
/// of the result holds grad N_a.
inline Eigen::Matrix<double, 4, 3> shape_gradients(const std::array<Vec3, 4>& x) {
  Eigen::Matrix4d p;
  for (int a = 0; a < 4; ++a) p.row(a) << 1.0, x[a].x(), x[a].y(), x[a].z();
  const Eigen::Matrix4d inv = p.inverse();  // column a: coefficients of N_a
  Eigen::Matrix<double, 4, 3> g;
  for (int a = 0; a < 4; ++a) g.row(a) = inv.col(a).tail<3>().transpose();
  return g;
}

/// Dense linear-tet stiffness V * B^T D B with D in Lamé form and Voigt order
/// (xx, yy, zz, yz, xz, xy) using engineering shear strains.
inline Eigen::Matrix<double, 12, 12> element_stiffness(const std::array<Vec3, 4>& x, double young, double nu) {
  const double lambda = young * nu / ((1 + nu) * (1 - 2 * nu));
  const double mu = young / (2 * (1 + nu));
  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  d.topLeftCorner<3, 3>().setConstant(lambda);
  d.topLeftCorner<3, 3>().diagonal().array() += 2 * mu;
  d.bottomRightCorner<3, 3>().diagonal().setConstant(mu);

  const auto g = shape_gradients(x);
  Eigen::Matrix<double, 6, 12> b = Eigen::Matrix<double, 6, 12>::Zero();
  for (int a = 0; a < 4; ++a) {
    const double gx = g(a, 0), gy = g(a, 1), gz = g(a, 2);
    const int c = 3 * a;
    b(0, c) = gx;
    b(1, c + 1) = gy;
    b(2, c + 2) = gz;
    b(3, c + 1) = gz;
    b(3, c + 2) = gy;
    b(4, c) = gz;
    b(4, c + 2) = gx;
    b(5, c) = gy;
    b(5, c + 1) = gx;
  }
  const double volume = std::abs((x[1] - x[0]).dot((x[2] - x[0]).cross(x[3] - x[0]))) / 6.0;
  return volume * b.transpose() * d * b;
}

/// Scatter-assembled elasticity operator over active tets, plus eps I.
inline Eigen::MatrixXd elastic_operator(const SupersetMesh& mesh, const ActiveMask& mask, const stafem::Material& m,
                                        double eps) {
  const auto n = static_cast<Eigen::Index>(3 * mesh.num_vertices());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    const auto& tet = mesh.tet(t);
    const std::array<Vec3, 4> x{mesh.vertex(tet[0]), mesh.vertex(tet[1]), mesh.vertex(tet[2]), mesh.vertex(tet[3])};
    const auto ke = element_stiffness(x, m.youngs_modulus, m.poisson_ratio);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        k.block<3, 3>(3 * tet[a], 3 * tet[b]) += ke.block<3, 3>(3 * a, 3 * b);
      }
    }
  }
  k.diagonal().array() += eps;
  return k;
}

/// Graph Laplacian of the edges of active tets, plus eps I.
inline Eigen::MatrixXd laplacian(const SupersetMesh& mesh, const ActiveMask& mask, double eps) {
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  std::set<std::pair<VertexId, VertexId>> edges;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    const auto& tet = mesh.tet(t);
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) edges.insert(std::minmax(tet[a], tet[b]));
    }
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : edges) {
    l(u, v) = l(v, u) = -1;
    l(u, u) += 1;
    l(v, v) += 1;
  }
  l.diagonal().array() += eps;
  return l;
}

/// Number of active tets containing each vertex pair (u < v), by scanning every tet.
inline std::map<std::pair<VertexId, VertexId>, std::uint32_t> edge_multiplicity(const SupersetMesh& mesh,
                                                                                 const ActiveMask& mask) {
  std::map<std::pair<VertexId, VertexId>, std::uint32_t> c;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    const auto& tet = mesh.tet(t);
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) ++c[std::minmax(tet[a], tet[b])];
    }
  }
  return c;
}

/// Face-sharing pairs (a < b) by comparing every pair of tets.
inline std::vector<std::pair<TetId, TetId>> face_pairs(const SupersetMesh& mesh) {
  std::vector<std::pair<TetId, TetId>> out;
  for (TetId a = 0; a < mesh.num_tets(); ++a) {
    for (TetId b = a + 1; b < mesh.num_tets(); ++b) {
      int shared = 0;
      for (VertexId u : mesh.tet(a)) shared += static_cast<int>(std::count(mesh.tet(b).begin(), mesh.tet(b).end(), u));
      if (shared == 3) out.emplace_back(a, b);
    }
  }
  return out;
}

/// Component labels of active tets by repeated relaxation over an explicit pair list
/// (label = smallest reachable tet id); -1 for inactive tets.
inline std::vector<long> component_labels(const std::vector<std::pair<TetId, TetId>>& pairs, const ActiveMask& mask) {
  std::vector<long> label(mask.size(), -1);
  for (TetId t = 0; t < mask.size(); ++t) {
    if (mask[t]) label[t] = t;
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [a, b] : pairs) {
      if (!mask[a] || !mask[b]) continue;
      const long m = std::min(label[a], label[b]);
      if (label[a] != m || label[b] != m) {
        label[a] = label[b] = m;
        changed = true;
      }
    }
  }
  return label;
}

inline std::size_t count_components(const std::vector<long>& label) {
  std::set<long> roots;
  for (long l : label) {
    if (l >= 0) roots.insert(l);
  }
  return roots.size();
}

inline double active_volume(const SupersetMesh& mesh, const ActiveMask& mask) {
  double v = 0;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    const auto& tet = mesh.tet(t);
    const Vec3 a = mesh.vertex(tet[0]);
    v += std::abs((mesh.vertex(tet[1]) - a).dot((mesh.vertex(tet[2]) - a).cross(mesh.vertex(tet[3]) - a))) / 6.0;
  }
  return v;
}

/// Random tetrahedron with volume bounded away from zero.
template <class Rng>
std::array<Vec3, 4> random_tet(Rng& rng) {
  for (;;) {
    std::array<Vec3, 4> x;
    for (auto& p : x) {
      for (int d = 0; d < 3; ++d) p[d] = 4.0 * rng.uniform() - 2.0;
    }
    const double v = (x[1] - x[0]).dot((x[2] - x[0]).cross(x[3] - x[0])) / 6.0;
    if (std::abs(v) > 0.05) return x;
  }
}

}  // namespace oracle
