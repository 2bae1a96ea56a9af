#pragma once

#include <functional>
#include <span>
#include <vector>

#include "stafem/sparse.hpp"

namespace stafem {

struct CgConfig {
  double tolerance = 1e-8;  // relative residual ||b - Ax|| / ||b||
  int max_iterations = 0;   // 0 means 10 * n
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;  // recomputed from the returned x
  bool converged = false;
};

/// Optional per-iteration hook receiving (iteration, recurrence relative residual).
using CgTrace = std::function<void(int, double)>;

/// Jacobi-preconditioned conjugate gradients. `x0` (optional) is the initial guess.
/// Throws NumericalError on a non-positive diagonal, non-finite input, or breakdown.
/// Hitting max_iterations is reported through `converged`, not thrown.
CgResult pcg_solve(const CsrMatrix& a, std::span<const double> b, const CgConfig& config,
                   std::span<const double> x0 = {}, const CgTrace& trace = {});

/// Implicit Euler state over 3 DOFs per vertex.
struct DynamicsState {
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> f;
  double h = 1e-2;

  static DynamicsState at_rest(std::size_t dofs, double h) {
    return {std::vector<double>(dofs, 0.0), std::vector<double>(dofs, 0.0), std::vector<double>(dofs, 0.0), h};
  }
};

/// Gravity-like load (0, -g * m, 0) per vertex from a per-DOF lumped mass.
std::vector<double> gravity_load(std::span<const double> mass, double g = 9.8);

/// Builds the system matrix M + h^2 K with DOFs of zero mass pinned to an identity row.
CsrMatrix implicit_euler_matrix(std::span<const double> mass, const CsrMatrix& stiffness, double h);

/// Solves (M + h^2 K) u' = M (u + h v) + h^2 f, then v' = (u' - u) / h. DOFs with zero
/// mass are pinned at their current displacement. The solve is warm-started from u.
CgResult implicit_euler_step(DynamicsState& state, std::span<const double> mass, const CsrMatrix& stiffness,
                             const CgConfig& config, const CgTrace& trace = {});

}  // namespace stafem
