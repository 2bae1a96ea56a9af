#include "stafem/solver.hpp"

#include <cmath>
#include <numeric>

namespace stafem {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
  for (double x : a) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double true_relative_residual(const CsrMatrix& a, std::span<const double> b, std::span<const double> x, double bnorm) {
  std::vector<double> r(a.n);
  a.multiply(x, r);
  for (std::size_t i = 0; i < a.n; ++i) r[i] = b[i] - r[i];
  return bnorm > 0 ? norm(r) / bnorm : norm(r);
}

}  // namespace

CgResult pcg_solve(const CsrMatrix& a, std::span<const double> b, const CgConfig& config, std::span<const double> x0,
                   const CgTrace& trace) {
  const std::size_t n = a.n;
  if (b.size() != n) throw std::invalid_argument("rhs size does not match the matrix");
  if (!x0.empty() && x0.size() != n) throw std::invalid_argument("initial guess size does not match the matrix");
  if (!(config.tolerance > 0)) throw std::invalid_argument("CG tolerance must be positive");
  if (!all_finite(b) || !all_finite(a.val)) throw NumericalError("non-finite value in CG input");

  std::vector<double> inv_diag = a.diagonal();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(inv_diag[i] > 0)) throw NumericalError("Jacobi preconditioner needs a positive diagonal (row " + std::to_string(i) + ")");
    inv_diag[i] = 1.0 / inv_diag[i];
  }

  const int max_it = config.max_iterations > 0 ? config.max_iterations : static_cast<int>(10 * std::max<std::size_t>(n, 1));

  CgResult res;
  res.x.assign(n, 0.0);
  std::vector<double> r(b.begin(), b.end());
  if (!x0.empty()) {
    res.x.assign(x0.begin(), x0.end());
    std::vector<double> ax(n);
    a.multiply(res.x, ax);
    for (std::size_t i = 0; i < n; ++i) r[i] -= ax[i];
  }

  const double bnorm = norm(b);
  const double target = config.tolerance * bnorm;
  double rnorm = norm(r);

  std::vector<double> z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rho = dot(r, z);

  int it = 0;
  while (rnorm > target && it < max_it) {
    a.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0) || !std::isfinite(pq)) throw NumericalError("CG breakdown: matrix is not positive definite");
    const double alpha = rho / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rho_next = dot(r, z);
    const double beta = rho_next / rho;
    rho = rho_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = norm(r);
    ++it;
    if (!std::isfinite(rnorm)) throw NumericalError("non-finite residual during CG");
    if (trace) trace(it, bnorm > 0 ? rnorm / bnorm : rnorm);
  }

  res.iterations = it;
  res.relative_residual = true_relative_residual(a, b, res.x, bnorm);
  res.converged = rnorm <= target;
  return res;
}

std::vector<double> gravity_load(std::span<const double> mass, double g) {
  std::vector<double> f(mass.size(), 0.0);
  for (std::size_t i = 1; i < mass.size(); i += 3) f[i] = -g * mass[i];
  return f;
}

CsrMatrix implicit_euler_matrix(std::span<const double> mass, const CsrMatrix& stiffness, double h) {
  if (mass.size() != stiffness.n) throw std::invalid_argument("mass size does not match the stiffness matrix");
  const double h2 = h * h;
  CsrMatrix s;
  s.n = stiffness.n;
  s.row_ptr.reserve(s.n + 1);
  s.col.reserve(stiffness.nnz());
  s.val.reserve(stiffness.nnz());
  for (std::size_t i = 0; i < s.n; ++i) {
    const bool pinned = mass[i] == 0.0;
    bool wrote_diag = false;
    for (std::size_t k = stiffness.row_ptr[i]; k < stiffness.row_ptr[i + 1]; ++k) {
      const std::uint32_t j = stiffness.col[k];
      if (j == i) {
        s.col.push_back(j);
        s.val.push_back(pinned ? 1.0 : mass[i] + h2 * stiffness.val[k]);
        wrote_diag = true;
      } else if (!pinned && mass[j] != 0.0) {
        s.col.push_back(j);
        s.val.push_back(h2 * stiffness.val[k]);
      }
    }
    if (!wrote_diag) throw std::invalid_argument("stiffness matrix lacks a structural diagonal");
    s.row_ptr.push_back(s.col.size());
  }
  return s;
}

CgResult implicit_euler_step(DynamicsState& state, std::span<const double> mass, const CsrMatrix& stiffness,
                             const CgConfig& config, const CgTrace& trace) {
  const std::size_t n = stiffness.n;
  if (state.u.size() != n || state.v.size() != n || state.f.size() != n || mass.size() != n) {
    throw std::invalid_argument("dynamics state size does not match the operator");
  }
  if (!all_finite(state.u) || !all_finite(state.v)) throw NumericalError("non-finite dynamics state");
  const double h = state.h;
  const CsrMatrix system = implicit_euler_matrix(mass, stiffness, h);

  // Pinned columns are dropped from the system, so move their known values to the rhs.
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = mass[i] == 0.0 ? state.u[i] : mass[i] * (state.u[i] + h * state.v[i]) + h * h * state.f[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (mass[i] == 0.0) continue;
    for (std::size_t k = stiffness.row_ptr[i]; k < stiffness.row_ptr[i + 1]; ++k) {
      const std::uint32_t j = stiffness.col[k];
      if (j != i && mass[j] == 0.0) rhs[i] -= h * h * stiffness.val[k] * state.u[j];
    }
  }

  CgResult res = pcg_solve(system, rhs, config, state.u, trace);
  for (std::size_t i = 0; i < n; ++i) {
    state.v[i] = (res.x[i] - state.u[i]) / h;
    state.u[i] = res.x[i];
  }
  if (!all_finite(state.u)) throw NumericalError("non-finite displacement after implicit Euler step");
  return res;
}

}  // namespace stafem
