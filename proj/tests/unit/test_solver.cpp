#include <doctest.h>

#include <Eigen/Dense>

#include "../oracles.hpp"
#include "stafem/elasticity.hpp"
#include "stafem/proxy.hpp"
#include "stafem/rng.hpp"
#include "stafem/solver.hpp"

using namespace stafem;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 17);
  std::vector<double> b(n);
  for (double& x : b) x = rng.normal();
  return b;
}

Eigen::Map<const Eigen::VectorXd> view(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

struct ElasticFixture {
  SupersetMesh mesh;
  ElementStiffnessCache cache;
  ElasticState state;

  ElasticFixture(int nx, int ny, int nz, bool drop_some)
      : mesh(generate_block_mesh(nx, ny, nz)), cache(precompute_element_stiffness(mesh, Material{1.0, 0.3, 1.0})) {
    ActiveMask mask(mesh.num_tets(), true);
    if (drop_some) {
      for (TetId t = 0; t < 6; ++t) mask.set(t, false);  // first cube: its corner vertex loses all tets
    }
    state = rebuild_elasticity(mesh, cache, mask);
  }
};

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("PCG matches a dense solve") {
    const auto mesh = generate_block_mesh(3, 3, 3);
    const CsrMatrix a = finalize(rebuild_proxy(mesh, ActiveMask(mesh.num_tets(), true)), 1e-2);
    const auto b = random_vector(a.n, 1);
    const CgResult r = pcg_solve(a, b, {1e-12, 0});
    CHECK(r.converged);
    CHECK(r.relative_residual <= 1e-11);
    const Eigen::VectorXd ref = oracle::dense(a).ldlt().solve(view(b));
    CHECK((view(r.x) - ref).norm() <= 1e-8 * ref.norm());
  }

  TEST_CASE("PCG on the elasticity operator") {
    ElasticFixture f(2, 2, 2, false);
    const CsrMatrix a = finalize(f.state, 1e-3);
    const auto b = random_vector(a.n, 2);
    std::vector<std::pair<int, double>> trace;
    const CgResult r = pcg_solve(a, b, {1e-10, 0}, {}, [&](int it, double res) { trace.emplace_back(it, res); });
    CHECK(r.converged);
    CHECK(r.relative_residual <= 1e-9);
    REQUIRE(trace.size() == static_cast<std::size_t>(r.iterations));
    CHECK(trace.back().second <= 1e-10);
    CHECK(trace.front().first == 1);
    const Eigen::VectorXd ref = oracle::dense(a).ldlt().solve(view(b));
    CHECK((view(r.x) - ref).norm() <= 1e-6 * ref.norm());
  }

  TEST_CASE("warm start, zero rhs and iteration cap") {
    const auto mesh = generate_block_mesh(2, 2, 2);
    const CsrMatrix a = finalize(rebuild_proxy(mesh, ActiveMask(mesh.num_tets(), true)), 1e-6);
    const auto b = random_vector(a.n, 3);
    const CgResult exact = pcg_solve(a, b, {1e-13, 0});
    const CgResult warm = pcg_solve(a, b, {1e-8, 0}, exact.x);
    CHECK(warm.iterations == 0);
    CHECK(warm.converged);
    const CgResult zero = pcg_solve(a, std::vector<double>(a.n, 0.0), {1e-8, 0});
    CHECK(zero.iterations == 0);
    for (double x : zero.x) CHECK(x == 0.0);
    const CgResult capped = pcg_solve(a, b, {1e-14, 2});
    CHECK(capped.iterations == 2);
    CHECK_FALSE(capped.converged);
  }

  TEST_CASE("PCG input errors") {
    SymmetricSparseMatrix<double> m(2);
    m.insert(0, 1, -1);
    const CsrMatrix singular = materialize(m, 0.0);  // zero diagonal
    CHECK_THROWS_AS(pcg_solve(singular, std::vector<double>{1, 1}, {}), NumericalError);
    const CsrMatrix ok = materialize(m, 2.0);
    CHECK_THROWS_AS(pcg_solve(ok, std::vector<double>{1, NAN}, {}), NumericalError);
    CHECK_THROWS_AS(pcg_solve(ok, std::vector<double>{1}, {}), std::invalid_argument);
    CHECK_THROWS_AS(pcg_solve(ok, std::vector<double>{1, 1}, {0.0, 0}), std::invalid_argument);
    const CsrMatrix indefinite = materialize(m, 0.5);  // eigenvalues -0.5 along (1,1) and 1.5 along (1,-1)
    CHECK_THROWS_AS(pcg_solve(indefinite, std::vector<double>{1, 1}, {1e-12, 0}), NumericalError);
  }

  TEST_CASE("one implicit Euler step matches a dense solve") {
    ElasticFixture f(2, 2, 2, true);  // 81 DOFs
    const CsrMatrix k = finalize(f.state, 0.0);
    const auto mass = lumped_mass(f.state);
    DynamicsState s = DynamicsState::at_rest(k.n, 0.05);
    s.u = random_vector(k.n, 4);
    s.v = random_vector(k.n, 5);
    s.f = gravity_load(mass);
    const auto u0 = s.u, v0 = s.v;
    const CgResult r = implicit_euler_step(s, mass, k, {1e-13, 0});
    CHECK(r.converged);

    // Dense oracle on the DOFs that carry mass; the rest stay where they were.
    std::vector<int> free;
    for (std::size_t i = 0; i < k.n; ++i) {
      if (mass[i] > 0) free.push_back(static_cast<int>(i));
    }
    REQUIRE(free.size() < k.n);
    const Eigen::MatrixXd kd = oracle::dense(k);
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd sys(nf, nf);
    Eigen::VectorXd rhs(nf);
    const double h = 0.05;
    for (Eigen::Index i = 0; i < nf; ++i) {
      const int gi = free[i];
      rhs[i] = mass[gi] * (u0[gi] + h * v0[gi]) + h * h * s.f[gi];
      for (Eigen::Index j = 0; j < nf; ++j) sys(i, j) = h * h * kd(gi, free[j]) + (i == j ? mass[gi] : 0.0);
    }
    const Eigen::VectorXd ref = sys.ldlt().solve(rhs);
    double err = 0;
    for (Eigen::Index i = 0; i < nf; ++i) err = std::max(err, std::abs(s.u[free[i]] - ref[i]));
    CHECK(err <= 1e-8 * ref.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < k.n; ++i) {
      if (mass[i] == 0.0) {
        CHECK(s.u[i] == u0[i]);
        CHECK(s.v[i] == 0.0);
      } else {
        CHECK(s.v[i] == doctest::Approx((s.u[i] - u0[i]) / h));
      }
    }
  }

  TEST_CASE("implicit Euler fixed points") {
    ElasticFixture f(2, 2, 2, true);
    const CsrMatrix k = finalize(f.state, 0.0);
    const auto mass = lumped_mass(f.state);

    DynamicsState rest = DynamicsState::at_rest(k.n, 0.01);
    implicit_euler_step(rest, mass, k, {1e-12, 0});
    for (std::size_t i = 0; i < k.n; ++i) {
      CHECK(std::abs(rest.u[i]) <= 1e-10);
      CHECK(std::abs(rest.v[i]) <= 1e-10);
    }

    DynamicsState shifted = DynamicsState::at_rest(k.n, 0.01);
    const double c[3] = {0.3, -1.2, 2.5};
    for (std::size_t i = 0; i < k.n; ++i) shifted.u[i] = mass[i] > 0 ? c[i % 3] : 0.0;
    for (int step = 0; step < 5; ++step) implicit_euler_step(shifted, mass, k, {1e-12, 0});
    for (std::size_t i = 0; i < k.n; ++i) {
      CHECK(std::abs(shifted.u[i] - (mass[i] > 0 ? c[i % 3] : 0.0)) <= 1e-10);
      CHECK(std::abs(shifted.v[i]) <= 1e-10);
    }
  }

  TEST_CASE("free-floating implicit Euler conserves linear momentum") {
    ElasticFixture f(3, 2, 2, false);
    const CsrMatrix k = finalize(f.state, 0.0);
    const auto mass = lumped_mass(f.state);
    DynamicsState s = DynamicsState::at_rest(k.n, 0.02);
    s.v = random_vector(k.n, 8);
    const auto momentum = [&] {
      Vec3 p = Vec3::Zero();
      for (std::size_t i = 0; i < k.n; ++i) p[static_cast<int>(i % 3)] += mass[i] * s.v[i];
      return p;
    };
    const Vec3 p0 = momentum();
    for (int step = 0; step < 10; ++step) {
      implicit_euler_step(s, mass, k, {1e-12, 0});
      CHECK((momentum() - p0).norm() <= 1e-6 * p0.norm());
    }
  }

  TEST_CASE("gravity load and system matrix") {
    const std::vector<double> m{2, 2, 2, 0, 0, 0};
    CHECK(gravity_load(m, 10.0) == std::vector<double>{0, -20, 0, 0, 0, 0});
    ElasticFixture f(1, 1, 1, false);
    const CsrMatrix k = finalize(f.state, 0.0);
    const auto mass = lumped_mass(f.state);
    const Eigen::MatrixXd s = oracle::dense(implicit_euler_matrix(mass, k, 0.1));
    Eigen::MatrixXd ref = 0.01 * oracle::dense(k);
    ref.diagonal() += view(mass);
    CHECK((s - ref).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK_THROWS_AS(implicit_euler_matrix(std::vector<double>(3, 1.0), k, 0.1), std::invalid_argument);
  }
}
