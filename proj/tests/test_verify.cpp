#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mfgc/error.hpp"
#include "mfgc/verify.hpp"

using namespace mfgc;

TEST_CASE("uniform exact quadruplet is certified") {
  const auto spec = testing::uniform_spec(32, 32);
  const Solution sol = testing::uniform_exact(spec);
  CHECK(std::abs(complementarity_value(sol, spec)) <= 1e-12);
  const Verdict v = weak_solution_report(sol, spec, 1e-8);
  CHECK(v.passed);
  CHECK(v.failure.empty());
  const ResidualReport& r = v.report;
  CHECK(std::abs(r.duality_gap) <= 1e-12);
  CHECK(r.hj_violation <= 1e-12);
  CHECK(r.fp_residual <= 1e-12);
  CHECK(r.price_residual == 0.0);
  CHECK(r.feedback_residual == 0.0);
  CHECK(r.mass_drift <= 1e-12);
  CHECK(r.m_min == doctest::Approx(1.0));
}

TEST_CASE("price perturbation breaks the verdict") {
  const auto spec = testing::uniform_spec(32, 32);
  Solution sol = testing::uniform_exact(spec);
  for (auto& p : sol.P.values()) p = 1.0;
  const Verdict v = weak_solution_report(sol, spec, 1e-8);
  CHECK_FALSE(v.passed);
  CHECK(v.report.price_residual == doctest::Approx(1.0));  // T |1 - 0|
}

TEST_CASE("complementarity of the pure congestion state") {
  auto spec = testing::bump_spec(16, 8);
  spec.uT.assign(16, 0.0);
  spec.theta.assign(16, 2.5);
  Solution sol = Solution::initial(spec);
  for (auto& v : sol.u.values()) v = 0.0;
  for (auto& v : sol.w.values()) v = 0.0;
  for (auto& v : sol.P.values()) v = 0.0;
  double expected = 0.0;
  for (std::size_t s = 0; s < 16; ++s) expected += spec.m0[s] * spec.coupling(s, spec.m0[s]);
  expected *= spec.grid.cell_volume() * spec.grid.horizon();
  CHECK(complementarity_value(sol, spec) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("complementarity is linear in u(0)") {
  const auto spec = testing::uniform_spec(16, 16);
  Solution sol = testing::uniform_exact(spec);
  const double base = complementarity_value(sol, spec);
  for (double eps : {1.0, 0.25, -0.5}) {
    Solution moved = sol;
    for (auto& v : moved.u.slice(0)) v += eps;
    CHECK(complementarity_value(moved, spec) - base == doctest::Approx(-eps).epsilon(1e-12));
  }
}

TEST_CASE("flux out of an empty node") {
  const auto spec = testing::uniform_spec(8, 4);
  Solution sol = testing::uniform_exact(spec);
  sol.m(2, 3) = 0.0;
  sol.w(2, 3, 0) = 0.2;
  try {
    complementarity_value(sol, spec);
    FAIL("expected PerspectiveViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PerspectiveViolation);
  }
  const Verdict v = weak_solution_report(sol, spec, 1e-3);
  CHECK_FALSE(v.passed);
}

TEST_CASE("primal-dual output on the bump instance is certified") {
  const auto spec = testing::bump_spec(32, 32);
  SolverOptions o;
  o.tol_gap = 1e-4;
  const SolveResult r = solve_primal_dual(spec, o);
  CHECK(r.converged);
  const Verdict v = weak_solution_report(r.solution, spec, 5e-3);
  CHECK(v.passed);
  CHECK(v.report.mass_drift <= 1e-3);
}

TEST_CASE("uniqueness probe") {
  const auto spec = testing::uniform_spec(16, 16);
  SolverOptions o;
  o.tol_gap = 1e-8;
  const UniquenessResult three = uniqueness_probe(spec, o, 3, 0);
  CHECK(three.solves == 3);
  CHECK(three.all_converged);
  CHECK(three.max_m_distance <= 1e-4);
  CHECK(three.max_P_distance <= 1e-4);
  const UniquenessResult one = uniqueness_probe(spec, o, 1, 0);
  CHECK(one.max_m_distance == 0.0);
  CHECK(one.max_P_distance == 0.0);
  CHECK_THROWS_AS(uniqueness_probe(spec, o, 0, 0), Error);
}

TEST_CASE("random initial guesses are reproducible and keep m = m0") {
  const auto spec = testing::bump_spec(16, 8);
  const Solution a = random_initial_guess(spec, 42), b = random_initial_guess(spec, 42), c = random_initial_guess(spec, 43);
  CHECK(a.u.values() == b.u.values());
  CHECK(a.w.values() == b.w.values());
  CHECK(a.u.values() != c.u.values());
  for (int t = 0; t <= 8; ++t)
    for (std::size_t s = 0; s < 16; ++s) CHECK(a.m(t, s) == spec.m0[s]);
  // line-constant fluxes are divergence free
  {
    const auto field = divergence(a.w);
    for (double v : field.values()) CHECK(std::abs(v) <= 1e-12);
  }
}
