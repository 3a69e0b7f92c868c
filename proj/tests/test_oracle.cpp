#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "mfgc/varsolve.hpp"
#include "oracle.hpp"

using namespace mfgc;

TEST_CASE("oracle reproduces the uniform state") {
  auto spec = testing::uniform_spec(8, 8);
  const oracle::Result o = oracle::solve(spec);
  CHECK(o.converged);
  for (std::size_t i = spec.grid.space_size(); i < o.m.size(); ++i) CHECK(o.m[i] == doctest::Approx(1.0).epsilon(1e-8));
  for (std::size_t i = spec.grid.space_size(); i < o.w.size(); ++i) CHECK(std::abs(o.w[i]) <= 1e-8);
}

TEST_CASE("oracle refuses unsupported instances") {
  auto spec = ProblemSpec::constant(Grid(1, 8, 8, 1.0), 3.0, 2.0, 2.0);
  CHECK_THROWS(oracle::solve(spec));
  auto plane = ProblemSpec::constant(Grid(2, 4, 4, 1.0), 2.0, 2.0, 2.0);
  CHECK_THROWS(oracle::solve(plane));
}

TEST_CASE("random specs are reproducible and valid") {
  const auto a = oracle::random_spec(5), b = oracle::random_spec(5), c = oracle::random_spec(6, true);
  CHECK(a.theta == b.theta);
  CHECK(a.m0 == b.m0);
  CHECK(a.theta != c.theta);
  CHECK(check_assumptions(a).all_passed());
  CHECK(check_assumptions(c).all_passed());
  CHECK_FALSE(c.diffusion.is_zero());
}

TEST_CASE("primal-dual agrees with the oracle on a random instance") {
  const auto spec = oracle::random_spec(100);
  const oracle::Result o = oracle::solve(spec);
  CHECK(o.grad_norm <= 1e-6);
  SolverOptions opts;
  opts.tol_gap = 1e-10;
  opts.max_iter = 200000;
  const SolveResult r = solve_primal_dual(spec, opts);
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  double err = 0.0;
  for (int t = 1; t <= g.nt(); ++t)
    for (std::size_t s = 0; s < n; ++s) err = std::max(err, std::abs(r.solution.m(t, s) - o.m[t * n + s]));
  CHECK(err <= 1e-5);
  CHECK(eval_B(r.solution.m, r.solution.w, spec) == doctest::Approx(o.objective).epsilon(1e-6));
}
