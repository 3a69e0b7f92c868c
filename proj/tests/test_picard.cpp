#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "mfgc/error.hpp"
#include "mfgc/picard.hpp"

using namespace mfgc;

namespace {

PicardOptions explicit_opts() {
  PicardOptions o;
  o.scheme = TimeScheme::Explicit;
  return o;
}

}  // namespace

TEST_CASE("HJB sweep on the uniform instance") {
  const auto spec = testing::uniform_spec(16, 16);
  const Grid& g = spec.grid;
  const ScalarField m(g, 1.0);
  const PricePath P(1, g.nt());
  for (const auto& opts : {PicardOptions{}, explicit_opts()}) {
    const ScalarField u = solve_hjb(m, P, spec, opts);
    for (int t = 0; t <= g.nt(); ++t)
      for (std::size_t s = 0; s < g.space_size(); ++s) CHECK(std::abs(u(t, s) - (1.0 - g.time(t))) <= 1e-12);
  }
}

TEST_CASE("constants solve the HJB sweep without congestion") {
  auto spec = testing::uniform_spec(16, 8);
  spec.theta.assign(16, 0.0);
  spec.uT.assign(16, 5.0);
  const ScalarField u = solve_hjb(ScalarField(spec.grid, 1.0), PricePath(1, 8), spec);
  for (double v : u.values()) CHECK(v == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("HJB sweep is monotone in the terminal cost") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> bump(0.0, 0.5);
  auto lo = testing::bump_spec(24, 12);
  const Grid& g = lo.grid;
  ScalarField m(g);
  for (int t = 0; t <= g.nt(); ++t) std::copy(lo.m0.begin(), lo.m0.end(), m.slice(t).begin());
  PricePath P(1, g.nt(), 0.1);
  for (int trial = 0; trial < 5; ++trial) {
    auto hi = lo;
    for (auto& v : hi.uT) v += bump(rng);
    for (const auto& opts : {PicardOptions{}, explicit_opts()}) {
      const ScalarField ul = solve_hjb(m, P, lo, opts);
      const ScalarField uh = solve_hjb(m, P, hi, opts);
      for (std::size_t i = 0; i < ul.size(); ++i) CHECK(uh.values()[i] >= ul.values()[i] - 1e-12);
    }
  }
}

TEST_CASE("HJB sweep rejects negative densities") {
  const auto spec = testing::uniform_spec(8, 4);
  ScalarField m(spec.grid, 1.0);
  m(2, 3) = -0.5;
  CHECK_THROWS_AS(solve_hjb(m, PricePath(1, 4), spec), Error);
}

TEST_CASE("feedback velocity") {
  auto spec = testing::uniform_spec(8, 4);
  const Grid& g = spec.grid;
  const SplitVelocity still = feedback(ScalarField(g, 2.0), PricePath(1, 4), spec);
  for (double v : still.right.values()) CHECK(v == 0.0);
  for (double v : still.left.values()) CHECK(v == 0.0);

  // Du + phi^T P = 1 everywhere: v = -dH = -1, carried through the left faces.
  const SplitVelocity v = feedback(ScalarField(g, 0.0), PricePath(1, 4, 1.0), spec);
  for (double x : v.right.values()) CHECK(x == 0.0);
  for (double x : v.left.values()) CHECK(x == doctest::Approx(-1.0));

  ScalarField u(g);
  for (int t = 0; t <= g.nt(); ++t)
    for (std::size_t s = 0; s < g.space_size(); ++s) u(t, s) = 1.0 - g.time(t);
  const SplitVelocity none = feedback(u, PricePath(1, 4), spec);
  for (double x : none.right.values()) CHECK(x == 0.0);
}

TEST_CASE("FP sweep") {
  auto spec = testing::bump_spec(16, 8);
  const Grid& g = spec.grid;
  for (const auto& opts : {PicardOptions{}, explicit_opts()}) {
    const ScalarField rest = solve_fp(VectorField(g), spec, opts);
    for (int t = 0; t <= g.nt(); ++t)
      for (std::size_t s = 0; s < g.space_size(); ++s) CHECK(rest(t, s) == doctest::Approx(spec.m0[s]).epsilon(1e-13));
  }

  // unit CFL: c0 ht = hx, so each explicit step moves the profile by one node
  PicardOptions unit = explicit_opts();
  unit.cfl_safety = 1.0;
  unit.substep = false;
  const ScalarField moved = solve_fp(VectorField(g, 0.5), spec, unit);
  for (int t = 0; t <= g.nt(); ++t)
    for (std::size_t s = 0; s < g.space_size(); ++s)
      CHECK(moved(t, g.shift(s, 0, t)) == doctest::Approx(spec.m0[s]).epsilon(1e-12));

  PicardOptions strict = explicit_opts();
  strict.substep = false;
  try {
    solve_fp(VectorField(g, 2.0), spec, strict);
    FAIL("expected CFLViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CFLViolation);
    CHECK(std::string(e.what()).find("needs ht <=") != std::string::npos);
  }
}

TEST_CASE("FP sweep conserves mass and sign") {
  std::mt19937_64 rng(2);
  auto spec = testing::bump_spec(20, 10);
  spec.diffusion.entries[0] = 0.01;
  const Grid& g = spec.grid;
  VectorField v(g);
  testing::fill_random(v.values(), rng, -2.0, 2.0);
  for (const auto& opts : {PicardOptions{}, explicit_opts()}) {
    const ScalarField m = solve_fp(v, spec, opts);
    for (int t = 0; t <= g.nt(); ++t) {
      CHECK(std::abs(integrate_space(m, t) - 1.0) <= 1e-12);
      for (double x : m.slice(t)) CHECK(x >= -1e-14);
    }
  }
}

TEST_CASE("price update") {
  auto spec = testing::bump_spec(16, 8);
  const Grid& g = spec.grid;
  ScalarField m(g);
  for (int t = 0; t <= g.nt(); ++t) std::copy(spec.m0.begin(), spec.m0.end(), m.slice(t).begin());
  {
    const auto field = update_price(m, split_velocity(VectorField(g)), spec);
    for (double p : field.values()) CHECK(p == 0.0);
  }
  {
    const auto field = update_price(m, split_velocity(VectorField(g, 0.7)), spec);
    for (double p : field.values()) CHECK(p == doctest::Approx(0.7));
  }
}

TEST_CASE("Picard on the uniform instance") {
  const auto spec = testing::uniform_spec(16, 16);
  for (const auto& opts : {PicardOptions{}, explicit_opts()}) {
    const PicardResult r = picard_iterate(spec, opts);
    CHECK(r.converged);
    CHECK(r.iterations <= 3);
    const Solution exact = testing::uniform_exact(spec);
    for (std::size_t i = 0; i < exact.m.size(); ++i) {
      CHECK(std::abs(r.solution.m.values()[i] - 1.0) <= 1e-12);
      CHECK(std::abs(r.solution.u.values()[i] - exact.u.values()[i]) <= 1e-12);
      CHECK(std::abs(r.solution.gamma.values()[i] - 1.0) <= 1e-12);
    }
    for (double w : r.solution.w.values()) CHECK(std::abs(w) <= 1e-12);
    for (double p : r.solution.P.values()) CHECK(std::abs(p) <= 1e-12);
  }
}

TEST_CASE("infinite tolerance stops after one sweep") {
  const auto spec = testing::bump_spec(16, 8);
  PicardOptions o;
  o.tol_fixed_point = std::numeric_limits<double>::infinity();
  const PicardResult r = picard_iterate(spec, o);
  CHECK(r.iterations == 1);
  CHECK(r.converged);
  for (double v : r.solution.u.values()) CHECK(std::isfinite(v));
  for (double v : r.solution.m.values()) CHECK(std::isfinite(v));
}

TEST_CASE("damping must lie in (0, 1]") {
  const auto spec = testing::uniform_spec(8, 4);
  PicardOptions o;
  o.damping = 0.0;
  CHECK_THROWS_AS(picard_iterate(spec, o), Error);
  o.damping = 1.5;
  CHECK_THROWS_AS(picard_iterate(spec, o), Error);
}

TEST_CASE("harmonic schedule converges on a small bump") {
  const auto spec = testing::bump_spec(16, 16);
  PicardOptions o;
  o.max_outer = 3000;
  const PicardResult r = picard_iterate(spec, o);
  CHECK(r.converged);
  for (int t = 0; t <= spec.grid.nt(); ++t) CHECK(std::abs(integrate_space(r.solution.m, t) - 1.0) <= 1e-10);
}
