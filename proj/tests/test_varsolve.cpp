#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "brute.hpp"
#include "helpers.hpp"
#include "mfgc/error.hpp"
#include "mfgc/varsolve.hpp"

using namespace mfgc;

TEST_CASE("primal functional B") {
  const auto spec = testing::uniform_spec(8, 4, 2.0);
  const Grid& g = spec.grid;
  ScalarField m(g, 1.0);
  VectorField w(g, 0.0);
  CHECK(eval_B(m, w, spec) == doctest::Approx(1.0));  // T/2 with T = 2
  auto shifted = spec;
  shifted.uT.assign(8, 3.0);
  CHECK(eval_B(m, w, shifted) == doctest::Approx(4.0));
  m(1, 2) = 0.0;
  w(1, 2, 0) = 0.5;
  CHECK(std::isinf(eval_B(m, w, spec)));
  ScalarField neg(g, 1.0);
  neg(2, 0) = -0.1;
  CHECK(std::isinf(eval_B(neg, VectorField(g), spec)));
}

TEST_CASE("dual functional D") {
  const auto spec = testing::uniform_spec(8, 4, 2.0);
  const Grid& g = spec.grid;
  PricePath P(1, g.nt());
  CHECK(eval_D(ScalarField(g), P, ScalarField(g), spec) == 0.0);
  ScalarField u(g, 0.0);
  for (auto& v : u.slice(0)) v = 1.0;
  CHECK(eval_D(u, P, ScalarField(g), spec) == doctest::Approx(-1.0));
  CHECK(eval_D(ScalarField(g), P, ScalarField(g, 1.0), spec) == doctest::Approx(1.0));  // T/2
}

TEST_CASE("transport constraint") {
  auto spec = testing::bump_spec(16, 4);
  const Grid& g = spec.grid;
  ScalarField m(g);
  for (int t = 0; t <= g.nt(); ++t) std::copy(spec.m0.begin(), spec.m0.end(), m.slice(t).begin());
  const FpResidual zero = fp_constraint(m, VectorField(g), spec);
  CHECK(zero.l1_norm() == doctest::Approx(0.0));

  VectorField w(g);
  for (int t = 0; t <= g.nt(); ++t)
    for (std::size_t s = 0; s < g.space_size(); ++s) w(t, s, 0) = std::sin(2 * M_PI * g.coordinate(s, 0));
  const ScalarField div = divergence(w);
  const ScalarField tr = fp_transport(m, w, spec);
  for (int t = 0; t < g.nt(); ++t)
    for (std::size_t s = 0; s < g.space_size(); ++s) CHECK(tr(t, s) == doctest::Approx(div(t + 1, s)).epsilon(1e-12));
}

TEST_CASE("transport adjoint identity") {
  std::mt19937_64 rng(21);
  for (int d : {1, 2}) {
    auto spec = ProblemSpec::constant(Grid(d, 6, 5, 1.0), 2, 2, 2);
    spec.diffusion = DiffusionMatrix::zero(d);
    spec.diffusion.entries[0] = 0.05;
    if (d == 2) spec.diffusion.entries = {0.05, 0.01, 0.01, 0.03};
    const Grid& g = spec.grid;
    ScalarField m(g), u(g);
    VectorField w(g);
    testing::fill_random(m.values(), rng);
    testing::fill_random(w.values(), rng);
    testing::fill_random(u.values(), rng);
    // the adjoint pairs slot n of the transport with u^n
    for (auto& v : u.slice(g.nt())) v = 0.0;
    const ScalarField tr = fp_transport(m, w, spec);
    const FpAdjoint adj = fp_transport_adjoint(u, spec);
    // slot 0 of m is fixed to m0 and excluded from the pairing
    ScalarField m_free = m;
    for (auto& v : m_free.slice(0)) v = 0.0;
    ScalarField tr_free = fp_transport(m_free, w, spec);
    const double lhs = inner(tr_free, u);
    const double rhs = inner(m_free, adj.m) + inner(w, adj.w);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + 1.0));
    (void)tr;
  }
}

TEST_CASE("aggregate flux") {
  const auto spec = testing::uniform_spec(16, 4);
  const Grid& g = spec.grid;
  {
    const auto field = aggregate_flux(VectorField(g), spec);
    for (const auto& v : field.values()) CHECK(v == 0.0);
  }
  {
    const auto field = aggregate_flux(VectorField(g, 1.0), spec);
    for (const auto& v : field.values()) CHECK(v == doctest::Approx(1.0));
  }
  auto waves = ProblemSpec::constant(Grid(1, 16, 4, 1.0), 2, 1.5, 1.4);
  for (std::size_t x = 0; x < 16; ++x) waves.phi[x] = std::sin(2 * M_PI * x / 16.0);
  {
    const auto field = aggregate_flux(VectorField(g, 1.0), waves);
    for (const auto& v : field.values()) CHECK(std::abs(v) <= 1e-12);
  }
}

TEST_CASE("prox_F examples") {
  CHECK(prox_F(2.0, 1.0, 1.0, 2.0) == doctest::Approx(1.0));
  CHECK(prox_F(-5.0, 1.0, 1.0, 2.0) == 0.0);
  CHECK(prox_F(2.0, 1.0, 1.0, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
  const double m = prox_F(3.7, 0.4, 1.3, 1.5);
  CHECK(std::abs(m + 0.4 * 1.3 * std::pow(m, 0.5) - 3.7) <= 1e-12 * 3.7);
}

TEST_CASE("prox_kinetic examples") {
  auto spec = testing::uniform_spec(8, 4);
  std::array<double, 1> w{};
  const std::array<double, 1> zero{0.0}, one{1.0};
  CHECK(prox_kinetic(1.0, zero, 0.7, spec, 0, w) == doctest::Approx(1.0));
  CHECK(w[0] == 0.0);
  CHECK(prox_kinetic(-1.0, zero, 0.7, spec, 0, w) == 0.0);
  CHECK(w[0] == 0.0);

  const double m = prox_kinetic(1.0, one, 1.0, spec, 0, w);
  auto obj = [](double mm, double ww) {
    if (mm <= 0.0) return ww == 0.0 ? 0.5 * (1 + 1) : 1e300;
    return ww * ww / (2 * mm) + 0.5 * ((mm - 1) * (mm - 1) + (ww - 1) * (ww - 1));
  };
  const auto best = testing::argmin_2d(obj, {0.0, 2.0}, {-1.0, 2.0}, 1e-4);
  CHECK(std::abs(m - best.first) <= 1e-3);
  CHECK(std::abs(w[0] - best.second) <= 1e-3);
  CHECK(prox_perspective_kkt(m, w, 1.0, one, 1.0, 1.0, 2.0, 0.0, 2.0) <= 1e-10);
}

TEST_CASE("joint perspective prox") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> val(-2, 2), pos(0.2, 2.0), expo(1.3, 3.5);
  for (int i = 0; i < 200; ++i) {
    const double mbar = val(rng), tau = pos(rng), c = pos(rng), r = expo(rng), theta = pos(rng), q = expo(rng);
    const std::array<double, 2> zbar{val(rng), val(rng)};
    std::array<double, 2> z{};
    const double m = prox_perspective(mbar, zbar, tau, c, r, theta, q, z);
    CHECK(m >= 0.0);
    if (m == 0.0) CHECK(z[0] == 0.0);
    CHECK(prox_perspective_kkt(m, z, mbar, zbar, tau, c, r, theta, q) <= 1e-10);
  }
}

TEST_CASE("prox_Phi_star examples") {
  auto spec = testing::uniform_spec(8, 4);
  std::array<double, 1> out{};
  const std::array<double, 1> zero{0.0}, four{4.0};
  prox_Phi_star(zero, 1.0, spec, out);
  CHECK(out[0] == 0.0);
  prox_Phi_star(four, 1.0, spec, out);
  CHECK(out[0] == doctest::Approx(2.0));

  spec.s = 3.0;
  const std::array<double, 1> pbar{1.3};
  prox_Phi_star(pbar, 0.8, spec, out);
  const double sp = 1.5;
  const double best = testing::argmin_1d(
      [&](double p) { return std::pow(std::abs(p), sp) / sp + (p - 1.3) * (p - 1.3) / 1.6; }, {-3.0, 3.0}, 1e-6);
  CHECK(std::abs(out[0] - best) <= 1e-4);

  // Moreau identity
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> val(-3, 3), pos(0.1, 3);
  for (int i = 0; i < 50; ++i) {
    spec.s = 1.2 + 3.0 * std::abs(val(rng)) / 3.0;
    spec.kappa_phi = pos(rng);
    spec.price_dim = 2;
    const double sigma = pos(rng);
    const std::array<double, 2> p{val(rng), val(rng)};
    std::array<double, 2> a{}, b{}, scaled{p[0] / sigma, p[1] / sigma};
    prox_Phi_star(p, sigma, spec, a);
    prox_Phi(scaled, 1.0 / sigma, spec, b);
    CHECK(std::abs(a[0] - (p[0] - sigma * b[0])) <= 1e-10 * (1 + std::abs(p[0])));
    CHECK(std::abs(a[1] - (p[1] - sigma * b[1])) <= 1e-10 * (1 + std::abs(p[1])));
  }
}

TEST_CASE("primal-dual solve of the uniform instance") {
  const auto spec = testing::uniform_spec(16, 16);
  SolverOptions o;
  o.tol_gap = 1e-8;
  const SolveResult r = solve_primal_dual(spec, o);
  CHECK(r.converged);
  CHECK(r.tau * r.sigma * r.op_norm * r.op_norm <= 1.0);
  const Solution& sol = r.solution;
  const Grid& g = spec.grid;
  double err = 0.0;
  for (int t = 0; t <= g.nt(); ++t)
    for (std::size_t s = 0; s < g.space_size(); ++s) {
      err = std::max(err, std::abs(sol.m(t, s) - 1.0));
      err = std::max(err, std::abs(sol.u(t, s) - (1.0 - g.time(t))));
      err = std::max(err, std::abs(sol.gamma(t, s) - 1.0));
      err = std::max(err, std::abs(sol.w(t, s, 0)));
    }
  for (double p : sol.P.values()) err = std::max(err, std::abs(p));
  CHECK(err <= 1e-5);
  CHECK(std::abs(r.log.entries.back().gap) <= 1e-4);

  std::stringstream csv;
  r.log.write_csv(csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "iter,B,D,gap,fp_res,price_res");
}

TEST_CASE("exact initial guess is a fixed point") {
  const auto spec = testing::uniform_spec(16, 16);
  SolverOptions o;
  o.tol_gap = 1e-10;
  const SolveResult r = solve_primal_dual(spec, o, testing::uniform_exact(spec));
  CHECK(r.converged);
  CHECK(r.iterations <= 10);
}

TEST_CASE("solver refuses bad inputs") {
  auto spec = testing::uniform_spec(8, 4);
  spec.m0[0] = 0.0;
  CHECK_THROWS_AS(solve_primal_dual(spec, {}), Error);
  auto ok = testing::uniform_spec(8, 4);
  SolverOptions o;
  o.tau = 1.0;
  o.sigma_step = 1.0;
  try {
    solve_primal_dual(ok, o);
    FAIL("expected StepSizeViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StepSizeViolation);
  }
}

TEST_CASE("truncated solve returns the best iterate") {
  const auto spec = testing::bump_spec(16, 16);
  SolverOptions o;
  o.max_iter = 5;
  const SolveResult r = solve_primal_dual(spec, o);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 5);
  CHECK(r.log.entries.size() == 5);
  for (double v : r.solution.m.values()) CHECK(std::isfinite(v));
}
