#include "mfgc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mfgc/error.hpp"
#include "mfgc/scheme.hpp"

namespace mfgc {

namespace {

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

std::span<const double> price_at(const Solution& sol, const ProblemSpec& spec, int t) {
  return spec.price_active() ? sol.P.at(t) : std::span<const double>{};
}

}  // namespace

double complementarity_value(const Solution& sol, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  std::vector<double> kin(n);
  double bulk = 0.0;
  for (int t = 1; t <= g.nt(); ++t) {
    const auto m = sol.m.slice(t);
    const auto w = sol.w.slice(t);
    const double k = kinetic_cost(spec, m, w, kin);
    if (!std::isfinite(k))
      throw Error(ErrorKind::PerspectiveViolation, "flux leaves an empty node at time index " + std::to_string(t));
    bulk += k;
    for (std::size_t s = 0; s < n; ++s) {
      bulk += m[s] * spec.coupling(s, std::max(m[s], 0.0));
      if (spec.price_dim > 0) {
        const auto P = sol.P.at(t);
        for (int j = 0; j < spec.price_dim; ++j)
          for (int a = 0; a < d; ++a) bulk += P[static_cast<std::size_t>(j)] * spec.phi_entry(s, j, a) * w[s * d + a];
      }
    }
  }
  double boundary = 0.0;
  for (std::size_t s = 0; s < n; ++s) boundary += sol.m(g.nt(), s) * spec.uT[s] - spec.m0[s] * sol.u(0, s);
  return g.ht() * g.cell_volume() * bulk + g.cell_volume() * boundary;
}

ResidualReport residual_report(const Solution& sol, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  const double w_q = g.ht() * g.cell_volume();
  ResidualReport rep;

  rep.m_min = kInfinity;
  for (double v : sol.m.values()) rep.m_min = std::min(rep.m_min, v);

  const ScalarField hj = hj_operator(sol.u, sol.P, spec);
  rep.primal_value = eval_B(sol.m, sol.w, spec);
  rep.duality_gap = rep.primal_value + eval_D(sol.u, sol.P, hj, spec);

  std::vector<double> grad(n * d), right(n * d), left(n * d), flux(n * d), z(static_cast<std::size_t>(spec.price_dim)),
      psi(static_cast<std::size_t>(spec.price_dim));
  for (int t = 1; t <= g.nt(); ++t) {
    const auto m = sol.m.slice(t);
    const auto w = sol.w.slice(t);
    for (std::size_t s = 0; s < n; ++s) {
      const double fm = spec.coupling(s, std::max(m[s], 0.0));
      rep.hj_violation += w_q * std::max(hj(t, s) - fm, 0.0);
    }
    face_gradient(spec, sol.u.slice(t - 1), price_at(sol, spec, t), grad);
    upwind_velocity(spec, grad, right, left);
    std::vector<double> mplus(m.begin(), m.end());
    for (auto& v : mplus) v = std::max(v, 0.0);
    upwind_flux(g, mplus, right, left, flux);
    for (std::size_t s = 0; s < n; ++s) {
      double acc = 0.0;
      for (int a = 0; a < d; ++a) acc += std::pow(w[s * d + a] - flux[s * d + a], 2);
      rep.feedback_residual += w_q * std::sqrt(acc);
    }
    if (spec.price_dim > 0) {
      aggregate_slice(spec, w, z);
      spec.Psi(z, psi);
      const auto P = sol.P.at(t);
      double acc = 0.0;
      for (int j = 0; j < spec.price_dim; ++j) acc += std::pow(P[static_cast<std::size_t>(j)] - psi[static_cast<std::size_t>(j)], 2);
      rep.price_residual += g.ht() * std::sqrt(acc);
    }
  }

  rep.fp_residual = fp_constraint(sol.m, sol.w, spec).l1_norm();
  const double mass0 = integrate_space(spec.m0, g);
  for (int t = 0; t <= g.nt(); ++t) rep.mass_drift = std::max(rep.mass_drift, std::abs(integrate_space(sol.m, t) - mass0));
  try {
    rep.complementarity = complementarity_value(sol, spec);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::PerspectiveViolation) throw;
    rep.complementarity = kInfinity;
  }
  return rep;
}

Verdict weak_solution_report(const Solution& sol, const ProblemSpec& spec, double tol) {
  Verdict v;
  v.report = residual_report(sol, spec);
  const ResidualReport& r = v.report;
  const double rel = tol * (1.0 + std::abs(r.primal_value));
  const std::pair<const char*, bool> checks[] = {
      {"duality_gap", std::abs(r.duality_gap) <= rel},
      {"hj_violation", r.hj_violation <= tol},
      {"fp_residual", r.fp_residual <= tol},
      {"price_residual", r.price_residual <= tol},
      {"feedback_residual", r.feedback_residual <= tol},
      {"complementarity", std::abs(r.complementarity) <= rel},
      {"m_min", r.m_min >= -tol},
  };
  v.passed = true;
  for (const auto& [name, ok] : checks) {
    if (!ok) {
      v.passed = false;
      v.failure = name;
      break;
    }
  }
  return v;
}

Solution random_initial_guess(const ProblemSpec& spec, std::uint64_t seed) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  Solution sol = Solution::initial(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> flux(-0.5, 0.5), unit(-1.0, 1.0);
  for (int t = 0; t <= g.nt(); ++t) {
    // Fluxes constant along their own axis are divergence free.
    std::vector<double> lines(static_cast<std::size_t>(d * g.nx()));
    for (auto& v : lines) v = flux(rng);
    for (std::size_t s = 0; s < g.space_size(); ++s) {
      const auto c = g.coords(s);
      if (d == 1) {
        sol.w(t, s, 0) = lines[0];
      } else {
        sol.w(t, s, 0) = lines[static_cast<std::size_t>(c[1])];
        sol.w(t, s, 1) = lines[static_cast<std::size_t>(g.nx() + c[0])];
      }
    }
    if (t < g.nt())
      for (auto& v : sol.u.slice(t)) v = unit(rng);
    if (spec.price_active())
      for (auto& v : sol.P.at(t)) v = unit(rng);
  }
  return sol;
}

UniquenessResult uniqueness_probe(const ProblemSpec& spec, const SolverOptions& opts, int n_inits, std::uint64_t seed,
                                  double support_threshold) {
  if (n_inits < 1) throw Error(ErrorKind::NoConvergence, "uniqueness_probe needs at least one initialization");
  const Grid& g = spec.grid;
  UniquenessResult res;
  std::vector<Solution> sols;
  for (int i = 0; i < n_inits; ++i) {
    SolveResult r = solve_primal_dual(spec, opts, random_initial_guess(spec, seed + static_cast<std::uint64_t>(i)));
    res.all_converged = res.all_converged && r.converged;
    sols.push_back(std::move(r.solution));
    ++res.solves;
  }
  for (std::size_t i = 0; i < sols.size(); ++i) {
    for (std::size_t j = i + 1; j < sols.size(); ++j) {
      ScalarField dm(g), du(g);
      for (std::size_t e = 0; e < dm.size(); ++e) {
        const double mi = sols[i].m.values()[e], mj = sols[j].m.values()[e];
        dm.values()[e] = std::abs(mi - mj);
        du.values()[e] = std::min(mi, mj) > support_threshold ? std::abs(sols[i].u.values()[e] - sols[j].u.values()[e]) : 0.0;
      }
      std::vector<double> dP(static_cast<std::size_t>(g.nt() + 1), 0.0);
      if (spec.price_dim > 0) {
        for (int t = 0; t <= g.nt(); ++t) {
          std::vector<double> diff(static_cast<std::size_t>(spec.price_dim));
          for (int k = 0; k < spec.price_dim; ++k)
            diff[static_cast<std::size_t>(k)] = sols[i].P.at(t)[static_cast<std::size_t>(k)] - sols[j].P.at(t)[static_cast<std::size_t>(k)];
          dP[static_cast<std::size_t>(t)] = norm(diff);
        }
      }
      res.max_m_distance = std::max(res.max_m_distance, integrate_Q(dm));
      res.max_u_distance = std::max(res.max_u_distance, integrate_Q(du));
      res.max_P_distance = std::max(res.max_P_distance, integrate_time(dP, g));
    }
  }
  return res;
}

}  // namespace mfgc
