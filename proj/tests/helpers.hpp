#pragma once

#include <cmath>
#include <random>

#include "mfgc/model.hpp"
#include "mfgc/varsolve.hpp"

namespace testing {

/// q = r = s = 2, unit coefficients, phi = 1, A = 0, m0 = 1, uT = 0.
inline mfgc::ProblemSpec uniform_spec(int nx = 32, int nt = 32, double horizon = 1.0) {
  return mfgc::ProblemSpec::constant(mfgc::Grid(1, nx, nt, horizon), 2.0, 2.0, 2.0);
}

/// Normalized periodic gaussian m0 at 0.3 (width 0.15), uT = cos(2 pi x).
inline mfgc::ProblemSpec bump_spec(int nx = 64, int nt = 64) {
  auto spec = uniform_spec(nx, nt);
  const auto& g = spec.grid;
  double mass = 0.0;
  for (std::size_t s = 0; s < g.space_size(); ++s) {
    const double x = g.coordinate(s, 0);
    double dx = std::abs(x - 0.3);
    dx = std::min(dx, 1.0 - dx);
    spec.m0[s] = std::exp(-dx * dx / (2.0 * 0.15 * 0.15));
    mass += spec.m0[s] * g.hx();
    spec.uT[s] = std::cos(2.0 * M_PI * x);
  }
  for (auto& v : spec.m0) v /= mass;
  return spec;
}

/// Exact solution of the uniform instance.
inline mfgc::Solution uniform_exact(const mfgc::ProblemSpec& spec) {
  auto sol = mfgc::Solution::initial(spec);
  const auto& g = spec.grid;
  for (int t = 0; t <= g.nt(); ++t)
    for (std::size_t s = 0; s < g.space_size(); ++s) {
      sol.u(t, s) = g.horizon() - g.time(t);
      sol.m(t, s) = 1.0;
      sol.gamma(t, s) = 1.0;
    }
  return sol;
}

inline void fill_random(std::vector<double>& v, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& x : v) x = dist(rng);
}

}  // namespace testing
