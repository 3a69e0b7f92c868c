#include "mfgc/picard.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mfgc/error.hpp"
#include "mfgc/scheme.hpp"

namespace mfgc {

namespace {

double diffusion_rate(const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  double diag = 0.0;
  for (int i = 0; i < g.dim(); ++i) diag += spec.diffusion(i, i);
  return 2.0 * diag / (g.hx() * g.hx());
}

std::span<const double> price_at(const PricePath& P, const ProblemSpec& spec, int t) {
  return spec.price_active() ? P.at(t) : std::span<const double>{};
}

void check_density(const ScalarField& m) {
  for (double v : m.values())
    if (v < 0.0) throw Error(ErrorKind::NegativeDensity, "solve_hjb needs m >= 0, got " + format_double(v));
}

// Right side L u + f - H of the HJB step at slice u; returns the explicit
// stability rate (the coefficient of u_s in the update).
double hjb_rhs(const ProblemSpec& spec, std::span<const double> u, std::span<const double> price,
               std::span<const double> fm, std::span<double> out, std::vector<double>& grad,
               std::vector<double>& lap, double diff_rate) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  face_gradient(spec, u, price, grad);
  std::fill(lap.begin(), lap.end(), 0.0);
  if (!spec.diffusion.is_zero()) diffusion_slice(g, spec.diffusion, u, lap);
  std::array<double, 4> p{}, dh{};
  const std::span<double> pv(p.data(), static_cast<std::size_t>(2 * d));
  const std::span<double> dv(dh.data(), static_cast<std::size_t>(2 * d));
  double rate = 0.0;
  for (std::size_t s = 0; s < g.space_size(); ++s) {
    upwind_vector(g, grad, s, pv);
    spec.dH(s, pv, dv);
    double local = 0.0;
    for (int i = 0; i < 2 * d; ++i) local += std::abs(dh[static_cast<std::size_t>(i)]);
    rate = std::max(rate, local / g.hx());
    out[s] = lap[s] + fm[s] - spec.hamiltonian(s, pv);
  }
  return rate + diff_rate;
}

std::string cfl_message(const char* what, double rate, double safety) {
  return std::string(what) + ": explicit step needs ht <= " + format_double(safety / rate);
}

}  // namespace

namespace {

// Neighbour tables for node-local updates.
struct Stencil {
  explicit Stencil(const Grid& g) : d(g.dim()), n(g.space_size()), next(n * d), prev(n * d) {
    for (std::size_t s = 0; s < n; ++s)
      for (int a = 0; a < d; ++a) {
        next[s * d + a] = g.shift(s, a, 1);
        prev[s * d + a] = g.shift(s, a, -1);
      }
    if (d == 2) {
      corners.resize(n * 4);
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t xp = next[s * 2], xm = prev[s * 2];
        corners[s * 4 + 0] = next[xp * 2 + 1];
        corners[s * 4 + 1] = prev[xp * 2 + 1];
        corners[s * 4 + 2] = next[xm * 2 + 1];
        corners[s * 4 + 3] = prev[xm * 2 + 1];
      }
    }
  }
  int d;
  std::size_t n;
  std::vector<std::size_t> next, prev, corners;  // corners: ++, +-, -+, --
};

// Off-centre part of A:D^2 v at s (everything except the -2 sum A_ii v_s / h^2 term).
double diffusion_neighbours(const ProblemSpec& spec, const Stencil& st, std::span<const double> v, std::size_t s) {
  const double inv_h2 = 1.0 / (spec.grid.hx() * spec.grid.hx());
  double acc = 0.0;
  for (int i = 0; i < st.d; ++i) {
    const double aii = spec.diffusion(i, i);
    if (aii != 0.0) acc += aii * (v[st.next[s * st.d + i]] + v[st.prev[s * st.d + i]]) * inv_h2;
  }
  if (st.d == 2) {
    const double off = spec.diffusion(0, 1) + spec.diffusion(1, 0);
    if (off != 0.0) {
      const std::size_t* c = &st.corners[s * 4];
      acc += off * (v[c[0]] - v[c[1]] - v[c[2]] + v[c[3]]) * 0.25 * inv_h2;
    }
  }
  return acc;
}

// Residual of the implicit HJB step at node s and its derivative in v_s.
std::pair<double, double> hjb_local(const ProblemSpec& spec, const Stencil& st, std::span<const double> v,
                                    std::span<const double> phiP, double rhs, double ht, double diag_rate,
                                    std::size_t s) {
  const int d = st.d;
  const double inv_h = 1.0 / spec.grid.hx();
  std::array<double, 4> p{}, dh{};
  for (int a = 0; a < d; ++a) {
    const std::size_t nx = st.next[s * d + a], px = st.prev[s * d + a];
    const double gr = (v[nx] - v[s]) * inv_h + phiP[s * d + a];
    const double gl = (v[s] - v[px]) * inv_h + phiP[px * d + a];
    p[static_cast<std::size_t>(a)] = std::min(gr, 0.0);
    p[static_cast<std::size_t>(d + a)] = std::max(gl, 0.0);
  }
  const std::span<const double> pv(p.data(), static_cast<std::size_t>(2 * d));
  spec.dH(s, pv, std::span<double>(dh.data(), static_cast<std::size_t>(2 * d)));
  double slope = 0.0;
  for (int i = 0; i < 2 * d; ++i) slope += std::abs(dh[static_cast<std::size_t>(i)]);
  const double lap = diffusion_neighbours(spec, st, v, s) - diag_rate * v[s];
  const double res = v[s] - ht * lap + ht * spec.hamiltonian(s, pv) - rhs;
  return {res, 1.0 + ht * diag_rate + ht * slope * inv_h};
}

void phi_times_price(const ProblemSpec& spec, std::span<const double> price, std::vector<double>& out) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  std::fill(out.begin(), out.end(), 0.0);
  if (price.empty()) return;
  for (std::size_t s = 0; s < g.space_size(); ++s)
    for (int a = 0; a < d; ++a)
      for (int k = 0; k < spec.price_dim; ++k)
        out[s * d + a] += spec.phi_entry(s, k, a) * price[static_cast<std::size_t>(k)];
}

ScalarField solve_hjb_implicit(const ScalarField& m, const PricePath& P, const ProblemSpec& spec,
                               const PicardOptions& opts) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const Stencil st(g);
  const double diag_rate = diffusion_rate(spec);
  const double ht = g.ht();
  ScalarField u(g);
  std::copy(spec.uT.begin(), spec.uT.end(), u.slice(g.nt()).begin());
  std::vector<double> v(spec.uT), rhs(n), phiP(n * g.dim());
  for (int k = g.nt(); k >= 1; --k) {
    phi_times_price(spec, price_at(P, spec, k), phiP);
    const auto uk = u.slice(k);
    const auto mk = m.slice(k);
    double scale = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
      rhs[s] = uk[s] + ht * spec.coupling(s, mk[s]);
      scale = std::max(scale, std::abs(rhs[s]));
    }
    bool done = false;
    for (int sweep = 0; sweep < opts.max_sweeps && !done; ++sweep) {
      const bool forward = sweep % 2 == 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = forward ? i : n - 1 - i;
        const auto [res, slope] = hjb_local(spec, st, v, phiP, rhs[s], ht, diag_rate, s);
        v[s] -= res / slope;
      }
      double worst = 0.0;
      for (std::size_t s = 0; s < n; ++s)
        worst = std::max(worst, std::abs(hjb_local(spec, st, v, phiP, rhs[s], ht, diag_rate, s).first));
      done = worst <= opts.sweep_tol * scale;
    }
    if (!done) throw Error(ErrorKind::NoConvergence, "solve_hjb: implicit step did not converge");
    std::copy(v.begin(), v.end(), u.slice(k - 1).begin());
  }
  return u;
}

ScalarField solve_fp_implicit(const SplitVelocity& vel, const ProblemSpec& spec, const PicardOptions& opts) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  const Stencil st(g);
  const double diag_rate = diffusion_rate(spec);
  const double ht = g.ht();
  const double inv_h = 1.0 / g.hx();
  ScalarField m(g);
  std::copy(spec.m0.begin(), spec.m0.end(), m.slice(0).begin());
  std::vector<double> cur(spec.m0), diag(n);
  for (int k = 1; k <= g.nt(); ++k) {
    const auto right = vel.right.slice(k);
    const auto left = vel.left.slice(k);
    const auto prev = m.slice(k - 1);
    for (std::size_t s = 0; s < n; ++s) {
      double out = 0.0;
      for (int a = 0; a < d; ++a) out += right[s * d + a] - left[s * d + a];
      diag[s] = 1.0 + ht * (out * inv_h + diag_rate);
    }
    auto inflow = [&](std::size_t s) {
      double acc = 0.0;
      for (int a = 0; a < d; ++a) {
        const std::size_t nx = st.next[s * d + a], px = st.prev[s * d + a];
        acc += (cur[px] * right[px * d + a] - cur[nx] * left[nx * d + a]) * inv_h;
      }
      return acc + diffusion_neighbours(spec, st, cur, s);
    };
    double scale = 1.0;
    for (std::size_t s = 0; s < n; ++s) scale = std::max(scale, prev[s]);
    bool done = false;
    for (int sweep = 0; sweep < opts.max_sweeps && !done; ++sweep) {
      const bool forward = sweep % 2 == 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = forward ? i : n - 1 - i;
        cur[s] = (prev[s] + ht * inflow(s)) / diag[s];
      }
      double worst = 0.0;
      for (std::size_t s = 0; s < n; ++s) worst = std::max(worst, std::abs(cur[s] * diag[s] - ht * inflow(s) - prev[s]));
      done = worst <= opts.sweep_tol * scale;
    }
    if (!done) throw Error(ErrorKind::NoConvergence, "solve_fp: implicit step did not converge");
    std::copy(cur.begin(), cur.end(), m.slice(k).begin());
  }
  return m;
}

}  // namespace

ScalarField solve_hjb(const ScalarField& m, const PricePath& P, const ProblemSpec& spec, const PicardOptions& opts) {
  check_density(m);
  if (opts.scheme == TimeScheme::Implicit) return solve_hjb_implicit(m, P, spec, opts);
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const double diff_rate = diffusion_rate(spec);
  ScalarField u(g);
  std::copy(spec.uT.begin(), spec.uT.end(), u.slice(g.nt()).begin());
  std::vector<double> cur(spec.uT), rhs(n), fm(n), grad(n * g.dim()), lap(n);
  for (int k = g.nt(); k >= 1; --k) {
    const auto mk = m.slice(k);
    for (std::size_t s = 0; s < n; ++s) fm[s] = spec.coupling(s, mk[s]);
    const auto price = price_at(P, spec, k);
    double remaining = g.ht();
    while (remaining > 0.0) {
      const double rate = hjb_rhs(spec, cur, price, fm, rhs, grad, lap, diff_rate);
      double step = remaining;
      if (rate > 0.0 && step * rate > opts.cfl_safety) {
        if (!opts.substep) throw Error(ErrorKind::CFLViolation, cfl_message("solve_hjb", rate, opts.cfl_safety));
        step = opts.cfl_safety / rate;
      }
      for (std::size_t s = 0; s < n; ++s) cur[s] += step * rhs[s];
      remaining -= step;
      if (remaining < 1e-14 * g.ht()) remaining = 0.0;
    }
    std::copy(cur.begin(), cur.end(), u.slice(k - 1).begin());
  }
  for (double v : u.values())
    if (!std::isfinite(v)) throw Error(ErrorKind::NoConvergence, "solve_hjb produced a non-finite value");
  return u;
}

SplitVelocity feedback(const ScalarField& u, const PricePath& P, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  SplitVelocity v{VectorField(g), VectorField(g)};
  std::vector<double> grad(g.space_size() * g.dim());
  for (int t = 0; t <= g.nt(); ++t) {
    face_gradient(spec, u.slice(t == 0 ? 0 : t - 1), price_at(P, spec, t), grad);
    upwind_velocity(spec, grad, v.right.slice(t), v.left.slice(t));
  }
  return v;
}

SplitVelocity split_velocity(const VectorField& v) {
  SplitVelocity out{VectorField(v.grid()), VectorField(v.grid())};
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.right.values()[i] = std::max(v.values()[i], 0.0);
    out.left.values()[i] = std::min(v.values()[i], 0.0);
  }
  return out;
}

ScalarField solve_fp(const SplitVelocity& v, const ProblemSpec& spec, const PicardOptions& opts) {
  if (opts.scheme == TimeScheme::Implicit) return solve_fp_implicit(v, spec, opts);
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  const double diff_rate = diffusion_rate(spec);
  const bool diffusive = !spec.diffusion.is_zero();
  ScalarField m(g);
  std::vector<double> cur(spec.m0), flux(n * d), div(n), lap(n, 0.0);
  std::copy(cur.begin(), cur.end(), m.slice(0).begin());
  for (int k = 1; k <= g.nt(); ++k) {
    const auto right = v.right.slice(k);
    const auto left = v.left.slice(k);
    double rate = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double out = 0.0;
      for (int a = 0; a < d; ++a) out += right[s * d + a] - left[s * d + a];
      rate = std::max(rate, out / g.hx());
    }
    rate += diff_rate;
    int nsub = 1;
    if (rate * g.ht() > opts.cfl_safety) {
      if (!opts.substep) throw Error(ErrorKind::CFLViolation, cfl_message("solve_fp", rate, opts.cfl_safety));
      nsub = static_cast<int>(std::ceil(rate * g.ht() / opts.cfl_safety - 1e-12));
    }
    const double step = g.ht() / nsub;
    for (int sub = 0; sub < nsub; ++sub) {
      upwind_flux(g, cur, right, left, flux);
      divergence_slice(g, flux, div);
      if (diffusive) diffusion_slice(g, spec.diffusion, cur, lap);
      for (std::size_t s = 0; s < n; ++s) cur[s] += step * (lap[s] - div[s]);
    }
    std::copy(cur.begin(), cur.end(), m.slice(k).begin());
  }
  return m;
}

ScalarField solve_fp(const VectorField& v, const ProblemSpec& spec, const PicardOptions& opts) {
  return solve_fp(split_velocity(v), spec, opts);
}

VectorField transport_flux(const ScalarField& m, const SplitVelocity& v) {
  const Grid& g = m.grid();
  VectorField w(g);
  for (int t = 0; t <= g.nt(); ++t) upwind_flux(g, m.slice(t), v.right.slice(t), v.left.slice(t), w.slice(t));
  return w;
}

PricePath update_price(const ScalarField& m, const SplitVelocity& v, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  PricePath P(spec.price_dim, g.nt());
  const VectorField w = transport_flux(m, v);
  std::vector<double> z(static_cast<std::size_t>(spec.price_dim));
  for (int t = 0; t <= g.nt(); ++t) {
    aggregate_slice(spec, w.slice(t), z);
    spec.Psi(z, P.at(t));
  }
  return P;
}

PicardResult picard_iterate(const ProblemSpec& spec, const PicardOptions& opts) {
  const auto report = check_assumptions(spec);
  if (!report.all_passed()) throw Error(ErrorKind::HypothesisViolation, report.first_failure());
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw Error(ErrorKind::NoConvergence, "damping must lie in (0, 1]");
  const Grid& g = spec.grid;
  PicardResult result;
  ScalarField m(g);
  for (int t = 0; t <= g.nt(); ++t) std::copy(spec.m0.begin(), spec.m0.end(), m.slice(t).begin());
  PricePath P(spec.price_dim, g.nt());
  for (int it = 1; it <= std::max(opts.max_outer, 1); ++it) {
    const double lambda = opts.schedule == DampingSchedule::Constant
                              ? opts.damping
                              : opts.damping / (1.0 + opts.damping * (it - 1));
    const ScalarField u = solve_hjb(m, P, spec, opts);
    const SplitVelocity v = feedback(u, P, spec);
    const ScalarField m_new = solve_fp(v, spec, opts);
    const PricePath P_new = update_price(m_new, v, spec);
    double change = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      change = std::max(change, std::abs(m_new.values()[i] - m.values()[i]));
      m.values()[i] = (1.0 - lambda) * m.values()[i] + lambda * m_new.values()[i];
    }
    for (std::size_t i = 0; i < P.values().size(); ++i) {
      change = std::max(change, std::abs(P_new.values()[i] - P.values()[i]));
      P.values()[i] = (1.0 - lambda) * P.values()[i] + lambda * P_new.values()[i];
    }
    result.iterations = it;
    result.last_change = change;
    result.changes.push_back(change);
    if (change <= opts.tol_fixed_point) {
      result.converged = true;
      break;
    }
  }
  Solution& sol = result.solution;
  sol.m = m;
  sol.P = P;
  sol.u = solve_hjb(m, P, spec, opts);
  const SplitVelocity v = feedback(sol.u, P, spec);
  sol.w = transport_flux(m, v);
  sol.gamma = ScalarField(g);
  for (int t = 0; t <= g.nt(); ++t)
    for (std::size_t s = 0; s < g.space_size(); ++s) sol.gamma(t, s) = spec.coupling(s, m(t, s));
  return result;
}

}  // namespace mfgc
