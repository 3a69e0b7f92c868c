#include "mfgc/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mfgc/error.hpp"

namespace mfgc {

namespace {

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void power_map(std::span<const double> v, double exponent, std::span<double> out) {
  const double n = norm(v);
  const double scale = n == 0.0 ? 0.0 : std::pow(n, exponent);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
}

// Linear interpolation in time of one node's data: writes the slice at time tau.
template <class Getter>
void interpolate_slice(const Grid& g, double tau, std::size_t width, Getter slice, std::span<double> out) {
  const double pos = std::clamp(tau / g.ht(), 0.0, static_cast<double>(g.nt()));
  int k = static_cast<int>(std::floor(pos));
  if (k >= g.nt()) k = g.nt() - 1;
  const double lam = pos - k;
  const auto a = slice(k);
  const auto b = slice(k + 1);
  for (std::size_t i = 0; i < width; ++i) out[i] = (1.0 - lam) * a[i] + lam * b[i];
}

// D u + phi^T P on a slice (forward differences, node-based).
void shifted_gradient(const ProblemSpec& spec, std::span<const double> u, std::span<const double> P,
                      std::span<double> out) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  gradient_slice(g, u, out);
  if (!spec.price_active()) return;
  for (std::size_t s = 0; s < g.space_size(); ++s)
    for (int a = 0; a < d; ++a)
      for (int k = 0; k < spec.price_dim; ++k) out[s * d + a] += spec.phi_entry(s, k, a) * P[static_cast<std::size_t>(k)];
}

// min(a, b)^(e - 2) |a - b|^2 with the 0^(negative) = +inf convention
// handled by dropping terms below the support floor.
double weighted_square(double a, double b, double e) {
  const double diff2 = (a - b) * (a - b);
  if (e == 2.0) return diff2;
  const double lo = std::min(a, b);
  if (lo <= kSupportFloor) return e > 2.0 ? 0.0 : 0.0;
  return std::pow(lo, e - 2.0) * diff2;
}

double trapezoid(const std::vector<double>& per_time, const Grid& g) { return integrate_time(per_time, g); }

}  // namespace

void j1(std::span<const double> xi, double r, std::span<double> out) { power_map(xi, r / 2.0 - 1.0, out); }

void j2(std::span<const double> zeta, double r, std::span<double> out) {
  const double rp = r / (r - 1.0);
  power_map(zeta, rp / 2.0 - 1.0, out);
}

SpaceNorms space_regularity(const Solution& sol, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  std::vector<double> per_m(static_cast<std::size_t>(g.nt() + 1)), per_j(per_m.size());
  std::vector<double> grad(n * d), jmap(n * d), tmp(n * d);
  for (int t = 0; t <= g.nt(); ++t) {
    const auto m = sol.m.slice(t);
    double acc_m = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      for (int a = 0; a < d; ++a) {
        const std::size_t nb = g.shift(s, a, 1);
        if (std::min(m[s], m[nb]) <= kSupportFloor) continue;
        const double dm = (m[nb] - m[s]) / g.hx();
        const double weight = spec.q == 2.0 ? 1.0 : std::pow(0.5 * (m[s] + m[nb]), spec.q - 2.0);
        acc_m += weight * dm * dm;
      }
    }
    per_m[static_cast<std::size_t>(t)] = acc_m * g.cell_volume();

    gradient_slice(g, sol.u.slice(t), grad);
    for (std::size_t s = 0; s < n; ++s)
      j1(std::span<const double>(grad.data() + s * d, static_cast<std::size_t>(d)), spec.r,
         std::span<double>(jmap.data() + s * d, static_cast<std::size_t>(d)));
    double acc_j = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (m[s] <= kSupportFloor) continue;
      double frob = 0.0;
      for (int a = 0; a < d; ++a) {
        const std::size_t nb = g.shift(s, a, 1);
        for (int c = 0; c < d; ++c) {
          const double dj = (jmap[nb * d + c] - jmap[s * d + c]) / g.hx();
          frob += dj * dj;
        }
      }
      acc_j += m[s] * frob;
    }
    per_j[static_cast<std::size_t>(t)] = acc_j * g.cell_volume();
  }
  return {std::sqrt(trapezoid(per_m, g)), std::sqrt(trapezoid(per_j, g))};
}

namespace {

bool inside(const Grid& g, int k, double eps) {
  const double tol = 1e-12 * g.horizon();
  return g.time(k - 1) >= eps - tol && g.time(k) <= g.horizon() - eps + tol;
}

}  // namespace

double time_norm_m(const Solution& sol, const ProblemSpec& spec, double eps) {
  const Grid& g = spec.grid;
  const double e = spec.q / 2.0;
  double acc = 0.0;
  for (int k = 1; k <= g.nt(); ++k) {
    if (!inside(g, k, eps)) continue;
    for (std::size_t s = 0; s < g.space_size(); ++s) {
      const double a = std::pow(std::max(sol.m(k, s), 0.0), e);
      const double b = std::pow(std::max(sol.m(k - 1, s), 0.0), e);
      acc += std::pow((a - b) / g.ht(), 2);
    }
  }
  return std::sqrt(acc * g.ht() * g.cell_volume());
}

double time_norm_P(const Solution& sol, const ProblemSpec& spec, double eps) {
  const Grid& g = spec.grid;
  if (spec.price_dim == 0) return 0.0;
  const double e = spec.s_prime() / 2.0 - 1.0;
  const std::size_t kd = static_cast<std::size_t>(spec.price_dim);
  std::vector<double> a(kd), b(kd);
  double acc = 0.0;
  for (int k = 1; k <= g.nt(); ++k) {
    if (!inside(g, k, eps)) continue;
    power_map(sol.P.at(k), e, a);
    power_map(sol.P.at(k - 1), e, b);
    for (std::size_t j = 0; j < kd; ++j) acc += std::pow((a[j] - b[j]) / g.ht(), 2);
  }
  return std::sqrt(acc * g.ht());
}

double eta_shift(double t, double eps, double horizon) {
  const double s = std::sin(M_PI * t / horizon);
  return t + eps * s * s;
}

double eta_shift_inverse(double tau, double eps, double horizon) {
  double lo = 0.0, hi = horizon;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * horizon; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eta_shift(mid, eps, horizon) < tau) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double time_shift_sum(const Solution& sol, const ProblemSpec& spec, double eps) {
  const Grid& g = spec.grid;
  if (!spec.diffusion.is_zero())
    throw Error(ErrorKind::AssumptionRefused, "time diagnostics require the assumption A_ij = 0 (first-order system)");
  if (!(std::abs(eps) < g.horizon() / 4.0))
    throw Error(ErrorKind::ShiftTooLarge, "|eps| = " + format_double(std::abs(eps)) + " must be below T/4");
  if (eps == 0.0) return 0.0;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  const std::size_t kd = static_cast<std::size_t>(spec.price_dim);
  const double sp = spec.s_prime();
  std::vector<double> per_q(static_cast<std::size_t>(g.nt() + 1)), per_t(per_q.size());
  std::vector<double> m_eps(n), u_plus(n), u_minus(n), P_plus(kd), P_minus(kd), G_plus(n * d), G_minus(n * d);
  std::array<double, 2> ja{}, jb{};
  auto m_slice = [&](int k) { return sol.m.slice(k); };
  auto u_slice = [&](int k) { return sol.u.slice(k); };
  auto P_slice = [&](int k) { return sol.P.at(k); };
  for (int k = 0; k <= g.nt(); ++k) {
    const double t = g.time(k);
    const double tp = eta_shift(t, eps, g.horizon());
    const double tm = eta_shift_inverse(t, eps, g.horizon());
    interpolate_slice(g, tp, n, m_slice, m_eps);
    interpolate_slice(g, tp, n, u_slice, u_plus);
    interpolate_slice(g, tm, n, u_slice, u_minus);
    if (kd > 0) {
      interpolate_slice(g, tp, kd, P_slice, P_plus);
      interpolate_slice(g, tm, kd, P_slice, P_minus);
    }
    shifted_gradient(spec, u_plus, P_plus, G_plus);
    shifted_gradient(spec, u_minus, P_minus, G_minus);
    const auto m = sol.m.slice(k);
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::span<double> jav(ja.data(), static_cast<std::size_t>(d)), jbv(jb.data(), static_cast<std::size_t>(d));
      j1(std::span<const double>(G_plus.data() + s * d, static_cast<std::size_t>(d)), spec.r, jav);
      j1(std::span<const double>(G_minus.data() + s * d, static_cast<std::size_t>(d)), spec.r, jbv);
      double diff = 0.0;
      for (int a = 0; a < d; ++a) diff += std::pow(ja[static_cast<std::size_t>(a)] - jb[static_cast<std::size_t>(a)], 2);
      acc += 0.5 * diff * std::max(m[s], 0.0);
      acc += 0.5 * weighted_square(m_eps[s], m[s], spec.q);
    }
    per_q[static_cast<std::size_t>(k)] = acc * g.cell_volume();
    if (kd > 0) {
      const auto P = sol.P.at(k);
      double diff = 0.0;
      for (std::size_t j = 0; j < kd; ++j) diff += std::pow(P_plus[j] - P[j], 2);
      double weight = 1.0;
      if (sp != 2.0) {
        const double lo = std::min(norm(P_plus), norm(P));
        weight = lo <= kSupportFloor ? 0.0 : std::pow(lo, sp - 2.0);
      }
      per_t[static_cast<std::size_t>(k)] = 0.5 * weight * diff;
    }
  }
  return trapezoid(per_q, g) + trapezoid(per_t, g);
}

double space_shift_sum(const Solution& sol, const ProblemSpec& spec, double delta) {
  const Grid& g = spec.grid;
  const double steps = delta / g.hx();
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, std::abs(steps)))
    throw Error(ErrorKind::DeltaNotOnGrid, "delta = " + format_double(delta) + " is not a multiple of hx");
  const int j = static_cast<int>(rounded);
  if (j == 0) return 0.0;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  std::vector<double> per_q(static_cast<std::size_t>(g.nt() + 1));
  std::vector<double> grad(n * d), phiP(n * d, 0.0);
  std::array<double, 2> gp{}, gm{}, ja{}, jb{};
  for (int k = 0; k <= g.nt(); ++k) {
    gradient_slice(g, sol.u.slice(k), grad);
    std::fill(phiP.begin(), phiP.end(), 0.0);
    if (spec.price_active()) {
      const auto P = sol.P.at(k);
      for (std::size_t s = 0; s < n; ++s)
        for (int a = 0; a < d; ++a)
          for (int c = 0; c < spec.price_dim; ++c) phiP[s * d + a] += spec.phi_entry(s, c, a) * P[static_cast<std::size_t>(c)];
    }
    const auto m = sol.m.slice(k);
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t sp = g.shift(s, 0, j), sm = g.shift(s, 0, -j);
      for (int a = 0; a < d; ++a) {
        gp[static_cast<std::size_t>(a)] = grad[sp * d + a] + phiP[sp * d + a];
        gm[static_cast<std::size_t>(a)] = grad[sm * d + a] + phiP[sm * d + a];
      }
      const std::size_t dd = static_cast<std::size_t>(d);
      j1(std::span<const double>(gp.data(), dd), spec.r, std::span<double>(ja.data(), dd));
      j1(std::span<const double>(gm.data(), dd), spec.r, std::span<double>(jb.data(), dd));
      double diff = 0.0;
      for (std::size_t a = 0; a < dd; ++a) diff += std::pow(ja[a] - jb[a], 2);
      acc += 0.5 * diff * std::max(m[s], 0.0);
      acc += 0.5 * weighted_square(m[sp], m[s], spec.q);
    }
    per_q[static_cast<std::size_t>(k)] = acc * g.cell_volume();
  }
  return trapezoid(per_q, g);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / denom;
}

RegularityRecord regularity_record(const Solution& sol, const ProblemSpec& spec, const std::vector<double>& eps,
                                   const std::vector<double>& deltas, double norm_eps, bool require_time) {
  RegularityRecord rec;
  const SpaceNorms sn = space_regularity(sol, spec);
  rec.space_norm_m = sn.m;
  rec.space_norm_j = sn.j;
  rec.norm_eps = norm_eps;
  rec.time_available = spec.diffusion.is_zero();
  if (!rec.time_available && require_time)
    throw Error(ErrorKind::AssumptionRefused, "time diagnostics require the assumption A_ij = 0 (first-order system)");
  if (rec.time_available) {
    rec.time_norm_m = time_norm_m(sol, spec, norm_eps);
    rec.time_norm_P = time_norm_P(sol, spec, norm_eps);
    std::vector<double> xs, ys;
    for (double e : eps) {
      const double v = time_shift_sum(sol, spec, e);
      rec.time_shift_sums[e] = v;
      xs.push_back(std::abs(e));
      ys.push_back(v);
    }
    rec.time_slope = loglog_slope(xs, ys);
  }
  std::vector<double> xs, ys;
  for (double dlt : deltas) {
    const double v = space_shift_sum(sol, spec, dlt);
    rec.space_shift_sums[dlt] = v;
    xs.push_back(std::abs(dlt));
    ys.push_back(v);
  }
  rec.space_slope = loglog_slope(xs, ys);
  return rec;
}

}  // namespace mfgc
