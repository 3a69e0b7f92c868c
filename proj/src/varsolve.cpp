#include "mfgc/varsolve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
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

// Root of an increasing function on [lo, hi] with g(lo) <= 0 <= g(hi):
// Newton steps, falling back to bisection whenever a step leaves the bracket.
template <class Fn>
double solve_increasing(Fn fn, double lo, double hi, double x, double tol, int max_iter, const char* what) {
  for (int it = 0; it < max_iter; ++it) {
    const auto [g, dg] = fn(x);
    if (std::abs(g) <= tol) return x;
    if (g < 0.0) lo = x; else hi = x;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) return x;
    double next = dg > 0.0 && std::isfinite(dg) ? x - g / dg : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  throw Error(ErrorKind::NoConvergence, std::string(what) + ": root finder exceeded its iteration budget");
}

// s >= 0 with tau kc s^(rp - 1) + m s = rho.
double speed(double m, double rho, double tau, double kc, double rp, double s0, ProxTolerance tol) {
  if (rp == 2.0) return rho / (tau * kc + m);
  const double hi = m > 0.0 ? std::min(s0, rho / m) : s0;
  auto fn = [&](double s) {
    const double g = tau * kc * std::pow(s, rp - 1.0) + m * s - rho;
    const double dg = tau * kc * (rp - 1.0) * std::pow(s, rp - 2.0) + m;
    return std::pair{g, dg};
  };
  return solve_increasing(fn, 0.0, hi, hi, tol.newton_tol * (1.0 + rho), tol.newton_max, "prox_kinetic");
}

// t >= 0 with t + lambda * a * t^(e - 1) = rho.
double radial_root(double rho, double lambda, double a, double e, ProxTolerance tol, const char* what) {
  if (rho == 0.0) return 0.0;
  if (e == 2.0) return rho / (1.0 + lambda * a);
  auto fn = [&](double t) {
    const double g = t + lambda * a * std::pow(t, e - 1.0) - rho;
    const double dg = 1.0 + lambda * a * (e - 1.0) * std::pow(t, e - 2.0);
    return std::pair{g, dg};
  };
  return solve_increasing(fn, 0.0, rho, rho, tol.newton_tol * (1.0 + rho), tol.newton_max, what);
}

}  // namespace

Solution Solution::initial(const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  Solution sol{ScalarField(g), ScalarField(g), VectorField(g), PricePath(spec.price_dim, g.nt()), ScalarField(g)};
  for (int t = 0; t <= g.nt(); ++t) {
    std::copy(spec.m0.begin(), spec.m0.end(), sol.m.slice(t).begin());
    std::copy(spec.uT.begin(), spec.uT.end(), sol.u.slice(t).begin());
    for (std::size_t s = 0; s < g.space_size(); ++s) sol.gamma(t, s) = spec.coupling(s, std::max(spec.m0[s], 0.0));
  }
  return sol;
}

void ConvergenceLog::write_csv(std::ostream& os) const {
  os << "iter,B,D,gap,fp_res,price_res\n";
  for (const auto& e : entries) {
    os << e.iter << ',' << format_double(e.B) << ',' << format_double(e.D) << ',' << format_double(e.gap) << ','
       << format_double(e.fp_res) << ',' << format_double(e.price_res) << '\n';
  }
}

// --- functionals -------------------------------------------------------------

double eval_B(const ScalarField& m, const VectorField& w, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  for (int t = 1; t <= g.nt(); ++t)
    for (double v : m.slice(t))
      if (v < 0.0) return kInfinity;
  double bulk = 0.0;
  double price = 0.0;
  std::vector<double> z(static_cast<std::size_t>(spec.price_dim));
  for (int t = 1; t <= g.nt(); ++t) {
    const auto mt = m.slice(t);
    const double kin = kinetic_cost(spec, mt, w.slice(t));
    if (!std::isfinite(kin)) return kInfinity;
    bulk += kin;
    for (std::size_t s = 0; s < n; ++s) bulk += spec.F(s, mt[s]);
    if (spec.price_dim > 0) {
      aggregate_slice(spec, w.slice(t), z);
      price += spec.Phi(z);
    }
  }
  double terminal = 0.0;
  const auto mT = m.slice(g.nt());
  for (std::size_t s = 0; s < n; ++s) terminal += spec.uT[s] * mT[s];
  return g.ht() * g.cell_volume() * bulk + g.ht() * price + g.cell_volume() * terminal;
}

double eval_D(const ScalarField& u, const PricePath& P, const ScalarField& gamma, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  double initial = 0.0;
  for (std::size_t s = 0; s < n; ++s) initial += u(0, s) * spec.m0[s];
  double bulk = 0.0;
  double price = 0.0;
  for (int t = 1; t <= g.nt(); ++t) {
    for (std::size_t s = 0; s < n; ++s) bulk += spec.F_star(s, gamma(t, s));
    if (spec.price_dim > 0) price += spec.Phi_star(P.at(t));
  }
  return -g.cell_volume() * initial + g.ht() * price + g.ht() * g.cell_volume() * bulk;
}

ScalarField hj_operator(const ScalarField& u, const PricePath& P, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  ScalarField out(g);
  std::vector<double> grad(n * g.dim()), ham(n), lap(n, 0.0);
  const bool diffusive = !spec.diffusion.is_zero();
  for (int t = 1; t <= g.nt(); ++t) {
    const auto prev = u.slice(t - 1);
    const auto next = u.slice(t);
    face_gradient(spec, prev, spec.price_dim > 0 ? P.at(t) : std::span<const double>{}, grad);
    discrete_hamiltonian(spec, grad, ham);
    if (diffusive) diffusion_slice(g, spec.diffusion, prev, lap);
    auto o = out.slice(t);
    for (std::size_t s = 0; s < n; ++s) o[s] = (prev[s] - next[s]) / g.ht() - lap[s] + ham[s];
  }
  return out;
}

// --- transport constraint -----------------------------------------------------

ScalarField fp_transport(const ScalarField& m, const VectorField& w, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  ScalarField out(g);
  std::vector<double> div(n), lap(n, 0.0);
  const bool diffusive = !spec.diffusion.is_zero();
  for (int t = 0; t < g.nt(); ++t) {
    const auto cur = m.slice(t);
    const auto next = m.slice(t + 1);
    divergence_slice(g, w.slice(t + 1), div);
    if (diffusive) diffusion_slice(g, spec.diffusion, next, lap);
    auto o = out.slice(t);
    for (std::size_t s = 0; s < n; ++s) o[s] = (next[s] - cur[s]) / g.ht() + div[s] - lap[s];
  }
  return out;
}

double FpResidual::l1_norm() const {
  const Grid& g = transport.grid();
  double acc = 0.0;
  for (double v : transport.values()) acc += std::abs(v);
  double init = 0.0;
  for (double v : initial) init += std::abs(v);
  return g.ht() * g.cell_volume() * acc + g.cell_volume() * init;
}

FpResidual fp_constraint(const ScalarField& m, const VectorField& w, const ProblemSpec& spec) {
  FpResidual res{fp_transport(m, w, spec), std::vector<double>(spec.grid.space_size())};
  for (std::size_t s = 0; s < res.initial.size(); ++s) res.initial[s] = m(0, s) - spec.m0[s];
  return res;
}

FpAdjoint fp_transport_adjoint(const ScalarField& u, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  FpAdjoint adj{ScalarField(g), VectorField(g)};
  std::vector<double> lap(n, 0.0);
  const bool diffusive = !spec.diffusion.is_zero();
  for (int t = 0; t <= g.nt(); ++t) {
    auto am = adj.m.slice(t);
    if (t >= 1) {
      const auto prev = u.slice(t - 1);
      if (diffusive) diffusion_slice(g, spec.diffusion, prev, lap);
      for (std::size_t s = 0; s < n; ++s) am[s] += prev[s] / g.ht() - lap[s];
      auto aw = adj.w.slice(t);
      gradient_slice(g, prev, aw);
      for (auto& v : aw) v = -v;
    }
    if (t < g.nt()) {
      const auto cur = u.slice(t);
      for (std::size_t s = 0; s < n; ++s) am[s] -= cur[s] / g.ht();
    }
  }
  return adj;
}

PricePath aggregate_flux(const VectorField& w, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  PricePath z(spec.price_dim, g.nt());
  for (int t = 0; t <= g.nt(); ++t) aggregate_slice(spec, w.slice(t), z.at(t));
  return z;
}

// --- proximal kernels ---------------------------------------------------------

double prox_F(double mbar, double tau, double theta, double q, ProxTolerance tol) {
  if (mbar <= 0.0) return 0.0;
  if (theta == 0.0) return mbar;
  if (q == 2.0) return mbar / (1.0 + tau * theta);
  auto fn = [&](double m) {
    const double g = m + tau * theta * std::pow(m, q - 1.0) - mbar;
    const double dg = 1.0 + tau * theta * (q - 1.0) * std::pow(m, q - 2.0);
    return std::pair{g, dg};
  };
  return solve_increasing(fn, 0.0, mbar, mbar, tol.newton_tol * (1.0 + mbar), tol.newton_max, "prox_F");
}

double prox_F(double mbar, double tau, const ProblemSpec& spec, std::size_t x, ProxTolerance tol) {
  return prox_F(mbar, tau, spec.theta[x], spec.q, tol);
}

double prox_perspective(double mbar, std::span<const double> zbar, double tau, double c, double r, double theta,
                        double q, std::span<double> z_out, ProxTolerance tol) {
  const double rho = norm(zbar);
  if (rho == 0.0) {
    std::fill(z_out.begin(), z_out.end(), 0.0);
    return prox_F(mbar, tau, theta, q, tol);
  }
  const double rp = r / (r - 1.0);
  const double kc = std::pow(c, 1.0 - rp);
  const double hcoef = kc * (rp - 1.0) / rp;
  const double s0 = std::pow(rho / (tau * kc), 1.0 / (rp - 1.0));
  const double h0 = hcoef * std::pow(s0, rp);
  if (mbar + tau * h0 <= 0.0) {
    std::fill(z_out.begin(), z_out.end(), 0.0);
    return 0.0;
  }
  double s_at = s0;
  auto fn = [&](double m) {
    const double sv = speed(m, rho, tau, kc, rp, s0, tol);
    s_at = sv;
    const double fm = (theta == 0.0 || m == 0.0) ? 0.0 : theta * std::pow(m, q - 1.0);
    const double dfm = (theta == 0.0 || m == 0.0) ? 0.0 : theta * (q - 1.0) * std::pow(m, q - 2.0);
    const double g = m + tau * fm - tau * hcoef * std::pow(sv, rp) - mbar;
    const double ds = -sv / (tau * kc * (rp - 1.0) * std::pow(sv, rp - 2.0) + m);
    const double dg = 1.0 + tau * dfm - tau * kc * (rp - 1.0) * std::pow(sv, rp - 1.0) * ds;
    return std::pair{g, dg};
  };
  const double hi = std::max(mbar, 0.0) + tau * h0;
  const double m = solve_increasing(fn, 0.0, hi, std::max(mbar, 0.5 * hi), tol.newton_tol * (1.0 + std::abs(mbar) + rho),
                                    tol.newton_max, "prox_kinetic");
  fn(m);
  const double scale = m * s_at / rho;
  for (std::size_t i = 0; i < zbar.size(); ++i) z_out[i] = scale * zbar[i];
  return m;
}

double prox_kinetic(double mbar, std::span<const double> wbar, double tau, const ProblemSpec& spec, std::size_t x,
                    std::span<double> w_out, ProxTolerance tol) {
  return prox_perspective(mbar, wbar, tau, spec.c[x], spec.r, 0.0, spec.q, w_out, tol);
}

double prox_perspective_kkt(double m, std::span<const double> z, double mbar, std::span<const double> zbar,
                            double tau, double c, double r, double theta, double q) {
  const double rp = r / (r - 1.0);
  const double kc = std::pow(c, 1.0 - rp);
  const double hcoef = kc * (rp - 1.0) / rp;
  const double zn = norm(z);
  const double rho = norm(zbar);
  const double scale = 1.0 + std::abs(mbar) + rho;
  if (m < 0.0) return kInfinity;
  if (m == 0.0) {
    if (zn > 0.0) return kInfinity;
    // The apex is optimal iff mbar + tau h(s0) <= 0 (and mbar <= 0 when zbar = 0).
    const double h0 = rho == 0.0 ? 0.0 : hcoef * std::pow(std::pow(rho / (tau * kc), 1.0 / (rp - 1.0)), rp);
    return std::max(0.0, mbar + tau * h0) / scale;
  }
  const double sv = zn / m;
  const double fm = theta == 0.0 ? 0.0 : theta * std::pow(m, q - 1.0);
  double res = std::abs(m - mbar + tau * (fm - hcoef * std::pow(sv, rp)));
  const double pull = zn == 0.0 ? 0.0 : tau * kc * std::pow(sv, rp - 1.0) / zn;
  for (std::size_t i = 0; i < z.size(); ++i) res = std::max(res, std::abs(z[i] - zbar[i] + pull * z[i]));
  return res / scale;
}

void prox_Phi_star(std::span<const double> pbar, double sigma, const ProblemSpec& spec, std::span<double> out,
                   ProxTolerance tol) {
  const double rho = norm(pbar);
  if (rho == 0.0 || spec.kappa_phi == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double sp = spec.s_prime();
  const double t = radial_root(rho, sigma, std::pow(spec.kappa_phi, 1.0 - sp), sp, tol, "prox_Phi_star");
  for (std::size_t i = 0; i < pbar.size(); ++i) out[i] = pbar[i] * (t / rho);
}

void prox_Phi(std::span<const double> zbar, double lambda, const ProblemSpec& spec, std::span<double> out,
              ProxTolerance tol) {
  const double rho = norm(zbar);
  if (rho == 0.0 || spec.kappa_phi == 0.0) {
    std::copy(zbar.begin(), zbar.end(), out.begin());
    return;
  }
  const double t = radial_root(rho, lambda, spec.kappa_phi, spec.s, tol, "prox_Phi");
  for (std::size_t i = 0; i < zbar.size(); ++i) out[i] = zbar[i] * (t / rho);
}

// --- primal-dual solver -----------------------------------------------------------

namespace {

// Flat storage of the iterates.  Primal time index k = 1..Nt lives at k - 1;
// dual u^n, n = 0..Nt-1, lives at n; P^k at k - 1.
struct Primal {
  std::vector<double> m, a, b;
};
struct Dual {
  std::vector<double> u, P;
};

class PrimalDual {
 public:
  explicit PrimalDual(const ProblemSpec& spec)
      : spec_(spec),
        g_(spec.grid),
        n_(g_.space_size()),
        d_(g_.dim()),
        nt_(g_.nt()),
        k_(spec.price_active() ? spec.price_dim : 0),
        ht_(g_.ht()),
        vol_(g_.cell_volume()),
        diffusive_(!spec.diffusion.is_zero()),
        next_(n_ * d_),
        prev_(n_ * d_),
        grad_(n_ * d_),
        lap_(n_, 0.0),
        div_(n_),
        flux_(n_ * d_),
        z_(static_cast<std::size_t>(k_)),
        phiP_(n_ * d_) {
    for (std::size_t s = 0; s < n_; ++s)
      for (int a = 0; a < d_; ++a) {
        next_[s * d_ + a] = g_.shift(s, a, 1);
        prev_[s * d_ + a] = g_.shift(s, a, -1);
      }
  }

  Primal zero_primal() const {
    const std::size_t nm = n_ * nt_;
    return {std::vector<double>(nm), std::vector<double>(nm * d_), std::vector<double>(nm * d_)};
  }
  Dual zero_dual() const { return {std::vector<double>(n_ * nt_), std::vector<double>(static_cast<std::size_t>(k_ * nt_))}; }

  // Net face flux of slice k (0-based) into flux_.
  void net_flux(const Primal& x, int k, std::span<double> out) const {
    const double* a = x.a.data() + static_cast<std::size_t>(k) * n_ * d_;
    const double* b = x.b.data() + static_cast<std::size_t>(k) * n_ * d_;
    for (std::size_t s = 0; s < n_; ++s)
      for (int ax = 0; ax < d_; ++ax) out[s * d_ + ax] = a[s * d_ + ax] + b[next_[s * d_ + ax] * d_ + ax];
  }

  void gradient(std::span<const double> u, std::span<double> out) const {
    const double inv = 1.0 / g_.hx();
    for (std::size_t s = 0; s < n_; ++s)
      for (int ax = 0; ax < d_; ++ax) out[s * d_ + ax] = (u[next_[s * d_ + ax]] - u[s]) * inv;
  }

  void divergence(std::span<const double> w, std::span<double> out) const {
    const double inv = 1.0 / g_.hx();
    for (std::size_t s = 0; s < n_; ++s) {
      double acc = 0.0;
      for (int ax = 0; ax < d_; ++ax) acc += w[s * d_ + ax] - w[prev_[s * d_ + ax] * d_ + ax];
      out[s] = acc * inv;
    }
  }

  void laplace(std::span<const double> u, std::span<double> out) const {
    if (diffusive_) diffusion_slice(g_, spec_.diffusion, u, out);
  }

  // phi^T P on every node, d values per node.
  void phi_times(std::span<const double> P, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t s = 0; s < n_; ++s)
      for (int ax = 0; ax < d_; ++ax) {
        double acc = 0.0;
        for (int j = 0; j < k_; ++j) acc += spec_.phi_entry(s, j, ax) * P[static_cast<std::size_t>(j)];
        out[s * d_ + ax] = acc;
      }
  }

  std::span<const double> m_slice(const Primal& x, int k) const {
    return {x.m.data() + static_cast<std::size_t>(k) * n_, n_};
  }
  std::span<const double> u_slice(const Dual& y, int n) const {
    return {y.u.data() + static_cast<std::size_t>(n) * n_, n_};
  }
  std::span<const double> P_slice(const Dual& y, int k) const {
    return {y.P.data() + static_cast<std::size_t>(k) * k_, static_cast<std::size_t>(k_)};
  }

  // y = K x with K x = (-T x, agg x); the m0 constant is excluded.
  void apply_K(const Primal& x, Dual& y) {
    for (int n = 0; n < nt_; ++n) {
      const auto mn1 = m_slice(x, n);
      net_flux(x, n, flux_);
      divergence(flux_, div_);
      laplace(mn1, lap_);
      double* u = y.u.data() + static_cast<std::size_t>(n) * n_;
      for (std::size_t s = 0; s < n_; ++s) {
        const double mprev = n == 0 ? 0.0 : x.m[static_cast<std::size_t>(n - 1) * n_ + s];
        u[s] = -((mn1[s] - mprev) / ht_ + div_[s] - lap_[s]);
      }
      if (k_ > 0) {
        aggregate_slice(spec_, flux_, z_);
        std::copy(z_.begin(), z_.end(), y.P.begin() + static_cast<std::ptrdiff_t>(n) * k_);
      }
    }
  }

  // x = K* y for the weighted products (omega on x and u, ht on P).
  // With u^Nt = `terminal` this is the gradient of the linear part of the
  // Lagrangian in x.
  void apply_Kt(const Dual& y, Primal& x, std::span<const double> terminal) {
    for (int k = 0; k < nt_; ++k) {
      const auto up = u_slice(y, k);
      gradient(up, grad_);
      laplace(up, lap_);
      if (k_ > 0) {
        phi_times(P_slice(y, k), phiP_);
        for (std::size_t i = 0; i < n_ * d_; ++i) grad_[i] += phiP_[i];
      }
      double* m = x.m.data() + static_cast<std::size_t>(k) * n_;
      double* a = x.a.data() + static_cast<std::size_t>(k) * n_ * d_;
      double* b = x.b.data() + static_cast<std::size_t>(k) * n_ * d_;
      for (std::size_t s = 0; s < n_; ++s) {
        const double unext = k + 1 < nt_ ? y.u[static_cast<std::size_t>(k + 1) * n_ + s] : terminal[s];
        m[s] = -((up[s] - unext) / ht_ - lap_[s]);
        for (int ax = 0; ax < d_; ++ax) {
          a[s * d_ + ax] = grad_[s * d_ + ax];
          b[s * d_ + ax] = grad_[prev_[s * d_ + ax] * d_ + ax];
        }
      }
    }
  }

  double primal_norm2(const Primal& x) const {
    double acc = 0.0;
    for (double v : x.m) acc += v * v;
    for (double v : x.a) acc += v * v;
    for (double v : x.b) acc += v * v;
    return acc * ht_ * vol_;
  }

  double operator_norm(int iterations) {
    Primal x = zero_primal(), xt = zero_primal();
    Dual y = zero_dual();
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto* v : {&x.m, &x.a, &x.b})
      for (auto& e : *v) e = dist(rng);
    const std::vector<double> zero_terminal(n_, 0.0);
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
      const double nx = std::sqrt(primal_norm2(x));
      for (auto* v : {&x.m, &x.a, &x.b})
        for (auto& e : *v) e /= nx;
      apply_K(x, y);
      apply_Kt(y, xt, zero_terminal);
      estimate = std::sqrt(std::sqrt(primal_norm2(xt)));
      std::swap(x, xt);
    }
    return estimate;
  }

  // One projected prox sweep at slice k for step tau on the shifted point.
  void prox_slice(const Primal& shifted, Primal& out, int k, double tau, const ProxTolerance& tol) const {
    std::array<double, 4> zb{}, zo{};
    const std::size_t base = static_cast<std::size_t>(k) * n_;
    const std::span<const double> zbv(zb.data(), static_cast<std::size_t>(2 * d_));
    const std::span<double> zov(zo.data(), static_cast<std::size_t>(2 * d_));
    for (std::size_t s = 0; s < n_; ++s) {
      for (int ax = 0; ax < d_; ++ax) {
        zb[static_cast<std::size_t>(ax)] = std::max(shifted.a[(base + s) * d_ + ax], 0.0);
        zb[static_cast<std::size_t>(d_ + ax)] = std::min(shifted.b[(base + s) * d_ + ax], 0.0);
      }
      const double m = prox_perspective(shifted.m[base + s], zbv, tau, spec_.c[s], spec_.r, spec_.theta[s], spec_.q,
                                        zov, tol);
      out.m[base + s] = m;
      for (int ax = 0; ax < d_; ++ax) {
        out.a[(base + s) * d_ + ax] = zo[static_cast<std::size_t>(ax)];
        out.b[(base + s) * d_ + ax] = zo[static_cast<std::size_t>(d_ + ax)];
      }
    }
  }

  struct Metrics {
    double B, D, fp, price, m_min;
  };

  Metrics metrics(const Primal& x, const Dual& y) {
    Metrics out{0.0, 0.0, 0.0, 0.0, kInfinity};
    double bulk = 0.0, price_cost = 0.0, dual_bulk = 0.0, dual_price = 0.0, fp = 0.0, price_res = 0.0;
    std::vector<double> ham(n_), zpsi(static_cast<std::size_t>(k_));
    for (int k = 0; k < nt_; ++k) {
      const auto mk = m_slice(x, k);
      for (double v : mk) out.m_min = std::min(out.m_min, v);
      net_flux(x, k, flux_);
      bulk += kinetic_cost(spec_, mk, flux_);
      for (std::size_t s = 0; s < n_; ++s) bulk += spec_.F(s, std::max(mk[s], 0.0));
      // transport residual at step k (uses m^k and m^{k+1} in 1-based terms)
      divergence(flux_, div_);
      laplace(mk, lap_);
      for (std::size_t s = 0; s < n_; ++s) {
        const double mprev = k == 0 ? spec_.m0[s] : x.m[static_cast<std::size_t>(k - 1) * n_ + s];
        fp += std::abs((mk[s] - mprev) / ht_ + div_[s] - lap_[s]);
      }
      if (k_ > 0) {
        aggregate_slice(spec_, flux_, z_);
        price_cost += spec_.Phi(z_);
        const auto Pk = P_slice(y, k);
        spec_.Psi(z_, zpsi);
        double diff = 0.0;
        for (int j = 0; j < k_; ++j) diff += std::pow(Pk[static_cast<std::size_t>(j)] - zpsi[static_cast<std::size_t>(j)], 2);
        price_res += std::sqrt(diff);
        dual_price += spec_.Phi_star(Pk);
      }
      // dual: gamma = HJ(u, P) at k
      const auto up = u_slice(y, k);
      const std::span<const double> un =
          k + 1 < nt_ ? u_slice(y, k + 1) : std::span<const double>(spec_.uT.data(), n_);
      gradient(up, grad_);
      if (k_ > 0) {
        phi_times(P_slice(y, k), phiP_);
        for (std::size_t i = 0; i < n_ * d_; ++i) grad_[i] += phiP_[i];
      }
      discrete_hamiltonian(spec_, grad_, ham);
      laplace(up, lap_);
      for (std::size_t s = 0; s < n_; ++s) dual_bulk += spec_.F_star(s, (up[s] - un[s]) / ht_ - lap_[s] + ham[s]);
    }
    double terminal = 0.0, initial = 0.0;
    const auto mT = m_slice(x, nt_ - 1);
    const auto u0 = u_slice(y, 0);
    for (std::size_t s = 0; s < n_; ++s) {
      terminal += spec_.uT[s] * mT[s];
      initial += u0[s] * spec_.m0[s];
    }
    out.B = ht_ * vol_ * bulk + ht_ * price_cost + vol_ * terminal;
    out.D = -vol_ * initial + ht_ * dual_price + ht_ * vol_ * dual_bulk;
    out.fp = ht_ * vol_ * fp;
    out.price = ht_ * price_res;
    return out;
  }

  SolveResult run(const SolverOptions& opts, const std::optional<Solution>& init) {
    SolveResult result;
    result.op_norm = operator_norm(opts.power_iterations);
    const double L = result.op_norm;
    double tau = opts.tau, sigma = opts.sigma_step;
    constexpr double kSafety = 0.95;
    if (tau <= 0.0 && sigma <= 0.0) {
      tau = opts.step_ratio * std::sqrt(kSafety) / L;
      sigma = std::sqrt(kSafety) / (opts.step_ratio * L);
    } else if (sigma <= 0.0) {
      sigma = kSafety / (tau * L * L);
    } else if (tau <= 0.0) {
      tau = kSafety / (sigma * L * L);
    }
    if (tau * sigma * L * L > 1.0)
      throw Error(ErrorKind::StepSizeViolation, "tau * sigma * L^2 = " + format_double(tau * sigma * L * L) +
                                                    " exceeds 1 (L = " + format_double(L) + ")");
    result.tau = tau;
    result.sigma = sigma;

    Primal x = zero_primal();
    Dual y = zero_dual();
    if (init) {
      load(*init, x, y);
    } else {
      for (int k = 0; k < nt_; ++k) std::copy(spec_.m0.begin(), spec_.m0.end(), x.m.begin() + static_cast<std::ptrdiff_t>(k * n_));
      for (int n = 0; n < nt_; ++n) std::copy(spec_.uT.begin(), spec_.uT.end(), y.u.begin() + static_cast<std::ptrdiff_t>(n * n_));
    }
    Primal xbar = x, xold = x, shifted = zero_primal();
    Dual ky = zero_dual();
    const ProxTolerance tol{opts.newton_tol, opts.newton_max};

    Primal best_x = x;
    Dual best_y = y;
    double best_score = kInfinity;

    for (int it = 1; it <= opts.max_iter; ++it) {
      // dual ascent
      apply_K(xbar, ky);
      for (std::size_t s = 0; s < n_; ++s) ky.u[s] += spec_.m0[s] / ht_;
      for (std::size_t i = 0; i < y.u.size(); ++i) y.u[i] += sigma * ky.u[i];
      for (int k = 0; k < nt_; ++k) {
        std::array<double, 8> pb{};
        for (int j = 0; j < k_; ++j) {
          const std::size_t idx = static_cast<std::size_t>(k * k_ + j);
          pb[static_cast<std::size_t>(j)] = y.P[idx] + sigma * ky.P[idx];
        }
        prox_Phi_star(std::span<const double>(pb.data(), static_cast<std::size_t>(k_)), sigma, spec_,
                      std::span<double>(y.P.data() + static_cast<std::size_t>(k * k_), static_cast<std::size_t>(k_)),
                      tol);
      }
      // primal descent
      xold = x;
      apply_Kt(y, shifted, spec_.uT);
      for (std::size_t i = 0; i < x.m.size(); ++i) shifted.m[i] = x.m[i] - tau * shifted.m[i];
      for (std::size_t i = 0; i < x.a.size(); ++i) {
        shifted.a[i] = x.a[i] - tau * shifted.a[i];
        shifted.b[i] = x.b[i] - tau * shifted.b[i];
      }
      for (int k = 0; k < nt_; ++k) prox_slice(shifted, x, k, tau, tol);
      const double th = opts.theta_pd;
      for (std::size_t i = 0; i < x.m.size(); ++i) xbar.m[i] = x.m[i] + th * (x.m[i] - xold.m[i]);
      for (std::size_t i = 0; i < x.a.size(); ++i) {
        xbar.a[i] = x.a[i] + th * (x.a[i] - xold.a[i]);
        xbar.b[i] = x.b[i] + th * (x.b[i] - xold.b[i]);
      }

      const Metrics mt = metrics(x, y);
      const double gap = mt.B + mt.D;
      result.log.entries.push_back({it, mt.B, mt.D, gap, mt.fp, mt.price, mt.m_min});
      result.iterations = it;
      const double rel = std::abs(gap) / (1.0 + std::abs(mt.B));
      const double score = std::max(rel, mt.fp);
      if (std::isfinite(score) && score < best_score) {
        best_score = score;
        best_x = x;
        best_y = y;
      }
      if (rel <= opts.tol_gap && mt.fp <= opts.tol_gap) {
        result.converged = true;
        break;
      }
    }
    if (!result.converged) {
      x = best_x;
      y = best_y;
    }
    result.solution = store(x, y);
    return result;
  }

  void load(const Solution& init, Primal& x, Dual& y) const {
    if (!(init.m.grid() == g_))
      throw Error(ErrorKind::InvalidGrid, "initial guess lives on a different grid");
    for (int k = 0; k < nt_; ++k) {
      const auto m = init.m.slice(k + 1);
      const auto w = init.w.slice(k + 1);
      for (std::size_t s = 0; s < n_; ++s) {
        x.m[static_cast<std::size_t>(k) * n_ + s] = std::max(m[s], 0.0);
        for (int ax = 0; ax < d_; ++ax) {
          const std::size_t i = (static_cast<std::size_t>(k) * n_ + s) * d_ + ax;
          x.a[i] = std::max(w[s * d_ + ax], 0.0);
          x.b[i] = std::min(w[prev_[s * d_ + ax] * d_ + ax], 0.0);
        }
      }
      if (k_ > 0 && init.P.dim() == k_)
        for (int j = 0; j < k_; ++j) y.P[static_cast<std::size_t>(k * k_ + j)] = init.P.at(k + 1)[static_cast<std::size_t>(j)];
    }
    for (int n = 0; n < nt_; ++n) {
      const auto u = init.u.slice(n);
      std::copy(u.begin(), u.end(), y.u.begin() + static_cast<std::ptrdiff_t>(n * n_));
    }
  }

  Solution store(const Primal& x, const Dual& y) {
    Solution sol{ScalarField(g_), ScalarField(g_), VectorField(g_), PricePath(spec_.price_dim, nt_), ScalarField(g_)};
    std::copy(spec_.m0.begin(), spec_.m0.end(), sol.m.slice(0).begin());
    std::copy(spec_.uT.begin(), spec_.uT.end(), sol.u.slice(nt_).begin());
    for (int k = 0; k < nt_; ++k) {
      const auto mk = m_slice(x, k);
      std::copy(mk.begin(), mk.end(), sol.m.slice(k + 1).begin());
      net_flux(x, k, sol.w.slice(k + 1));
      const auto uk = u_slice(y, k);
      std::copy(uk.begin(), uk.end(), sol.u.slice(k).begin());
      if (k_ > 0) {
        const auto Pk = P_slice(y, k);
        std::copy(Pk.begin(), Pk.end(), sol.P.at(k + 1).begin());
      }
    }
    complete_initial_slice(sol, spec_);
    for (int t = 0; t <= nt_; ++t)
      for (std::size_t s = 0; s < n_; ++s) sol.gamma(t, s) = spec_.coupling(s, sol.m(t, s));
    return sol;
  }

 private:
  const ProblemSpec& spec_;
  const Grid& g_;
  std::size_t n_;
  int d_;
  int nt_;
  int k_;
  double ht_;
  double vol_;
  bool diffusive_;
  std::vector<std::size_t> next_, prev_;
  std::vector<double> grad_, lap_, div_, flux_, z_, phiP_;
};

}  // namespace

double estimate_operator_norm(const ProblemSpec& spec, int iterations) {
  return PrimalDual(spec).operator_norm(iterations);
}

void complete_initial_slice(Solution& sol, const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  const std::size_t n = g.space_size();
  const int d = g.dim();
  std::vector<double> grad(n * d), right(n * d), left(n * d), flux(n * d);
  const std::size_t kd = static_cast<std::size_t>(spec.price_dim);
  std::vector<double> P(kd, 0.0), z(kd), target(kd);
  const bool price = spec.price_active();
  auto evaluate = [&] {
    face_gradient(spec, sol.u.slice(0), price ? std::span<const double>(P) : std::span<const double>{}, grad);
    upwind_velocity(spec, grad, right, left);
    upwind_flux(g, spec.m0, right, left, flux);
  };
  if (price) {
    for (int it = 0; it < 500; ++it) {
      evaluate();
      aggregate_slice(spec, flux, z);
      spec.Psi(z, target);
      double change = 0.0;
      for (std::size_t j = 0; j < kd; ++j) {
        const double next = 0.5 * P[j] + 0.5 * target[j];
        change = std::max(change, std::abs(next - P[j]));
        P[j] = next;
      }
      if (change <= 1e-14) break;
    }
  }
  evaluate();
  std::copy(flux.begin(), flux.end(), sol.w.slice(0).begin());
  if (kd > 0) std::copy(P.begin(), P.end(), sol.P.at(0).begin());
}

SolveResult solve_primal_dual(const ProblemSpec& spec, const SolverOptions& opts, const std::optional<Solution>& init) {
  const auto report = check_assumptions(spec);
  if (!report.all_passed()) throw Error(ErrorKind::HypothesisViolation, report.first_failure());
  if (opts.max_iter < 1) throw Error(ErrorKind::NoConvergence, "max_iter must be positive");
  return PrimalDual(spec).run(opts, init);
}

}  // namespace mfgc
