#include "mfgc/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfgc/error.hpp"

namespace mfgc {

namespace {

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

bool geq(double a, double b) { return a >= b - 1e-12 * std::max(1.0, std::abs(b)); }
bool gt(double a, double b) { return a > b + 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

ProblemSpec ProblemSpec::constant(const Grid& grid, double q, double r, double s) {
  ProblemSpec spec;
  spec.grid = grid;
  spec.q = q;
  spec.r = r;
  spec.s = s;
  const std::size_t n = grid.space_size();
  const int d = grid.dim();
  spec.theta.assign(n, 1.0);
  spec.c.assign(n, 1.0);
  spec.kappa_phi = 1.0;
  spec.price_dim = d;
  spec.phi.assign(n * static_cast<std::size_t>(d * d), 0.0);
  for (std::size_t x = 0; x < n; ++x)
    for (int a = 0; a < d; ++a) spec.phi[(x * d + a) * d + a] = 1.0;
  spec.diffusion = DiffusionMatrix::zero(d);
  spec.m0.assign(n, 1.0);
  spec.uT.assign(n, 0.0);
  return spec;
}

bool ProblemSpec::phi_is_constant() const {
  const std::size_t block = static_cast<std::size_t>(price_dim) * grid.dim();
  if (block == 0) return true;
  for (std::size_t x = 1; x < grid.space_size(); ++x)
    for (std::size_t k = 0; k < block; ++k)
      if (phi[x * block + k] != phi[k]) return false;
  return true;
}

double ProblemSpec::hamiltonian_radial(std::size_t x, double t) const {
  return t == 0.0 ? 0.0 : c[x] * std::pow(t, r) / r;
}

double ProblemSpec::conjugate_radial(std::size_t x, double t) const {
  if (t == 0.0) return 0.0;
  const double rp = r_prime();
  return std::pow(c[x], 1.0 - rp) * std::pow(t, rp) / rp;
}

double ProblemSpec::hamiltonian(std::size_t x, std::span<const double> xi) const {
  return hamiltonian_radial(x, norm(xi));
}

double ProblemSpec::conjugate(std::size_t x, std::span<const double> zeta) const {
  return conjugate_radial(x, norm(zeta));
}

void ProblemSpec::dH(std::size_t x, std::span<const double> xi, std::span<double> out) const {
  const double n = norm(xi);
  const double scale = n == 0.0 ? 0.0 : c[x] * std::pow(n, r - 2.0);
  for (std::size_t i = 0; i < xi.size(); ++i) out[i] = scale * xi[i];
}

double ProblemSpec::coupling(std::size_t x, double m) const {
  if (m < 0.0) throw Error(ErrorKind::NegativeDensity, "f evaluated at m = " + format_double(m));
  return m == 0.0 ? 0.0 : theta[x] * std::pow(m, q - 1.0);
}

double ProblemSpec::F(std::size_t x, double m) const {
  if (m < 0.0) throw Error(ErrorKind::NegativeDensity, "F evaluated at m = " + format_double(m));
  return m == 0.0 ? 0.0 : theta[x] * std::pow(m, q) / q;
}

double ProblemSpec::F_or_inf(std::size_t x, double m) const { return m < 0.0 ? kInfinity : F(x, m); }

double ProblemSpec::F_star(std::size_t x, double a) const {
  if (a <= 0.0) return 0.0;
  if (theta[x] == 0.0) return kInfinity;
  const double pp = p();
  return std::pow(theta[x], 1.0 - pp) * std::pow(a, pp) / pp;
}

double ProblemSpec::Phi(std::span<const double> z) const {
  const double n = norm(z);
  if (kappa_phi == 0.0 || n == 0.0) return 0.0;
  return kappa_phi * std::pow(n, s) / s;
}

double ProblemSpec::Phi_star(std::span<const double> pv) const {
  const double n = norm(pv);
  if (n == 0.0) return 0.0;
  if (kappa_phi == 0.0) return kInfinity;
  const double sp = s_prime();
  return std::pow(kappa_phi, 1.0 - sp) * std::pow(n, sp) / sp;
}

void ProblemSpec::Psi(std::span<const double> z, std::span<double> out) const {
  const double n = norm(z);
  const double scale = (kappa_phi == 0.0 || n == 0.0) ? 0.0 : kappa_phi * std::pow(n, s - 2.0);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * z[i];
}

void ProblemSpec::Psi_inv(std::span<const double> pv, std::span<double> out) const {
  if (kappa_phi == 0.0) throw Error(ErrorKind::HypothesisViolation, "Psi = 0 is not invertible");
  const double n = norm(pv);
  const double sp = s_prime();
  const double scale = n == 0.0 ? 0.0 : std::pow(kappa_phi, 1.0 - sp) * std::pow(n, sp - 2.0);
  for (std::size_t i = 0; i < pv.size(); ++i) out[i] = scale * pv[i];
}

double kappa_bar(double r_tilde, double p_tilde, int d) {
  const double critical = 1.0 + d / r_tilde;
  if (gt(p_tilde, critical)) return kInfinity;
  if (!gt(critical, p_tilde)) return kKappaSentinel;
  return r_tilde * p_tilde * (1.0 + d) / (d - r_tilde * (p_tilde - 1.0));
}

double eta_bar(double r_tilde, double p_tilde, int d) {
  const double critical = 1.0 + d / r_tilde;
  if (gt(p_tilde, critical)) return kInfinity;
  if (!gt(critical, p_tilde)) return kKappaSentinel;
  return d * (r_tilde * (p_tilde - 1.0) + 1.0) / (d - r_tilde * (p_tilde - 1.0));
}

bool exponent_condition_holds(double s_prime, double r, double p, int d, bool diffusion_constant) {
  if (s_prime < r) {
    return diffusion_constant ? geq(s_prime * (d + 1.0) / d, p) : geq(s_prime, p);
  }
  if (!diffusion_constant) return geq(r, p);
  if (geq(s_prime, 1.0 + d)) return true;
  return gt(s_prime * (1.0 + d) / (d - s_prime + 1.0), p);
}

CaseInfo classify_exponents(double q, double r, double s, int d, bool diffusion_constant) {
  if (!(q > 1.0) || !(r > 1.0) || !(s > 1.0))
    throw Error(ErrorKind::HypothesisViolation, "exponents q, r, s must all exceed 1");
  CaseInfo info;
  info.p = q / (q - 1.0);
  info.r_prime = r / (r - 1.0);
  info.s_prime = s / (s - 1.0);
  info.sigma = info.r_prime * q / (info.r_prime + q - 1.0);
  const double p = info.p;
  const double sp = info.s_prime;
  const bool case1 = sp < r;
  info.case_label = std::string(case1 ? "1" : "2") + (diffusion_constant ? "B" : "A");

  if (!exponent_condition_holds(sp, r, p, d, diffusion_constant)) {
    std::ostringstream msg;
    msg << "(H5) violated in case " << info.case_label << ": ";
    if (case1 && diffusion_constant) msg << "s'(d+1)/d >= p fails";
    else if (case1) msg << "s' >= p fails";
    else if (!diffusion_constant) msg << "r >= p fails";
    else msg << "[s' >= 1+d] or [s'(1+d)/(d-s'+1) > p] fails";
    msg << " (s'=" << sp << ", r=" << r << ", p=" << p << ", d=" << d << ")";
    throw Error(ErrorKind::HypothesisViolation, msg.str());
  }

  if (case1) {
    info.r_tilde = sp;
    info.kappa = kappa_bar(sp, 1.0, d);
    info.eta = eta_bar(sp, 1.0, d);
    return info;
  }
  if (!diffusion_constant) {
    info.r_tilde = p;
    const double pt = std::min(p, sp / p);
    info.kappa = kappa_bar(p, pt, d);
    info.eta = eta_bar(p, pt, d);
    return info;
  }

  // Case 2B: scan r_tilde over a 1e-3 lattice of (1, r], together with the
  // explicit choices available in closed form, keeping the largest kappa and
  // on ties the largest r_tilde.
  std::vector<double> candidates;
  for (int j = 1; 1.0 + j * 1e-3 < r; ++j) candidates.push_back(1.0 + j * 1e-3);
  candidates.push_back(r);
  auto add_inside = [&](double upper) {
    if (upper > 1.0) candidates.push_back(0.5 * (1.0 + std::min(r, upper)));
  };
  if (sp / p > 1.0) candidates.push_back(std::min(r, sp / p));
  add_inside(sp - d);
  add_inside(sp + sp * (d + 1.0) / p - d);

  double best_kappa = -1.0;
  double best_r = 0.0;
  for (double rt : candidates) {
    const double k = kappa_bar(rt, std::min(p, sp / rt), d);
    if (k > best_kappa || (k == best_kappa && rt > best_r)) {
      best_kappa = k;
      best_r = rt;
    }
  }
  if (!geq(best_kappa, p)) {
    throw Error(ErrorKind::HypothesisViolation,
                "(H5) violated in case 2B: no r_tilde in (1, r] reaches kappa >= p");
  }
  info.r_tilde = best_r;
  info.kappa = best_kappa;
  info.eta = eta_bar(best_r, std::min(p, sp / best_r), d);
  return info;
}

CaseInfo classify_exponents(const ProblemSpec& spec) {
  double s = spec.s;
  if (!spec.price_active()) {
    // Phi = 0 satisfies the growth bound for every s > 1; pick s close
    // enough to 1 that s' clears every threshold of the table.
    const double sp = std::max({spec.s_prime(), 1.0 + spec.grid.dim(), spec.p() * spec.r});
    s = sp / (sp - 1.0);
  }
  return classify_exponents(spec.q, spec.r, s, spec.grid.dim(), true);
}

bool AssumptionReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
}

std::string AssumptionReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.passed) return "(" + c.name + ") violated: " + c.message;
  return {};
}

AssumptionReport check_assumptions(const ProblemSpec& spec) {
  AssumptionReport report;
  const std::size_t n = spec.grid.space_size();
  auto all_of = [](const std::vector<double>& v, auto pred) { return std::all_of(v.begin(), v.end(), pred); };

  HypothesisCheck h1{"H1", true, {}};
  if (!(spec.q > 1.0)) {
    h1 = {"H1", false, "q must exceed 1"};
  } else if (spec.theta.size() != n || !all_of(spec.theta, [](double v) { return v > 0.0 && std::isfinite(v); })) {
    h1 = {"H1", false, "theta must be positive and finite at every node"};
  } else if (!(spec.s > 1.0) || !(spec.kappa_phi >= 0.0) || !std::isfinite(spec.kappa_phi)) {
    h1 = {"H1", false, "price potential needs s > 1 and kappa_phi >= 0"};
  } else if (spec.phi.size() != n * static_cast<std::size_t>(spec.price_dim * spec.grid.dim()) ||
             !all_of(spec.phi, [](double v) { return std::isfinite(v); })) {
    h1 = {"H1", false, "phi must be a finite k x d matrix at every node"};
  } else if (spec.price_active() && spec.requires_constant_phi() && !spec.phi_is_constant()) {
    h1 = {"H1", false, "1/s + 1/(p r) < 1 requires phi to be constant"};
  }
  report.checks.push_back(h1);

  HypothesisCheck h2{"H2", true, {}};
  if (!(spec.r > 1.0)) {
    h2 = {"H2", false, "r must exceed 1"};
  } else if (spec.c.size() != n || !all_of(spec.c, [](double v) { return v > 0.0 && std::isfinite(v); })) {
    h2 = {"H2", false, "c must be positive and finite at every node"};
  }
  report.checks.push_back(h2);

  HypothesisCheck h3{"H3", true, {}};
  try {
    spec.diffusion.require_psd();
  } catch (const Error& e) {
    h3 = {"H3", false, e.what()};
  }
  report.checks.push_back(h3);

  HypothesisCheck h4{"H4", true, {}};
  if (spec.m0.size() != n || !all_of(spec.m0, [](double v) { return v > 0.0 && std::isfinite(v); })) {
    h4 = {"H4", false, "m0 must be strictly positive (m0 > 0) at every node"};
  } else if (std::abs(integrate_space(spec.m0, spec.grid) - 1.0) > 1e-12) {
    h4 = {"H4", false, "m0 must integrate to 1"};
  } else if (spec.uT.size() != n || !all_of(spec.uT, [](double v) { return std::isfinite(v); })) {
    h4 = {"H4", false, "uT must be finite at every node"};
  }
  report.checks.push_back(h4);

  HypothesisCheck h5{"H5", true, {}};
  if (h1.passed && h2.passed) {
    try {
      classify_exponents(spec);
    } catch (const Error& e) {
      h5 = {"H5", false, e.what()};
    }
  } else {
    h5 = {"H5", false, "exponents not classifiable until (H1)/(H2) hold"};
  }
  report.checks.push_back(h5);
  return report;
}

}  // namespace mfgc
