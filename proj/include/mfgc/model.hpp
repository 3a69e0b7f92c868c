#pragma once

// Model data of a potential MFG of controls with power-law ingredients:
//
//   f(x,m)   = theta(x) m^(q-1)          F   = theta m^q / q
//   H(x,xi)  = c(x) |xi|^r / r           H*  = c^(1-r') |zeta|^r' / r'
//   Phi(z)   = kappa |z|^s / s           Phi* = kappa^(1-s') |P|^s' / s'
//
// plus a (possibly x-dependent) k x d matrix field phi, a constant diffusion
// matrix A, the initial density m0 and the terminal cost uT.  kappa = 0 is
// accepted as the "no price coupling" case Phi = 0, whose conjugate is the
// indicator of {0}.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mfgc/grid.hpp"

namespace mfgc {

struct ProblemSpec {
  Grid grid;
  double q = 2.0;
  double r = 2.0;
  double s = 2.0;
  std::vector<double> theta;  // per spatial node
  std::vector<double> c;      // per spatial node
  double kappa_phi = 1.0;
  int price_dim = 1;
  std::vector<double> phi;  // per spatial node, k x d row-major
  DiffusionMatrix diffusion;
  std::vector<double> m0;
  std::vector<double> uT;

  /// Spec with constant coefficients, phi = first k x d block of the identity,
  /// m0 uniform and uT zero.
  static ProblemSpec constant(const Grid& grid, double q, double r, double s);

  double p() const { return q / (q - 1.0); }
  double r_prime() const { return r / (r - 1.0); }
  double s_prime() const { return s / (s - 1.0); }
  bool price_active() const { return price_dim > 0 && kappa_phi > 0.0; }

  double phi_entry(std::size_t x, int row, int col) const {
    return phi[(x * static_cast<std::size_t>(price_dim) + static_cast<std::size_t>(row)) * grid.dim() +
               static_cast<std::size_t>(col)];
  }
  bool phi_is_constant() const;
  /// 1/s + 1/(p r) < 1: the regime where phi must be constant.
  bool requires_constant_phi() const { return 1.0 / s + 1.0 / (p() * r) < 1.0; }

  // --- Hamiltonian ---------------------------------------------------------
  // The vector arguments may have any length; the discrete Hamiltonian of the
  // upwind scheme evaluates H on 2d-vectors of one-sided differences.
  double hamiltonian(std::size_t x, std::span<const double> xi) const;
  double conjugate(std::size_t x, std::span<const double> zeta) const;
  void dH(std::size_t x, std::span<const double> xi, std::span<double> out) const;
  /// Radial profiles: H = c t^r / r and H* = c^(1-r') t^r' / r' at |.| = t.
  double hamiltonian_radial(std::size_t x, double t) const;
  double conjugate_radial(std::size_t x, double t) const;

  // --- congestion coupling -----------------------------------------------------
  double coupling(std::size_t x, double m) const;   // f; throws NegativeDensity for m < 0
  double F(std::size_t x, double m) const;          // throws NegativeDensity for m < 0
  double F_or_inf(std::size_t x, double m) const;   // +inf for m < 0
  double F_star(std::size_t x, double a) const;

  // --- price potential -----------------------------------------------------------
  double Phi(std::span<const double> z) const;
  double Phi_star(std::span<const double> p) const;
  void Psi(std::span<const double> z, std::span<double> out) const;
  void Psi_inv(std::span<const double> p, std::span<double> out) const;
};

constexpr double kKappaSentinel = 1e6;  // borderline kappa_bar / eta_bar value
constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct CaseInfo {
  double p = 0.0;
  double r_prime = 0.0;
  double s_prime = 0.0;
  double sigma = 0.0;
  std::string case_label;  // "1A", "1B", "2A" or "2B"
  double r_tilde = 0.0;
  double kappa = 0.0;  // may be kInfinity
  double eta = 0.0;    // may be kInfinity
};

/// Exponent functions used to pick the Lebesgue exponents of the
/// Hamilton-Jacobi estimates.  Return kInfinity above the critical line and
/// kKappaSentinel on it.
double kappa_bar(double r_tilde, double p_tilde, int d);
double eta_bar(double r_tilde, double p_tilde, int d);

/// Closed-form admissibility of the exponent table for (s', r, p, d).
bool exponent_condition_holds(double s_prime, double r, double p, int d, bool diffusion_constant);

/// Throws HypothesisViolation naming the failing table cell.
CaseInfo classify_exponents(double q, double r, double s, int d, bool diffusion_constant = true);
CaseInfo classify_exponents(const ProblemSpec& spec);

struct HypothesisCheck {
  std::string name;  // "H1" .. "H5"
  bool passed = true;
  std::string message;
};

struct AssumptionReport {
  std::vector<HypothesisCheck> checks;
  bool all_passed() const;
  /// First failing check formatted as "(Hn) violated: ...", empty if none.
  std::string first_failure() const;
};

AssumptionReport check_assumptions(const ProblemSpec& spec);

}  // namespace mfgc
