#pragma once

// Certification of a candidate solution (u, P, m, w) of the discrete MFGC
// system.  Every residual uses the backward rectangle rule in time (nodes
// 1..Nt), the quadrature the discrete problem is written in.

#include <cstdint>
#include <string>

#include "mfgc/model.hpp"
#include "mfgc/varsolve.hpp"

namespace mfgc {

struct ResidualReport {
  double duality_gap = 0.0;        // B(m, w) + D(u, P, HJ(u, P))
  double hj_violation = 0.0;       // L1 norm of (HJ(u, P) - f(m))^+
  double fp_residual = 0.0;        // L1 norm of the transport residual plus the initial slice
  double price_residual = 0.0;     // L1(0,T) norm of P - Psi(integral phi w)
  double feedback_residual = 0.0;  // L1 norm of w - (upwind flux of m under -dH)
  double complementarity = 0.0;    // signed; +inf when flux leaves an empty node
  double mass_drift = 0.0;         // max_t |integral m(t) - integral m0|
  double m_min = 0.0;              // signed
  double primal_value = 0.0;       // B(m, w), for the relative gap test
};

struct Verdict {
  ResidualReport report;
  bool passed = false;
  std::string failure;  // first failing entry, empty when passed
};

/// Scalar of the complementarity identity:
///   sum ht hx^d [m f(m) + m H*(-w/m) + <P, phi w>] + integral m(T) uT - integral m0 u(0).
/// Throws PerspectiveViolation when flux leaves an empty node.
double complementarity_value(const Solution& sol, const ProblemSpec& spec);

ResidualReport residual_report(const Solution& sol, const ProblemSpec& spec);

/// Gap and |complementarity| are compared with tol (1 + |B|); the other
/// residuals with tol; m_min with -tol.
Verdict weak_solution_report(const Solution& sol, const ProblemSpec& spec, double tol);

struct UniquenessResult {
  double max_m_distance = 0.0;  // L1(Q)
  double max_P_distance = 0.0;  // L1(0,T)
  double max_u_distance = 0.0;  // L1 over {min(m_i, m_j) > support_threshold}
  int solves = 0;
  bool all_converged = true;
};

/// Solves from `n_inits` seeded random initial guesses (divergence-free
/// fluxes with m = m0, random u and P) and reports pairwise distances.
UniquenessResult uniqueness_probe(const ProblemSpec& spec, const SolverOptions& opts, int n_inits,
                                  std::uint64_t seed = 0, double support_threshold = 1e-3);

/// Random initial guess used by the probe.
Solution random_initial_guess(const ProblemSpec& spec, std::uint64_t seed);

}  // namespace mfgc
