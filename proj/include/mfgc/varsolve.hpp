#pragma once

// Primal functional B, dual functional D, the proximal kernels and the
// first-order primal-dual (Chambolle-Pock) solver of the discrete potential
// problem.
//
// Discrete primal: densities m^1..m^Nt and net face fluxes W^1..W^Nt subject
// to the implicit transport constraint
//
//     (m^{n+1} - m^n)/ht + div W^{n+1} - A:D^2 m^{n+1} = 0,   m^0 = m0,
//
// with cost  sum_k ht [ kinetic(m^k, W^k) + sum F(m^k) hx^d + Phi(z^k) ]
//            + hx^d sum uT m^Nt,   z^k = hx^d sum phi W^k.
// The multiplier of the constraint at step n is u^n (so u^Nt = uT), and the
// multiplier of z^k is P^k.

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mfgc/grid.hpp"
#include "mfgc/model.hpp"

namespace mfgc {

struct Solution {
  ScalarField u;
  ScalarField m;
  VectorField w;
  PricePath P;
  ScalarField gamma;

  /// Zero fields with m = m0 at every time and u = uT.
  static Solution initial(const ProblemSpec& spec);
};

struct SolverOptions {
  double tau = 0.0;         // primal step; 0 picks it from the operator norm
  double sigma_step = 0.0;  // dual step; 0 picks it from the operator norm
  int max_iter = 20000;
  double tol_gap = 1e-6;
  double theta_pd = 1.0;    // over-relaxation
  double newton_tol = 1e-12;
  int newton_max = 60;
  double step_ratio = 1.0;  // tau / sigma balance when steps are automatic
  int power_iterations = 50;
};

struct ConvergenceEntry {
  int iter = 0;
  double B = 0.0;
  double D = 0.0;
  double gap = 0.0;
  double fp_res = 0.0;
  double price_res = 0.0;
  double m_min = 0.0;
};

struct ConvergenceLog {
  std::vector<ConvergenceEntry> entries;
  /// Header iter,B,D,gap,fp_res,price_res.
  void write_csv(std::ostream& os) const;
};

struct SolveResult {
  Solution solution;
  ConvergenceLog log;
  bool converged = false;
  int iterations = 0;
  double op_norm = 0.0;
  double tau = 0.0;
  double sigma = 0.0;
};

// --- functionals -------------------------------------------------------------

/// B(m, w) on nodes 1..Nt plus the terminal term; +inf on m < 0 or flux out
/// of an empty node.
double eval_B(const ScalarField& m, const VectorField& w, const ProblemSpec& spec);
/// D(u, P, gamma) = -<u^0, m0> + sum ht Phi*(P^k) + sum ht hx^d F*(gamma^k), k = 1..Nt.
double eval_D(const ScalarField& u, const PricePath& P, const ScalarField& gamma, const ProblemSpec& spec);

/// Discrete Hamilton-Jacobi left side at node k = 1..Nt:
///   (u^{k-1} - u^k)/ht - A:D^2 u^{k-1} + H(upwind(D+u^{k-1} + phi^T P^k)).
/// Slot 0 is left at 0.  With u^Nt = uT, D(u, P, hj_operator) is the dual
/// value of (u, P).
ScalarField hj_operator(const ScalarField& u, const PricePath& P, const ProblemSpec& spec);

// --- transport constraint -----------------------------------------------------

/// Linear transport operator: slot n (0..Nt-1) holds
/// (m^{n+1} - m^n)/ht + div w^{n+1} - A:D^2 m^{n+1}; slot Nt is 0.
ScalarField fp_transport(const ScalarField& m, const VectorField& w, const ProblemSpec& spec);

struct FpResidual {
  ScalarField transport;
  std::vector<double> initial;  // m(., 0) - m0
  /// sum ht hx^d |transport| + hx^d |initial|
  double l1_norm() const;
};
FpResidual fp_constraint(const ScalarField& m, const VectorField& w, const ProblemSpec& spec);

struct FpAdjoint {
  ScalarField m;
  VectorField w;
};
/// Adjoint of fp_transport for the `inner` products:
///   inner(fp_transport(m, w), u) = inner(m, adj.m) + inner(w, adj.w).
FpAdjoint fp_transport_adjoint(const ScalarField& u, const ProblemSpec& spec);

/// z(t) = integral of phi w over the torus, every time node.
PricePath aggregate_flux(const VectorField& w, const ProblemSpec& spec);

// --- proximal kernels ---------------------------------------------------------

struct ProxTolerance {
  double newton_tol = 1e-12;
  int newton_max = 60;
};

/// argmin_m>=0 F(m) + (m - mbar)^2 / (2 tau).
double prox_F(double mbar, double tau, double theta, double q, ProxTolerance tol = {});
double prox_F(double mbar, double tau, const ProblemSpec& spec, std::size_t x, ProxTolerance tol = {});

/// Joint prox of m H*(-z/m) + F(m) over m >= 0, z of any length; theta = 0
/// drops F.  Writes z to `z_out` and returns m.
double prox_perspective(double mbar, std::span<const double> zbar, double tau, double c, double r, double theta,
                        double q, std::span<double> z_out, ProxTolerance tol = {});

/// argmin m H*(-w/m) + (|m - mbar|^2 + |w - wbar|^2) / (2 tau).
double prox_kinetic(double mbar, std::span<const double> wbar, double tau, const ProblemSpec& spec, std::size_t x,
                    std::span<double> w_out, ProxTolerance tol = {});

/// KKT residual of (m, z) for prox_perspective; 0 at the exact minimizer.
double prox_perspective_kkt(double m, std::span<const double> z, double mbar, std::span<const double> zbar,
                            double tau, double c, double r, double theta, double q);

/// argmin Phi*(P) + |P - Pbar|^2 / (2 sigma).
void prox_Phi_star(std::span<const double> pbar, double sigma, const ProblemSpec& spec, std::span<double> out,
                   ProxTolerance tol = {});
/// argmin Phi(z) + |z - zbar|^2 / (2 lambda).
void prox_Phi(std::span<const double> zbar, double lambda, const ProblemSpec& spec, std::span<double> out,
              ProxTolerance tol = {});

// --- solver -----------------------------------------------------------------------

/// Norm of the constraint operator (transport and aggregation) for the
/// solver's weighted inner products, by power iteration.
double estimate_operator_norm(const ProblemSpec& spec, int iterations);

/// Price and flux at t = 0, which no constraint of the discrete problem
/// determines: the fixed point P^0 = Psi(agg(feedback flux of m0 under u^0, P^0)).
void complete_initial_slice(Solution& sol, const ProblemSpec& spec);

SolveResult solve_primal_dual(const ProblemSpec& spec, const SolverOptions& opts,
                              const std::optional<Solution>& init = std::nullopt);

}  // namespace mfgc
