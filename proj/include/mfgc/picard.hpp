#pragma once

// Damped fixed-point solver for the MFGC system: backward HJB sweep, feedback
// velocity, forward conservative FP sweep, price update.
//
// Two time discretizations share the upwind space scheme:
//  - Implicit (default): each step solves the backward-Euler equations
//      (u^{k-1} - u^k)/ht - A:D^2 u^{k-1} + H(upwind(D+u^{k-1} + phi^T P^k)) = f(m^k)
//      (m^k - m^{k-1})/ht + div(m^k v^k) - A:D^2 m^k = 0
//    by nonlinear Gauss-Seidel sweeps.  These are the optimality conditions
//    of the discrete variational problem, so both solvers target the same
//    discrete solution.
//  - Explicit: forward-Euler substeps, each kept under the monotonicity bound
//    computed from max |dH| and A.

#include "mfgc/grid.hpp"
#include "mfgc/model.hpp"
#include "mfgc/varsolve.hpp"

namespace mfgc {

enum class TimeScheme { Implicit, Explicit };

/// Constant: m <- (1 - l) m + l m+ with l = damping.
/// Harmonic: l_n = damping / (1 + damping (n - 1)); damping = 1 averages
/// all best responses so far.
enum class DampingSchedule { Constant, Harmonic };

struct PicardOptions {
  TimeScheme scheme = TimeScheme::Implicit;
  DampingSchedule schedule = DampingSchedule::Harmonic;
  double damping = 1.0;
  int max_outer = 5000;
  /// Stop when the sup norm of (m+ - m, P+ - P) falls below this.
  double tol_fixed_point = 2e-3;
  double cfl_safety = 0.5;
  /// Explicit scheme only: when false a time step above the bound raises
  /// CFLViolation instead of being split.
  bool substep = true;
  /// Implicit scheme: Gauss-Seidel stopping tolerance and sweep budget.
  double sweep_tol = 1e-13;
  int max_sweeps = 20000;
};

/// Outgoing node velocities: right >= 0 through the faces s + e_a/2 and
/// left <= 0 through s - e_a/2.
struct SplitVelocity {
  VectorField right;
  VectorField left;
};

/// Backward sweep from uT of -du/dt - A:D^2 u + H(D u + phi^T P) = f(m),
/// using m^k, P^k on the interval [t_{k-1}, t_k].
ScalarField solve_hjb(const ScalarField& m, const PricePath& P, const ProblemSpec& spec,
                      const PicardOptions& opts = {});

/// v = -DH(upwind(D+u + phi^T P)); slot k uses u^{k-1} and P^k (slot 0 uses u^0, P^0).
SplitVelocity feedback(const ScalarField& u, const PricePath& P, const ProblemSpec& spec);

/// Forward sweep from m0 of dm/dt - A:D^2 m + div(v m) = 0 with v^k on [t_{k-1}, t_k].
ScalarField solve_fp(const SplitVelocity& v, const ProblemSpec& spec, const PicardOptions& opts = {});
/// Node velocity field split by sign.
ScalarField solve_fp(const VectorField& v, const ProblemSpec& spec, const PicardOptions& opts = {});
SplitVelocity split_velocity(const VectorField& v);

/// Net face flux m v at every time node.
VectorField transport_flux(const ScalarField& m, const SplitVelocity& v);

/// P(t) = Psi(integral of phi m v).
PricePath update_price(const ScalarField& m, const SplitVelocity& v, const ProblemSpec& spec);

struct PicardResult {
  Solution solution;
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  std::vector<double> changes;  // sup norm of (m+ - m, P+ - P) per outer iteration
};

PicardResult picard_iterate(const ProblemSpec& spec, const PicardOptions& opts = {});

}  // namespace mfgc
