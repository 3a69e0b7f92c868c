#pragma once

// Regularity functionals of a solution and the shift-quotient experiments:
// the left sides of the space (exact grid shift by delta) and time
// (reparametrization t -> t + eps eta(t), eta = sin^2(pi t / T)) coercivity
// estimates, with every constant set to 1.  Only their scaling in delta and
// eps is meaningful.

#include <map>
#include <span>
#include <vector>

#include "mfgc/model.hpp"
#include "mfgc/varsolve.hpp"

namespace mfgc {

/// Density threshold below which weighted integrands are dropped.
constexpr double kSupportFloor = 1e-10;

/// j1(xi) = |xi|^(r/2 - 1) xi.
void j1(std::span<const double> xi, double r, std::span<double> out);
/// j2(zeta) = |zeta|^(r'/2 - 1) zeta.
void j2(std::span<const double> zeta, double r, std::span<double> out);

struct SpaceNorms {
  double m = 0.0;  // || m^(q/2 - 1) D m ||_{L2(Q)}
  double j = 0.0;  // || m^(1/2) D j1(D u) ||_{L2(Q)}
};
SpaceNorms space_regularity(const Solution& sol, const ProblemSpec& spec);

/// || d/dt m^(q/2) ||_{L2} over the time steps inside (eps, T - eps).
double time_norm_m(const Solution& sol, const ProblemSpec& spec, double eps);
/// || d/dt (|P|^(s'/2 - 1) P) ||_{L2(eps, T - eps)}.
double time_norm_P(const Solution& sol, const ProblemSpec& spec, double eps);

/// t + eps sin^2(pi t / T) and its inverse.
double eta_shift(double t, double eps, double horizon);
double eta_shift_inverse(double tau, double eps, double horizon);

/// Throws ShiftTooLarge unless |eps| < T/4, AssumptionRefused when A != 0.
double time_shift_sum(const Solution& sol, const ProblemSpec& spec, double eps);
/// Throws DeltaNotOnGrid unless delta is an integer multiple of hx.
double space_shift_sum(const Solution& sol, const ProblemSpec& spec, double delta);

/// Least-squares slope of log(y) against log(x); NaN when any y <= 0.
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct RegularityRecord {
  double space_norm_m = 0.0;
  double space_norm_j = 0.0;
  double norm_eps = 0.0;  // eps at which the time norms were taken
  double time_norm_m = 0.0;
  double time_norm_P = 0.0;
  bool time_available = true;  // false when A != 0
  std::map<double, double> time_shift_sums;
  std::map<double, double> space_shift_sums;
  double time_slope = 0.0;   // slope against eps; 2 expected
  double space_slope = 0.0;  // slope against delta; 2 expected
};

/// Runs every diagnostic.  Time quantities are skipped (time_available =
/// false) when A != 0 and `require_time` is false; with `require_time` the
/// refusal is raised.
RegularityRecord regularity_record(const Solution& sol, const ProblemSpec& spec, const std::vector<double>& eps,
                                   const std::vector<double>& deltas, double norm_eps, bool require_time);

}  // namespace mfgc
