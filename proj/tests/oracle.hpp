#pragma once

// Reference solver for small 1-D instances with q = r = s = 2.  The density
// is eliminated through the transport recurrence
//   m^k = (I - ht A d_xx)^{-1} (m^{k-1} - ht div W^k),
// leaving an objective in the face fluxes alone, which is minimized with
// L-BFGS.  Nothing here calls the library's prox or solver code.

#include <cstdint>
#include <vector>

#include "mfgc/model.hpp"

namespace oracle {

struct Result {
  std::vector<double> m;  // (nt + 1) x nx, slot 0 = m0
  std::vector<double> w;  // (nt + 1) x nx, slot 0 unused
  double objective = 0.0;
  double grad_norm = 0.0;  // sup norm at exit
  int iterations = 0;
  bool converged = false;
};

Result solve(const mfgc::ProblemSpec& spec, int max_iter = 100000, double grad_tol = 1e-8);

/// Random 1-D spec, nx = nt = 8, q = r = s = 2, positive m0, constant phi.
mfgc::ProblemSpec random_spec(std::uint64_t seed, bool with_diffusion = false);

}  // namespace oracle
