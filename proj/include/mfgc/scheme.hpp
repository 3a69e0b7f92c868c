#pragma once

// Monotone upwind discretization of the Hamiltonian and of the optimal flux,
// shared by the variational solver, the fixed-point solver and the verifier.
//
// With G = D+u + phi^T P the face gradient (G_s along axis a sits on the
// face between s and s + e_a), node s sees the 2d-vector
//
//     p_s = ( min(G_s, 0) , max(G_{s - e_a}, 0) )_a
//
// and the discrete Hamiltonian is H(x_s, p_s).  The conjugate side charges
// node s for the flux it pushes out through its right faces (a_s >= 0) and
// its left faces (b_s <= 0):  m_s H*(-(a_s, b_s) / m_s).  The net flux
// through face s + e_a/2 is W_s = a_s + b_{s + e_a}.

#include <span>
#include <vector>

#include "mfgc/grid.hpp"
#include "mfgc/model.hpp"

namespace mfgc {

/// G = D+u + phi^T P on one time slice (d values per node).
void face_gradient(const ProblemSpec& spec, std::span<const double> u, std::span<const double> price,
                   std::span<double> out);

/// p_s as defined above; `out` has 2d entries (right faces first).
void upwind_vector(const Grid& grid, std::span<const double> face_grad, std::size_t s, std::span<double> out);

/// H(x_s, p_s) at every node of a slice.
void discrete_hamiltonian(const ProblemSpec& spec, std::span<const double> face_grad, std::span<double> out);

/// Outgoing node velocities (right >= 0, left <= 0) = -DH(x_s, p_s) split by
/// face, each d values per node.
void upwind_velocity(const ProblemSpec& spec, std::span<const double> face_grad, std::span<double> right,
                     std::span<double> left);

/// Net face flux of density m transported by the split velocity:
/// W_s = m_s right_s + m_{s+e} left_{s+e}.
void upwind_flux(const Grid& grid, std::span<const double> m, std::span<const double> right,
                 std::span<const double> left, std::span<double> flux);

/// Kinetic cost sum_s m_s H*(-(W_s^+, W_{s-e}^-) / m_s) of a net face flux,
/// with the perspective convention (0 at (0,0), +inf for flux out of an
/// empty node).  Per-node values written to `out` when non-empty.
double kinetic_cost(const ProblemSpec& spec, std::span<const double> m, std::span<const double> flux,
                    std::span<double> out = {});

/// Integral of phi(x) W(x) over one slice.
void aggregate_slice(const ProblemSpec& spec, std::span<const double> flux, std::span<double> z);

}  // namespace mfgc
