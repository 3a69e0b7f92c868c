#include "mfgc/scheme.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace mfgc {

void face_gradient(const ProblemSpec& spec, std::span<const double> u, std::span<const double> price,
                   std::span<double> out) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  gradient_slice(g, u, out);
  if (price.empty() || !spec.price_active()) return;
  for (std::size_t s = 0; s < g.space_size(); ++s) {
    for (int a = 0; a < d; ++a) {
      double acc = 0.0;
      for (int k = 0; k < spec.price_dim; ++k) acc += spec.phi_entry(s, k, a) * price[static_cast<std::size_t>(k)];
      out[s * d + a] += acc;
    }
  }
}

void upwind_vector(const Grid& grid, std::span<const double> face_grad, std::size_t s, std::span<double> out) {
  const int d = grid.dim();
  for (int a = 0; a < d; ++a) {
    out[static_cast<std::size_t>(a)] = std::min(face_grad[s * d + a], 0.0);
    out[static_cast<std::size_t>(d + a)] = std::max(face_grad[grid.shift(s, a, -1) * d + a], 0.0);
  }
}

void discrete_hamiltonian(const ProblemSpec& spec, std::span<const double> face_grad, std::span<double> out) {
  const Grid& g = spec.grid;
  std::array<double, 4> p{};
  const std::span<double> pv(p.data(), static_cast<std::size_t>(2 * g.dim()));
  for (std::size_t s = 0; s < g.space_size(); ++s) {
    upwind_vector(g, face_grad, s, pv);
    out[s] = spec.hamiltonian(s, pv);
  }
}

void upwind_velocity(const ProblemSpec& spec, std::span<const double> face_grad, std::span<double> right,
                     std::span<double> left) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  std::array<double, 4> p{}, dh{};
  const std::span<double> pv(p.data(), static_cast<std::size_t>(2 * d));
  const std::span<double> dv(dh.data(), static_cast<std::size_t>(2 * d));
  for (std::size_t s = 0; s < g.space_size(); ++s) {
    upwind_vector(g, face_grad, s, pv);
    spec.dH(s, pv, dv);
    for (int a = 0; a < d; ++a) {
      right[s * d + a] = -dh[static_cast<std::size_t>(a)];
      left[s * d + a] = -dh[static_cast<std::size_t>(d + a)];
    }
  }
}

void upwind_flux(const Grid& grid, std::span<const double> m, std::span<const double> right,
                 std::span<const double> left, std::span<double> flux) {
  const int d = grid.dim();
  for (std::size_t s = 0; s < grid.space_size(); ++s) {
    for (int a = 0; a < d; ++a) {
      const std::size_t next = grid.shift(s, a, 1);
      flux[s * d + a] = m[s] * right[s * d + a] + m[next] * left[next * d + a];
    }
  }
}

double kinetic_cost(const ProblemSpec& spec, std::span<const double> m, std::span<const double> flux,
                    std::span<double> out) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  double total = 0.0;
  for (std::size_t s = 0; s < g.space_size(); ++s) {
    double norm2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double right = std::max(flux[s * d + a], 0.0);
      const double left = std::min(flux[g.shift(s, a, -1) * d + a], 0.0);
      norm2 += right * right + left * left;
    }
    double value = 0.0;
    if (norm2 > 0.0) {
      value = m[s] > 0.0 ? m[s] * spec.conjugate_radial(s, std::sqrt(norm2) / m[s]) : kInfinity;
    }
    if (!out.empty()) out[s] = value;
    total += value;
  }
  return total;
}

void aggregate_slice(const ProblemSpec& spec, std::span<const double> flux, std::span<double> z) {
  const Grid& g = spec.grid;
  const int d = g.dim();
  std::fill(z.begin(), z.end(), 0.0);
  for (std::size_t s = 0; s < g.space_size(); ++s)
    for (int k = 0; k < spec.price_dim; ++k)
      for (int a = 0; a < d; ++a) z[static_cast<std::size_t>(k)] += spec.phi_entry(s, k, a) * flux[s * d + a];
  for (auto& v : z) v *= g.cell_volume();
}

}  // namespace mfgc
