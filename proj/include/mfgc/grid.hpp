#pragma once

// Uniform periodic space-time lattice on T^d x [0,T] and the finite
// difference operators used by both solvers.
//
// Storage is time-major: node (t, s) lives at t * space_size() + s, where the
// spatial index s is row-major over the d axes (axis 0 fastest).  Vector
// fields interleave their d components per node.  A vector value stored at
// spatial index s along axis a is understood to sit on the face between s
// and s + e_a, which is what makes `gradient` and `divergence` an exact
// adjoint pair.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mfgc {

class Grid {
 public:
  Grid() = default;
  Grid(int dim, int nx, int nt, double horizon);

  int dim() const { return dim_; }
  int nx() const { return nx_; }
  int nt() const { return nt_; }
  double horizon() const { return horizon_; }
  double hx() const { return 1.0 / nx_; }
  double ht() const { return horizon_ / nt_; }
  /// hx^d, the quadrature weight of one spatial node.
  double cell_volume() const;
  double time(int t) const { return t * ht(); }

  std::size_t space_size() const { return space_size_; }
  std::size_t size() const { return space_size_ * static_cast<std::size_t>(nt_ + 1); }
  std::size_t node(int t, std::size_t s) const { return static_cast<std::size_t>(t) * space_size_ + s; }

  /// Periodic neighbour of spatial index s, `offset` steps along `axis`.
  std::size_t shift(std::size_t s, int axis, int offset) const;
  std::array<int, 2> coords(std::size_t s) const;
  std::size_t index(std::array<int, 2> coords) const;
  /// Coordinate x_axis = i * hx of spatial node s.
  double coordinate(std::size_t s, int axis) const;

  bool operator==(const Grid& other) const = default;

 private:
  int dim_ = 1;
  int nx_ = 4;
  int nt_ = 2;
  double horizon_ = 1.0;
  std::size_t space_size_ = 4;
};

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& grid, double value = 0.0);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int t, std::size_t s) { return values_[grid_.node(t, s)]; }
  double operator()(int t, std::size_t s) const { return values_[grid_.node(t, s)]; }

  std::span<double> slice(int t);
  std::span<const double> slice(int t) const;
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const Grid& grid, double value = 0.0);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int t, std::size_t s, int axis) {
    return values_[grid_.node(t, s) * grid_.dim() + axis];
  }
  double operator()(int t, std::size_t s, int axis) const {
    return values_[grid_.node(t, s) * grid_.dim() + axis];
  }

  /// All d * space_size() components of time node t.
  std::span<double> slice(int t);
  std::span<const double> slice(int t) const;
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// k-vector per time node.
class PricePath {
 public:
  PricePath() = default;
  PricePath(int dim, int nt, double value = 0.0);

  int dim() const { return dim_; }
  int nt() const { return nt_; }
  std::span<double> at(int t) { return {values_.data() + static_cast<std::size_t>(t) * dim_, static_cast<std::size_t>(dim_)}; }
  std::span<const double> at(int t) const {
    return {values_.data() + static_cast<std::size_t>(t) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  int dim_ = 0;
  int nt_ = 0;
  std::vector<double> values_;
};

/// Constant symmetric d x d diffusion matrix A (row-major, d <= 2).
struct DiffusionMatrix {
  int dim = 1;
  std::array<double, 4> entries{};

  static DiffusionMatrix zero(int dim);
  static DiffusionMatrix identity(int dim);

  double operator()(int i, int j) const { return entries[static_cast<std::size_t>(i * dim + j)]; }
  bool is_zero() const;
  double min_eigenvalue() const;
  double max_abs_entry() const;
  /// Throws NotPSD unless A is symmetric with eigenvalues >= -1e-12.
  void require_psd() const;
};

// --- slice kernels (one time node, spatial data only) ------------------------

void gradient_slice(const Grid& grid, std::span<const double> u, std::span<double> out);
void divergence_slice(const Grid& grid, std::span<const double> w, std::span<double> out);
void diffusion_slice(const Grid& grid, const DiffusionMatrix& a, std::span<const double> u,
                     std::span<double> out);

// --- whole-field operators -----------------------------------------------------

/// Forward difference per axis with periodic wrap.
VectorField gradient(const ScalarField& u);
/// Backward difference per axis; the negative adjoint of `gradient`.
ScalarField divergence(const VectorField& w);
/// A_ij d_ij u with centred second differences (self-adjoint for constant A).
ScalarField diffusion_apply(const DiffusionMatrix& a, const ScalarField& u);

double integrate_space(std::span<const double> f, const Grid& grid);
double integrate_space(const ScalarField& f, int t);
/// Trapezoidal rule in time over all Nt + 1 nodes.
double integrate_Q(const ScalarField& f);
/// Backward rectangle rule in time (nodes 1..Nt): the quadrature the
/// variational discretization is built on.
double integrate_Q_rect(const ScalarField& f);
/// Trapezoidal rule for a scalar time series with Nt + 1 samples.
double integrate_time(std::span<const double> g, const Grid& grid);

/// Plain weighted inner products sum(ht * hx^d * a * b) over every node.
double inner(const ScalarField& a, const ScalarField& b);
double inner(const VectorField& a, const VectorField& b);

// --- CSV ---------------------------------------------------------------------

/// Header `t_index,x_index[,y_index],value`; 17 significant digits.
void write_csv(std::ostream& os, const ScalarField& f);
/// Header `t_index,x_index[,y_index],value_0[,value_1]`.
void write_csv(std::ostream& os, const VectorField& f);
/// Header `t_index,P_0,...`.
void write_csv(std::ostream& os, const PricePath& p);

ScalarField read_scalar_csv(std::istream& is, const Grid& grid);
VectorField read_vector_csv(std::istream& is, const Grid& grid);
PricePath read_price_csv(std::istream& is, int dim, int nt);

std::string format_double(double v);

}  // namespace mfgc
