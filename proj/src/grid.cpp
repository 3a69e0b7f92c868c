#include "mfgc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "mfgc/error.hpp"

namespace mfgc {

Grid::Grid(int dim, int nx, int nt, double horizon)
    : dim_(dim), nx_(nx), nt_(nt), horizon_(horizon) {
  if (dim != 1 && dim != 2) throw Error(ErrorKind::InvalidGrid, "dimension must be 1 or 2");
  if (nx < 4) throw Error(ErrorKind::InvalidGrid, "nx must be >= 4");
  if (nt < 2) throw Error(ErrorKind::InvalidGrid, "nt must be >= 2");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error(ErrorKind::InvalidGrid, "horizon must be > 0");
  space_size_ = dim == 1 ? static_cast<std::size_t>(nx) : static_cast<std::size_t>(nx) * nx;
}

double Grid::cell_volume() const { return dim_ == 1 ? hx() : hx() * hx(); }

std::size_t Grid::shift(std::size_t s, int axis, int offset) const {
  auto c = coords(s);
  int v = (c[axis] + offset) % nx_;
  if (v < 0) v += nx_;
  c[axis] = v;
  return index(c);
}

std::array<int, 2> Grid::coords(std::size_t s) const {
  if (dim_ == 1) return {static_cast<int>(s), 0};
  return {static_cast<int>(s % nx_), static_cast<int>(s / nx_)};
}

std::size_t Grid::index(std::array<int, 2> c) const {
  if (dim_ == 1) return static_cast<std::size_t>(c[0]);
  return static_cast<std::size_t>(c[1]) * nx_ + c[0];
}

double Grid::coordinate(std::size_t s, int axis) const { return coords(s)[axis] * hx(); }

ScalarField::ScalarField(const Grid& grid, double value) : grid_(grid), values_(grid.size(), value) {}

std::span<double> ScalarField::slice(int t) {
  return {values_.data() + grid_.node(t, 0), grid_.space_size()};
}
std::span<const double> ScalarField::slice(int t) const {
  return {values_.data() + grid_.node(t, 0), grid_.space_size()};
}

VectorField::VectorField(const Grid& grid, double value)
    : grid_(grid), values_(grid.size() * grid.dim(), value) {}

std::span<double> VectorField::slice(int t) {
  const std::size_t n = grid_.space_size() * grid_.dim();
  return {values_.data() + static_cast<std::size_t>(t) * n, n};
}
std::span<const double> VectorField::slice(int t) const {
  const std::size_t n = grid_.space_size() * grid_.dim();
  return {values_.data() + static_cast<std::size_t>(t) * n, n};
}

PricePath::PricePath(int dim, int nt, double value)
    : dim_(dim), nt_(nt), values_(static_cast<std::size_t>(dim) * (nt + 1), value) {}

DiffusionMatrix DiffusionMatrix::zero(int dim) {
  DiffusionMatrix a;
  a.dim = dim;
  return a;
}

DiffusionMatrix DiffusionMatrix::identity(int dim) {
  DiffusionMatrix a;
  a.dim = dim;
  for (int i = 0; i < dim; ++i) a.entries[static_cast<std::size_t>(i * dim + i)] = 1.0;
  return a;
}

bool DiffusionMatrix::is_zero() const {
  return std::all_of(entries.begin(), entries.begin() + dim * dim, [](double v) { return v == 0.0; });
}

double DiffusionMatrix::min_eigenvalue() const {
  if (dim == 1) return entries[0];
  const double a = entries[0], b = 0.5 * (entries[1] + entries[2]), d = entries[3];
  const double mean = 0.5 * (a + d);
  const double rad = std::hypot(0.5 * (a - d), b);
  return mean - rad;
}

double DiffusionMatrix::max_abs_entry() const {
  double m = 0.0;
  for (int i = 0; i < dim * dim; ++i) m = std::max(m, std::abs(entries[static_cast<std::size_t>(i)]));
  return m;
}

void DiffusionMatrix::require_psd() const {
  if (dim == 2 && std::abs(entries[1] - entries[2]) > 1e-12 * (1.0 + max_abs_entry()))
    throw Error(ErrorKind::NotPSD, "diffusion matrix is not symmetric");
  const double lambda = min_eigenvalue();
  if (lambda < -1e-12) {
    throw Error(ErrorKind::NotPSD, "diffusion matrix has eigenvalue " + format_double(lambda));
  }
}

void gradient_slice(const Grid& grid, std::span<const double> u, std::span<double> out) {
  const int d = grid.dim();
  const double inv_h = 1.0 / grid.hx();
  for (std::size_t s = 0; s < grid.space_size(); ++s) {
    for (int a = 0; a < d; ++a) {
      out[s * d + a] = (u[grid.shift(s, a, 1)] - u[s]) * inv_h;
    }
  }
}

void divergence_slice(const Grid& grid, std::span<const double> w, std::span<double> out) {
  const int d = grid.dim();
  const double inv_h = 1.0 / grid.hx();
  for (std::size_t s = 0; s < grid.space_size(); ++s) {
    double acc = 0.0;
    for (int a = 0; a < d; ++a) acc += w[s * d + a] - w[grid.shift(s, a, -1) * d + a];
    out[s] = acc * inv_h;
  }
}

void diffusion_slice(const Grid& grid, const DiffusionMatrix& a, std::span<const double> u,
                     std::span<double> out) {
  const int d = grid.dim();
  const double inv_h2 = 1.0 / (grid.hx() * grid.hx());
  for (std::size_t s = 0; s < grid.space_size(); ++s) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
      const double aii = a(i, i);
      if (aii != 0.0) acc += aii * (u[grid.shift(s, i, 1)] - 2.0 * u[s] + u[grid.shift(s, i, -1)]) * inv_h2;
    }
    if (d == 2) {
      const double a01 = a(0, 1) + a(1, 0);
      if (a01 != 0.0) {
        const std::size_t xp = grid.shift(s, 0, 1), xm = grid.shift(s, 0, -1);
        const double mixed = u[grid.shift(xp, 1, 1)] - u[grid.shift(xp, 1, -1)] - u[grid.shift(xm, 1, 1)] +
                             u[grid.shift(xm, 1, -1)];
        acc += a01 * mixed * 0.25 * inv_h2;
      }
    }
    out[s] = acc;
  }
}

VectorField gradient(const ScalarField& u) {
  VectorField out(u.grid());
  for (int t = 0; t <= u.grid().nt(); ++t) gradient_slice(u.grid(), u.slice(t), out.slice(t));
  return out;
}

ScalarField divergence(const VectorField& w) {
  ScalarField out(w.grid());
  for (int t = 0; t <= w.grid().nt(); ++t) divergence_slice(w.grid(), w.slice(t), out.slice(t));
  return out;
}

ScalarField diffusion_apply(const DiffusionMatrix& a, const ScalarField& u) {
  a.require_psd();
  ScalarField out(u.grid());
  if (a.is_zero()) return out;
  for (int t = 0; t <= u.grid().nt(); ++t) diffusion_slice(u.grid(), a, u.slice(t), out.slice(t));
  return out;
}

double integrate_space(std::span<const double> f, const Grid& grid) {
  double acc = 0.0;
  for (double v : f) acc += v;
  return acc * grid.cell_volume();
}

double integrate_space(const ScalarField& f, int t) { return integrate_space(f.slice(t), f.grid()); }

double integrate_time(std::span<const double> g, const Grid& grid) {
  const int nt = grid.nt();
  double acc = 0.5 * (g[0] + g[static_cast<std::size_t>(nt)]);
  for (int t = 1; t < nt; ++t) acc += g[static_cast<std::size_t>(t)];
  return acc * grid.ht();
}

double integrate_Q(const ScalarField& f) {
  std::vector<double> per_time(static_cast<std::size_t>(f.grid().nt() + 1));
  for (int t = 0; t <= f.grid().nt(); ++t) per_time[static_cast<std::size_t>(t)] = integrate_space(f, t);
  return integrate_time(per_time, f.grid());
}

double integrate_Q_rect(const ScalarField& f) {
  double acc = 0.0;
  for (int t = 1; t <= f.grid().nt(); ++t) acc += integrate_space(f, t);
  return acc * f.grid().ht();
}

double inner(const ScalarField& a, const ScalarField& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.values()[i] * b.values()[i];
  return acc * a.grid().cell_volume() * a.grid().ht();
}

double inner(const VectorField& a, const VectorField& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.values()[i] * b.values()[i];
  return acc * a.grid().cell_volume() * a.grid().ht();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_coord_header(std::ostream& os, const Grid& grid) {
  os << "t_index,x_index";
  if (grid.dim() == 2) os << ",y_index";
}

void write_coords(std::ostream& os, const Grid& grid, int t, std::size_t s) {
  const auto c = grid.coords(s);
  os << t << ',' << c[0];
  if (grid.dim() == 2) os << ',' << c[1];
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_number(const std::string& token) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigParse, "bad number '" + token + "' in CSV");
  }
  if (used != token.size() && token.find_first_not_of(" \t\r", used) != std::string::npos)
    throw Error(ErrorKind::ConfigParse, "bad number '" + token + "' in CSV");
  return v;
}

// Reads rows of (t, coords..., values...) into `sink(t, s, values)`.
template <class Sink>
void read_rows(std::istream& is, const Grid& grid, std::size_t n_values, Sink sink) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::ConfigParse, "empty CSV");
  const std::size_t n_cols = 1 + static_cast<std::size_t>(grid.dim()) + n_values;
  std::vector<char> seen(grid.size(), 0);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != n_cols) throw Error(ErrorKind::ConfigParse, "CSV row has wrong column count: " + line);
    const int t = static_cast<int>(parse_number(cells[0]));
    std::array<int, 2> c{0, 0};
    for (int a = 0; a < grid.dim(); ++a) c[a] = static_cast<int>(parse_number(cells[1 + a]));
    if (t < 0 || t > grid.nt() || c[0] < 0 || c[0] >= grid.nx() || c[1] < 0 || c[1] >= grid.nx())
      throw Error(ErrorKind::ConfigParse, "CSV index out of range: " + line);
    const std::size_t s = grid.index(c);
    std::vector<double> vals(n_values);
    for (std::size_t k = 0; k < n_values; ++k) vals[k] = parse_number(cells[1 + grid.dim() + k]);
    sink(t, s, vals);
    seen[grid.node(t, s)] = 1;
    ++rows;
  }
  if (rows != grid.size() || std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw Error(ErrorKind::ConfigParse, "CSV does not cover every grid node");
}

}  // namespace

void write_csv(std::ostream& os, const ScalarField& f) {
  const Grid& g = f.grid();
  write_coord_header(os, g);
  os << ",value\n";
  for (int t = 0; t <= g.nt(); ++t) {
    for (std::size_t s = 0; s < g.space_size(); ++s) {
      write_coords(os, g, t, s);
      os << ',' << format_double(f(t, s)) << '\n';
    }
  }
}

void write_csv(std::ostream& os, const VectorField& f) {
  const Grid& g = f.grid();
  write_coord_header(os, g);
  for (int a = 0; a < g.dim(); ++a) os << ",value_" << a;
  os << '\n';
  for (int t = 0; t <= g.nt(); ++t) {
    for (std::size_t s = 0; s < g.space_size(); ++s) {
      write_coords(os, g, t, s);
      for (int a = 0; a < g.dim(); ++a) os << ',' << format_double(f(t, s, a));
      os << '\n';
    }
  }
}

void write_csv(std::ostream& os, const PricePath& p) {
  os << "t_index";
  for (int k = 0; k < p.dim(); ++k) os << ",P_" << k;
  os << '\n';
  for (int t = 0; t <= p.nt(); ++t) {
    os << t;
    for (double v : p.at(t)) os << ',' << format_double(v);
    os << '\n';
  }
}

ScalarField read_scalar_csv(std::istream& is, const Grid& grid) {
  ScalarField f(grid);
  read_rows(is, grid, 1, [&](int t, std::size_t s, const std::vector<double>& v) { f(t, s) = v[0]; });
  return f;
}

VectorField read_vector_csv(std::istream& is, const Grid& grid) {
  VectorField f(grid);
  read_rows(is, grid, static_cast<std::size_t>(grid.dim()), [&](int t, std::size_t s, const std::vector<double>& v) {
    for (int a = 0; a < grid.dim(); ++a) f(t, s, a) = v[static_cast<std::size_t>(a)];
  });
  return f;
}

PricePath read_price_csv(std::istream& is, int dim, int nt) {
  PricePath p(dim, nt);
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::ConfigParse, "empty price CSV");
  std::vector<char> seen(static_cast<std::size_t>(nt + 1), 0);
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != static_cast<std::size_t>(dim) + 1)
      throw Error(ErrorKind::ConfigParse, "price CSV row has wrong column count");
    const int t = static_cast<int>(parse_number(cells[0]));
    if (t < 0 || t > nt) throw Error(ErrorKind::ConfigParse, "price CSV time index out of range");
    for (int k = 0; k < dim; ++k) p.at(t)[static_cast<std::size_t>(k)] = parse_number(cells[1 + static_cast<std::size_t>(k)]);
    seen[static_cast<std::size_t>(t)] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw Error(ErrorKind::ConfigParse, "price CSV does not cover every time node");
  return p;
}

}  // namespace mfgc
