#include "calibra/grid.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "calibra/errors.hpp"

namespace calibra {

CartesianGrid::CartesianGrid(double a, double b, int n) : CartesianGrid(Box{1, {a, 0.0}, {b, 1.0}}, {n, 1}) {}

CartesianGrid::CartesianGrid(Box box, std::array<int, 2> cells) : box_(box), cells_(cells) {
  if (box_.dim != 1 && box_.dim != 2) throw ShapeMismatch("grid dimension must be 1 or 2");
  if (box_.dim == 1) {
    box_.lo[1] = 0.0;
    box_.hi[1] = 1.0;
    cells_[1] = 1;
  }
  for (int ax = 0; ax < box_.dim; ++ax) {
    if (!(box_.lo[ax] < box_.hi[ax])) throw ShapeMismatch("grid bounds must satisfy a < b");
    if (cells_[ax] < 1) throw ShapeMismatch("grid needs at least one cell per axis");
  }
}

std::size_t CartesianGrid::size() const {
  return static_cast<std::size_t>(cells_[0]) * static_cast<std::size_t>(cells_[1]);
}

double CartesianGrid::cell_volume() const {
  double v = spacing(0);
  if (dim() == 2) v *= spacing(1);
  return v;
}

std::vector<double> CartesianGrid::centers() const {
  std::vector<double> out;
  out.reserve(size() * dim());
  for (int j = 0; j < cells_[1]; ++j)
    for (int i = 0; i < cells_[0]; ++i) {
      out.push_back(center(0, i));
      if (dim() == 2) out.push_back(center(1, j));
    }
  return out;
}

std::string CartesianGrid::describe() const {
  std::ostringstream os;
  os << std::setprecision(17) << "[" << box_.lo[0] << "," << box_.hi[0] << "]x" << cells_[0];
  if (dim() == 2) os << " [" << box_.lo[1] << "," << box_.hi[1] << "]x" << cells_[1];
  return os.str();
}

ScalarField::ScalarField(CartesianGrid grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

ScalarField::ScalarField(CartesianGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw ShapeMismatch("field has " + std::to_string(values_.size()) + " values, grid has " +
                        std::to_string(grid_.size()) + " cells");
}

ConservedField::ConservedField(CartesianGrid grid) : grid_(grid) {
  comps_.assign(grid.dim() + 2, ScalarField(grid));
}

std::vector<std::string> ConservedField::component_names(int dim) {
  if (dim == 1) return {"rho", "m", "E"};
  return {"rho", "mx", "my", "E"};
}

int ConservedField::component_index(int dim, const std::string& name) {
  auto names = component_names(dim);
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return static_cast<int>(k);
  throw ConfigError("unknown component '" + name + "'");
}

namespace {

struct AxisStencil {
  int i0;
  int i1;
  double f;
};

AxisStencil locate(const CartesianGrid& g, int axis, double x) {
  const double a = g.box().lo[axis];
  const double b = g.box().hi[axis];
  const double tol = 1e-12 * std::max(1.0, b - a);
  if (!(x >= a - tol && x <= b + tol)) {
    std::ostringstream os;
    os << std::setprecision(17) << "point coordinate " << x << " outside [" << a << ", " << b << "] on axis "
       << axis;
    throw OutOfDomain(os.str());
  }
  const int n = g.cells(axis);
  const double s = (x - a) / g.spacing(axis) - 0.5;
  if (s <= 0.0) return {0, 0, 0.0};
  if (s >= n - 1) return {n - 1, n - 1, 0.0};
  int i0 = static_cast<int>(std::floor(s));
  double f = s - i0;
  // Snap to the node when rounding leaves us a hair away from a cell centre.
  constexpr double snap = 1e-11;
  if (f < snap) return {i0, i0, 0.0};
  if (f > 1.0 - snap) return {i0 + 1, i0 + 1, 0.0};
  return {i0, i0 + 1, f};
}

}  // namespace

std::vector<double> interpolate(const ScalarField& field, std::span<const double> points) {
  const auto& g = field.grid();
  const int d = g.dim();
  if (points.size() % d != 0) throw ShapeMismatch("point list length is not a multiple of the dimension");
  const std::size_t n = points.size() / d;
  std::vector<double> out(n);
  const auto& v = field.values();
  for (std::size_t k = 0; k < n; ++k) {
    const AxisStencil sx = locate(g, 0, points[k * d]);
    if (d == 1) {
      out[k] = (1.0 - sx.f) * v[sx.i0] + sx.f * v[sx.i1];
    } else {
      const AxisStencil sy = locate(g, 1, points[k * d + 1]);
      const double lo = (1.0 - sx.f) * v[g.index(sx.i0, sy.i0)] + sx.f * v[g.index(sx.i1, sy.i0)];
      const double hi = (1.0 - sx.f) * v[g.index(sx.i0, sy.i1)] + sx.f * v[g.index(sx.i1, sy.i1)];
      out[k] = (1.0 - sy.f) * lo + sy.f * hi;
    }
  }
  return out;
}

double interpolate_at(const ScalarField& field, double x, double y) {
  const double p[2] = {x, y};
  return interpolate(field, std::span<const double>(p, field.grid().dim()))[0];
}

void check_same_grid(const CartesianGrid& a, const CartesianGrid& b, const char* where) {
  if (!(a == b)) throw ShapeMismatch(std::string(where) + ": grids differ (" + a.describe() + " vs " + b.describe() + ")");
}

double inner_product(const ScalarField& f, const ScalarField& g) {
  check_same_grid(f.grid(), g.grid(), "inner_product");
  double s = 0.0;
  const auto& a = f.values();
  const auto& b = g.values();
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s * f.grid().cell_volume();
}

double norm(const ScalarField& f) { return std::sqrt(inner_product(f, f)); }

void write_csv(const ScalarField& field, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  const auto& g = field.grid();
  os << std::setprecision(17);
  os << (g.dim() == 1 ? "x,value\n" : "x,y,value\n");
  for (int j = 0; j < g.cells(1); ++j)
    for (int i = 0; i < g.cells(0); ++i) {
      os << g.center(0, i) << ',';
      if (g.dim() == 2) os << g.center(1, j) << ',';
      os << field[g.index(i, j)] << '\n';
    }
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace calibra
