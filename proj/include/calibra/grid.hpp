#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace calibra {

// Axis-aligned box in 1 or 2 dimensions.
struct Box {
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  double length(int axis) const { return hi[axis] - lo[axis]; }
  bool operator==(const Box&) const = default;
};

class CartesianGrid {
 public:
  CartesianGrid() = default;
  CartesianGrid(double a, double b, int n);
  CartesianGrid(Box box, std::array<int, 2> cells);

  int dim() const { return box_.dim; }
  const Box& box() const { return box_; }
  int cells(int axis) const { return cells_[axis]; }
  std::size_t size() const;
  double spacing(int axis) const { return box_.length(axis) / cells_[axis]; }
  double center(int axis, int i) const { return box_.lo[axis] + (i + 0.5) * spacing(axis); }
  double cell_volume() const;
  std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(j) * cells_[0] + i; }

  // Flat coordinates (dim per cell) of every cell center, y-outer ordering.
  std::vector<double> centers() const;

  std::string describe() const;
  bool operator==(const CartesianGrid&) const = default;

 private:
  Box box_{};
  std::array<int, 2> cells_{1, 1};
};

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(CartesianGrid grid, double fill = 0.0);
  ScalarField(CartesianGrid grid, std::vector<double> values);

  const CartesianGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

 private:
  CartesianGrid grid_{};
  std::vector<double> values_;
};

// Density, momentum components and total energy, each laid out as a ScalarField.
class ConservedField {
 public:
  ConservedField() = default;
  explicit ConservedField(CartesianGrid grid);

  const CartesianGrid& grid() const { return grid_; }
  int components() const { return static_cast<int>(comps_.size()); }
  ScalarField& component(int c) { return comps_[c]; }
  const ScalarField& component(int c) const { return comps_[c]; }
  const ScalarField& density() const { return comps_[0]; }

  static std::vector<std::string> component_names(int dim);
  static int component_index(int dim, const std::string& name);

 private:
  CartesianGrid grid_{};
  std::vector<ScalarField> comps_;
};

// Multilinear interpolation of cell-centred data; `points` holds dim coordinates per point.
std::vector<double> interpolate(const ScalarField& field, std::span<const double> points);
double interpolate_at(const ScalarField& field, double x, double y = 0.0);

double inner_product(const ScalarField& f, const ScalarField& g);
double norm(const ScalarField& f);
void check_same_grid(const CartesianGrid& a, const CartesianGrid& b, const char* where);

void write_csv(const ScalarField& field, const std::string& path);

}  // namespace calibra
