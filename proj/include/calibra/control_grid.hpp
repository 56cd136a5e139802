#pragma once

#include <span>
#include <vector>

#include "calibra/grid.hpp"
#include "json.hpp"

namespace calibra {

// Consecutive free coordinates along one grid line, bracketed by fixed anchors or the domain bounds.
struct Chain {
  int axis = 0;
  std::vector<int> vars;  // indices into theta, in line order
  double lower = 0.0;     // anchor below the first variable
  double upper = 1.0;     // anchor above the last variable
};

// Tensor grid of control points. Flat point index is a2 * M1 + a1; coordinates are stored point-major.
class ControlGrid {
 public:
  ControlGrid() = default;
  ControlGrid(Box domain, std::vector<double> xs, std::vector<double> ys = {});

  // Equispaced points including the boundary lines.
  static ControlGrid uniform(Box domain, int m1, int m2 = 1);

  int dim() const { return domain_.dim; }
  const Box& domain() const { return domain_; }
  int count(int axis) const { return static_cast<int>(axes_[axis].size()); }
  int points() const { return count(0) * (dim() == 2 ? count(1) : 1); }
  const std::vector<double>& axis(int a) const { return axes_[a]; }
  int point_index(int a1, int a2) const { return a2 * count(0) + a1; }

  const std::vector<double>& reference() const { return reference_; }
  bool is_free(int point, int coord) const { return slot_to_var_[point * dim() + coord] >= 0; }
  int free_count() const { return static_cast<int>(free_slots_.size()); }
  // Flat coordinate slot (point * dim + coord) of each theta entry.
  const std::vector<int>& free_slots() const { return free_slots_; }
  const std::vector<Chain>& chains() const { return chains_; }
  // Minimum spacing between neighbours on a line, per axis.
  double gap(int axis) const { return gap_fraction_ * domain_.length(axis); }
  double gap_fraction() const { return gap_fraction_; }
  void set_gap_fraction(double f);

  std::vector<double> pack(std::span<const double> w) const;
  std::vector<double> unpack(std::span<const double> theta) const;
  std::vector<double> reference_theta() const { return pack(reference_); }

  // Per-line strict ordering and untouched fixed coordinates.
  bool ordered(std::span<const double> w) const;
  void validate_points(std::span<const double> w) const;

  nlohmann::json to_json() const;
  static ControlGrid from_json(const nlohmann::json& j);

 private:
  void build();

  Box domain_{};
  std::vector<double> axes_[2];
  std::vector<double> reference_;
  std::vector<int> free_slots_;
  std::vector<int> slot_to_var_;
  std::vector<Chain> chains_;
  double gap_fraction_ = 1e-3;
};

}  // namespace calibra
