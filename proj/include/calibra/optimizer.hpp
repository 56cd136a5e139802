#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "calibra/control_grid.hpp"

namespace calibra {

using Objective = std::function<double(std::span<const double>)>;

// Ordering chains with a minimum gap, plus an optional nonlinear constraint margin(x) >= 0.
// Objective values at or above `penalty` mark points the objective itself rejects.
struct Constraints {
  std::vector<Chain> chains;
  std::vector<double> gaps;  // one per chain
  std::function<double(std::span<const double>)> nonlinear_margin;
  std::vector<double> restoration_point;  // known feasible point, optional
  std::vector<double> scale;              // per-variable length scale, optional

  static Constraints from_control_grid(const ControlGrid& cg);
  // Stacks `copies` independent copies of the same constraint set.
  Constraints replicated(int copies, int vars_per_copy) const;
};

struct MinimizeOptions {
  int max_iter = 100;
  double fd_step = 1e-6;  // in scaled coordinates
  double xtol = 1e-8;
  double ftol = 1e-8;
  double penalty = 1e10;
};

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool feasible = true;
  bool max_iter_reached = false;
  std::string message;
};

// Euclidean projection of the chain variables onto {lower + gap <= x1, x_i + gap <= x_{i+1}, x_n <= upper - gap}.
void project_chain(std::span<double> x, const Chain& chain, double gap);
void project(std::span<double> x, const Constraints& c);
bool linear_feasible(std::span<const double> x, const Constraints& c, double slack = 1e-12);

MinimizeResult minimize_constrained(const Objective& objective, std::span<const double> x0, const Constraints& c,
                                    const MinimizeOptions& options = {});

}  // namespace calibra
