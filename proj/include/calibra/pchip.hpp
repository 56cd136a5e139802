#pragma once

#include <span>
#include <vector>

namespace calibra {

// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes.
// Outside the knot range it extends linearly with the end slopes.
class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> knots, std::vector<double> values);

  double operator()(double x) const;
  double derivative(double x) const;
  void evaluate(double x, double& value, double& slope) const;

  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }
  const std::vector<double>& slopes() const { return d_; }

 private:
  std::size_t interval(double x) const;

  std::vector<double> x_, y_, d_;
};

Pchip pchip_fit(std::span<const double> knots, std::span<const double> values);

}  // namespace calibra
