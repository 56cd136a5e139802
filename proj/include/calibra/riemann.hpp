#pragma once

#include <array>
#include <span>
#include <vector>

#include "calibra/euler.hpp"

namespace calibra {

// Exact solution of the 1D Riemann problem (ideal gas), Newton iteration on the pressure function.
class RiemannExact {
 public:
  RiemannExact(Primitive left, Primitive right, double gamma = kDefaultGamma);

  double p_star() const { return p_star_; }
  double u_star() const { return u_star_; }
  bool left_rarefaction() const { return p_star_ <= left_.p; }
  bool right_shock() const { return p_star_ > right_.p; }
  bool trivial() const { return trivial_; }

  // State at similarity coordinate xi = (x - x0) / t.
  Primitive sample(double xi) const;

  // Rarefaction head, rarefaction tail, contact, shock speeds (left rarefaction / right shock pattern).
  std::array<double, 4> feature_speeds() const;

 private:
  double pressure_function(double p, const Primitive& k, double c, double& derivative) const;

  Primitive left_, right_;
  double gamma_;
  double cl_, cr_;
  double p_star_ = 0.0, u_star_ = 0.0;
  bool trivial_ = false;
};

struct SodSolution {
  std::vector<double> density;
  std::array<double, 4> features;  // head, tail, contact, shock positions
};

SodSolution sod_exact(const Primitive& left, const Primitive& right, double x0, double t, std::span<const double> x,
                      double gamma = kDefaultGamma);

// Feature positions only.
std::array<double, 4> sod_features(const Primitive& left, const Primitive& right, double x0, double t,
                                   double gamma = kDefaultGamma);

}  // namespace calibra
