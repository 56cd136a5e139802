#include "calibra/riemann.hpp"

#include <cmath>

#include "calibra/errors.hpp"

namespace calibra {

RiemannExact::RiemannExact(Primitive left, Primitive right, double gamma) : left_(left), right_(right), gamma_(gamma) {
  if (!(left.rho > 0 && left.p > 0 && right.rho > 0 && right.p > 0))
    throw NonPhysicalState("Riemann data need positive density and pressure");
  cl_ = sound_speed(left, gamma);
  cr_ = sound_speed(right, gamma);
  if (left.rho == right.rho && left.u == right.u && left.p == right.p) {
    trivial_ = true;
    p_star_ = left.p;
    u_star_ = left.u;
    return;
  }
  const double du = right.u - left.u;
  if (2.0 * (cl_ + cr_) / (gamma - 1.0) <= du) throw NonPhysicalState("Riemann data generate vacuum");

  // Two-rarefaction guess, then Newton.
  const double z = (gamma - 1.0) / (2.0 * gamma);
  double p = std::pow((cl_ + cr_ - 0.5 * (gamma - 1.0) * du) / (cl_ / std::pow(left.p, z) + cr_ / std::pow(right.p, z)),
                      1.0 / z);
  p = std::max(p, 1e-12);
  for (int it = 0; it < 100; ++it) {
    double dl, dr;
    const double f = pressure_function(p, left_, cl_, dl) + pressure_function(p, right_, cr_, dr) + du;
    double next = p - f / (dl + dr);
    if (next <= 0.0) next = 0.5 * p;
    const double change = std::abs(next - p) / (0.5 * (next + p));
    p = next;
    if (change < 1e-12) break;
  }
  p_star_ = p;
  double dl, dr;
  u_star_ = 0.5 * (left.u + right.u) +
            0.5 * (pressure_function(p, right_, cr_, dr) - pressure_function(p, left_, cl_, dl));
}

double RiemannExact::pressure_function(double p, const Primitive& k, double c, double& derivative) const {
  const double g = gamma_;
  if (p > k.p) {
    const double a = 2.0 / ((g + 1.0) * k.rho);
    const double b = (g - 1.0) / (g + 1.0) * k.p;
    const double q = std::sqrt(a / (p + b));
    derivative = q * (1.0 - 0.5 * (p - k.p) / (b + p));
    return (p - k.p) * q;
  }
  const double ratio = p / k.p;
  derivative = std::pow(ratio, -(g + 1.0) / (2.0 * g)) / (k.rho * c);
  return 2.0 * c / (g - 1.0) * (std::pow(ratio, (g - 1.0) / (2.0 * g)) - 1.0);
}

Primitive RiemannExact::sample(double xi) const {
  if (trivial_) return left_;
  const double g = gamma_;
  const double gm = (g - 1.0) / (g + 1.0);
  if (xi <= u_star_) {
    const Primitive& k = left_;
    if (p_star_ > k.p) {
      const double s = k.u - cl_ * std::sqrt((g + 1.0) / (2.0 * g) * p_star_ / k.p + (g - 1.0) / (2.0 * g));
      if (xi <= s) return k;
      const double r = p_star_ / k.p;
      return {k.rho * (r + gm) / (gm * r + 1.0), u_star_, 0.0, p_star_};
    }
    const double head = k.u - cl_;
    const double c_star = cl_ * std::pow(p_star_ / k.p, (g - 1.0) / (2.0 * g));
    const double tail = u_star_ - c_star;
    if (xi <= head) return k;
    if (xi >= tail) return {k.rho * std::pow(p_star_ / k.p, 1.0 / g), u_star_, 0.0, p_star_};
    const double factor = 2.0 / (g + 1.0) + gm / cl_ * (k.u - xi);
    return {k.rho * std::pow(factor, 2.0 / (g - 1.0)), 2.0 / (g + 1.0) * (cl_ + 0.5 * (g - 1.0) * k.u + xi), 0.0,
            k.p * std::pow(factor, 2.0 * g / (g - 1.0))};
  }
  const Primitive& k = right_;
  if (p_star_ > k.p) {
    const double s = k.u + cr_ * std::sqrt((g + 1.0) / (2.0 * g) * p_star_ / k.p + (g - 1.0) / (2.0 * g));
    if (xi >= s) return k;
    const double r = p_star_ / k.p;
    return {k.rho * (r + gm) / (gm * r + 1.0), u_star_, 0.0, p_star_};
  }
  const double head = k.u + cr_;
  const double c_star = cr_ * std::pow(p_star_ / k.p, (g - 1.0) / (2.0 * g));
  const double tail = u_star_ + c_star;
  if (xi >= head) return k;
  if (xi <= tail) return {k.rho * std::pow(p_star_ / k.p, 1.0 / g), u_star_, 0.0, p_star_};
  const double factor = 2.0 / (g + 1.0) - gm / cr_ * (k.u - xi);
  return {k.rho * std::pow(factor, 2.0 / (g - 1.0)), 2.0 / (g + 1.0) * (-cr_ + 0.5 * (g - 1.0) * k.u + xi), 0.0,
          k.p * std::pow(factor, 2.0 * g / (g - 1.0))};
}

std::array<double, 4> RiemannExact::feature_speeds() const {
  if (trivial_) return {0.0, 0.0, 0.0, 0.0};
  if (!left_rarefaction() || !right_shock())
    throw Error("Riemann data do not produce a rarefaction-contact-shock pattern");
  const double g = gamma_;
  const double c_star = cl_ * std::pow(p_star_ / left_.p, (g - 1.0) / (2.0 * g));
  const double shock =
      right_.u + cr_ * std::sqrt((g + 1.0) / (2.0 * g) * p_star_ / right_.p + (g - 1.0) / (2.0 * g));
  return {left_.u - cl_, u_star_ - c_star, u_star_, shock};
}

std::array<double, 4> sod_features(const Primitive& left, const Primitive& right, double x0, double t, double gamma) {
  if (t < 0.0) throw Error("sod_features needs t >= 0");
  const RiemannExact rs(left, right, gamma);
  auto s = rs.feature_speeds();
  for (auto& v : s) v = x0 + v * t;
  return s;
}

SodSolution sod_exact(const Primitive& left, const Primitive& right, double x0, double t, std::span<const double> x,
                      double gamma) {
  if (t < 0.0) throw Error("sod_exact needs t >= 0");
  const RiemannExact rs(left, right, gamma);
  SodSolution out;
  out.density.reserve(x.size());
  for (double xi : x) {
    if (t == 0.0)
      out.density.push_back(xi < x0 ? left.rho : right.rho);
    else
      out.density.push_back(rs.sample((xi - x0) / t).rho);
  }
  out.features = sod_features(left, right, x0, t, gamma);
  return out;
}

}  // namespace calibra
