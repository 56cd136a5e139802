#include "calibra/euler.hpp"

#include <cmath>
#include <sstream>

#include "calibra/errors.hpp"

namespace calibra {

namespace {

[[noreturn]] void non_physical(const char* what, const State& u) {
  std::ostringstream os;
  os << what << ": rho=" << u[0] << " mx=" << u[1] << " my=" << u[2] << " E=" << u[3];
  throw NonPhysicalState(os.str());
}

}  // namespace

State prim_to_cons(const Primitive& w, double gamma) {
  if (!(w.rho > 0.0) || !(w.p > 0.0)) {
    std::ostringstream os;
    os << "primitive state needs rho>0 and p>0, got rho=" << w.rho << " p=" << w.p;
    throw NonPhysicalState(os.str());
  }
  const double kinetic = 0.5 * w.rho * (w.u * w.u + w.v * w.v);
  return {w.rho, w.rho * w.u, w.rho * w.v, w.p / (gamma - 1.0) + kinetic};
}

double pressure(const State& u, double gamma) {
  return (gamma - 1.0) * (u[3] - 0.5 * (u[1] * u[1] + u[2] * u[2]) / u[0]);
}

bool is_physical(const State& u, double gamma) {
  if (!(u[0] > 0.0) || !std::isfinite(u[1]) || !std::isfinite(u[2])) return false;
  const double p = pressure(u, gamma);
  return p > 0.0 && std::isfinite(p);
}

Primitive cons_to_prim(const State& u, double gamma) {
  if (!is_physical(u, gamma)) non_physical("conserved state is not physical", u);
  return {u[0], u[1] / u[0], u[2] / u[0], pressure(u, gamma)};
}

double sound_speed(const Primitive& w, double gamma) { return std::sqrt(gamma * w.p / w.rho); }

State physical_flux(const State& u, int axis, double gamma) {
  const double p = pressure(u, gamma);
  const double vn = u[1 + axis] / u[0];
  State f{u[1 + axis], u[1] * vn, u[2] * vn, (u[3] + p) * vn};
  f[1 + axis] += p;
  return f;
}

State rusanov_flux(const State& left, const State& right, int axis, double gamma) {
  if (!is_physical(left, gamma)) non_physical("rusanov flux left state", left);
  if (!is_physical(right, gamma)) non_physical("rusanov flux right state", right);
  const double pl = pressure(left, gamma);
  const double pr = pressure(right, gamma);
  const double sl = std::abs(left[1 + axis] / left[0]) + std::sqrt(gamma * pl / left[0]);
  const double sr = std::abs(right[1 + axis] / right[0]) + std::sqrt(gamma * pr / right[0]);
  const double s = std::max(sl, sr);
  const State fl = physical_flux(left, axis, gamma);
  const State fr = physical_flux(right, axis, gamma);
  State f;
  for (int k = 0; k < 4; ++k) f[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * s * (right[k] - left[k]);
  return f;
}

double weno5_right_face(double v0, double v1, double v2, double v3, double v4) {
  constexpr double eps = 1e-6;
  const double q0 = (2.0 * v0 - 7.0 * v1 + 11.0 * v2) / 6.0;
  const double q1 = (-v1 + 5.0 * v2 + 2.0 * v3) / 6.0;
  const double q2 = (2.0 * v2 + 5.0 * v3 - v4) / 6.0;
  const double b0 = 13.0 / 12.0 * (v0 - 2.0 * v1 + v2) * (v0 - 2.0 * v1 + v2) +
                    0.25 * (v0 - 4.0 * v1 + 3.0 * v2) * (v0 - 4.0 * v1 + 3.0 * v2);
  const double b1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3) * (v1 - 2.0 * v2 + v3) + 0.25 * (v1 - v3) * (v1 - v3);
  const double b2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4) * (v2 - 2.0 * v3 + v4) +
                    0.25 * (3.0 * v2 - 4.0 * v3 + v4) * (3.0 * v2 - 4.0 * v3 + v4);
  const double a0 = 0.1 / ((eps + b0) * (eps + b0));
  const double a1 = 0.6 / ((eps + b1) * (eps + b1));
  const double a2 = 0.3 / ((eps + b2) * (eps + b2));
  return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2);
}

FaceValues weno5_reconstruct(std::span<const double, 5> v) {
  return {weno5_right_face(v[4], v[3], v[2], v[1], v[0]), weno5_right_face(v[0], v[1], v[2], v[3], v[4])};
}

}  // namespace calibra
