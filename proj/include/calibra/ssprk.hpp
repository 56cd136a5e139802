#pragma once

#include <cstddef>
#include <vector>

#include "calibra/errors.hpp"

namespace calibra {

// Spiteri-Ruuth optimal SSPRK(5,4) in Shu-Osher form.
struct Ssprk54 {
  static constexpr double c10 = 0.391752226571890;
  static constexpr double a20 = 0.444370493651235, a21 = 0.555629506348765, c21 = 0.368410593050371;
  static constexpr double a30 = 0.620101851488403, a32 = 0.379898148511597, c32 = 0.251891774271694;
  static constexpr double a40 = 0.178079954393132, a43 = 0.821920045606868, c43 = 0.544974750228521;
  static constexpr double a52 = 0.517231671970585, a53 = 0.096059710526147, c53 = 0.063692468666290;
  static constexpr double a54 = 0.386708617503269, c54 = 0.226007483236906;

  // Abscissae of the stage states u1..u4 as fractions of dt.
  static constexpr double t1 = c10;
  static constexpr double t2 = a21 * t1 + c21;
  static constexpr double t3 = a32 * t2 + c32;
  static constexpr double t4 = a43 * t3 + c43;
};

// One step on a flat state vector; residual(u, t, rhs) may touch u (ghost filling).
template <class Residual>
void ssprk54_step(std::vector<double>& u, double t, double dt, Residual&& residual) {
  if (!(dt > 0.0)) throw Error("ssprk54_step needs dt > 0");
  using S = Ssprk54;
  const std::size_t n = u.size();
  std::vector<double> l(n), l3(n), u1(u), u2(u), u3(u), u4(u);

  residual(u, t, l);
  for (std::size_t k = 0; k < n; ++k) u1[k] = u[k] + S::c10 * dt * l[k];
  residual(u1, t + S::t1 * dt, l);
  for (std::size_t k = 0; k < n; ++k) u2[k] = S::a20 * u[k] + S::a21 * u1[k] + S::c21 * dt * l[k];
  residual(u2, t + S::t2 * dt, l);
  for (std::size_t k = 0; k < n; ++k) u3[k] = S::a30 * u[k] + S::a32 * u2[k] + S::c32 * dt * l[k];
  residual(u3, t + S::t3 * dt, l3);
  for (std::size_t k = 0; k < n; ++k) u4[k] = S::a40 * u[k] + S::a43 * u3[k] + S::c43 * dt * l3[k];
  residual(u4, t + S::t4 * dt, l);
  for (std::size_t k = 0; k < n; ++k)
    u[k] = S::a52 * u2[k] + S::a53 * u3[k] + S::c53 * dt * l3[k] + S::a54 * u4[k] + S::c54 * dt * l[k];
}

}  // namespace calibra
