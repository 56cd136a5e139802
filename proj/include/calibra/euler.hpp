#pragma once

#include <array>
#include <span>

namespace calibra {

// Conserved state (rho, mx, my, E); my stays zero in 1D runs.
using State = std::array<double, 4>;

struct Primitive {
  double rho = 1.0;
  double u = 0.0;
  double v = 0.0;
  double p = 1.0;
};

inline constexpr double kDefaultGamma = 1.4;

State prim_to_cons(const Primitive& w, double gamma = kDefaultGamma);
Primitive cons_to_prim(const State& u, double gamma = kDefaultGamma);
double pressure(const State& u, double gamma = kDefaultGamma);
double sound_speed(const Primitive& w, double gamma = kDefaultGamma);
bool is_physical(const State& u, double gamma = kDefaultGamma);

State physical_flux(const State& u, int axis, double gamma = kDefaultGamma);
State rusanov_flux(const State& left, const State& right, int axis, double gamma = kDefaultGamma);

struct FaceValues {
  double left;   // value at the cell's left face
  double right;  // value at the cell's right face
};

// Jiang-Shu WENO5 on v[0..4], centred on v[2].
FaceValues weno5_reconstruct(std::span<const double, 5> v);
double weno5_right_face(double v0, double v1, double v2, double v3, double v4);

}  // namespace calibra
