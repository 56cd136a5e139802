#include <algorithm>
#include <cmath>
#include <random>

#include "calibra/errors.hpp"
#include "calibra/euler.hpp"
#include "calibra/fom.hpp"
#include "calibra/ssprk.hpp"
#include "doctest.h"

using namespace calibra;

TEST_CASE("primitive and conserved states") {
  const State l = prim_to_cons({1.0, 0.0, 0.0, 1.0});
  CHECK(l[0] == 1.0);
  CHECK(l[1] == 0.0);
  CHECK(l[3] == doctest::Approx(2.5).epsilon(1e-15));
  const Primitive back = cons_to_prim({1.0, 0.0, 0.0, 2.5});
  CHECK(back.rho == 1.0);
  CHECK(back.u == 0.0);
  CHECK(back.p == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(prim_to_cons({0.1, 0.0, 0.0, 0.125})[3] == doctest::Approx(0.3125).epsilon(1e-15));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0.05, 5.0), vel(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const Primitive w{pos(rng), vel(rng), vel(rng), pos(rng)};
    const Primitive r = cons_to_prim(prim_to_cons(w));
    CHECK(r.rho == doctest::Approx(w.rho).epsilon(1e-13));
    CHECK(r.u == doctest::Approx(w.u).epsilon(1e-12));
    CHECK(r.v == doctest::Approx(w.v).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(w.p).epsilon(1e-11));
  }
  CHECK_FALSE(is_physical({1.0, 3.0, 0.0, 1.0}));
  CHECK_FALSE(is_physical({-1.0, 0.0, 0.0, 1.0}));
  CHECK_THROWS_AS(cons_to_prim({1.0, 3.0, 0.0, 1.0}), NonPhysicalState);
}

TEST_CASE("Rusanov flux") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pos(0.1, 3.0), vel(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const State u = prim_to_cons({pos(rng), vel(rng), vel(rng), pos(rng)});
    for (int axis = 0; axis < 2; ++axis) {
      const State f = rusanov_flux(u, u, axis);
      const State g = physical_flux(u, axis);
      for (int c = 0; c < 4; ++c) CHECK(f[c] == g[c]);
    }
  }

  const State l = prim_to_cons({1.0, 0.0, 0.0, 1.0});
  const State r = prim_to_cons({0.1, 0.0, 0.0, 0.125});
  const double s = std::sqrt(1.75);
  const State f = rusanov_flux(l, r, 0);
  CHECK(f[0] == doctest::Approx(0.45 * s).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(0.5625).epsilon(1e-14));
  CHECK(f[3] == doctest::Approx(1.09375 * s).epsilon(1e-14));

  const State a = prim_to_cons({0.7, 1.3, 0.0, 0.9});
  const State b = prim_to_cons({0.7, -1.3, 0.0, 0.9});
  CHECK(std::abs(rusanov_flux(a, b, 0)[0]) <= 1e-15);
}

TEST_CASE("WENO5 reconstruction") {
  const std::array<double, 5> c{2.0, 2.0, 2.0, 2.0, 2.0};
  const FaceValues fc = weno5_reconstruct(c);
  CHECK(fc.left == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(fc.right == doctest::Approx(2.0).epsilon(1e-15));

  const std::array<double, 5> lin{1.0, 2.0, 3.0, 4.0, 5.0};
  const FaceValues fl = weno5_reconstruct(lin);
  CHECK(std::abs(fl.right - 3.5) <= 1e-12);
  CHECK(std::abs(fl.left - 2.5) <= 1e-12);

  // Cell averages of sin(4x) around the face at 0.3, two resolutions.
  const auto error = [](double h) {
    std::array<double, 5> avg;
    for (int k = 0; k < 5; ++k) {
      const double a = 0.3 + (k - 3) * h, b = a + h;
      avg[k] = (std::cos(4.0 * a) - std::cos(4.0 * b)) / (4.0 * h);
    }
    return std::abs(weno5_reconstruct(avg).right - std::sin(1.2));
  };
  const double ratio = error(0.02) / error(0.01);
  CHECK(ratio > 24.0);
  CHECK(ratio < 40.0);
}

TEST_CASE("SSPRK54 time stepping") {
  std::vector<double> u{1.0, -2.0, 3.5};
  const auto before = u;
  ssprk54_step(u, 0.0, 0.1, [](std::vector<double>&, double, std::vector<double>& rhs) {
    std::fill(rhs.begin(), rhs.end(), 0.0);
  });
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(std::abs(u[k] - before[k]) <= 1e-14 * std::abs(before[k]));
  CHECK_THROWS(ssprk54_step(u, 0.0, 0.0, [](std::vector<double>&, double, std::vector<double>&) {}));

  // y' = -y + cos(t): fourth-order decay under dt halving.
  const auto solve = [](int steps) {
    std::vector<double> y{1.0};
    const double dt = 1.0 / steps;
    for (int n = 0; n < steps; ++n)
      ssprk54_step(y, n * dt, dt, [](std::vector<double>& v, double t, std::vector<double>& rhs) {
        rhs[0] = -v[0] + std::cos(t);
      });
    const double exact = 0.5 * (std::cos(1.0) + std::sin(1.0)) + 0.5 * std::exp(-1.0);
    return std::abs(y[0] - exact);
  };
  const double e1 = solve(10), e2 = solve(20), e3 = solve(40);
  CHECK(std::log2(e1 / e2) > 3.7);
  CHECK(std::log2(e2 / e3) > 3.7);
}

TEST_CASE("uniform periodic flow is preserved") {
  ProblemSpec p;
  p.grid = CartesianGrid(0.0, 1.0, 40);
  p.initial = [](double, double) { return Primitive{1.0, 1.0, 0.0, 1.0}; };
  p.bcs[kLeft] = p.bcs[kRight] = BoundaryCondition::periodic();
  SolverConfig c;
  c.final_time = 0.3;
  EulerSolver s(p, c);
  while (s.time() < 0.3) s.step(std::min(s.stable_dt(), 0.3 - s.time()));
  for (int i = 0; i < 40; ++i) {
    const State u = s.cell(i);
    CHECK(std::abs(u[0] - 1.0) <= 1e-13);
    CHECK(std::abs(u[1] - 1.0) <= 1e-13);
    CHECK(std::abs(u[3] - 3.0) <= 1e-13);
  }
}

TEST_CASE("mass is conserved with periodic and reflective boundaries") {
  for (const auto kind : {BoundaryKind::Periodic, BoundaryKind::Reflective}) {
    ProblemSpec p = density_wave_problem(64);
    if (kind == BoundaryKind::Reflective) {
      p.initial = [](double x, double) { return x < 0.4 ? Primitive{1.0, 0.0, 0.0, 1.0} : Primitive{0.2, 0.0, 0.0, 0.1}; };
      p.bcs[kLeft] = p.bcs[kRight] = BoundaryCondition::reflective();
    }
    SolverConfig c;
    c.final_time = 0.2;
    EulerSolver s(p, c);
    const double m0 = s.total_mass();
    for (int n = 0; n < 40; ++n) {
      s.step(s.stable_dt());
      CHECK(std::abs(s.total_mass() - m0) <= 1e-12 * m0);
    }
  }
}

TEST_CASE("2D runs stay positive and conserve mass in a closed box") {
  ProblemSpec p;
  p.grid = CartesianGrid(Box{2, {0.0, 0.0}, {1.0, 1.0}}, {24, 24});
  p.initial = [](double x, double y) {
    return std::hypot(x - 0.5, y - 0.5) < 0.2 ? Primitive{1.0, 0.0, 0.0, 1.0} : Primitive{0.125, 0.0, 0.0, 0.1};
  };
  for (auto& b : p.bcs) b = BoundaryCondition::reflective();
  SolverConfig c;
  c.final_time = 0.1;
  EulerSolver s(p, c);
  const double m0 = s.total_mass();
  while (s.time() < 0.1) s.step(std::min(s.stable_dt(), 0.1 - s.time()));
  CHECK(std::abs(s.total_mass() - m0) <= 1e-12 * m0);
  for (int j = 0; j < 24; ++j)
    for (int i = 0; i < 24; ++i) CHECK(is_physical(s.cell(i, j)));
  // Radial symmetry survives: mirrored cells agree.
  CHECK(s.cell(3, 10)[0] == doctest::Approx(s.cell(20, 10)[0]).epsilon(1e-10));
  CHECK(s.cell(10, 3)[0] == doctest::Approx(s.cell(10, 20)[0]).epsilon(1e-10));
}

TEST_CASE("snapshot times are hit exactly") {
  const ProblemSpec p = sod_problem(SodStates{}, 100);
  SolverConfig c;
  c.final_time = 0.1;
  c.snapshot_times = {0.0, 0.013, 0.05, 0.1};
  std::vector<double> seen;
  integrate(p, c, [&](double t, const ConservedField&) { seen.push_back(t); });
  CHECK(seen == c.snapshot_times);
}

TEST_CASE("solver configuration checks") {
  SolverConfig c;
  c.cfl = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.cfl = 0.8;
  c.snapshot_times = {0.1, 0.05};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.snapshot_times = {0.3};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  ProblemSpec p = sod_problem(SodStates{}, 10);
  p.bcs[kLeft] = BoundaryCondition::periodic();
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("case set-ups") {
  const ProblemSpec sod = sod_problem(SodStates{}, 50, true);
  CHECK(sod.parameter_names == std::vector<std::string>{"rhoL", "pL", "rhoR", "pR"});
  CHECK(sod.initial(0.2, 0.0).rho == 1.0);
  CHECK(sod.initial(0.8, 0.0).p == 0.125);

  const double beta = 3.14159265358979323846 / 6.0;
  const ProblemSpec dmr = dmr_problem(beta, 40, 10);
  CHECK(dmr.grid.box().hi[0] == 4.0);
  CHECK(dmr.initial(0.1, 0.0).rho == 8.0);
  CHECK(dmr.initial(0.2, 0.0).rho == 1.4);
  CHECK(dmr.initial(0.1, 0.5).u == doctest::Approx(8.25 * std::cos(beta)));
  CHECK(in_dmr_left_region(beta, 1.0 / 6.0 + std::tan(beta) - 1e-9, 1.0, 0.0));
  CHECK_FALSE(in_dmr_left_region(beta, 1.0 / 6.0 + std::tan(beta) + 1e-9, 1.0, 0.0));
  CHECK(in_dmr_left_region(beta, 2.0, 1.0, 0.2));
  CHECK(dmr.bcs[kBottom].kind == BoundaryKind::Reflective);
  CHECK(dmr.bcs[kRight].kind == BoundaryKind::Transmissive);

  const ProblemSpec tp = triple_point_problem(28, 12);
  CHECK(tp.initial(0.5, 2.0).u == 20.0);
  CHECK(tp.initial(3.0, 2.0).rho == 0.125);
  CHECK(tp.initial(3.0, 1.0).rho == 1.0);
  CHECK(tp.bcs[kTop].kind == BoundaryKind::Reflective);
}

TEST_CASE("triple point at coarse resolution keeps positivity") {
  const ProblemSpec p = triple_point_problem(28, 12);
  SolverConfig c;
  c.final_time = 0.1;
  c.snapshot_times = {0.1};
  bool ok = true;
  integrate(p, c, [&](double, const ConservedField& f) {
    for (std::size_t k = 0; k < f.grid().size(); ++k) ok = ok && f.density()[k] > 0.0;
  });
  CHECK(ok);
}
