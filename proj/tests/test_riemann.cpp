#include <cmath>

#include "calibra/fom.hpp"
#include "calibra/riemann.hpp"
#include "doctest.h"

using namespace calibra;

TEST_CASE("exact Riemann solver") {
  const RiemannExact classic({1.0, 0.0, 0.0, 1.0}, {0.125, 0.0, 0.0, 0.1});
  CHECK(classic.p_star() == doctest::Approx(0.303130178051).epsilon(1e-10));
  CHECK(classic.u_star() == doctest::Approx(0.927452620049).epsilon(1e-10));

  const Primitive left{1.0, 0.0, 0.0, 1.0}, right{0.1, 0.0, 0.0, 0.125};
  const RiemannExact case_states(left, right);
  CHECK(case_states.p_star() == doctest::Approx(0.307134465231).epsilon(1e-10));
  CHECK(case_states.u_star() == doctest::Approx(0.918091379494).epsilon(1e-10));
  const auto f = sod_features(left, right, 0.5, 0.2);
  CHECK(f[0] == doctest::Approx(0.263356808676).epsilon(1e-10));
  CHECK(f[1] == doctest::Approx(0.483698739755).epsilon(1e-10));
  CHECK(f[2] == doctest::Approx(0.683618275899).epsilon(1e-10));
  CHECK(f[3] == doctest::Approx(0.896767618778).epsilon(1e-10));
  const auto s = case_states.feature_speeds();
  CHECK(s[0] <= s[1]);
  CHECK(s[1] <= s[2]);
  CHECK(s[2] <= s[3]);

  const std::vector<double> x{0.4, 0.6, 0.8, 0.95};
  const SodSolution sol = sod_exact(left, right, 0.5, 0.2, x);
  CHECK(sol.density[1] == doctest::Approx(0.430334445357).epsilon(1e-9));
  CHECK(sol.density[2] == doctest::Approx(0.186145363349).epsilon(1e-9));
  CHECK(sol.density[3] == 0.1);

  for (double v : sod_features(left, right, 0.5, 0.0)) CHECK(v == 0.5);

  const RiemannExact same(left, left);
  CHECK(same.trivial());
  const SodSolution flat = sod_exact(left, left, 0.5, 0.2, x);
  for (double r : flat.density) CHECK(r == 1.0);
}

TEST_CASE("coarse Sod run approaches the exact profile") {
  const ProblemSpec p = sod_problem(SodStates{}, 200);
  SolverConfig c;
  c.final_time = 0.2;
  c.snapshot_times = {0.2};
  ScalarField rho;
  integrate(p, c, [&](double, const ConservedField& f) { rho = f.density(); });
  std::vector<double> x;
  for (int i = 0; i < 200; ++i) x.push_back(p.grid.center(0, i));
  const auto exact = sod_exact({1.0, 0.0, 0.0, 1.0}, {0.1, 0.0, 0.0, 0.125}, 0.5, 0.2, x).density;
  double l1 = 0.0;
  for (int i = 0; i < 200; ++i) l1 += std::abs(rho[i] - exact[i]) * p.grid.spacing(0);
  CHECK(l1 < 5e-3);
}
