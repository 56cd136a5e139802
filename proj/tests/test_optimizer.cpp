#include <cmath>
#include <random>

#include "calibra/optimizer.hpp"
#include "doctest.h"

using namespace calibra;

namespace {

Constraints one_chain(int n, double gap) {
  Constraints c;
  Chain ch;
  for (int i = 0; i < n; ++i) ch.vars.push_back(i);
  c.chains = {ch};
  c.gaps = {gap};
  return c;
}

Objective bowl(std::vector<double> centre) {
  return [centre](std::span<const double> x) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) f += (i + 1.0) * (x[i] - centre[i]) * (x[i] - centre[i]);
    return f;
  };
}

}  // namespace

TEST_CASE("chain projection") {
  std::vector<double> x{0.6, 0.4};
  Chain ch;
  ch.vars = {0, 1};
  project_chain(x, ch, 0.0);
  CHECK(x[0] == doctest::Approx(0.5));
  CHECK(x[1] == doctest::Approx(0.5));

  x = {0.6, 0.4};
  project_chain(x, ch, 0.1);
  CHECK(x[0] == doctest::Approx(0.45));
  CHECK(x[1] == doctest::Approx(0.55));

  x = {-0.2, 0.5, 1.3};
  ch.vars = {0, 1, 2};
  project_chain(x, ch, 0.01);
  CHECK(x[0] == doctest::Approx(0.01));
  CHECK(x[1] == doctest::Approx(0.5));
  CHECK(x[2] == doctest::Approx(0.99));

  // Projection is idempotent and lands on a feasible point.
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  const Constraints c = one_chain(6, 0.02);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> y(6);
    for (auto& v : y) v = u(rng);
    project(y, c);
    CHECK(linear_feasible(y, c, 1e-12));
    auto z = y;
    project(z, c);
    for (int i = 0; i < 6; ++i) CHECK(z[i] == doctest::Approx(y[i]).epsilon(1e-14));
  }
}

TEST_CASE("unconstrained optimum inside the feasible set") {
  const std::vector<double> centre{0.2, 0.45, 0.7};
  const auto r = minimize_constrained(bowl(centre), std::vector<double>{0.3, 0.5, 0.6}, one_chain(3, 1e-3));
  CHECK(r.converged);
  CHECK(r.feasible);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(r.x[i] - centre[i]) <= 1e-5);
  CHECK(r.value <= 1e-9);
}

TEST_CASE("ordering constraint becomes active") {
  const auto r = minimize_constrained(bowl({0.6, 0.4}), std::vector<double>{0.3, 0.7}, one_chain(2, 0.01));
  CHECK(r.feasible);
  CHECK(linear_feasible(r.x, one_chain(2, 0.01), 1e-12));
  // Weighted projection of (0.6, 0.4) onto x1 + 0.01 <= x2 with weights 1 and 2.
  CHECK(std::abs(r.x[0] - 0.46) <= 1e-5);
  CHECK(std::abs(r.x[1] - 0.47) <= 1e-5);
}

TEST_CASE("nonlinear margin is respected") {
  Constraints c = one_chain(1, 0.0);
  c.nonlinear_margin = [](std::span<const double> x) { return x[0] - 0.3; };
  const auto r = minimize_constrained(bowl({0.1}), std::vector<double>{0.8}, c);
  CHECK(r.feasible);
  CHECK(r.x[0] >= 0.3);
  CHECK(r.x[0] <= 0.31);
}

TEST_CASE("zero iterations returns the start") {
  MinimizeOptions o;
  o.max_iter = 0;
  const std::vector<double> x0{0.3, 0.7};
  const auto r = minimize_constrained(bowl({0.6, 0.4}), x0, one_chain(2, 0.01), o);
  CHECK(r.x == x0);
  CHECK(r.max_iter_reached);
  CHECK(r.iterations == 0);
  CHECK_FALSE(r.converged);
}

TEST_CASE("iteration budget is honoured") {
  MinimizeOptions o;
  o.max_iter = 3;
  const auto r = minimize_constrained(
      [](std::span<const double> x) {
        double f = 0.0;
        for (std::size_t i = 0; i + 1 < x.size(); ++i)
          f += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
        return f;
      },
      std::vector<double>{-1.2, 1.0}, Constraints{}, o);
  CHECK(r.iterations <= 3);
}
