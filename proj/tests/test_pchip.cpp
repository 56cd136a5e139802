#include <cmath>
#include <random>

#include "calibra/errors.hpp"
#include "calibra/pchip.hpp"
#include "doctest.h"

using namespace calibra;

TEST_CASE("pchip reproduces scipy on a monotone data set") {
  const Pchip p({0.0, 0.3, 0.45, 1.0, 1.2}, {0.0, 0.1, 0.6, 0.65, 2.0});
  const double xs[] = {0.1, 0.37, 0.7, 1.1};
  const double vals[] = {0.011111111111111117, 0.33454898600399885, 0.6245576133082318, 1.1171414268841195};
  const double ders[] = {0.2222222222222223, 4.7750928306198235, 0.03125292805082108, 7.9407069432800315};
  for (int k = 0; k < 4; ++k) {
    CHECK(p(xs[k]) == doctest::Approx(vals[k]).epsilon(1e-13));
    CHECK(p.derivative(xs[k]) == doctest::Approx(ders[k]).epsilon(1e-12));
  }
  const double knot_slopes[] = {0.0, 0.6666666666666666, 0.2159383, 0.21141465, 8.52575758};
  for (int k = 0; k < 5; ++k) CHECK(p.slopes()[k] == doctest::Approx(knot_slopes[k]).epsilon(1e-7));
}

TEST_CASE("pchip through identity data is the identity") {
  const Pchip p({0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  for (int k = 0; k <= 100; ++k) {
    const double x = k / 100.0;
    CHECK(std::abs(p(x) - x) <= 1e-14);
    CHECK(std::abs(p.derivative(x) - 1.0) <= 1e-13);
  }
}

TEST_CASE("pchip hits its knots and keeps flat segments flat") {
  const Pchip p({0.0, 1.0, 2.0, 3.0, 4.0}, {0.0, 1.0, 1.0, 2.0, 5.0});
  for (std::size_t k = 0; k < 5; ++k) CHECK(p(p.knots()[k]) == p.values()[k]);
  CHECK(p.slopes()[1] == 0.0);
  CHECK(p.slopes()[2] == 0.0);
  for (int k = 0; k <= 20; ++k) CHECK(p(1.0 + k / 20.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pchip of increasing data is monotone and C1") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x{0.0}, y{0.0};
    for (int k = 0; k < 7; ++k) {
      x.push_back(x.back() + u(rng));
      y.push_back(y.back() + (trial % 3 == 0 && k == 3 ? 0.0 : u(rng)));
    }
    const Pchip p(x, y);
    double prev = p(x.front());
    for (int k = 1; k <= 400; ++k) {
      const double t = x.front() + (x.back() - x.front()) * k / 400.0;
      const double v = p(t);
      CHECK(v >= prev - 1e-14);
      CHECK(p.derivative(t) >= -1e-14);
      prev = v;
    }
    for (std::size_t k = 1; k + 1 < x.size(); ++k) {
      const double below = p.derivative(std::nextafter(x[k], 0.0)), above = p.derivative(x[k]);
      CHECK(std::abs(below - above) <= 1e-9 * (1.0 + std::abs(p.slopes()[k])));
    }
  }
}

TEST_CASE("pchip derivative matches finite differences") {
  const Pchip p({0.0, 0.25, 0.5, 0.9, 1.0}, {0.0, 0.4, 0.5, 0.95, 1.0});
  for (int k = 1; k < 50; ++k) {
    const double x = k / 50.0 + 0.003, h = 1e-6;
    const double fd = (p(x + h) - p(x - h)) / (2.0 * h);
    CHECK(std::abs(fd - p.derivative(x)) <= 1e-6);
    double v, d;
    p.evaluate(x, v, d);
    CHECK(v == p(x));
    CHECK(d == p.derivative(x));
  }
}

TEST_CASE("pchip extends linearly and rejects bad knots") {
  const Pchip p({0.0, 1.0, 2.0}, {0.0, 1.0, 3.0});
  const double s = p.slopes()[2];
  CHECK(p(2.5) == doctest::Approx(3.0 + 0.5 * s));
  CHECK(p.derivative(-1.0) == doctest::Approx(p.slopes()[0]));
  CHECK_THROWS_AS(Pchip({0.0, 0.0, 1.0}, {0.0, 1.0, 2.0}), InvalidControlPoints);
  CHECK_THROWS_AS(Pchip({0.0}, {0.0}), InvalidControlPoints);
  CHECK_THROWS_AS(Pchip({0.0, 1.0}, {0.0}), ShapeMismatch);
}
