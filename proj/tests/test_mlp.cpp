#include <chrono>
#include <cmath>
#include <random>

#include "calibra/errors.hpp"
#include "calibra/mlp.hpp"
#include "doctest.h"

using namespace calibra;

namespace {

const Box kUnit1{1, {0.0, 0.0}, {1.0, 0.0}};

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("softplus head with zero parameters outputs ln 2") {
  Mlp net({3, 5, 2}, Activation::Tanh, Activation::Softplus, 1);
  net.set_parameters(std::vector<double>(net.parameter_count(), 0.0));
  const Eigen::MatrixXd y = net.forward(random_matrix(3, 7, 71));
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 2; ++i) CHECK(y(i, j) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("single linear layer is an affine map") {
  Mlp net({2, 2}, Activation::Tanh, Activation::Identity, 2);
  net.set_parameters(std::vector<double>{1.0, 3.0, 2.0, 4.0, 0.5, -1.0});
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 2.0;
  const auto y = net.forward(x);
  const auto p = net.parameters();
  REQUIRE(p.size() == 6u);
  // Whatever the storage order, a linear layer is additive in its input.
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 1);
  const auto b = net.forward(z);
  Eigen::MatrixXd e0(2, 1), e1(2, 1);
  e0 << 1.0, 0.0;
  e1 << 0.0, 1.0;
  const auto y0 = net.forward(e0), y1 = net.forward(e1);
  for (int i = 0; i < 2; ++i) CHECK(y(i, 0) == doctest::Approx(b(i, 0) + (y0(i, 0) - b(i, 0)) + 2.0 * (y1(i, 0) - b(i, 0))));
}

TEST_CASE("softplus head stays positive and finite") {
  Mlp net({4, 16, 16, 3}, Activation::Tanh, Activation::Softplus, 3);
  const Eigen::MatrixXd y = net.forward(10.0 * random_matrix(4, 1000, 72));
  for (int j = 0; j < y.cols(); ++j)
    for (int i = 0; i < y.rows(); ++i) {
      CHECK(std::isfinite(y(i, j)));
      CHECK(y(i, j) > 0.0);
    }
}

TEST_CASE("analytic gradient matches central differences") {
  for (const auto out : {Activation::Identity, Activation::Softplus}) {
    Mlp net({2, 2, 2}, Activation::Tanh, out, 4);
    const Eigen::MatrixXd x = random_matrix(2, 5, 73), y = random_matrix(2, 5, 74);
    double loss = 0.0;
    const auto g = net.gradient(x, y, &loss);
    CHECK(loss == doctest::Approx(net.loss(x, y)).epsilon(1e-14));
    auto p = net.parameters();
    const double h = 1e-6;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double keep = p[k];
      p[k] = keep + h;
      net.set_parameters(p);
      const double up = net.loss(x, y);
      p[k] = keep - h;
      net.set_parameters(p);
      const double down = net.loss(x, y);
      p[k] = keep;
      net.set_parameters(p);
      const double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
    }
  }
}

TEST_CASE("gradient is zero on a perfect fit and invariant to batch doubling") {
  Mlp net({3, 6, 6, 2}, Activation::Tanh, Activation::Identity, 5);
  const Eigen::MatrixXd x = random_matrix(3, 9, 75);
  const auto exact = net.gradient(x, net.forward(x));
  for (double v : exact) CHECK(v == 0.0);

  const Eigen::MatrixXd y = random_matrix(2, 9, 76);
  Eigen::MatrixXd xx(3, 18), yy(2, 18);
  xx << x, x;
  yy << y, y;
  const auto g1 = net.gradient(x, y), g2 = net.gradient(xx, yy);
  for (std::size_t k = 0; k < g1.size(); ++k) CHECK(g2[k] == doctest::Approx(g1[k]).epsilon(1e-12));
}

TEST_CASE("a linear net fits a constant target") {
  Mlp net({1, 1}, Activation::Tanh, Activation::Identity, 6);
  Eigen::MatrixXd x(10, 1), y(10, 1);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = 0.1 * i;
    y(i, 0) = 2.5;
  }
  MlpConfig c;
  c.max_epochs = 200;
  c.learning_rate = 0.05;
  c.loss_tol = 1e-12;
  const auto r = train_adam(net, x, y, c);
  CHECK(r.final_loss < 1e-10);
  CHECK(r.epochs <= 200);
  CHECK(net.predict(std::vector<double>{0.35})[0] == doctest::Approx(2.5).epsilon(1e-4));
}

TEST_CASE("regression of a sine wave") {
  Eigen::MatrixXd x(100, 1), y(100, 1);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = i / 99.0;
    y(i, 0) = std::sin(2.0 * M_PI * x(i, 0));
  }
  MlpConfig c;
  c.layers = 4;
  c.width = 16;
  c.max_epochs = 20000;
  c.loss_tol = 1e-5;
  c.seed = 7;
  Mlp net(1, 1, c);
  const auto r = train_adam(net, x, y, c);
  double mse = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double d = net.predict(std::vector<double>{x(i, 0)})[0] - y(i, 0);
    mse += d * d / 100.0;
  }
  CHECK(mse < 1e-4);
  CHECK(r.epochs <= 20000);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Eigen::MatrixXd x = random_matrix(20, 2, 77), y = random_matrix(20, 3, 78);
  MlpConfig c;
  c.max_epochs = 300;
  c.seed = 11;
  Mlp a(2, 3, c), b(2, 3, c);
  const auto ra = train_adam(a, x, y, c), rb = train_adam(b, x, y, c);
  CHECK(ra.loss_history == rb.loss_history);
  CHECK(a.parameters() == b.parameters());
  c.seed = 12;
  Mlp d(2, 3, c);
  CHECK(d.parameters() != a.parameters());
}

TEST_CASE("network serialisation round trip") {
  const Eigen::MatrixXd x = random_matrix(15, 2, 79), y = random_matrix(15, 1, 80);
  MlpConfig c;
  c.max_epochs = 50;
  Mlp a(2, 1, c);
  train_adam(a, x, y, c);
  const Mlp b = Mlp::from_json(a.to_json());
  const std::vector<double> mu{0.3, -0.2};
  CHECK(b.predict(mu) == a.predict(mu));
}

TEST_CASE("difference encoding of control points") {
  const ControlGrid cg = ControlGrid::uniform(kUnit1, 6);
  const auto v = encode_differences(cg, cg.reference());
  REQUIRE(v.size() == 4u);
  for (double d : v) CHECK(d == doctest::Approx(0.2).epsilon(1e-14));

  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  for (int k = 0; k < 50; ++k) {
    auto w = cg.reference();
    for (int p = 1; p < 5; ++p) w[p] += u(rng);
    const auto back = decode_differences(cg, encode_differences(cg, w));
    for (std::size_t p = 0; p < w.size(); ++p) CHECK(std::abs(back[p] - w[p]) <= 1e-15);
  }

  const auto clipped = decode_differences(cg, std::vector<double>{0.3, 0.3, 0.3, 0.3});
  CHECK(cg.ordered(clipped));
  CHECK(clipped[4] <= 1.0 - cg.gap(0) + 1e-15);
  CHECK(clipped[1] == doctest::Approx(0.3));
  CHECK(clipped[2] == doctest::Approx(0.6));
  CHECK_THROWS_AS(decode_differences(cg, std::vector<double>{0.1}), ShapeMismatch);
}

TEST_CASE("calibration predictor") {
  const ControlGrid cg = ControlGrid::uniform(kUnit1, 6);
  Eigen::MatrixXd mu(4, 1);
  mu << 0.0, 0.1, 0.2, 0.3;
  const std::vector<std::vector<double>> same(4, cg.reference_theta());
  const auto constant = CalibrationPredictor::fit(cg, mu, same, MlpConfig{});
  CHECK(constant.constant_theta.has_value());
  CHECK(constant.predict(std::vector<double>{0.7}) == cg.reference());

  std::vector<std::vector<double>> thetas;
  for (int i = 0; i < 4; ++i) {
    const double s = 0.1 * i;
    thetas.push_back({0.2 + 0.5 * s, 0.4 + 0.4 * s, 0.6 + 0.2 * s, 0.8 + 0.1 * s});
  }
  MlpConfig c;
  c.max_epochs = 3000;
  c.learning_rate = 1e-2;
  const auto p = CalibrationPredictor::fit(cg, mu, thetas, c);
  CHECK_FALSE(p.constant_theta.has_value());
  for (int i = 0; i < 4; ++i) {
    const auto w = p.predict(std::vector<double>{mu(i, 0)});
    for (int q = 0; q < 4; ++q) CHECK(std::abs(w[q + 1] - thetas[i][q]) <= 2e-2);
  }
  for (double m = -2.0; m <= 3.0; m += 0.25) CHECK(cg.ordered(p.predict(std::vector<double>{m})));
  const auto r = CalibrationPredictor::from_json(p.to_json());
  CHECK(r.predict(std::vector<double>{0.15}) == p.predict(std::vector<double>{0.15}));
}
