#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <random>

#include "calibra/errors.hpp"
#include "calibra/pod.hpp"
#include "doctest.h"

using namespace calibra;

namespace {

std::vector<ScalarField> random_snapshots(const CartesianGrid& g, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ScalarField> out;
  for (int k = 0; k < m; ++k) {
    ScalarField f(g);
    for (auto& v : f.values()) v = n(rng);
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_CASE("single snapshot gives its normalised self") {
  const CartesianGrid g(0.0, 2.0, 50);
  ScalarField s(g);
  for (int i = 0; i < 50; ++i) s[i] = 1.0 + 0.1 * i;
  const std::vector<ScalarField> snaps{s};
  const PodBasis b = pod_compress(snaps, 1e-4, 7);
  REQUIRE(b.size() == 1u);
  CHECK(b.eigenvalues[0] == doctest::Approx(inner_product(s, s)).epsilon(1e-13));
  const double n = norm(s);
  for (int i = 0; i < 50; ++i) CHECK(std::abs(std::abs(b.modes[0][i]) - s[i] / n) <= 1e-13);
  const auto c = project(b, b.modes[0]);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("two orthogonal snapshots of equal norm") {
  const CartesianGrid g(0.0, 1.0, 100);
  ScalarField a(g), b(g);
  for (int i = 0; i < 100; ++i) {
    a[i] = std::sin(2.0 * M_PI * g.center(0, i));
    b[i] = std::cos(2.0 * M_PI * g.center(0, i));
  }
  const std::vector<ScalarField> snaps{a, b};
  const PodBasis p = pod_compress(snaps, 0.0, 5);
  CHECK(p.size() == 2u);
  CHECK(p.eigenvalues[0] == doctest::Approx(p.eigenvalues[1]).epsilon(1e-10));
  CHECK(p.discarded <= 1e-14);
}

TEST_CASE("POD agrees with a weighted SVD of the snapshot matrix") {
  const CartesianGrid g(Box{2, {0.0, 0.0}, {2.0, 1.0}}, {12, 9});
  const auto snaps = random_snapshots(g, 50, 61);
  const PodBasis p = pod_compress(snaps, 0.0, 50);
  Eigen::MatrixXd s(g.size(), 50);
  for (int k = 0; k < 50; ++k)
    for (std::size_t i = 0; i < g.size(); ++i) s(i, k) = snaps[k][i] * std::sqrt(g.cell_volume());
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(s, Eigen::ComputeThinU);
  REQUIRE(p.size() == 50u);
  for (int k = 0; k < 50; ++k) {
    const double sigma2 = svd.singularValues()[k] * svd.singularValues()[k];
    CHECK(p.eigenvalues[k] == doctest::Approx(sigma2).epsilon(1e-8));
  }
  for (int k = 0; k < 10; ++k) {
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += p.modes[k][i] * std::sqrt(g.cell_volume()) * svd.matrixU()(i, k);
    CHECK(std::abs(std::abs(dot) - 1.0) <= 1e-8);
  }
}

TEST_CASE("modes are orthonormal and energy adds up") {
  const CartesianGrid g(0.0, 1.0, 80);
  const auto snaps = random_snapshots(g, 12, 62);
  const PodBasis p = pod_compress(snaps, 0.0, 12);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      CHECK(std::abs(inner_product(p.modes[i], p.modes[j]) - (i == j ? 1.0 : 0.0)) <= 1e-10);
  double energy = 0.0, eig = 0.0;
  for (const auto& s : snaps) energy += inner_product(s, s);
  for (double l : p.eigenvalues) eig += l;
  CHECK(eig == doctest::Approx(energy).epsilon(1e-11));
  for (std::size_t k = 1; k < p.eigenvalues.size(); ++k) CHECK(p.eigenvalues[k] <= p.eigenvalues[k - 1]);

  // Full basis reproduces training snapshots.
  for (const auto& s : snaps) CHECK(projection_error(p, s, p.size()) <= 1e-10 * norm(s));
}

TEST_CASE("projection is optimal within the span") {
  const CartesianGrid g(0.0, 1.0, 60);
  const auto snaps = random_snapshots(g, 8, 63);
  const PodBasis p = pod_compress(snaps, 0.0, 3);
  REQUIRE(p.size() == 3u);
  const ScalarField f = random_snapshots(g, 1, 64).front();
  const auto c = project(p, f);
  const double best = projection_error(p, f, 3);
  std::mt19937_64 rng(65);
  std::normal_distribution<double> n(0.0, 0.1);
  for (int k = 0; k < 50; ++k) {
    auto d = c;
    for (auto& v : d) v += n(rng);
    const ScalarField r = reconstruct(p, d);
    ScalarField diff(g);
    for (std::size_t i = 0; i < g.size(); ++i) diff[i] = f[i] - r[i];
    CHECK(norm(diff) >= best - 1e-12);
  }
  const auto first = project(p, p.modes[0]);
  CHECK(first[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(first[1]) <= 1e-12);
}

TEST_CASE("truncation follows tolerance and cap") {
  const CartesianGrid g(0.0, 1.0, 100);
  std::vector<ScalarField> snaps;
  for (int k = 0; k < 6; ++k) {
    ScalarField f(g);
    for (int i = 0; i < 100; ++i) f[i] = std::pow(0.1, k) * std::sin((k + 1) * M_PI * g.center(0, i));
    snaps.push_back(f);
  }
  // Energies fall by 100 per mode.
  CHECK(pod_compress(snaps, 1e-3, 10).size() == 2u);
  CHECK(pod_compress(snaps, 1e-5, 10).size() == 3u);
  CHECK(pod_compress(snaps, 1e-5, 2).size() == 2u);
  CHECK(pod_compress(snaps, 1e-3, 10).discarded < 1e-3);
  CHECK_THROWS_AS(pod_compress(snaps, -1.0, 3), ConfigError);
  CHECK_THROWS_AS(pod_compress(snaps, 0.0, 0), ConfigError);
}

TEST_CASE("duplicated snapshots give one nonzero eigenvalue") {
  const CartesianGrid g(0.0, 1.0, 40);
  const auto one = random_snapshots(g, 1, 66).front();
  const std::vector<ScalarField> snaps(5, one);
  const PodBasis p = pod_compress(snaps, 0.0, 5);
  CHECK(p.size() == 1u);
  for (std::size_t k = 1; k < 5; ++k) CHECK(p.eigenvalues[k] <= 1e-12 * p.eigenvalues[0]);
  const auto rows = eigenvalue_report(p);
  CHECK(rows.front().k == 1u);
  CHECK(rows.front().normalized == 1.0);
}

TEST_CASE("basis save and load round trip") {
  const CartesianGrid g(Box{2, {0.0, 0.0}, {1.0, 1.0}}, {7, 5});
  const PodBasis p = pod_compress(random_snapshots(g, 6, 67), 0.0, 4);
  const auto dir = std::filesystem::temp_directory_path() / "calibra_test_basis";
  std::filesystem::remove_all(dir);
  save_basis(p, dir);
  const PodBasis q = load_basis(dir);
  CHECK(q.size() == p.size());
  CHECK(q.eigenvalues == p.eigenvalues);
  for (std::size_t k = 0; k < p.size(); ++k) CHECK(q.modes[k].values() == p.modes[k].values());
  std::filesystem::remove_all(dir);
}
