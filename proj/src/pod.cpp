#include "calibra/pod.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "calibra/archive.hpp"
#include "calibra/errors.hpp"
#include "json.hpp"

namespace calibra {

namespace {

constexpr double kFloor = 1e-14;

}  // namespace

PodBasis pod_compress(std::span<const ScalarField> snapshots, double tol, std::size_t cap) {
  if (snapshots.empty()) throw Error("pod_compress needs at least one snapshot");
  if (tol < 0.0) throw ConfigError("POD tolerance must be non-negative");
  if (cap < 1) throw ConfigError("POD mode cap must be at least 1");
  const std::size_t m = snapshots.size();
  const CartesianGrid& grid = snapshots.front().grid();
  for (const auto& s : snapshots) check_same_grid(s.grid(), grid, "pod_compress");

  Eigen::MatrixXd gram(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = inner_product(snapshots[i], snapshots[j]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw Error("Gram eigendecomposition failed");
  const Eigen::VectorXd lam_asc = eig.eigenvalues();
  const Eigen::MatrixXd vec_asc = eig.eigenvectors();

  PodBasis basis;
  basis.eigenvalues.resize(m);
  for (std::size_t k = 0; k < m; ++k) basis.eigenvalues[k] = std::max(0.0, lam_asc[m - 1 - k]);
  const double lead = basis.eigenvalues.front();
  if (!(lead > 0.0)) throw Error("pod_compress: all snapshots vanish");
  std::size_t usable = 0;
  for (double l : basis.eigenvalues)
    if (l > kFloor * lead) ++usable;
  for (std::size_t k = usable; k < m; ++k) basis.eigenvalues[k] = 0.0;

  double total = 0.0;
  for (double l : basis.eigenvalues) total += l;
  std::size_t n = usable;
  double tail = total;
  for (std::size_t k = 0; k < usable; ++k) {
    tail -= basis.eigenvalues[k];
    if (tail < tol * total || tail <= 0.0) {
      n = k + 1;
      break;
    }
  }
  n = std::min(n, cap);
  double kept = 0.0;
  for (std::size_t k = 0; k < n; ++k) kept += basis.eigenvalues[k];
  basis.discarded = std::max(0.0, (total - kept) / total);

  const std::size_t cells = grid.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::VectorXd v = vec_asc.col(m - 1 - k);
    std::vector<double> mode(cells, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double c = v[i];
      const auto& s = snapshots[i].values();
      for (std::size_t p = 0; p < cells; ++p) mode[p] += c * s[p];
    }
    basis.modes.emplace_back(grid, std::move(mode));
  }
  // Two Gram-Schmidt passes restore orthonormality lost to small eigenvalues.
  for (int pass = 0; pass < 2; ++pass)
    for (std::size_t k = 0; k < n; ++k) {
      auto& mk = basis.modes[k];
      for (std::size_t l = 0; l < k; ++l) {
        const double c = inner_product(mk, basis.modes[l]);
        const auto& ml = basis.modes[l].values();
        for (std::size_t p = 0; p < cells; ++p) mk[p] -= c * ml[p];
      }
      const double nk = norm(mk);
      for (auto& v : mk.values()) v /= nk;
    }
  return basis;
}

std::vector<double> project(const PodBasis& basis, const ScalarField& field, std::size_t n) {
  if (n > basis.size()) throw ShapeMismatch("requested more modes than the basis holds");
  std::vector<double> c(n);
  for (std::size_t k = 0; k < n; ++k) c[k] = inner_product(field, basis.modes[k]);
  return c;
}

std::vector<double> project(const PodBasis& basis, const ScalarField& field) {
  return project(basis, field, basis.size());
}

ScalarField reconstruct(const PodBasis& basis, std::span<const double> coeffs) {
  if (coeffs.size() > basis.size()) throw ShapeMismatch("more coefficients than modes");
  if (basis.modes.empty()) throw Error("empty basis");
  ScalarField out(basis.grid());
  auto& v = out.values();
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const auto& m = basis.modes[k].values();
    for (std::size_t p = 0; p < v.size(); ++p) v[p] += coeffs[k] * m[p];
  }
  return out;
}

double projection_error(const PodBasis& basis, const ScalarField& field, std::size_t n) {
  const auto c = project(basis, field, n);
  ScalarField r = reconstruct(basis, c);
  for (std::size_t p = 0; p < r.size(); ++p) r[p] = field[p] - r[p];
  return norm(r);
}

std::vector<DecayRow> eigenvalue_report(const PodBasis& basis) {
  std::vector<DecayRow> rows;
  const double lead = basis.eigenvalues.empty() ? 0.0 : basis.eigenvalues.front();
  for (std::size_t k = 0; k < basis.eigenvalues.size(); ++k) {
    if (!(basis.eigenvalues[k] > 0.0)) break;
    rows.push_back({k + 1, basis.eigenvalues[k] / lead});
  }
  return rows;
}

void write_eigenvalue_csv(const PodBasis& basis, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path);
  os << std::setprecision(17) << "k,normalized\n";
  for (const auto& r : eigenvalue_report(basis)) os << r.k << ',' << r.normalized << '\n';
}

void save_basis(const PodBasis& basis, const std::filesystem::path& dir) {
  if (basis.modes.empty()) throw Error("cannot save an empty basis");
  auto ar = FieldArchive::create(dir, basis.grid(), {"mode"}, {"phi"});
  for (std::size_t k = 0; k < basis.size(); ++k) {
    std::vector<ScalarField> f{basis.modes[k]};
    ar.write({static_cast<double>(k)}, f);
  }
  nlohmann::json j{{"eigenvalues", basis.eigenvalues}, {"discarded", basis.discarded}};
  std::ofstream os(dir / "spectrum.json");
  os << std::setprecision(17) << j.dump(1);
  if (!os) throw IoError("cannot write spectrum for " + dir.string());
  write_eigenvalue_csv(basis, (dir / "eigenvalues.csv").string());
}

PodBasis load_basis(const std::filesystem::path& dir) {
  auto ar = FieldArchive::open(dir);
  PodBasis b;
  for (const auto& row : ar.rows()) b.modes.push_back(ar.read_component(row.index, "phi"));
  std::ifstream is(dir / "spectrum.json");
  if (!is) throw IoError("missing spectrum.json in " + dir.string());
  nlohmann::json j;
  is >> j;
  b.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  b.discarded = j.at("discarded").get<double>();
  return b;
}

}  // namespace calibra
