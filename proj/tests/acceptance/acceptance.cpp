// Acceptance checks. One line per criterion; exit status is the number of failures.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "calibra/config.hpp"
#include "calibra/fom.hpp"
#include "calibra/mlp.hpp"
#include "calibra/pipeline.hpp"
#include "calibra/pod.hpp"
#include "calibra/riemann.hpp"
#include "calibra/run.hpp"
#include "calibra/study.hpp"
#include "calibra/transform.hpp"

using namespace calibra;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

fs::path work_dir() {
  const char* env = std::getenv("CALIBRA_ACCEPTANCE_DIR");
  return env ? fs::path(env) : fs::temp_directory_path() / "calibra_acceptance";
}

const json& sod_summary() {
  static const json summary = [] {
    RunConfig c = preset_config("sod");
    c.output = (work_dir() / "sod").string();
    std::ostringstream log;
    return run_preset(c, log);
  }();
  return summary;
}

Outcome sod_fom() {
  const auto t0 = std::chrono::steady_clock::now();
  const SodStates s;
  const ProblemSpec p = sod_problem(s, 1500);
  SolverConfig c;
  c.final_time = 0.2;
  c.snapshot_times = {0.2};
  ScalarField rho;
  integrate(p, c, [&](double, const ConservedField& f) { rho = f.density(); });
  const double elapsed = seconds_since(t0);
  const auto x = p.grid.centers();
  const auto exact = sod_exact({s.rhoL, 0.0, 0.0, s.pL}, {s.rhoR, 0.0, 0.0, s.pR}, 0.5, 0.2, x);
  double l1 = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) l1 += std::abs(rho[i] - exact.density[i]) * p.grid.cell_volume();
  return {l1 <= 1e-2 && elapsed <= 120.0, "L1 " + fmt(l1) + ", " + fmt(elapsed) + " s"};
}

Outcome smooth_order() {
  std::vector<double> errors;
  const double tf = 0.5;
  for (int n : {100, 200, 400}) {
    const ProblemSpec p = density_wave_problem(n);
    SolverConfig c;
    c.final_time = tf;
    c.snapshot_times = {tf};
    ScalarField rho;
    integrate(p, c, [&](double, const ConservedField& f) { rho = f.density(); });
    const double h = p.grid.spacing(0);
    double l1 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = i * h - tf, b = a + h;
      const double avg = 1.0 + 0.2 * (std::cos(2.0 * M_PI * a) - std::cos(2.0 * M_PI * b)) / (2.0 * M_PI * h);
      l1 += std::abs(rho[i] - avg) * h;
    }
    errors.push_back(l1);
  }
  const double o1 = std::log2(errors[0] / errors[1]), o2 = std::log2(errors[1] / errors[2]);
  return {o1 >= 4.0 && o2 >= 4.0, "orders " + fmt(o1) + ", " + fmt(o2)};
}

Outcome sod_decay() {
  const json& s = sod_summary();
  const int ale = s["bases"]["rho"]["ale_at_tolerance"], eul = s["bases"]["rho"]["eulerian_at_tolerance"];
  const double ra = s["eigenvalues"]["rho"]["ale"][1], re = s["eigenvalues"]["rho"]["eulerian"][1];
  return {ale <= 4 && eul > 7 && ra <= 0.1 * re, "modes at 1e-4: ALE " + std::to_string(ale) + ", Eulerian " +
                                                     std::to_string(eul) + "; l2/l1 " + fmt(ra) + " vs " + fmt(re)};
}

Outcome transform_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0), jitter(-0.3, 0.3);
  const ControlGrid c1 = ControlGrid::uniform(Box{1, {0.0, 0.0}, {1.0, 0.0}}, 6);
  const ControlGrid c2 = ControlGrid::uniform(Box{2, {0.0, 0.0}, {1.0, 1.0}}, 5, 4);
  int maps = 0, bad_monotone = 0;
  double worst_inverse = 0.0, worst_jac = 0.0;
  while (maps < 1000) {
    const ControlGrid& cg = maps % 2 ? c2 : c1;
    std::vector<double> w = cg.reference();
    for (int s : cg.free_slots()) w[s] += jitter(rng) * cg.domain().length(s % cg.dim()) / (cg.count(s % cg.dim()) - 1);
    const TransformMap t = build_map(cg, w);
    const CartesianGrid lattice =
        cg.dim() == 1 ? CartesianGrid(0.0, 1.0, 64) : CartesianGrid(cg.domain(), {64, 64});
    if (!(t.screen(lattice).min_det > 0.0)) continue;  // infeasible draw
    ++maps;

    const int lines = cg.dim() == 1 ? 1 : 11;
    for (int l = 0; l < lines; ++l) {
      const double fixed = lines == 1 ? 0.0 : l / 10.0;
      for (int axis = 0; axis < cg.dim(); ++axis) {
        double prev = -1.0;
        for (int k = 0; k <= 200; ++k) {
          Vec2 a{0.0, 0.0};
          a[axis] = k / 200.0;
          if (cg.dim() == 2) a[1 - axis] = fixed;
          const double v = t(a)[axis];
          if (k > 0 && !(v > prev)) ++bad_monotone;
          prev = v;
        }
      }
    }

    const InverseMap inv(t, lattice);
    for (int k = 0; k < 20; ++k) {
      const Vec2 a{unit(rng), cg.dim() == 2 ? unit(rng) : 0.0};
      const Vec2 b = inv(t(a));
      worst_inverse = std::max({worst_inverse, std::abs(b[0] - a[0]), std::abs(b[1] - a[1])});

      const Mat2 j = jacobian(t, a);
      const double h = 1e-6;
      double scale = 0.0;
      for (double v : j) scale = std::max(scale, std::abs(v));
      for (int c = 0; c < cg.dim(); ++c) {
        Vec2 lo = a, hi = a;
        lo[c] -= h;
        hi[c] += h;
        const Vec2 fl = t(lo), fh = t(hi);
        for (int r = 0; r < cg.dim(); ++r)
          worst_jac = std::max(worst_jac, std::abs((fh[r] - fl[r]) / (2.0 * h) - j[2 * r + c]) / std::max(1.0, scale));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {bad_monotone == 0 && worst_inverse <= 1e-8 && worst_jac <= 1e-6 && elapsed <= 60.0,
          "monotonicity violations " + std::to_string(bad_monotone) + ", inverse " + fmt(worst_inverse) +
              ", jacobian " + fmt(worst_jac) + ", " + fmt(elapsed) + " s"};
}

Outcome translation_recovery() {
  const CartesianGrid g(0.0, 1.0, 1000);
  const ControlGrid cg(Box{1, {0.0, 0.0}, {1.0, 0.0}}, {0.0, 0.36, 0.4, 0.44, 1.0});
  std::vector<ScalarField> snaps;
  std::vector<std::vector<double>> mu;
  for (int k = 0; k <= 10; ++k) {
    const double t = 0.025 * k;
    ScalarField f(g);
    for (int i = 0; i < g.cells(0); ++i) {
      const double s = g.center(0, i) - 0.4 * t - 0.3;
      f[i] = std::exp(-s * s / 0.001);
    }
    snaps.push_back(f);
    mu.push_back({t});
  }
  CalibrationConfig c;
  c.delta = 0.0;
  c.alpha = 0.0;
  const CalibrationResult r = calibrate_self_similar({snaps, ParameterTable(mu), cg}, c);
  const auto ref = cg.reference_theta();
  double worst = 0.0;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const double shift = 0.4 * (mu[k][0] - 0.25);
    for (std::size_t q = 0; q < ref.size(); ++q) worst = std::max(worst, std::abs(r.samples[k].theta[q] - ref[q] - shift));
  }
  return {worst <= 1e-3, "max shift error " + fmt(worst)};
}

Outcome order_study() {
  const SodStates states;
  const ProblemSpec p = sod_problem(states, 1500);
  SolverConfig sc;
  sc.final_time = 0.16;
  std::vector<double> times;
  for (int k = 0; k < 100; ++k) times.push_back(0.01 + 0.15 * k / 99.0);
  sc.snapshot_times = times;
  std::vector<ScalarField> snaps;
  integrate(p, sc, [&](double, const ConservedField& f) { snaps.push_back(f.density()); });
  const StudyReport report = run_order_study(sod_study_input(snaps, times, states), order_strategies());
  report.write_csv(work_dir() / "study");

  bool complete = report.maps.size() == 2;
  for (const auto& s : order_strategies()) {
    for (const std::string m : {"characteristics", "projection"}) {
      const auto& curve = report.curve(s.name, m);
      complete = complete && !curve.errors.empty();
    }
  }
  const auto& t2b = report.curve("T2B", "characteristics");
  double mean = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < t2b.times.size(); ++i) {
    if (t2b.times[i] >= 0.02 - 1e-12 && t2b.times[i] <= 0.16 + 1e-12) {
      mean += t2b.errors[i];
      ++count;
    }
  }
  mean /= std::max(count, 1);
  return {complete && mean <= 5e-2, std::to_string(report.curves.size()) + " curves, " +
                                        std::to_string(report.maps.size()) + " heat maps, T2B mean " + fmt(mean)};
}

Outcome sod_online() {
  const json& rows = sod_summary()["errors"]["rho"]["rows"];
  double worst_ale3 = 0.0;
  bool below = true;
  int times = 0;
  for (const auto& r3 : rows) {
    if (r3["N"] != 3) continue;
    ++times;
    for (const auto& r7 : rows) {
      if (r7["N"] == 7 && r7["mu"] == r3["mu"]) below = below && r3["ale"].get<double>() <= r7["eulerian"].get<double>();
    }
    worst_ale3 = std::max(worst_ale3, r3["ale"].get<double>());
  }
  return {times == 5 && worst_ale3 <= 5e-2 && below,
          std::to_string(times) + " times, worst ALE(N=3) " + fmt(worst_ale3) +
              (below ? ", below Eulerian(N=7) everywhere" : ", above Eulerian(N=7) somewhere")};
}

Outcome dmr_errors() {
  RunConfig c = preset_config("dmr");
  c.output = (work_dir() / "dmr").string();
  std::ostringstream log;
  const json s = run_preset(c, log);
  const json& rows = s["errors"]["rho"]["rows"];
  bool below = true;
  double worst_ratio = 0.0;
  int times = 0;
  for (const auto& r : rows) {
    if (r["N"] == 2) {
      ++times;
      below = below && r["ale"].get<double>() <= r["eulerian"].get<double>();
    }
    if (r["N"] != 12) continue;
    for (const auto& q : rows) {
      if (q["N"] == 30 && q["mu"] == r["mu"]) worst_ratio = std::max(worst_ratio, r["ale"].get<double>() / q["ale"].get<double>());
    }
  }
  return {times > 0 && below && worst_ratio < 2.0,
          std::to_string(times) + " times, ALE(N=2) " + (below ? "<=" : "not <=") +
              " Eulerian(N=2), max ALE N=12/N=30 ratio " + fmt(worst_ratio)};
}

Outcome pod_checks() {
  const CartesianGrid g(Box{2, {0.0, 0.0}, {2.0, 1.0}}, {20, 15});
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ScalarField> snaps;
  for (int k = 0; k < 50; ++k) {
    ScalarField f(g);
    for (auto& v : f.values()) v = n(rng);
    snaps.push_back(f);
  }
  const PodBasis b = pod_compress(snaps, 0.0, 50);
  double ortho = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      ortho = std::max(ortho, std::abs(inner_product(b.modes[i], b.modes[j]) - (i == j ? 1.0 : 0.0)));

  Eigen::MatrixXd gram(50, 50);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) gram(i, j) = inner_product(snaps[i], snaps[j]);
  Eigen::VectorXd dense = Eigen::EigenSolver<Eigen::MatrixXd>(gram).eigenvalues().real();
  std::sort(dense.data(), dense.data() + dense.size(), std::greater<>());
  double eig = 0.0;
  for (int k = 0; k < 50; ++k) eig = std::max(eig, std::abs(b.eigenvalues[k] - dense[k]) / dense[0]);

  double energy = 0.0, total = 0.0;
  for (const auto& s : snaps) energy += inner_product(s, s);
  for (double l : b.eigenvalues) total += l;
  const double identity = std::abs(total - energy) / energy;
  return {ortho <= 1e-10 && eig <= 1e-8 && identity <= 1e-8,
          "orthonormality " + fmt(ortho) + ", eigenvalues " + fmt(eig) + ", energy " + fmt(identity)};
}

Outcome mlp_checks() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Mlp net({3, 5, 2}, Activation::Tanh, trial % 2 ? Activation::Softplus : Activation::Identity, trial);
    Eigen::MatrixXd x(3, 8), y(2, 8);
    for (int j = 0; j < 8; ++j) {
      for (int i = 0; i < 3; ++i) x(i, j) = n(rng);
      for (int i = 0; i < 2; ++i) y(i, j) = n(rng);
    }
    const auto g = net.gradient(x, y);
    auto p = net.parameters();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double keep = p[k], h = 1e-6;
      p[k] = keep + h;
      net.set_parameters(p);
      const double up = net.loss(x, y);
      p[k] = keep - h;
      net.set_parameters(p);
      const double down = net.loss(x, y);
      p[k] = keep;
      net.set_parameters(p);
      worst = std::max(worst, std::abs((up - down) / (2.0 * h) - g[k]) / std::max(1.0, std::abs(g[k])));
    }
  }
  Eigen::MatrixXd x(30, 2), y(30, 3);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 2; ++j) x(i, j) = n(rng);
    for (int j = 0; j < 3; ++j) y(i, j) = n(rng);
  }
  MlpConfig c;
  c.max_epochs = 500;
  c.seed = 5;
  Mlp a(2, 3, c), b(2, 3, c);
  const bool same = train_adam(a, x, y, c).loss_history == train_adam(b, x, y, c).loss_history &&
                    a.parameters() == b.parameters();
  return {worst <= 1e-5 && same, "gradient error " + fmt(worst) + (same ? ", training bitwise repeatable" : ", training differs")};
}

Outcome identity_degeneracy() {
  sod_summary();
  const fs::path fom = work_dir() / "sod" / "fom";
  const FieldArchive train = FieldArchive::open(fom / "train");
  const FieldArchive test = FieldArchive::open(fom / "test");
  RunConfig c = preset_config("sod");
  c.offline.identity_calibration = true;
  c.offline.components = {"rho"};
  const OfflineArtifacts art = offline_build(train, c.offline);
  std::vector<std::size_t> rows(test.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const ErrorReport r = error_report(art, test, rows, c.error_ns);
  double gap = 0.0;
  for (const auto& row : r.rows) gap = std::max({gap, std::abs(row.ale - row.eulerian), std::abs(row.ale_proj - row.eulerian_proj)});
  return {gap == 0.0 && !r.rows.empty(), std::to_string(r.rows.size()) + " rows, max ALE/Eulerian gap " + fmt(gap)};
}

}  // namespace

int main() {
  fs::create_directories(work_dir());
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Sod FOM against the exact Riemann solution", sod_fom},
      {"smooth density wave convergence order", smooth_order},
      {"Sod eigenvalue decay, calibrated vs uncalibrated", sod_decay},
      {"transformation map properties on 1000 random maps", transform_properties},
      {"translating profile shift recovery", translation_recovery},
      {"Sod calibration order study", order_study},
      {"Sod online reduced models", sod_online},
      {"double Mach reflection reduced models", dmr_errors},
      {"POD correctness", pod_checks},
      {"MLP gradient and determinism", mlp_checks},
      {"identity calibration degeneracy", identity_degeneracy},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (k + 1) << ". " << criteria[k].first << ": " << o.detail
              << " [" << fmt(seconds_since(t0)) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures;
}
