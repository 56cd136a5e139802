#include "calibra/fom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "calibra/errors.hpp"
#include "calibra/ssprk.hpp"

namespace calibra {

namespace {

constexpr int kGhost = 3;
constexpr int kVars = 4;

// Three-point Gauss-Legendre nodes and weights on [-1/2, 1/2].
constexpr std::array<double, 3> kGaussNode{-0.3872983346207417, 0.0, 0.3872983346207417};
constexpr std::array<double, 3> kGaussWeight{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

}  // namespace

void SolverConfig::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
  if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
  if (!(final_time > 0.0)) throw ConfigError("final_time must be positive");
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end()))
    throw ConfigError("snapshot_times must be sorted");
  for (double t : snapshot_times)
    if (t < 0.0 || t > final_time + 1e-12) throw ConfigError("snapshot time outside [0, final_time]");
}

BoundaryCondition BoundaryCondition::dirichlet(Primitive w) {
  return {BoundaryKind::Dirichlet, [w](double, double, double) { return w; }};
}

BoundaryCondition BoundaryCondition::dirichlet(std::function<Primitive(double, double, double)> f) {
  return {BoundaryKind::Dirichlet, std::move(f)};
}

void ProblemSpec::validate() const {
  if (!initial) throw ConfigError("problem '" + name + "' has no initial condition");
  const int faces = grid.dim() == 1 ? 2 : 4;
  for (int f = 0; f < faces; ++f) {
    if (bcs[f].kind == BoundaryKind::Dirichlet && !bcs[f].state)
      throw ConfigError("problem '" + name + "' has a Dirichlet face without data");
  }
  for (int ax = 0; ax < grid.dim(); ++ax) {
    const bool lo = bcs[2 * ax].kind == BoundaryKind::Periodic;
    const bool hi = bcs[2 * ax + 1].kind == BoundaryKind::Periodic;
    if (lo != hi) throw ConfigError("periodic boundaries must be paired on opposite faces");
  }
  if (parameter_names.size() != parameters.size()) throw ConfigError("parameter names and values differ in length");
}

ProblemSpec sod_problem(const SodStates& s, int cells, bool parametric, double x0) {
  ProblemSpec p;
  p.name = "sod";
  p.grid = CartesianGrid(0.0, 1.0, cells);
  const Primitive left{s.rhoL, 0.0, 0.0, s.pL};
  const Primitive right{s.rhoR, 0.0, 0.0, s.pR};
  p.initial = [=](double x, double) { return x < x0 ? left : right; };
  p.bcs[kLeft] = BoundaryCondition::dirichlet(left);
  p.bcs[kRight] = BoundaryCondition::dirichlet(right);
  if (parametric) {
    p.parameter_names = {"rhoL", "pL", "rhoR", "pR"};
    p.parameters = {s.rhoL, s.pL, s.rhoR, s.pR};
  }
  return p;
}

bool in_dmr_left_region(double beta, double x, double y, double t) {
  return x < 1.0 / 6.0 + std::tan(beta) * y + 10.0 / std::cos(beta) * t;
}

ProblemSpec dmr_problem(double beta, int nx, int ny, bool parametric) {
  ProblemSpec p;
  p.name = "dmr";
  p.grid = CartesianGrid(Box{2, {0.0, 0.0}, {4.0, 1.0}}, {nx, ny});
  const Primitive left{8.0, 8.25 * std::cos(beta), -8.25 * std::sin(beta), 116.5};
  const Primitive right{1.4, 0.0, 0.0, 1.0};
  p.initial = [=](double x, double y) { return in_dmr_left_region(beta, x, y, 0.0) ? left : right; };
  p.bcs[kLeft] = BoundaryCondition::dirichlet(left);
  p.bcs[kRight] = BoundaryCondition::transmissive();
  p.bcs[kBottom] = BoundaryCondition::reflective();
  p.bcs[kTop] = BoundaryCondition::dirichlet(
      [=](double x, double, double t) { return in_dmr_left_region(beta, x, 1.0, t) ? left : right; });
  if (parametric) {
    p.parameter_names = {"beta"};
    p.parameters = {beta};
  }
  return p;
}

ProblemSpec triple_point_problem(int nx, int ny) {
  ProblemSpec p;
  p.name = "triple";
  p.grid = CartesianGrid(Box{2, {0.0, 0.0}, {7.0, 3.0}}, {nx, ny});
  const Primitive west{1.0, 20.0, 0.0, 1.0};
  const Primitive north_east{0.125, 0.0, 0.0, 0.1};
  const Primitive south_east{1.0, 0.0, 0.0, 0.1};
  p.initial = [=](double x, double y) {
    if (x < 1.0) return west;
    return y > 1.5 ? north_east : south_east;
  };
  p.bcs[kLeft] = BoundaryCondition::dirichlet(west);
  p.bcs[kRight] = BoundaryCondition::transmissive();
  p.bcs[kBottom] = BoundaryCondition::reflective();
  p.bcs[kTop] = BoundaryCondition::reflective();
  return p;
}

ProblemSpec density_wave_problem(int cells, double amplitude) {
  ProblemSpec p;
  p.name = "density-wave";
  p.grid = CartesianGrid(0.0, 1.0, cells);
  p.initial = [=](double x, double) {
    return Primitive{1.0 + amplitude * std::sin(2.0 * std::numbers::pi * x), 1.0, 0.0, 1.0};
  };
  p.bcs[kLeft] = BoundaryCondition::periodic();
  p.bcs[kRight] = BoundaryCondition::periodic();
  return p;
}

EulerSolver::EulerSolver(ProblemSpec problem, SolverConfig config)
    : problem_(std::move(problem)), config_(std::move(config)) {
  problem_.validate();
  config_.validate();
  const auto& g = problem_.grid;
  nx_ = g.cells(0);
  ny_ = g.dim() == 2 ? g.cells(1) : 1;
  gx_ = kGhost;
  gy_ = g.dim() == 2 ? kGhost : 0;
  px_ = nx_ + 2 * gx_;
  if (nx_ < kGhost || (g.dim() == 2 && ny_ < kGhost)) throw ConfigError("grid too small for the WENO5 stencil");
  u_.assign(static_cast<std::size_t>(px_) * (ny_ + 2 * gy_) * kVars, 0.0);

  const double hx = g.spacing(0);
  const double hy = g.dim() == 2 ? g.spacing(1) : 0.0;
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      State avg{0, 0, 0, 0};
      const int qy = g.dim() == 2 ? 3 : 1;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < qy; ++b) {
          const double x = g.center(0, i) + kGaussNode[a] * hx;
          const double y = g.dim() == 2 ? g.center(1, j) + kGaussNode[b] * hy : 0.0;
          const double w = kGaussWeight[a] * (g.dim() == 2 ? kGaussWeight[b] : 1.0);
          const State s = prim_to_cons(problem_.initial(x, y), config_.gamma);
          for (int k = 0; k < kVars; ++k) avg[k] += w * s[k];
        }
      std::copy(avg.begin(), avg.end(), u_.begin() + padded(i, j));
    }
}

std::size_t EulerSolver::padded(int i, int j) const {
  return (static_cast<std::size_t>(j + gy_) * px_ + static_cast<std::size_t>(i + gx_)) * kVars;
}

State EulerSolver::cell(int i, int j) const {
  State s;
  std::copy_n(u_.begin() + padded(i, j), kVars, s.begin());
  return s;
}

void EulerSolver::fill_ghosts(std::vector<double>& u, double t) const {
  const auto& g = problem_.grid;
  auto put = [&](int i, int j, const State& s) { std::copy(s.begin(), s.end(), u.begin() + padded(i, j)); };
  auto get = [&](int i, int j) {
    State s;
    std::copy_n(u.begin() + padded(i, j), kVars, s.begin());
    return s;
  };
  auto fill_face = [&](Face face, int ghost_i, int ghost_j, int mirror_i, int mirror_j, int periodic_i,
                       int periodic_j) {
    const auto& bc = problem_.bcs[face];
    const int axis = face < 2 ? 0 : 1;
    switch (bc.kind) {
      case BoundaryKind::Periodic:
        put(ghost_i, ghost_j, get(periodic_i, periodic_j));
        break;
      case BoundaryKind::Transmissive:
        put(ghost_i, ghost_j, get(mirror_i, mirror_j));
        break;
      case BoundaryKind::Reflective: {
        State s = get(mirror_i, mirror_j);
        s[1 + axis] = -s[1 + axis];
        put(ghost_i, ghost_j, s);
        break;
      }
      case BoundaryKind::Dirichlet: {
        const double x = g.box().lo[0] + (ghost_i + 0.5) * g.spacing(0);
        const double y = g.dim() == 2 ? g.box().lo[1] + (ghost_j + 0.5) * g.spacing(1) : 0.0;
        put(ghost_i, ghost_j, prim_to_cons(bc.state(x, y, t), config_.gamma));
        break;
      }
    }
  };
  for (int j = 0; j < ny_; ++j)
    for (int k = 1; k <= kGhost; ++k) {
      fill_face(kLeft, -k, j, k - 1, j, nx_ - k, j);
      fill_face(kRight, nx_ - 1 + k, j, nx_ - k, j, k - 1, j);
    }
  if (g.dim() == 2) {
    for (int i = 0; i < nx_; ++i)
      for (int k = 1; k <= kGhost; ++k) {
        fill_face(kBottom, i, -k, i, k - 1, i, ny_ - k);
        fill_face(kTop, i, ny_ - 1 + k, i, ny_ - k, i, k - 1);
      }
  }
}

void EulerSolver::sweep(const std::vector<double>& u, int axis, std::vector<double>& rhs) const {
  const int n = axis == 0 ? nx_ : ny_;
  const int lines = axis == 0 ? ny_ : nx_;
  const double inv_h = 1.0 / problem_.grid.spacing(axis);
  const double gamma = config_.gamma;
  const bool weno = config_.reconstruction == Reconstruction::Weno5;
  std::vector<State> line(n + 2 * kGhost);
  std::vector<State> flux(n + 1);
  for (int l = 0; l < lines; ++l) {
    for (int c = -kGhost; c < n + kGhost; ++c) {
      const std::size_t p = axis == 0 ? padded(c, l) : padded(l, c);
      std::copy_n(u.begin() + p, kVars, line[c + kGhost].begin());
    }
    for (int f = 0; f <= n; ++f) {
      // Face between cells f-1 and f; buffer offset is kGhost.
      const State& lo = line[f - 1 + kGhost];
      const State& hi = line[f + kGhost];
      State ul = lo, ur = hi;
      if (weno) {
        for (int k = 0; k < kVars; ++k) {
          ul[k] = weno5_right_face(line[f][k], line[f + 1][k], line[f + 2][k], line[f + 3][k], line[f + 4][k]);
          ur[k] = weno5_right_face(line[f + 5][k], line[f + 4][k], line[f + 3][k], line[f + 2][k], line[f + 1][k]);
        }
        if (!is_physical(ul, gamma) || !is_physical(ur, gamma)) {
          ul = lo;
          ur = hi;
        }
      }
      flux[f] = rusanov_flux(ul, ur, axis, gamma);
    }
    for (int c = 0; c < n; ++c) {
      const std::size_t p = axis == 0 ? padded(c, l) : padded(l, c);
      for (int k = 0; k < kVars; ++k) rhs[p + k] -= (flux[c + 1][k] - flux[c][k]) * inv_h;
    }
  }
}

void EulerSolver::residual(std::vector<double>& u, double t, std::vector<double>& rhs) const {
  fill_ghosts(u, t);
  rhs.assign(u.size(), 0.0);
  sweep(u, 0, rhs);
  if (problem_.grid.dim() == 2) sweep(u, 1, rhs);
}

double EulerSolver::stable_dt() const {
  const auto& g = problem_.grid;
  double rate = 0.0;
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const Primitive w = cons_to_prim(cell(i, j), config_.gamma);
      const double c = sound_speed(w, config_.gamma);
      double r = (std::abs(w.u) + c) / g.spacing(0);
      if (g.dim() == 2) r += (std::abs(w.v) + c) / g.spacing(1);
      rate = std::max(rate, r);
    }
  return config_.cfl / rate;
}

void EulerSolver::check_state() const {
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const State s = cell(i, j);
      if (!is_physical(s, config_.gamma)) {
        std::ostringstream os;
        os << "solver blew up at t=" << time_ << " in cell (" << i << "," << j << "): rho=" << s[0]
           << " E=" << s[3];
        throw NonPhysicalState(os.str());
      }
    }
}

void EulerSolver::step(double dt) {
  ssprk54_step(u_, time_, dt, [this](std::vector<double>& u, double t, std::vector<double>& rhs) {
    residual(u, t, rhs);
  });
  time_ += dt;
  ++steps_;
  check_state();
}

void EulerSolver::step_to(double t_end) {
  step(t_end - time_);
  time_ = t_end;
}

ConservedField EulerSolver::snapshot() const {
  ConservedField out(problem_.grid);
  const int dim = problem_.grid.dim();
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const State s = cell(i, j);
      const std::size_t k = problem_.grid.index(i, j);
      out.component(0)[k] = s[0];
      out.component(1)[k] = s[1];
      if (dim == 2) out.component(2)[k] = s[2];
      out.component(dim + 1)[k] = s[3];
    }
  return out;
}

double EulerSolver::total_mass() const {
  double m = 0.0;
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) m += u_[padded(i, j)];
  return m * problem_.grid.cell_volume();
}

void integrate(const ProblemSpec& problem, const SolverConfig& config, const SnapshotCallback& on_snapshot) {
  EulerSolver solver(problem, config);
  std::vector<double> targets = config.snapshot_times;
  if (targets.empty() || targets.back() < config.final_time) targets.push_back(config.final_time);
  const std::size_t reported = config.snapshot_times.size();
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double target = targets[k];
    while (solver.time() < target) {
      const double dt = solver.stable_dt();
      if (solver.time() + dt >= target - 1e-14 * std::max(1.0, target))
        solver.step_to(target);
      else
        solver.step(dt);
    }
    if (k < reported) on_snapshot(target, solver.snapshot());
  }
}

void run_fom(const ProblemSpec& problem, const SolverConfig& config, FieldArchive& archive) {
  integrate(problem, config, [&](double t, const ConservedField& field) {
    std::vector<double> mu = problem.parameters;
    mu.push_back(t);
    archive.write(mu, field);
  });
}

}  // namespace calibra
