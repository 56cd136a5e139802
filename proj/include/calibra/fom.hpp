#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "calibra/archive.hpp"
#include "calibra/euler.hpp"
#include "calibra/grid.hpp"

namespace calibra {

enum class Reconstruction { Weno5, FirstOrder };

struct SolverConfig {
  double cfl = 0.8;
  Reconstruction reconstruction = Reconstruction::Weno5;
  double gamma = kDefaultGamma;
  double final_time = 0.2;
  std::vector<double> snapshot_times;

  void validate() const;
};

enum class BoundaryKind { Dirichlet, Transmissive, Reflective, Periodic };

struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::Transmissive;
  // Dirichlet data at a ghost-cell centre; may depend on time.
  std::function<Primitive(double x, double y, double t)> state;

  static BoundaryCondition dirichlet(Primitive w);
  static BoundaryCondition dirichlet(std::function<Primitive(double, double, double)> f);
  static BoundaryCondition transmissive() { return {BoundaryKind::Transmissive, {}}; }
  static BoundaryCondition reflective() { return {BoundaryKind::Reflective, {}}; }
  static BoundaryCondition periodic() { return {BoundaryKind::Periodic, {}}; }
};

enum Face { kLeft = 0, kRight = 1, kBottom = 2, kTop = 3 };

struct ProblemSpec {
  std::string name = "custom";
  CartesianGrid grid;
  std::function<Primitive(double x, double y)> initial;
  std::array<BoundaryCondition, 4> bcs;
  // Physical parameters stored ahead of time in every archive row.
  std::vector<std::string> parameter_names;
  std::vector<double> parameters;

  void validate() const;
};

struct SodStates {
  double rhoL = 1.0, pL = 1.0, rhoR = 0.1, pR = 0.125;
};

ProblemSpec sod_problem(const SodStates& s, int cells, bool parametric = false, double x0 = 0.5);
ProblemSpec dmr_problem(double beta, int nx, int ny, bool parametric = false);
ProblemSpec triple_point_problem(int nx, int ny);
// rho = 1 + amplitude sin(2 pi x), u = 1, p = 1 on a periodic unit interval.
ProblemSpec density_wave_problem(int cells, double amplitude = 0.2);

bool in_dmr_left_region(double beta, double x, double y, double t);

class EulerSolver {
 public:
  EulerSolver(ProblemSpec problem, SolverConfig config);

  double time() const { return time_; }
  const ProblemSpec& problem() const { return problem_; }
  const SolverConfig& config() const { return config_; }

  double stable_dt() const;
  void step(double dt);
  // Steps exactly onto t_end (used to land on snapshot times).
  void step_to(double t_end);
  // Semi-discrete operator on a padded state; fills ghosts of u in place.
  void residual(std::vector<double>& u, double t, std::vector<double>& rhs) const;

  ConservedField snapshot() const;
  State cell(int i, int j = 0) const;
  double total_mass() const;
  std::size_t steps() const { return steps_; }

 private:
  std::size_t padded(int i, int j) const;
  void fill_ghosts(std::vector<double>& u, double t) const;
  void sweep(const std::vector<double>& u, int axis, std::vector<double>& rhs) const;
  void check_state() const;

  ProblemSpec problem_;
  SolverConfig config_;
  int nx_, ny_, gx_, gy_, px_;
  std::vector<double> u_;
  double time_ = 0.0;
  std::size_t steps_ = 0;
};

using SnapshotCallback = std::function<void(double t, const ConservedField&)>;

// Integrates to final_time and hands every snapshot time to the callback.
void integrate(const ProblemSpec& problem, const SolverConfig& config, const SnapshotCallback& on_snapshot);
void run_fom(const ProblemSpec& problem, const SolverConfig& config, FieldArchive& archive);

}  // namespace calibra
