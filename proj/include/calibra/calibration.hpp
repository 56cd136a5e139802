#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibra/control_grid.hpp"
#include "calibra/grid.hpp"
#include "calibra/optimizer.hpp"
#include "calibra/pod.hpp"
#include "calibra/transform.hpp"
#include "json.hpp"

namespace calibra {

struct CalibrationConfig {
  double delta = 1e-6;
  double alpha = 0.0;
  int max_iter = 100;
  double gap_fraction = 1e-3;
  double det_floor = 1e-4;
  int few = 10;
  int few_pod = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

// Parameter vectors (time last) with min-max normalisation and per-physical-parameter time chains.
class ParameterTable {
 public:
  ParameterTable() = default;
  explicit ParameterTable(std::vector<std::vector<double>> raw);

  std::size_t size() const { return raw_.size(); }
  const std::vector<double>& raw(std::size_t i) const { return raw_[i]; }
  std::vector<double> normalized(std::size_t i) const;
  std::vector<double> normalize(std::span<const double> mu) const;
  std::vector<double> denormalize(std::span<const double> unit) const;
  double distance(std::size_t i, std::size_t j) const;
  double time(std::size_t i) const { return raw_[i].back(); }
  // Groups of row indices sharing the physical part, each sorted by time; groups in order of appearance.
  const std::vector<std::vector<std::size_t>>& chains() const { return chains_; }

 private:
  std::vector<std::vector<double>> raw_;
  std::vector<double> lo_, hi_;
  std::vector<std::vector<std::size_t>> chains_;
};

// Snapshot densities on the reference grid, their parameters and the control layout.
struct CalibrationProblem {
  std::vector<ScalarField> snapshots;
  ParameterTable params;
  ControlGrid control;
};

struct Neighbor {
  std::vector<double> theta;
  double distance = 1.0;  // normalised parameter distance
};

struct SampleResult {
  std::vector<double> theta;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool feasible = true;
  bool max_iter_reached = false;
  bool failed = false;
  bool visited = false;
  std::string message;
};

struct CalibrationResult {
  ControlGrid control;
  std::vector<std::vector<double>> mu;
  std::vector<SampleResult> samples;
  std::vector<std::size_t> order;
  std::string mode = "self";
  std::optional<std::size_t> reference_index;
  std::vector<std::size_t> few;

  std::vector<std::vector<double>> thetas() const;
  nlohmann::json to_json() const;
  static CalibrationResult from_json(const nlohmann::json& j);
};

// rho evaluated at the mapped reference cell centres.
ScalarField calibrated_snapshot(const ScalarField& rho, const TransformMap& map);

// Map-dependent penalty terms; returns nullopt when the map is rejected (ordering or determinant floor).
struct MapTerms {
  ScalarField pulled;
  double jacobian_term = 0.0;
};
std::optional<MapTerms> pull_back(const ScalarField& rho, const ControlGrid& cg, std::span<const double> theta,
                                  const CalibrationConfig& config);

double smoothness_term(std::span<const double> theta, const Neighbor* neighbor, double delta);

double residual_self_similar(const ScalarField& rho, std::span<const double> theta, const ScalarField& reference,
                             const ControlGrid& cg, const Neighbor* neighbor, const CalibrationConfig& config);
double residual_projection(const ScalarField& rho, std::span<const double> theta, const PodBasis& basis,
                           const ControlGrid& cg, const Neighbor* neighbor, const CalibrationConfig& config);

inline constexpr double kRejectedResidual = 1e10;

// Visitation plan: order of rows and the rule producing each starting point.
struct SweepPlan {
  std::vector<std::size_t> order;
  std::function<std::vector<double>(std::size_t row, std::size_t step, const CalibrationResult& sofar)> initial_guess;
};

using ResidualFactory = std::function<Objective(std::size_t row, const Neighbor* neighbor)>;

CalibrationResult run_sweep(const CalibrationProblem& problem, const SweepPlan& plan, const ResidualFactory& residual,
                            const CalibrationConfig& config);

// Default visitation: last physical parameter first, times from last to first.
std::vector<std::size_t> backward_order(const ParameterTable& params);
SweepPlan chained_plan(const ParameterTable& params, std::vector<double> first_guess,
                       std::vector<std::size_t> order = {});

std::size_t default_reference(const ParameterTable& params);

CalibrationResult calibrate_self_similar(const CalibrationProblem& problem, const ScalarField& reference,
                                         const CalibrationConfig& config);
// Uses the snapshot at default_reference() as the reference.
CalibrationResult calibrate_self_similar(const CalibrationProblem& problem, const CalibrationConfig& config);
CalibrationResult calibrate_quasi(const CalibrationProblem& problem, const CalibrationConfig& config);

std::vector<std::size_t> select_few(std::size_t total, int few, std::uint64_t seed);

std::vector<double> calibration_error_characteristics(const CalibrationResult& result,
                                                      const std::vector<std::vector<double>>& exact);
double calibration_error_projection(const ScalarField& calibrated, const ScalarField& reference);
std::vector<double> calibration_error_projection(const CalibrationProblem& problem, const CalibrationResult& result,
                                                 const ScalarField& reference);

}  // namespace calibra
