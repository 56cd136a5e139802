#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "calibra/archive.hpp"
#include "calibra/calibration.hpp"
#include "calibra/mlp.hpp"
#include "calibra/pod.hpp"
#include "json.hpp"

namespace calibra {

// Equispaced times in [start, stop]; count = 0 keeps every archived time inside the interval.
struct TimeWindow {
  double start = 0.0;
  double stop = 1.0;
  int count = 0;

  nlohmann::json to_json() const;
  static TimeWindow from_json(const nlohmann::json& j);
};

// Archive rows whose time matches the window, in archive order.
std::vector<std::size_t> select_rows(const FieldArchive& archive, const TimeWindow& window);

struct PodConfig {
  double tol = 1e-4;
  std::size_t cap = 7;
};

struct OfflineConfig {
  std::string mode = "self";  // self | quasi
  CalibrationConfig calibration;
  std::vector<int> control{6};         // points per axis, boundary lines included
  std::vector<double> refpoints;       // optional interior reference coordinates (1D)
  TimeWindow calibration_window;
  TimeWindow reduction_window;
  PodConfig pod;
  MlpConfig calibration_net{4, 16, Activation::Softplus, 20000, 1e-6, 1e-3, 0};
  MlpConfig coefficient_net{4, 16, Activation::Identity, 10000, 1e-5, 1e-3, 0};
  std::vector<std::string> components;  // empty = all archived components
  std::optional<std::size_t> reference_row;
  bool identity_calibration = false;  // every optimum forced to the reference points

  void validate() const;
  nlohmann::json to_json() const;
};

ControlGrid make_control(const Box& domain, const std::vector<int>& counts, const std::vector<double>& refpoints);

struct OfflineArtifacts {
  CartesianGrid grid;
  std::vector<std::string> parameter_names;
  std::vector<std::string> components;
  CalibrationResult calibration;
  CalibrationPredictor predictor;
  std::vector<PodBasis> ale, eulerian;  // one per component
  std::vector<Mlp> ale_nets, eulerian_nets;
  std::vector<std::vector<double>> training_mu;
  double det_floor = 1e-4;
  nlohmann::json manifest;

  int component_index(const std::string& name) const;
  const ControlGrid& control() const { return calibration.control; }

  void save(const std::filesystem::path& dir) const;
  static OfflineArtifacts load(const std::filesystem::path& dir);
};

// Predicted control points, pulled toward the reference points until the map clears the determinant floor.
TransformMap predicted_map(const CalibrationPredictor& predictor, std::span<const double> mu, const CartesianGrid& grid,
                           double det_floor);

// Calibrates the density of the rows selected by the calibration window.
CalibrationResult calibrate_archive(const FieldArchive& archive, const OfflineConfig& config);

OfflineArtifacts offline_build(const FieldArchive& archive, const OfflineConfig& config);

struct OnlineSolution {
  ScalarField reference;  // ALE reconstruction on the reference domain
  ScalarField physical;   // ALE reconstruction pushed to the physical domain
  ScalarField eulerian;   // Eulerian POD-NN reconstruction
  TransformMap map;
  std::size_t n_ale = 0, n_eulerian = 0;
};

// Evaluates field at the preimage of every physical cell centre.
ScalarField push_forward(const ScalarField& field, const TransformMap& map);

OnlineSolution online_solve(const OfflineArtifacts& artifacts, const std::vector<double>& mu, std::size_t n,
                            const std::string& component = "rho");

struct ErrorRow {
  std::vector<double> mu;
  std::size_t n = 0;
  std::size_t n_ale = 0, n_eulerian = 0;
  double eulerian = 0.0, ale = 0.0, eulerian_proj = 0.0, ale_proj = 0.0;
};

struct ErrorReport {
  std::string component;
  std::vector<ErrorRow> rows;

  void write_csv(const std::string& path) const;
  nlohmann::json to_json() const;
};

double relative_error(const ScalarField& truth, const ScalarField& approx);

ErrorReport error_report(const OfflineArtifacts& artifacts, const FieldArchive& truth,
                         const std::vector<std::size_t>& rows, const std::vector<std::size_t>& ns,
                         const std::string& component = "rho");

struct EigenComparison {
  std::vector<double> eulerian, ale;  // normalised by the first eigenvalue

  void write_csv(const std::string& path) const;
};
EigenComparison eigenvalue_comparison(const OfflineArtifacts& artifacts, const std::string& component = "rho");

}  // namespace calibra
