#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "calibra/calibration.hpp"
#include "calibra/fom.hpp"
#include "json.hpp"

namespace calibra {

// Visitation strategy over a single time chain.
struct StudyStrategy {
  std::string name;
  bool reference_final = true;  // reference snapshot at the last time (else the first)
  int stride = 1;               // visit every stride-th time, starting from the reference end
  bool fixed_guess = false;     // start every minimisation from the reference optimum
};

std::vector<StudyStrategy> order_strategies();

// Time series of 1D snapshots together with the exact feature positions at each time.
struct StudyInput {
  std::vector<ScalarField> snapshots;
  std::vector<double> times;
  std::vector<std::vector<double>> exact;
};

StudyInput sod_study_input(std::vector<ScalarField> snapshots, std::vector<double> times, const SodStates& states,
                           double x0 = 0.5);

struct StrategyCurve {
  std::string name;
  std::string measure;  // "characteristics" or "projection"
  std::vector<double> times;
  std::vector<double> errors;
};

struct HeatMap {
  std::string measure;
  std::vector<double> reference_times;
  std::vector<double> times;
  std::vector<std::vector<double>> errors;  // [reference][time]
};

struct StudyOptions {
  CalibrationConfig calibration;
  std::vector<double> equispaced{0.2, 0.4, 0.6, 0.8};
  int heat_references = 10;
  int heat_stride = 1;
  bool heat_map = true;
};

struct StudyReport {
  std::vector<StrategyCurve> curves;
  std::vector<HeatMap> maps;

  const StrategyCurve& curve(const std::string& name, const std::string& measure) const;
  nlohmann::json to_json() const;
  // One CSV per curve and per heat map.
  void write_csv(const std::filesystem::path& dir) const;
};

// A single minimisation of the self-similar misfit without neighbour coupling.
SampleResult calibrate_single(const ScalarField& rho, const ScalarField& reference, const ControlGrid& cg,
                              std::span<const double> guess, const CalibrationConfig& config);

StrategyCurve run_strategy(const StudyInput& input, const StudyStrategy& strategy, const std::string& measure,
                           const StudyOptions& options);
HeatMap run_heat_map(const StudyInput& input, const std::string& measure, const StudyOptions& options);

StudyReport run_order_study(const StudyInput& input, const std::vector<StudyStrategy>& strategies,
                            const StudyOptions& options = {});

}  // namespace calibra
