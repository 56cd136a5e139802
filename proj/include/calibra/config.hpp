#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "calibra/fom.hpp"
#include "calibra/pipeline.hpp"
#include "json.hpp"

namespace calibra {

struct ParameterRange {
  std::string name;
  double lo = 0.0, hi = 1.0;
};

struct FomSettings {
  std::string problem = "sod";  // sod | dmr | triple
  std::vector<int> cells{1500};
  double final_time = 0.2;
  double cfl = 0.8;
  std::string reconstruction = "weno5";  // weno5 | first-order
  SodStates sod;
  double beta = 0.5235987755982988;
};

// Physical parameters sampled uniformly in their ranges; time is handled by the windows.
struct ParameterSettings {
  std::vector<ParameterRange> ranges;
  int train = 0;
  int test = 0;
  std::vector<std::vector<double>> test_points;  // overrides random test sampling when given
};

struct RunConfig {
  std::string preset = "sod";
  std::uint64_t seed = 0;
  std::string output = "runs/sod";
  FomSettings fom;
  ParameterSettings parameters;
  OfflineConfig offline;
  std::vector<double> test_times;
  std::vector<std::size_t> error_ns{3, 7};

  bool parametric() const { return !parameters.ranges.empty(); }
  nlohmann::json to_json() const;
};

std::vector<std::string> preset_names();
RunConfig preset_config(const std::string& name);

// Layers a JSON document over the preset it names; every problem is reported with its key path.
std::vector<std::string> validate_config(const nlohmann::json& doc);
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

// Overrides the FOM grid from "NXxNY" or "N".
void apply_grid(RunConfig& config, const std::string& text);

ProblemSpec make_problem(const RunConfig& config, std::span<const double> physical);
SolverConfig make_solver(const RunConfig& config);
// Equispaced window times; a count of 1 yields the stop time alone.
std::vector<double> window_times(const TimeWindow& window);

struct ParameterSets {
  std::vector<std::vector<double>> train, test;  // physical parts only; one empty vector when non-parametric
};
ParameterSets sample_parameters(const RunConfig& config);

}  // namespace calibra
