#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibra/control_grid.hpp"
#include "json.hpp"

namespace calibra {

enum class Activation { Tanh, Softplus, Identity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct MlpConfig {
  int layers = 4;
  int width = 16;
  Activation output = Activation::Identity;
  int max_epochs = 10000;
  double loss_tol = 1e-5;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

// Affine per-dimension map into the training range: scaled = (raw - offset) / scale.
struct Scaler {
  std::vector<double> offset, scale;

  static Scaler min_max(const Eigen::MatrixXd& rows);
  // Keeps zero fixed so positive targets stay positive after scaling.
  static Scaler positive(const Eigen::MatrixXd& rows);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& rows) const;
};

class Mlp {
 public:
  Mlp() = default;
  // sizes = {inputs, hidden..., outputs}; weights drawn uniformly in +-1/sqrt(fan_in).
  Mlp(std::vector<int> sizes, Activation hidden, Activation output, std::uint64_t seed);
  Mlp(int inputs, int outputs, const MlpConfig& config);

  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> p);

  // Columns are samples, in scaled units.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;
  // Mean-squared-error gradient, flattened like parameters().
  std::vector<double> gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double* loss_out = nullptr) const;

  // Raw (unscaled) single-sample prediction.
  std::vector<double> predict(std::span<const double> input) const;

  Scaler input_scaler, output_scaler;
  bool trained = false;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<int> sizes_;
  Activation hidden_ = Activation::Tanh;
  Activation output_ = Activation::Identity;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

struct TrainReport {
  std::vector<double> loss_history;
  int epochs = 0;
  double final_loss = 0.0;
  bool reached_tolerance = false;
};

// Rows of `inputs`/`targets` are samples in raw units; fits the scalers, then runs full-batch Adam.
TrainReport train_adam(Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                       const MlpConfig& config);

std::vector<double> encode_differences(const ControlGrid& cg, std::span<const double> w);
std::vector<double> decode_differences(const ControlGrid& cg, std::span<const double> v);

// Maps parameters to control points; collapses to a constant when every optimum coincides.
struct CalibrationPredictor {
  ControlGrid control;
  std::optional<std::vector<double>> constant_theta;
  Mlp net;
  TrainReport report;

  static CalibrationPredictor fit(const ControlGrid& cg, const Eigen::MatrixXd& mu,
                                  const std::vector<std::vector<double>>& thetas, const MlpConfig& config);
  std::vector<double> predict(std::span<const double> mu) const;

  nlohmann::json to_json() const;
  static CalibrationPredictor from_json(const nlohmann::json& j);
};

std::vector<double> predict_calibration(const CalibrationPredictor& p, std::span<const double> mu);
std::vector<double> predict_coefficients(const Mlp& net, std::span<const double> mu);

}  // namespace calibra
