#include "calibra/mlp.hpp"

#include <cmath>
#include <random>

#include "calibra/errors.hpp"

namespace calibra {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void activate(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Tanh:
      z = z.array().tanh();
      break;
    case Activation::Softplus:
      z = z.unaryExpr([](double v) { return softplus(v); });
      break;
    case Activation::Identity:
      break;
  }
}

// Derivative expressed through the pre-activation z.
Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Tanh:
      return 1.0 - z.array().tanh().square();
    case Activation::Softplus:
      return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::Identity:
      break;
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "softplus") return Activation::Softplus;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Softplus:
      return "softplus";
    case Activation::Identity:
      break;
  }
  return "identity";
}

void MlpConfig::validate() const {
  if (layers < 1) throw ConfigError("layers must be at least 1");
  if (width < 1) throw ConfigError("width must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (loss_tol < 0.0) throw ConfigError("loss_tol must be non-negative");
}

Scaler Scaler::min_max(const Eigen::MatrixXd& rows) {
  Scaler s;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double lo = rows.col(c).minCoeff(), hi = rows.col(c).maxCoeff();
    s.offset.push_back(lo);
    s.scale.push_back(hi > lo ? hi - lo : 1.0);
  }
  return s;
}

Scaler Scaler::positive(const Eigen::MatrixXd& rows) {
  Scaler s;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double hi = rows.col(c).cwiseAbs().maxCoeff();
    s.offset.push_back(0.0);
    s.scale.push_back(hi > 0.0 ? hi : 1.0);
  }
  return s;
}

Eigen::MatrixXd Scaler::forward(const Eigen::MatrixXd& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != scale.size()) throw ShapeMismatch("scaler width mismatch");
  Eigen::MatrixXd out = rows;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) out.col(c) = (rows.col(c).array() - offset[c]) / scale[c];
  return out;
}

Eigen::MatrixXd Scaler::inverse(const Eigen::MatrixXd& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != scale.size()) throw ShapeMismatch("scaler width mismatch");
  Eigen::MatrixXd out = rows;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) out.col(c) = rows.col(c).array() * scale[c] + offset[c];
  return out;
}

Mlp::Mlp(std::vector<int> sizes, Activation hidden, Activation output, std::uint64_t seed)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) throw ConfigError("a network needs input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw ConfigError("layer sizes must be positive");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(sizes_[l + 1], sizes_[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
    Eigen::VectorXd b(sizes_[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
  input_scaler.offset.assign(sizes_.front(), 0.0);
  input_scaler.scale.assign(sizes_.front(), 1.0);
  output_scaler.offset.assign(sizes_.back(), 0.0);
  output_scaler.scale.assign(sizes_.back(), 1.0);
}

Mlp::Mlp(int inputs, int outputs, const MlpConfig& config)
    : Mlp(
          [&] {
            config.validate();
            std::vector<int> s{inputs};
            for (int l = 0; l < config.layers; ++l) s.push_back(config.width);
            s.push_back(outputs);
            return s;
          }(),
          Activation::Tanh, config.output, config.seed) {}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

std::vector<double> Mlp::parameters() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    p.insert(p.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
    p.insert(p.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
  }
  return p;
}

void Mlp::set_parameters(std::span<const double> p) {
  if (p.size() != parameter_count()) throw ShapeMismatch("parameter vector length mismatch");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::copy_n(p.begin() + k, weights_[l].size(), weights_[l].data());
    k += weights_[l].size();
    std::copy_n(p.begin() + k, biases_[l].size(), biases_[l].data());
    k += biases_[l].size();
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != inputs()) throw ShapeMismatch("network input has the wrong width");
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
    activate(l + 1 == weights_.size() ? output_ : hidden_, z);
    a = std::move(z);
  }
  return a;
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
  const Eigen::MatrixXd r = forward(x) - y;
  return r.squaredNorm() / static_cast<double>(r.size());
}

std::vector<double> Mlp::gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double* loss_out) const {
  if (x.cols() == 0) throw ShapeMismatch("empty batch");
  if (y.rows() != outputs() || y.cols() != x.cols()) throw ShapeMismatch("targets do not match the batch");
  const std::size_t layers = weights_.size();
  std::vector<Eigen::MatrixXd> pre(layers), post(layers + 1);
  post[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    pre[l] = (weights_[l] * post[l]).colwise() + biases_[l];
    post[l + 1] = pre[l];
    activate(l + 1 == layers ? output_ : hidden_, post[l + 1]);
  }
  const Eigen::MatrixXd r = post[layers] - y;
  const double count = static_cast<double>(r.size());
  if (loss_out) *loss_out = r.squaredNorm() / count;
  Eigen::MatrixXd delta = (2.0 / count) * r.cwiseProduct(activation_slope(output_, pre[layers - 1]));
  std::vector<Eigen::MatrixXd> gw(layers);
  std::vector<Eigen::VectorXd> gb(layers);
  for (std::size_t l = layers; l-- > 0;) {
    gw[l] = delta * post[l].transpose();
    gb[l] = delta.rowwise().sum();
    if (l > 0) delta = (weights_[l].transpose() * delta).cwiseProduct(activation_slope(hidden_, pre[l - 1]));
  }
  std::vector<double> g;
  g.reserve(parameter_count());
  for (std::size_t l = 0; l < layers; ++l) {
    g.insert(g.end(), gw[l].data(), gw[l].data() + gw[l].size());
    g.insert(g.end(), gb[l].data(), gb[l].data() + gb[l].size());
  }
  return g;
}

std::vector<double> Mlp::predict(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != inputs()) throw ShapeMismatch("prediction input has the wrong width");
  Eigen::MatrixXd row(1, inputs());
  for (int i = 0; i < inputs(); ++i) row(0, i) = input[i];
  const Eigen::MatrixXd x = input_scaler.forward(row).transpose();
  const Eigen::MatrixXd y = output_scaler.inverse(forward(x).transpose());
  return {y.data(), y.data() + y.size()};
}

nlohmann::json Mlp::to_json() const {
  return {{"sizes", sizes_},
          {"hidden", to_string(hidden_)},
          {"output", to_string(output_)},
          {"parameters", parameters()},
          {"input_offset", input_scaler.offset},
          {"input_scale", input_scaler.scale},
          {"output_offset", output_scaler.offset},
          {"output_scale", output_scaler.scale},
          {"trained", trained}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp net(j.at("sizes").get<std::vector<int>>(), activation_from_string(j.at("hidden").get<std::string>()),
          activation_from_string(j.at("output").get<std::string>()), 0);
  net.set_parameters(j.at("parameters").get<std::vector<double>>());
  net.input_scaler = {j.at("input_offset").get<std::vector<double>>(), j.at("input_scale").get<std::vector<double>>()};
  net.output_scaler = {j.at("output_offset").get<std::vector<double>>(),
                       j.at("output_scale").get<std::vector<double>>()};
  net.trained = j.at("trained").get<bool>();
  return net;
}

TrainReport train_adam(Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                       const MlpConfig& config) {
  config.validate();
  if (inputs.rows() != targets.rows()) throw ShapeMismatch("inputs and targets differ in sample count");
  if (inputs.rows() == 0) throw ShapeMismatch("training set is empty");
  if (inputs.cols() != net.inputs() || targets.cols() != net.outputs())
    throw ShapeMismatch("training data widths do not match the network");
  net.input_scaler = Scaler::min_max(inputs);
  net.output_scaler = config.output == Activation::Softplus ? Scaler::positive(targets) : Scaler::min_max(targets);
  const Eigen::MatrixXd x = net.input_scaler.forward(inputs).transpose();
  const Eigen::MatrixXd y = net.output_scaler.forward(targets).transpose();

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> p = net.parameters();
  std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0);
  TrainReport report;
  double b1 = 1.0, b2 = 1.0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    double loss = 0.0;
    const auto g = net.gradient(x, y, &loss);
    report.loss_history.push_back(loss);
    if (!std::isfinite(loss))
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + " after " +
                             std::to_string(report.loss_history.size()) + " recorded losses");
    if (loss < config.loss_tol) {
      report.reached_tolerance = true;
      break;
    }
    b1 *= beta1;
    b2 *= beta2;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      p[k] -= config.learning_rate * (m[k] / (1.0 - b1)) / (std::sqrt(v[k] / (1.0 - b2)) + eps);
    }
    net.set_parameters(p);
  }
  report.epochs = static_cast<int>(report.loss_history.size());
  report.final_loss = net.loss(x, y);
  if (report.final_loss < config.loss_tol) report.reached_tolerance = true;
  net.trained = true;
  return report;
}

std::vector<double> encode_differences(const ControlGrid& cg, std::span<const double> w) {
  const auto theta = cg.pack(w);
  std::vector<double> v(theta.size());
  for (const auto& ch : cg.chains()) {
    double prev = ch.lower;
    for (int q : ch.vars) {
      v[q] = theta[q] - prev;
      if (v[q] < 0.0) throw InvalidControlPoints("control points out of order: negative difference");
      prev = theta[q];
    }
  }
  return v;
}

std::vector<double> decode_differences(const ControlGrid& cg, std::span<const double> v) {
  if (static_cast<int>(v.size()) != cg.free_count()) throw ShapeMismatch("difference vector has the wrong length");
  std::vector<double> theta(v.size());
  for (const auto& ch : cg.chains()) {
    const double gap = cg.gap(ch.axis);
    double acc = ch.lower;
    for (int q : ch.vars) {
      acc += v[q];
      theta[q] = acc;
    }
    // Monotone clipping: push up to respect the lower anchor, then down under the upper one.
    double prev = ch.lower;
    for (int q : ch.vars) {
      theta[q] = std::max(theta[q], prev + gap);
      prev = theta[q];
    }
    double next = ch.upper;
    for (auto it = ch.vars.rbegin(); it != ch.vars.rend(); ++it) {
      theta[*it] = std::min(theta[*it], next - gap);
      next = theta[*it];
    }
  }
  return cg.unpack(theta);
}

CalibrationPredictor CalibrationPredictor::fit(const ControlGrid& cg, const Eigen::MatrixXd& mu,
                                               const std::vector<std::vector<double>>& thetas,
                                               const MlpConfig& config) {
  if (static_cast<std::size_t>(mu.rows()) != thetas.size()) throw ShapeMismatch("one optimum per parameter needed");
  CalibrationPredictor p;
  p.control = cg;
  bool constant = true;
  for (const auto& t : thetas) constant = constant && t == thetas.front();
  if (constant) {
    p.constant_theta = thetas.front();
    return p;
  }
  Eigen::MatrixXd targets(thetas.size(), cg.free_count());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const auto v = encode_differences(cg, cg.unpack(thetas[i]));
    for (int q = 0; q < cg.free_count(); ++q) targets(i, q) = v[q];
  }
  MlpConfig c = config;
  c.output = Activation::Softplus;
  p.net = Mlp(static_cast<int>(mu.cols()), cg.free_count(), c);
  p.report = train_adam(p.net, mu, targets, c);
  return p;
}

std::vector<double> CalibrationPredictor::predict(std::span<const double> mu) const {
  if (constant_theta) return control.unpack(*constant_theta);
  if (!net.trained) throw Error("calibration network is untrained");
  auto v = net.predict(mu);
  for (auto& x : v) x = std::max(x, 0.0);
  return decode_differences(control, v);
}

nlohmann::json CalibrationPredictor::to_json() const {
  nlohmann::json j{{"control", control.to_json()}};
  if (constant_theta)
    j["constant_theta"] = *constant_theta;
  else
    j["net"] = net.to_json();
  j["loss_history_tail"] = report.loss_history.empty() ? 0.0 : report.loss_history.back();
  j["epochs"] = report.epochs;
  j["final_loss"] = report.final_loss;
  return j;
}

CalibrationPredictor CalibrationPredictor::from_json(const nlohmann::json& j) {
  CalibrationPredictor p;
  p.control = ControlGrid::from_json(j.at("control"));
  if (j.contains("constant_theta"))
    p.constant_theta = j.at("constant_theta").get<std::vector<double>>();
  else
    p.net = Mlp::from_json(j.at("net"));
  p.report.epochs = j.value("epochs", 0);
  p.report.final_loss = j.value("final_loss", 0.0);
  return p;
}

std::vector<double> predict_calibration(const CalibrationPredictor& p, std::span<const double> mu) {
  return p.predict(mu);
}

std::vector<double> predict_coefficients(const Mlp& net, std::span<const double> mu) {
  if (!net.trained) throw Error("coefficient network is untrained");
  return net.predict(mu);
}

}  // namespace calibra
