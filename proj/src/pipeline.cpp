#include "calibra/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "calibra/errors.hpp"

namespace calibra {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json TimeWindow::to_json() const { return {{"start", start}, {"stop", stop}, {"count", count}}; }

TimeWindow TimeWindow::from_json(const json& j) {
  TimeWindow w;
  w.start = j.at("start").get<double>();
  w.stop = j.at("stop").get<double>();
  w.count = j.value("count", 0);
  return w;
}

std::vector<std::size_t> select_rows(const FieldArchive& archive, const TimeWindow& window) {
  constexpr double tol = 1e-9;
  std::vector<double> targets;
  if (window.count == 1) {
    targets.push_back(window.stop);
  } else if (window.count > 1) {
    for (int k = 0; k < window.count; ++k) {
      targets.push_back(window.start + (window.stop - window.start) * k / (window.count - 1));
    }
  }
  std::vector<std::size_t> out;
  for (const auto& row : archive.rows()) {
    const double t = row.mu.back();
    bool keep;
    if (targets.empty()) {
      keep = t >= window.start - tol && t <= window.stop + tol;
    } else {
      keep = std::any_of(targets.begin(), targets.end(), [&](double s) { return std::abs(s - t) <= tol; });
    }
    if (keep) out.push_back(row.index);
  }
  return out;
}

void OfflineConfig::validate() const {
  if (mode != "self" && mode != "quasi") throw ConfigError("calibration.mode must be self or quasi");
  calibration.validate();
  if (control.empty() || control.size() > 2) throw ConfigError("calibration.control needs one or two counts");
  for (int c : control) {
    if (c < 2) throw ConfigError("calibration.control counts must be >= 2");
  }
  for (const auto* w : {&calibration_window, &reduction_window}) {
    if (!(w->start <= w->stop)) throw ConfigError("window start must not exceed stop");
    if (w->count < 0) throw ConfigError("window count must be >= 0");
  }
  if (!(pod.tol >= 0.0)) throw ConfigError("reduction.tol must be >= 0");
  if (pod.cap < 1) throw ConfigError("reduction.cap must be >= 1");
  calibration_net.validate();
  coefficient_net.validate();
}

namespace {

json net_config_json(const MlpConfig& c) {
  return {{"layers", c.layers},         {"width", c.width},         {"output", to_string(c.output)},
          {"max_epochs", c.max_epochs}, {"loss_tol", c.loss_tol}, {"learning_rate", c.learning_rate},
          {"seed", c.seed}};
}

json grid_json(const CartesianGrid& g) {
  return {{"dim", g.dim()},
          {"lo", {g.box().lo[0], g.box().lo[1]}},
          {"hi", {g.box().hi[0], g.box().hi[1]}},
          {"cells", {g.cells(0), g.cells(1)}}};
}

CartesianGrid grid_from_json(const json& j) {
  Box b;
  b.dim = j.at("dim").get<int>();
  b.lo = j.at("lo").get<std::array<double, 2>>();
  b.hi = j.at("hi").get<std::array<double, 2>>();
  return CartesianGrid(b, j.at("cells").get<std::array<int, 2>>());
}

Eigen::MatrixXd as_rows(const std::vector<std::vector<double>>& v) {
  Eigen::MatrixXd m(v.size(), v.empty() ? 0 : v.front().size());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t k = 0; k < v[i].size(); ++k) m(i, k) = v[i][k];
  return m;
}

template <class F>
auto staged(Stage stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  os << j.dump(1);
  if (!os) throw IoError("cannot write " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("cannot read " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

}  // namespace

nlohmann::json OfflineConfig::to_json() const {
  json j{{"mode", mode},
         {"delta", calibration.delta},
         {"alpha", calibration.alpha},
         {"max_iter", calibration.max_iter},
         {"gap", calibration.gap_fraction},
         {"det_floor", calibration.det_floor},
         {"few", calibration.few},
         {"few_pod", calibration.few_pod},
         {"seed", calibration.seed},
         {"control", control},
         {"refpoints", refpoints},
         {"calibration_window", calibration_window.to_json()},
         {"reduction_window", reduction_window.to_json()},
         {"pod", {{"tol", pod.tol}, {"cap", pod.cap}}},
         {"calibration_net", net_config_json(calibration_net)},
         {"coefficient_net", net_config_json(coefficient_net)},
         {"components", components},
         {"identity_calibration", identity_calibration}};
  j["reference_row"] = reference_row ? json(*reference_row) : json(nullptr);
  return j;
}

ControlGrid make_control(const Box& domain, const std::vector<int>& counts, const std::vector<double>& refpoints) {
  if (static_cast<int>(counts.size()) != domain.dim) throw ConfigError("control: one count per axis required");
  if (!refpoints.empty()) {
    if (domain.dim != 1) throw ConfigError("refpoints: only supported in one dimension");
    if (static_cast<int>(refpoints.size()) + 2 != counts[0]) {
      throw ConfigError("refpoints: expected control count minus two interior points");
    }
    std::vector<double> xs{domain.lo[0]};
    xs.insert(xs.end(), refpoints.begin(), refpoints.end());
    xs.push_back(domain.hi[0]);
    return ControlGrid(domain, xs);
  }
  return ControlGrid::uniform(domain, counts[0], domain.dim == 2 ? counts[1] : 1);
}

int OfflineArtifacts::component_index(const std::string& name) const {
  const auto it = std::find(components.begin(), components.end(), name);
  if (it == components.end()) throw Error("artifacts hold no component " + name);
  return static_cast<int>(it - components.begin());
}

void OfflineArtifacts::save(const fs::path& dir) const {
  fs::create_directories(dir);
  json nets{{"ale", json::array()}, {"eulerian", json::array()}};
  for (const auto& n : ale_nets) nets["ale"].push_back(n.to_json());
  for (const auto& n : eulerian_nets) nets["eulerian"].push_back(n.to_json());
  write_json(dir / "artifacts.json", {{"format", "calibra-offline-1"},
                                       {"grid", grid_json(grid)},
                                       {"parameters", parameter_names},
                                       {"components", components},
                                       {"training_mu", training_mu},
                                       {"det_floor", det_floor},
                                       {"manifest", manifest}});
  write_json(dir / "calibration.json", calibration.to_json());
  write_json(dir / "predictor.json", predictor.to_json());
  write_json(dir / "nets.json", nets);
  for (std::size_t c = 0; c < components.size(); ++c) {
    fs::remove_all(dir / "ale" / components[c]);
    fs::remove_all(dir / "eulerian" / components[c]);
    save_basis(ale[c], dir / "ale" / components[c]);
    save_basis(eulerian[c], dir / "eulerian" / components[c]);
  }
}

OfflineArtifacts OfflineArtifacts::load(const fs::path& dir) {
  OfflineArtifacts a;
  const json top = read_json(dir / "artifacts.json");
  try {
    a.grid = grid_from_json(top.at("grid"));
    a.parameter_names = top.at("parameters").get<std::vector<std::string>>();
    a.components = top.at("components").get<std::vector<std::string>>();
    a.training_mu = top.at("training_mu").get<std::vector<std::vector<double>>>();
    a.det_floor = top.at("det_floor").get<double>();
    a.manifest = top.at("manifest");
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed artifacts.json: ") + e.what());
  }
  a.calibration = CalibrationResult::from_json(read_json(dir / "calibration.json"));
  a.predictor = CalibrationPredictor::from_json(read_json(dir / "predictor.json"));
  const json nets = read_json(dir / "nets.json");
  for (const auto& n : nets.at("ale")) a.ale_nets.push_back(Mlp::from_json(n));
  for (const auto& n : nets.at("eulerian")) a.eulerian_nets.push_back(Mlp::from_json(n));
  for (const auto& c : a.components) {
    a.ale.push_back(load_basis(dir / "ale" / c));
    a.eulerian.push_back(load_basis(dir / "eulerian" / c));
  }
  if (a.ale_nets.size() != a.components.size() || a.eulerian_nets.size() != a.components.size()) {
    throw IoError("nets.json does not match the component list");
  }
  return a;
}

TransformMap predicted_map(const CalibrationPredictor& predictor, std::span<const double> mu, const CartesianGrid& grid,
                           double det_floor) {
  const ControlGrid& cg = predictor.control;
  const std::vector<double> w = predictor.predict(mu);
  TransformMap map(cg, w);
  if (map.is_identity() || map.screen(grid).min_det >= det_floor) return map;
  const std::vector<double>& ref = cg.reference();
  auto blend = [&](double s) {
    std::vector<double> b(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) b[k] = ref[k] + s * (w[k] - ref[k]);
    return b;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (TransformMap(cg, blend(mid)).screen(grid).min_det >= det_floor) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo > 0.0 ? TransformMap(cg, blend(lo)) : TransformMap::identity(cg);
}

namespace {

Mlp fit_coefficients(const PodBasis& basis, const std::vector<ScalarField>& fields,
                     const std::vector<std::vector<double>>& mu, const MlpConfig& config, TrainReport& report) {
  std::vector<std::vector<double>> coeffs;
  for (const auto& f : fields) coeffs.push_back(project(basis, f));
  MlpConfig local = config;
  local.output = Activation::Identity;
  Mlp net(static_cast<int>(mu.front().size()), static_cast<int>(basis.size()), local);
  report = train_adam(net, as_rows(mu), as_rows(coeffs), local);
  return net;
}

json report_json(const TrainReport& r) {
  return {{"epochs", r.epochs}, {"final_loss", r.final_loss}, {"reached_tolerance", r.reached_tolerance}};
}

}  // namespace

CalibrationResult calibrate_archive(const FieldArchive& archive, const OfflineConfig& config) {
  staged(Stage::Config, [&] {
    config.validate();
    return 0;
  });
  const std::string density = archive.components().front();
  const auto cal_rows = select_rows(archive, config.calibration_window);
  if (cal_rows.empty()) throw StageError(Stage::Config, "calibration window selects no archive rows");
  std::vector<std::vector<double>> all_mu(archive.size());
  for (const auto& r : archive.rows()) all_mu[r.index] = r.mu;
  return staged(Stage::Calibration, [&] {
    CalibrationProblem problem;
    std::vector<std::vector<double>> mu;
    for (std::size_t r : cal_rows) {
      problem.snapshots.push_back(archive.read_component(r, density, archive.grid()));
      mu.push_back(all_mu[r]);
    }
    problem.params = ParameterTable(mu);
    problem.control = make_control(archive.grid().box(), config.control, config.refpoints);
    if (config.identity_calibration) {
      CalibrationResult res;
      res.control = problem.control;
      res.control.set_gap_fraction(config.calibration.gap_fraction);
      res.mode = "identity";
      res.mu = mu;
      res.order = backward_order(problem.params);
      for (std::size_t i = 0; i < mu.size(); ++i) {
        SampleResult s;
        s.theta = res.control.reference_theta();
        s.visited = s.converged = true;
        res.samples.push_back(s);
      }
      return res;
    }
    if (config.mode == "quasi") return calibrate_quasi(problem, config.calibration);
    if (config.reference_row) {
      const ScalarField ref = archive.read_component(*config.reference_row, density, archive.grid());
      CalibrationResult res = calibrate_self_similar(problem, ref, config.calibration);
      const auto it = std::find(cal_rows.begin(), cal_rows.end(), *config.reference_row);
      if (it != cal_rows.end()) res.reference_index = static_cast<std::size_t>(it - cal_rows.begin());
      return res;
    }
    return calibrate_self_similar(problem, config.calibration);
    });
}

OfflineArtifacts offline_build(const FieldArchive& archive, const OfflineConfig& config) {
  staged(Stage::Config, [&] {
    config.validate();
    return 0;
  });
  OfflineArtifacts a;
  a.grid = archive.grid();
  a.parameter_names = archive.parameter_names();
  a.det_floor = config.calibration.det_floor > 0.0 ? config.calibration.det_floor : 1e-8;
  a.components = config.components.empty() ? archive.components() : config.components;
  for (const auto& c : a.components) {
    if (std::find(archive.components().begin(), archive.components().end(), c) == archive.components().end()) {
      throw StageError(Stage::Config, "archive has no component " + c);
    }
  }
  const std::string density = archive.components().front();
  const auto cal_rows = select_rows(archive, config.calibration_window);
  const auto red_rows = select_rows(archive, config.reduction_window);
  if (cal_rows.empty()) throw StageError(Stage::Config, "calibration window selects no archive rows");
  if (red_rows.empty()) throw StageError(Stage::Config, "reduction window selects no archive rows");
  std::vector<std::vector<double>> all_mu(archive.size());
  for (const auto& r : archive.rows()) all_mu[r.index] = r.mu;

  a.calibration = calibrate_archive(archive, config);

  // Calibration regression, then pullback of the reduction rows with the predicted maps.
  const ControlGrid& cg = a.calibration.control;
  a.predictor = staged(Stage::Calibration, [&] {
    return CalibrationPredictor::fit(cg, as_rows(a.calibration.mu), a.calibration.thetas(), config.calibration_net);
  });

  const std::size_t nc = a.components.size();
  std::vector<std::vector<ScalarField>> raw(nc), pulled(nc);
  staged(Stage::Reduction, [&] {
    for (std::size_t r : red_rows) {
      a.training_mu.push_back(all_mu[r]);
      const TransformMap map = predicted_map(a.predictor, all_mu[r], archive.grid(), a.det_floor);
      for (std::size_t c = 0; c < nc; ++c) {
        raw[c].push_back(archive.read_component(r, a.components[c], archive.grid()));
        pulled[c].push_back(calibrated_snapshot(raw[c].back(), map));
      }
    }
    return 0;
  });

  json reports = json::array();
  staged(Stage::Reduction, [&] {
    for (std::size_t c = 0; c < nc; ++c) {
      a.ale.push_back(pod_compress(pulled[c], config.pod.tol, config.pod.cap));
      a.eulerian.push_back(pod_compress(raw[c], config.pod.tol, config.pod.cap));
      MlpConfig net = config.coefficient_net;
      net.seed += c;
      TrainReport ra, re;
      a.ale_nets.push_back(fit_coefficients(a.ale[c], pulled[c], a.training_mu, net, ra));
      a.eulerian_nets.push_back(fit_coefficients(a.eulerian[c], raw[c], a.training_mu, net, re));
      reports.push_back({{"component", a.components[c]},
                         {"ale_modes", a.ale[c].size()},
                         {"eulerian_modes", a.eulerian[c].size()},
                         {"ale_net", report_json(ra)},
                         {"eulerian_net", report_json(re)}});
    }
    return 0;
  });

  a.manifest = {{"config", config.to_json()},
                {"calibration_rows", cal_rows},
                {"reduction_rows", red_rows},
                {"calibration_net", report_json(a.predictor.report)},
                {"constant_calibration", a.predictor.constant_theta.has_value()},
                {"components", reports}};
  return a;
}

namespace {

ScalarField push_with(const ScalarField& field, const TransformMap& map, const InverseMap* inverse) {
  if (map.is_identity()) return field;
  const auto pre = inverse->apply(field.grid().centers());
  return ScalarField(field.grid(), interpolate(field, pre));
}

std::vector<double> head(std::vector<double> v, std::size_t n) {
  v.resize(std::min(n, v.size()));
  return v;
}

}  // namespace

ScalarField push_forward(const ScalarField& field, const TransformMap& map) {
  if (map.is_identity()) return field;
  const InverseMap inverse(map, field.grid());
  return push_with(field, map, &inverse);
}

OnlineSolution online_solve(const OfflineArtifacts& artifacts, const std::vector<double>& mu, std::size_t n,
                            const std::string& component) {
  return staged(Stage::Online, [&] {
    if (mu.size() != artifacts.parameter_names.size()) {
      throw ShapeMismatch("online: expected " + std::to_string(artifacts.parameter_names.size()) + " parameters");
    }
    if (n < 1) throw ShapeMismatch("online: N must be >= 1");
    const int c = artifacts.component_index(component);
    OnlineSolution s;
    s.map = predicted_map(artifacts.predictor, mu, artifacts.grid, artifacts.det_floor);
    s.n_ale = std::min(n, artifacts.ale[c].size());
    s.n_eulerian = std::min(n, artifacts.eulerian[c].size());
    s.reference = reconstruct(artifacts.ale[c], head(predict_coefficients(artifacts.ale_nets[c], mu), s.n_ale));
    s.physical = push_forward(s.reference, s.map);
    s.eulerian =
        reconstruct(artifacts.eulerian[c], head(predict_coefficients(artifacts.eulerian_nets[c], mu), s.n_eulerian));
    return s;
  });
}

double relative_error(const ScalarField& truth, const ScalarField& approx) {
  check_same_grid(truth.grid(), approx.grid(), "relative error");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    num += (truth[k] - approx[k]) * (truth[k] - approx[k]);
    den += truth[k] * truth[k];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num * truth.grid().cell_volume());
}

ErrorReport error_report(const OfflineArtifacts& artifacts, const FieldArchive& truth,
                         const std::vector<std::size_t>& rows, const std::vector<std::size_t>& ns,
                         const std::string& component) {
  return staged(Stage::Online, [&] {
    const int c = artifacts.component_index(component);
    if (!(truth.grid() == artifacts.grid)) throw ShapeMismatch("truth archive grid differs from the artifacts");
    std::vector<std::vector<double>> mus(truth.size());
    for (const auto& r : truth.rows()) mus[r.index] = r.mu;
    const PodBasis& ale = artifacts.ale[c];
    const PodBasis& eul = artifacts.eulerian[c];
    ErrorReport report{component, {}};
    for (std::size_t row : rows) {
      if (row >= truth.size()) throw IoError("truth archive has no row " + std::to_string(row));
      const auto& mu = mus[row];
      const ScalarField rho = truth.read_component(row, component, artifacts.grid);
      const TransformMap map = predicted_map(artifacts.predictor, mu, artifacts.grid, artifacts.det_floor);
      std::optional<InverseMap> inverse;
      if (!map.is_identity()) inverse.emplace(map, artifacts.grid);
      const InverseMap* inv = inverse ? &*inverse : nullptr;
      const auto ale_pred = predict_coefficients(artifacts.ale_nets[c], mu);
      const auto eul_pred = predict_coefficients(artifacts.eulerian_nets[c], mu);
      const ScalarField pulled = calibrated_snapshot(rho, map);
      const auto ale_proj = project(ale, pulled);
      const auto eul_proj = project(eul, rho);
      for (std::size_t n : ns) {
        ErrorRow e;
        e.mu = mu;
        e.n = n;
        e.n_ale = std::min(n, ale.size());
        e.n_eulerian = std::min(n, eul.size());
        e.eulerian = relative_error(rho, reconstruct(eul, head(eul_pred, e.n_eulerian)));
        e.eulerian_proj = relative_error(rho, reconstruct(eul, head(eul_proj, e.n_eulerian)));
        e.ale = relative_error(rho, push_with(reconstruct(ale, head(ale_pred, e.n_ale)), map, inv));
        e.ale_proj = relative_error(rho, push_with(reconstruct(ale, head(ale_proj, e.n_ale)), map, inv));
        report.rows.push_back(std::move(e));
      }
    }
    return report;
  });
}

void ErrorReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "t,N,eulerian,ale,eulerian_proj,ale_proj,n_eulerian,n_ale\n";
  for (const auto& r : rows) {
    out << r.mu.back() << ',' << r.n << ',' << r.eulerian << ',' << r.ale << ',' << r.eulerian_proj << ','
        << r.ale_proj << ',' << r.n_eulerian << ',' << r.n_ale << '\n';
  }
}

nlohmann::json ErrorReport::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"mu", r.mu},
                      {"N", r.n},
                      {"n_ale", r.n_ale},
                      {"n_eulerian", r.n_eulerian},
                      {"eulerian", r.eulerian},
                      {"ale", r.ale},
                      {"eulerian_proj", r.eulerian_proj},
                      {"ale_proj", r.ale_proj}});
  }
  return {{"component", component}, {"rows", rows_j}};
}

EigenComparison eigenvalue_comparison(const OfflineArtifacts& artifacts, const std::string& component) {
  const int c = artifacts.component_index(component);
  auto normalized = [](const PodBasis& b) {
    std::vector<double> v = b.eigenvalues;
    const double top = v.empty() ? 0.0 : v.front();
    for (auto& x : v) x = top > 0.0 ? x / top : 0.0;
    return v;
  };
  return {normalized(artifacts.eulerian[c]), normalized(artifacts.ale[c])};
}

void EigenComparison::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "Number,Eul_eig_norm,ALE_eig_norm\n";
  const std::size_t n = std::max(eulerian.size(), ale.size());
  for (std::size_t k = 0; k < n; ++k) {
    out << k + 1 << ',';
    if (k < eulerian.size()) out << eulerian[k];
    out << ',';
    if (k < ale.size()) out << ale[k];
    out << '\n';
  }
}

}  // namespace calibra
