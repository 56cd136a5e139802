#include "calibra/study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "calibra/errors.hpp"
#include "calibra/riemann.hpp"

namespace calibra {

std::vector<StudyStrategy> order_strategies() {
  return {{"T2B", true, 1, false},
          {"T2B10", true, 10, false},
          {"B2T", false, 1, false},
          {"B2T10", false, 10, false},
          {"Fixed", true, 1, true}};
}

StudyInput sod_study_input(std::vector<ScalarField> snapshots, std::vector<double> times, const SodStates& states,
                           double x0) {
  if (snapshots.size() != times.size()) throw ShapeMismatch("study input: snapshot and time counts differ");
  const Primitive left{states.rhoL, 0.0, 0.0, states.pL};
  const Primitive right{states.rhoR, 0.0, 0.0, states.pR};
  StudyInput in;
  in.snapshots = std::move(snapshots);
  in.times = std::move(times);
  for (double t : in.times) {
    const auto f = sod_features(left, right, x0, t);
    in.exact.emplace_back(f.begin(), f.end());
  }
  return in;
}

const StrategyCurve& StudyReport::curve(const std::string& name, const std::string& measure) const {
  for (const auto& c : curves) {
    if (c.name == name && c.measure == measure) return c;
  }
  throw Error("study report has no curve " + name + "/" + measure);
}

nlohmann::json StudyReport::to_json() const {
  nlohmann::json j;
  for (const auto& c : curves) {
    j["curves"].push_back({{"name", c.name}, {"measure", c.measure}, {"time", c.times}, {"error", c.errors}});
  }
  for (const auto& m : maps) {
    j["maps"].push_back(
        {{"measure", m.measure}, {"reference_time", m.reference_times}, {"time", m.times}, {"error", m.errors}});
  }
  return j;
}

void StudyReport::write_csv(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out.precision(17);
    return out;
  };
  for (const auto& c : curves) {
    auto out = open(dir / ("strategy_" + c.name + "_" + c.measure + ".csv"));
    out << "time,calibration_error\n";
    for (std::size_t i = 0; i < c.times.size(); ++i) out << c.times[i] << ',' << c.errors[i] << '\n';
  }
  for (const auto& m : maps) {
    auto out = open(dir / ("heatmap_" + m.measure + ".csv"));
    out << "reference_time,time,calibration_error\n";
    for (std::size_t r = 0; r < m.reference_times.size(); ++r) {
      for (std::size_t i = 0; i < m.times.size(); ++i) {
        out << m.reference_times[r] << ',' << m.times[i] << ',' << m.errors[r][i] << '\n';
      }
    }
  }
}

namespace {

ControlGrid study_control(const ScalarField& f, const std::vector<double>& interior) {
  const Box& box = f.grid().box();
  std::vector<double> xs{box.lo[0]};
  xs.insert(xs.end(), interior.begin(), interior.end());
  xs.push_back(box.hi[0]);
  return ControlGrid(box, xs);
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s;
}

void check_input(const StudyInput& in) {
  if (in.snapshots.empty()) throw ShapeMismatch("study needs snapshots");
  if (in.snapshots.size() != in.times.size() || in.exact.size() != in.times.size()) {
    throw ShapeMismatch("study input: inconsistent lengths");
  }
  if (in.snapshots.front().grid().dim() != 1) throw ShapeMismatch("order study is one-dimensional");
}

double measure_error(const std::string& measure, const StudyInput& in, std::size_t row, const ControlGrid& cg,
                     const std::vector<double>& theta, const ScalarField& reference) {
  if (measure == "characteristics") return l1_distance(theta, in.exact[row]);
  const TransformMap map = build_map(cg, cg.unpack(theta));
  return calibration_error_projection(calibrated_snapshot(in.snapshots[row], map), reference);
}

void check_measure(const std::string& measure) {
  if (measure != "characteristics" && measure != "projection") throw Error("unknown study measure " + measure);
}

}  // namespace

SampleResult calibrate_single(const ScalarField& rho, const ScalarField& reference, const ControlGrid& cg,
                              std::span<const double> guess, const CalibrationConfig& config) {
  CalibrationProblem problem{{rho}, ParameterTable(std::vector<std::vector<double>>{{0.0}}), cg};
  SweepPlan plan;
  plan.order = {0};
  const std::vector<double> start(guess.begin(), guess.end());
  plan.initial_guess = [start](std::size_t, std::size_t, const CalibrationResult&) { return start; };
  CalibrationConfig local = config;
  local.delta = 0.0;
  const ControlGrid gapped = [&] {
    ControlGrid g = cg;
    g.set_gap_fraction(config.gap_fraction);
    return g;
  }();
  const ResidualFactory residual = [&](std::size_t, const Neighbor*) -> Objective {
    return [&](std::span<const double> theta) {
      return residual_self_similar(rho, theta, reference, gapped, nullptr, local);
    };
  };
  return run_sweep(problem, plan, residual, local).samples.front();
}

StrategyCurve run_strategy(const StudyInput& in, const StudyStrategy& strategy, const std::string& measure,
                           const StudyOptions& options) {
  check_input(in);
  check_measure(measure);
  if (strategy.stride < 1) throw ConfigError("strategy stride must be >= 1");
  const std::size_t n = in.times.size();
  const std::size_t ref = strategy.reference_final ? n - 1 : 0;
  const ScalarField& reference = in.snapshots[ref];
  const ControlGrid cg =
      study_control(reference, measure == "characteristics" ? in.exact[ref] : options.equispaced);

  std::vector<std::vector<double>> raw;
  for (double t : in.times) raw.push_back({t});
  CalibrationProblem problem{in.snapshots, ParameterTable(raw), cg};

  SweepPlan plan;
  for (std::size_t k = 0; k < n; k += static_cast<std::size_t>(strategy.stride)) {
    plan.order.push_back(strategy.reference_final ? n - 1 - k : k);
  }
  const std::vector<double> start = cg.reference_theta();
  const auto order = plan.order;
  const bool fixed = strategy.fixed_guess;
  plan.initial_guess = [start, order, fixed](std::size_t, std::size_t step, const CalibrationResult& sofar) {
    if (step == 0) return start;
    return sofar.samples[fixed ? order.front() : order[step - 1]].theta;
  };
  ControlGrid gapped = cg;
  gapped.set_gap_fraction(options.calibration.gap_fraction);
  const ResidualFactory residual = [&](std::size_t row, const Neighbor* nb) -> Objective {
    const std::optional<Neighbor> owned = nb ? std::optional<Neighbor>(*nb) : std::nullopt;
    return [&, row, owned](std::span<const double> theta) {
      return residual_self_similar(in.snapshots[row], theta, reference, gapped, owned ? &*owned : nullptr,
                                   options.calibration);
    };
  };
  const CalibrationResult result = run_sweep(problem, plan, residual, options.calibration);

  StrategyCurve curve{strategy.name, measure, {}, {}};
  auto rows = plan.order;
  std::sort(rows.begin(), rows.end());
  for (std::size_t row : rows) {
    curve.times.push_back(in.times[row]);
    curve.errors.push_back(measure_error(measure, in, row, gapped, result.samples[row].theta, reference));
  }
  return curve;
}

HeatMap run_heat_map(const StudyInput& in, const std::string& measure, const StudyOptions& options) {
  check_input(in);
  check_measure(measure);
  const std::size_t n = in.times.size();
  const std::size_t refs = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(options.heat_references, 1)));
  const auto stride = static_cast<std::size_t>(std::max(options.heat_stride, 1));
  HeatMap map;
  map.measure = measure;
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < n; i += stride) {
    cols.push_back(i);
    map.times.push_back(in.times[i]);
  }
  for (std::size_t r = 0; r < refs; ++r) {
    const std::size_t ref = refs == 1 ? n - 1 : (r * (n - 1)) / (refs - 1);
    map.reference_times.push_back(in.times[ref]);
    const ScalarField& reference = in.snapshots[ref];
    ControlGrid cg = study_control(reference, measure == "characteristics" ? in.exact[ref] : options.equispaced);
    cg.set_gap_fraction(options.calibration.gap_fraction);
    const auto start = cg.reference_theta();
    std::vector<double> row;
    for (std::size_t i : cols) {
      const SampleResult s = calibrate_single(in.snapshots[i], reference, cg, start, options.calibration);
      row.push_back(measure_error(measure, in, i, cg, s.theta, reference));
    }
    map.errors.push_back(std::move(row));
  }
  return map;
}

StudyReport run_order_study(const StudyInput& input, const std::vector<StudyStrategy>& strategies,
                            const StudyOptions& options) {
  StudyReport report;
  for (const std::string measure : {"characteristics", "projection"}) {
    for (const auto& s : strategies) report.curves.push_back(run_strategy(input, s, measure, options));
    if (options.heat_map) report.maps.push_back(run_heat_map(input, measure, options));
  }
  return report;
}

}  // namespace calibra
