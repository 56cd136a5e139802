#include "calibra/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "calibra/errors.hpp"

namespace calibra {

void CalibrationConfig::validate() const {
  if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(gap_fraction > 0.0 && gap_fraction < 0.5)) throw ConfigError("gap must lie in (0, 0.5)");
  if (!(det_floor >= 0.0)) throw ConfigError("det_floor must be >= 0");
  if (few < 1) throw ConfigError("few must be >= 1");
  if (few_pod < 1) throw ConfigError("few_pod must be >= 1");
}

ParameterTable::ParameterTable(std::vector<std::vector<double>> raw) : raw_(std::move(raw)) {
  if (raw_.empty()) return;
  const std::size_t p = raw_.front().size();
  if (p == 0) throw ShapeMismatch("parameter vectors must include time");
  lo_.assign(p, std::numeric_limits<double>::infinity());
  hi_.assign(p, -std::numeric_limits<double>::infinity());
  for (const auto& mu : raw_) {
    if (mu.size() != p) throw ShapeMismatch("parameter vectors differ in length");
    for (std::size_t k = 0; k < p; ++k) {
      lo_[k] = std::min(lo_[k], mu[k]);
      hi_[k] = std::max(hi_[k], mu[k]);
    }
  }
  auto same_physics = [&](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t k = 0; k + 1 < p; ++k) {
      if (std::abs(a[k] - b[k]) > 1e-12 * std::max(1.0, std::abs(a[k]))) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < raw_.size(); ++i) {
    auto it = std::find_if(chains_.begin(), chains_.end(),
                           [&](const auto& c) { return same_physics(raw_[c.front()], raw_[i]); });
    if (it == chains_.end()) {
      chains_.push_back({i});
    } else {
      it->push_back(i);
    }
  }
  for (auto& c : chains_) {
    std::stable_sort(c.begin(), c.end(), [&](std::size_t a, std::size_t b) { return time(a) < time(b); });
  }
}

std::vector<double> ParameterTable::normalize(std::span<const double> mu) const {
  if (mu.size() != lo_.size()) throw ShapeMismatch("parameter length mismatch");
  std::vector<double> out(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double span = hi_[k] - lo_[k];
    out[k] = span > 0.0 ? (mu[k] - lo_[k]) / span : 0.0;
  }
  return out;
}

std::vector<double> ParameterTable::denormalize(std::span<const double> unit) const {
  if (unit.size() != lo_.size()) throw ShapeMismatch("parameter length mismatch");
  std::vector<double> out(unit.size());
  for (std::size_t k = 0; k < unit.size(); ++k) out[k] = lo_[k] + unit[k] * (hi_[k] - lo_[k]);
  return out;
}

std::vector<double> ParameterTable::normalized(std::size_t i) const { return normalize(raw_.at(i)); }

double ParameterTable::distance(std::size_t i, std::size_t j) const {
  const auto a = normalized(i);
  const auto b = normalized(j);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

std::vector<std::vector<double>> CalibrationResult::thetas() const {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.theta);
  return out;
}

nlohmann::json CalibrationResult::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    rows.push_back({{"mu", mu[i]},
                    {"theta", s.theta},
                    {"residual", s.residual},
                    {"iterations", s.iterations},
                    {"converged", s.converged},
                    {"feasible", s.feasible},
                    {"max_iter_reached", s.max_iter_reached},
                    {"failed", s.failed},
                    {"visited", s.visited},
                    {"message", s.message}});
  }
  nlohmann::json j = {{"format", "calibra-calibration-1"},
                      {"mode", mode},
                      {"control", control.to_json()},
                      {"order", order},
                      {"few", few},
                      {"samples", rows}};
  j["reference_index"] = reference_index ? nlohmann::json(*reference_index) : nlohmann::json(nullptr);
  return j;
}

CalibrationResult CalibrationResult::from_json(const nlohmann::json& j) {
  CalibrationResult r;
  try {
    r.mode = j.at("mode").get<std::string>();
    r.control = ControlGrid::from_json(j.at("control"));
    r.order = j.at("order").get<std::vector<std::size_t>>();
    r.few = j.value("few", std::vector<std::size_t>{});
    if (!j.at("reference_index").is_null()) r.reference_index = j.at("reference_index").get<std::size_t>();
    for (const auto& row : j.at("samples")) {
      r.mu.push_back(row.at("mu").get<std::vector<double>>());
      SampleResult s;
      s.theta = row.at("theta").get<std::vector<double>>();
      s.residual = row.at("residual").get<double>();
      s.iterations = row.at("iterations").get<int>();
      s.converged = row.at("converged").get<bool>();
      s.feasible = row.at("feasible").get<bool>();
      s.max_iter_reached = row.at("max_iter_reached").get<bool>();
      s.failed = row.at("failed").get<bool>();
      s.visited = row.at("visited").get<bool>();
      s.message = row.value("message", std::string{});
      r.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed calibration result: ") + e.what());
  }
  return r;
}

ScalarField calibrated_snapshot(const ScalarField& rho, const TransformMap& map) {
  if (map.is_identity()) return rho;
  const auto pts = map.map_centers(rho.grid());
  return ScalarField(rho.grid(), interpolate(rho, pts));
}

namespace {

// min det - floor; negative when the points are unordered or the map cannot be built.
double map_margin(const ControlGrid& cg, std::span<const double> theta, const CartesianGrid& grid, double det_floor,
                  MapScreen* screen_out = nullptr, TransformMap* map_out = nullptr) {
  for (double v : theta) {
    if (!std::isfinite(v)) return -1.0;
  }
  const auto w = cg.unpack(theta);
  if (!cg.ordered(w)) return -1.0;
  try {
    TransformMap map = build_map(cg, w);
    const MapScreen s = map.screen(grid);
    if (screen_out) *screen_out = s;
    if (map_out) *map_out = std::move(map);
    return std::isfinite(s.min_det) ? s.min_det - det_floor : -1.0;
  } catch (const Error&) {
    return -1.0;
  }
}

bool map_acceptable(const ControlGrid& cg, std::span<const double> theta, const CartesianGrid& grid,
                    double det_floor, MapScreen* screen_out = nullptr, TransformMap* map_out = nullptr) {
  return map_margin(cg, theta, grid, det_floor, screen_out, map_out) >= 0.0;
}

double squared_distance(const ScalarField& a, const ScalarField& b) {
  check_same_grid(a.grid(), b.grid(), "residual");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s * a.grid().cell_volume();
}

}  // namespace

std::optional<MapTerms> pull_back(const ScalarField& rho, const ControlGrid& cg, std::span<const double> theta,
                                  const CalibrationConfig& config) {
  MapScreen screen;
  TransformMap map;
  if (!map_acceptable(cg, theta, rho.grid(), config.det_floor, &screen, &map)) return std::nullopt;
  try {
    MapTerms terms{calibrated_snapshot(rho, map), 0.5 * config.alpha * screen.max_norm};
    return terms;
  } catch (const Error&) {
    return std::nullopt;
  }
}

double smoothness_term(std::span<const double> theta, const Neighbor* neighbor, double delta) {
  if (!neighbor || delta == 0.0) return 0.0;
  if (neighbor->theta.size() != theta.size()) throw ShapeMismatch("neighbour theta length mismatch");
  const double d = std::max(neighbor->distance, 1e-12);
  double s = 0.0;
  for (std::size_t q = 0; q < theta.size(); ++q) {
    const double r = (theta[q] - neighbor->theta[q]) / d;
    s += r * r;
  }
  return 0.5 * delta * s;
}

double residual_self_similar(const ScalarField& rho, std::span<const double> theta, const ScalarField& reference,
                             const ControlGrid& cg, const Neighbor* neighbor, const CalibrationConfig& config) {
  const auto terms = pull_back(rho, cg, theta, config);
  if (!terms) return kRejectedResidual;
  return squared_distance(terms->pulled, reference) + smoothness_term(theta, neighbor, config.delta) +
         terms->jacobian_term;
}

double residual_projection(const ScalarField& rho, std::span<const double> theta, const PodBasis& basis,
                           const ControlGrid& cg, const Neighbor* neighbor, const CalibrationConfig& config) {
  if (basis.size() == 0) throw ShapeMismatch("projection residual needs a nonempty basis");
  const auto terms = pull_back(rho, cg, theta, config);
  if (!terms) return kRejectedResidual;
  return projection_error(basis, terms->pulled, basis.size()) + smoothness_term(theta, neighbor, config.delta) +
         terms->jacobian_term;
}

namespace {

Constraints calibration_constraints(const ControlGrid& cg, const CartesianGrid& grid, double det_floor) {
  Constraints c = Constraints::from_control_grid(cg);
  c.nonlinear_margin = [cg, grid, det_floor](std::span<const double> theta) {
    return map_margin(cg, theta, grid, det_floor);
  };
  return c;
}

std::optional<Neighbor> nearest_visited(const ParameterTable& params, std::size_t row, const CalibrationResult& sofar) {
  std::optional<Neighbor> best;
  for (std::size_t r = 0; r < sofar.samples.size(); ++r) {
    if (r == row || !sofar.samples[r].visited) continue;
    const double d = params.distance(row, r);
    if (!best || d < best->distance) best = Neighbor{sofar.samples[r].theta, d};
  }
  return best;
}

ControlGrid with_gap(const ControlGrid& cg, double fraction) {
  ControlGrid out = cg;
  out.set_gap_fraction(fraction);
  return out;
}

}  // namespace

CalibrationResult run_sweep(const CalibrationProblem& problem, const SweepPlan& plan, const ResidualFactory& residual,
                            const CalibrationConfig& config) {
  config.validate();
  const std::size_t n = problem.snapshots.size();
  if (n == 0) throw ShapeMismatch("calibration needs at least one snapshot");
  if (problem.params.size() != n) throw ShapeMismatch("parameter table and snapshots differ in length");
  const ControlGrid cg = with_gap(problem.control, config.gap_fraction);
  const CartesianGrid& grid = problem.snapshots.front().grid();
  const std::vector<double> reference = cg.reference_theta();

  CalibrationResult result;
  result.control = cg;
  result.order = plan.order;
  result.samples.assign(n, SampleResult{});
  for (std::size_t i = 0; i < n; ++i) result.mu.push_back(problem.params.raw(i));
  for (auto& s : result.samples) s.theta = reference;

  const Constraints constraints = calibration_constraints(cg, grid, config.det_floor);
  MinimizeOptions options;
  options.max_iter = config.max_iter;
  options.penalty = kRejectedResidual;

  for (std::size_t step = 0; step < plan.order.size(); ++step) {
    const std::size_t row = plan.order[step];
    if (row >= n) throw ShapeMismatch("visitation order refers to a missing row");
    std::vector<double> guess = plan.initial_guess(row, step, result);
    const auto neighbor = nearest_visited(problem.params, row, result);
    const Objective objective = residual(row, neighbor ? &*neighbor : nullptr);

    SampleResult& s = result.samples[row];
    const MinimizeResult m = minimize_constrained(objective, guess, constraints, options);
    s.iterations = m.iterations;
    s.converged = m.converged;
    s.max_iter_reached = m.max_iter_reached;
    s.message = m.message;
    s.visited = true;
    if (m.feasible && m.value < kRejectedResidual) {
      s.theta = m.x;
      s.residual = m.value;
      s.feasible = true;
    } else {
      s.failed = true;
      s.feasible = false;
      s.theta = map_acceptable(cg, guess, grid, config.det_floor) && linear_feasible(guess, constraints) ? guess
                                                                                                          : reference;
      s.residual = objective(s.theta);
    }
  }
  return result;
}

std::vector<std::size_t> backward_order(const ParameterTable& params) {
  std::vector<std::size_t> order;
  const auto& chains = params.chains();
  for (auto c = chains.rbegin(); c != chains.rend(); ++c) order.insert(order.end(), c->rbegin(), c->rend());
  return order;
}

SweepPlan chained_plan(const ParameterTable& params, std::vector<double> first_guess, std::vector<std::size_t> order) {
  SweepPlan plan;
  plan.order = order.empty() ? backward_order(params) : std::move(order);
  std::vector<std::size_t> chain_of(params.size(), 0);
  for (std::size_t c = 0; c < params.chains().size(); ++c) {
    for (std::size_t r : params.chains()[c]) chain_of[r] = c;
  }
  const auto visit = plan.order;
  plan.initial_guess = [params, chain_of, visit, first_guess](std::size_t row, std::size_t step,
                                                               const CalibrationResult& sofar) {
    if (step == 0) return first_guess;
    const std::size_t prev = visit[step - 1];
    if (chain_of[prev] == chain_of[row]) return sofar.samples[prev].theta;
    // Chain start: optimum of the nearest already-visited parameter at the same time.
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t k = 0; k < step; ++k) {
      const std::size_t r = visit[k];
      if (std::abs(params.time(r) - params.time(row)) > 1e-12 * std::max(1.0, std::abs(params.time(row)))) continue;
      const double d = params.distance(row, r);
      if (!best || d < best_d) {
        best = r;
        best_d = d;
      }
    }
    return sofar.samples[best.value_or(prev)].theta;
  };
  return plan;
}

std::size_t default_reference(const ParameterTable& params) {
  if (params.size() == 0) throw ShapeMismatch("empty parameter table");
  return params.chains().back().back();
}

CalibrationResult calibrate_self_similar(const CalibrationProblem& problem, const ScalarField& reference,
                                         const CalibrationConfig& config) {
  const ControlGrid cg = with_gap(problem.control, config.gap_fraction);
  const SweepPlan plan = chained_plan(problem.params, cg.reference_theta());
  const ResidualFactory residual = [&](std::size_t row, const Neighbor* nb) -> Objective {
    const std::optional<Neighbor> owned = nb ? std::optional<Neighbor>(*nb) : std::nullopt;
    return [&, row, owned](std::span<const double> theta) {
      return residual_self_similar(problem.snapshots[row], theta, reference, cg, owned ? &*owned : nullptr, config);
    };
  };
  CalibrationResult r = run_sweep(problem, plan, residual, config);
  r.mode = "self";
  return r;
}

CalibrationResult calibrate_self_similar(const CalibrationProblem& problem, const CalibrationConfig& config) {
  const std::size_t ref = default_reference(problem.params);
  CalibrationResult r = calibrate_self_similar(problem, problem.snapshots.at(ref), config);
  r.reference_index = ref;
  return r;
}

std::vector<std::size_t> select_few(std::size_t total, int few, std::uint64_t seed) {
  if (total == 0) return {};
  const std::size_t k = static_cast<std::size_t>(std::max(few, 1));
  if (k >= total) {
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  const double stride = static_cast<double>(total) / static_cast<double>(k);
  const auto whole = static_cast<std::uint64_t>(std::floor(stride));
  const double offset = whole > 1 ? static_cast<double>(seed % whole) : 0.0;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) {
    const auto back = static_cast<std::size_t>(std::floor(offset + static_cast<double>(i) * stride));
    out.push_back(total - 1 - std::min(back, total - 1));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CalibrationResult calibrate_quasi(const CalibrationProblem& problem, const CalibrationConfig& config) {
  config.validate();
  const std::size_t n = problem.snapshots.size();
  if (n == 0) throw ShapeMismatch("calibration needs at least one snapshot");
  const ControlGrid cg = with_gap(problem.control, config.gap_fraction);
  const CartesianGrid& grid = problem.snapshots.front().grid();
  const std::size_t q = static_cast<std::size_t>(cg.free_count());
  const auto few = select_few(n, config.few, config.seed);
  const std::size_t nf = few.size();
  const auto cap = static_cast<std::size_t>(config.few_pod);

  // Stage 1: all few maps at once against a POD recomputed from their own pullbacks.
  auto pulled_few = [&](std::span<const double> stacked, double* jac) -> std::optional<std::vector<ScalarField>> {
    std::vector<ScalarField> out;
    out.reserve(nf);
    for (std::size_t k = 0; k < nf; ++k) {
      auto t = pull_back(problem.snapshots[few[k]], cg, stacked.subspan(k * q, q), config);
      if (!t) return std::nullopt;
      if (jac) *jac += t->jacobian_term;
      out.push_back(std::move(t->pulled));
    }
    return out;
  };
  const Objective joint = [&](std::span<const double> stacked) {
    double jac = 0.0;
    const auto pulled = pulled_few(stacked, &jac);
    if (!pulled) return kRejectedResidual;
    const PodBasis basis = pod_compress(*pulled, 0.0, cap);
    double misfit = 0.0;
    for (const auto& f : *pulled) misfit += projection_error(basis, f, basis.size());
    return misfit + jac;
  };

  Constraints single = calibration_constraints(cg, grid, config.det_floor);
  Constraints stacked = single.replicated(static_cast<int>(nf), static_cast<int>(q));
  stacked.nonlinear_margin = [single, nf, q](std::span<const double> x) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nf; ++k) m = std::min(m, single.nonlinear_margin(x.subspan(k * q, q)));
    return m;
  };
  std::vector<double> x0;
  const auto ref = cg.reference_theta();
  for (std::size_t k = 0; k < nf; ++k) x0.insert(x0.end(), ref.begin(), ref.end());
  MinimizeOptions options;
  options.max_iter = config.max_iter;
  options.penalty = kRejectedResidual;
  const MinimizeResult stage1 = minimize_constrained(joint, x0, stacked, options);
  const std::vector<double> x1 = stage1.feasible && stage1.value < kRejectedResidual ? stage1.x : x0;

  const auto frozen_fields = pulled_few(x1, nullptr);
  if (!frozen_fields) throw Error("quasi calibration: stage-one maps are not admissible");
  const PodBasis frozen = pod_compress(*frozen_fields, 0.0, cap);

  // Stage 2: sequential sweep against the frozen basis.
  const auto order = backward_order(problem.params);
  std::size_t seed_row = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nf; ++k) {
    const double d = problem.params.distance(order.front(), few[k]);
    if (d < best) {
      best = d;
      seed_row = k;
    }
  }
  std::vector<double> first(x1.begin() + static_cast<std::ptrdiff_t>(seed_row * q),
                            x1.begin() + static_cast<std::ptrdiff_t>((seed_row + 1) * q));
  const SweepPlan plan = chained_plan(problem.params, first, order);
  const ResidualFactory residual = [&](std::size_t row, const Neighbor* nb) -> Objective {
    const std::optional<Neighbor> owned = nb ? std::optional<Neighbor>(*nb) : std::nullopt;
    return [&, row, owned](std::span<const double> theta) {
      return residual_projection(problem.snapshots[row], theta, frozen, cg, owned ? &*owned : nullptr, config);
    };
  };
  CalibrationResult r = run_sweep(problem, plan, residual, config);
  r.mode = "quasi";
  r.few = few;
  return r;
}

std::vector<double> calibration_error_characteristics(const CalibrationResult& result,
                                                      const std::vector<std::vector<double>>& exact) {
  if (exact.size() != result.samples.size()) throw ShapeMismatch("exact characteristics: row count mismatch");
  std::vector<double> out;
  out.reserve(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const auto& theta = result.samples[i].theta;
    if (theta.size() != exact[i].size()) throw ShapeMismatch("exact characteristics: coordinate count mismatch");
    double e = 0.0;
    for (std::size_t q = 0; q < theta.size(); ++q) e += std::abs(theta[q] - exact[i][q]);
    out.push_back(e);
  }
  return out;
}

double calibration_error_projection(const ScalarField& calibrated, const ScalarField& reference) {
  check_same_grid(calibrated.grid(), reference.grid(), "projection error");
  const double rr = inner_product(reference, reference);
  if (!(rr > 0.0)) throw Error("projection error: reference field is zero");
  const double c = inner_product(calibrated, reference) / rr;
  double s = 0.0;
  for (std::size_t k = 0; k < calibrated.size(); ++k) {
    const double d = calibrated[k] - c * reference[k];
    s += d * d;
  }
  return s * calibrated.grid().cell_volume();
}

std::vector<double> calibration_error_projection(const CalibrationProblem& problem, const CalibrationResult& result,
                                                 const ScalarField& reference) {
  if (result.samples.size() != problem.snapshots.size()) throw ShapeMismatch("projection error: row count mismatch");
  std::vector<double> out;
  out.reserve(problem.snapshots.size());
  for (std::size_t i = 0; i < problem.snapshots.size(); ++i) {
    const TransformMap map = build_map(result.control, result.control.unpack(result.samples[i].theta));
    out.push_back(calibration_error_projection(calibrated_snapshot(problem.snapshots[i], map), reference));
  }
  return out;
}

}  // namespace calibra
