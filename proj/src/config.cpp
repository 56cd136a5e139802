#include "calibra/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "calibra/errors.hpp"

namespace calibra {

using json = nlohmann::json;

namespace {

std::vector<std::string> canonical_parameters(const std::string& problem) {
  if (problem == "sod") return {"rhoL", "pL", "rhoR", "pR"};
  if (problem == "dmr") return {"beta"};
  return {};
}

RunConfig sod_preset() {
  RunConfig c;
  c.preset = "sod";
  c.output = "runs/sod";
  c.fom.problem = "sod";
  c.fom.cells = {1500};
  c.fom.final_time = 0.2;
  c.offline.control = {6};
  c.offline.calibration_window = {0.01, 0.16, 25};
  c.offline.reduction_window = {0.01, 0.16, 25};
  c.test_times = {0.04, 0.07, 0.1, 0.12, 0.15};
  c.error_ns = {3, 7};
  return c;
}

RunConfig sod_param_preset() {
  RunConfig c = sod_preset();
  c.preset = "sod-param";
  c.output = "runs/sod-param";
  c.parameters.ranges = {{"rhoL", 0.7, 1.3}, {"pL", 0.7, 1.3}, {"rhoR", 0.1, 0.15}, {"pR", 0.05, 0.15}};
  c.parameters.train = 16;
  c.parameters.test = 2;
  c.offline.mode = "quasi";
  c.offline.calibration.few = 10;
  c.offline.calibration.few_pod = 3;
  c.offline.components = {"rho"};
  c.test_times = {0.04, 0.1, 0.15};
  c.error_ns = {4, 7};
  return c;
}

RunConfig dmr_preset() {
  RunConfig c;
  c.preset = "dmr";
  c.output = "runs/dmr";
  c.fom.problem = "dmr";
  c.fom.cells = {120, 30};
  c.fom.final_time = 0.2;
  c.offline.control = {7, 6};
  c.offline.calibration.delta = 1e-2;
  c.offline.calibration.alpha = 1e-4;
  c.offline.calibration.det_floor = 1e-3;
  c.offline.calibration_window = {0.02, 0.2, 37};
  c.offline.reduction_window = {0.02, 0.2, 37};
  c.offline.pod = {0.0, 30};
  c.offline.components = {"rho"};
  c.test_times = {0.0225, 0.0575, 0.0925, 0.1275, 0.1625};
  c.error_ns = {2, 5, 12, 30};
  return c;
}

RunConfig dmr_param_preset() {
  RunConfig c = dmr_preset();
  c.preset = "dmr-param";
  c.output = "runs/dmr-param";
  c.fom.cells = {80, 20};
  c.parameters.ranges = {{"beta", 0.1, 0.675}};
  c.parameters.train = 16;
  c.parameters.test_points = {{0.225}, {0.675}};
  c.offline.calibration.delta = 1e-1;
  c.offline.calibration_window = {0.02, 0.2, 10};
  c.offline.reduction_window = {0.02, 0.2, 10};
  c.offline.pod = {1e-4, 7};
  c.test_times = {0.096, 0.148, 0.2};
  c.error_ns = {2, 6};
  return c;
}

RunConfig triple_preset() {
  RunConfig c;
  c.preset = "triple";
  c.output = "runs/triple";
  c.fom.problem = "triple";
  c.fom.cells = {70, 30};
  c.fom.final_time = 0.25;
  c.offline.control = {7, 6};
  c.offline.calibration.delta = 1e-2;
  c.offline.calibration.alpha = 1e-4;
  c.offline.calibration.det_floor = 1e-3;
  c.offline.calibration_window = {0.025, 0.25, 10};
  c.offline.reduction_window = {0.025, 0.25, 10};
  c.offline.pod = {0.0, 10};
  c.offline.components = {"rho"};
  c.test_times = {0.0625, 0.1275, 0.2125};
  c.error_ns = {3, 7};
  return c;
}

json window_json(const TimeWindow& w) { return w.to_json(); }

json net_json(const MlpConfig& c) {
  return {{"layers", c.layers},         {"width", c.width},       {"output", to_string(c.output)},
          {"max_epochs", c.max_epochs}, {"loss_tol", c.loss_tol}, {"learning_rate", c.learning_rate}};
}

// Walks a JSON document against the known schema, collecting problems by key path.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
      errors_.push_back((path.empty() ? std::string("config") : path) + ": expected an object");
      return false;
    }
    for (const auto& [k, v] : j.items()) {
      const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; });
      if (!known) errors_.push_back(join(path, k) + ": unknown key");
    }
    return true;
  }

  template <class T>
  void read(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(join(path, key) + ": wrong type");
    }
  }

  void window(const json& j, const std::string& path, const char* key, TimeWindow& w) {
    if (!j.contains(key)) return;
    const std::string p = join(path, key);
    const json& sub = j.at(key);
    if (!object(sub, p, {"start", "stop", "count"})) return;
    read(sub, p, "start", w.start);
    read(sub, p, "stop", w.stop);
    read(sub, p, "count", w.count);
  }

  void net(const json& j, const char* key, MlpConfig& c) {
    if (!j.contains(key)) return;
    const json& sub = j.at(key);
    if (!object(sub, key, {"layers", "width", "output", "max_epochs", "loss_tol", "learning_rate"})) return;
    read(sub, key, "layers", c.layers);
    read(sub, key, "width", c.width);
    read(sub, key, "max_epochs", c.max_epochs);
    read(sub, key, "loss_tol", c.loss_tol);
    read(sub, key, "learning_rate", c.learning_rate);
    std::string act;
    read(sub, key, "output", act);
    if (!act.empty()) {
      try {
        c.output = activation_from_string(act);
      } catch (const ConfigError&) {
        errors_.push_back(join(key, "output") + ": unknown activation '" + act + "'");
      }
    }
  }

  void fail(const std::string& path, const std::string& what) { errors_.push_back(path + ": " + what); }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::vector<std::string>& errors_;
};

void read_document(const json& doc, RunConfig& c, Reader& r) {
  if (!r.object(doc, "", {"preset", "seed", "output", "fom", "parameters", "calibration", "reduction",
                          "calibration_net", "coefficient_net", "errors"}))
    return;
  r.read(doc, "", "seed", c.seed);
  r.read(doc, "", "output", c.output);

  if (doc.contains("fom") && r.object(doc["fom"], "fom", {"problem", "cells", "final_time", "cfl", "reconstruction",
                                                           "rhoL", "pL", "rhoR", "pR", "beta"})) {
    const json& f = doc["fom"];
    r.read(f, "fom", "problem", c.fom.problem);
    if (f.contains("cells") && f["cells"].is_number_integer())
      c.fom.cells = {f["cells"].get<int>()};
    else
      r.read(f, "fom", "cells", c.fom.cells);
    r.read(f, "fom", "final_time", c.fom.final_time);
    r.read(f, "fom", "cfl", c.fom.cfl);
    r.read(f, "fom", "reconstruction", c.fom.reconstruction);
    r.read(f, "fom", "rhoL", c.fom.sod.rhoL);
    r.read(f, "fom", "pL", c.fom.sod.pL);
    r.read(f, "fom", "rhoR", c.fom.sod.rhoR);
    r.read(f, "fom", "pR", c.fom.sod.pR);
    r.read(f, "fom", "beta", c.fom.beta);
  }

  if (doc.contains("parameters") &&
      r.object(doc["parameters"], "parameters", {"ranges", "train", "test", "test_points"})) {
    const json& p = doc["parameters"];
    r.read(p, "parameters", "train", c.parameters.train);
    r.read(p, "parameters", "test", c.parameters.test);
    r.read(p, "parameters", "test_points", c.parameters.test_points);
    if (p.contains("ranges")) {
      const json& rg = p["ranges"];
      if (!rg.is_object()) {
        r.fail("parameters.ranges", "expected an object of [lo, hi] pairs");
      } else {
        const auto names = canonical_parameters(c.fom.problem);
        c.parameters.ranges.clear();
        for (const auto& [k, v] : rg.items()) {
          if (std::find(names.begin(), names.end(), k) == names.end()) {
            r.fail("parameters.ranges." + k, "not a parameter of problem '" + c.fom.problem + "'");
            continue;
          }
          if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            r.fail("parameters.ranges." + k, "expected [lo, hi]");
            continue;
          }
          c.parameters.ranges.push_back({k, v[0].get<double>(), v[1].get<double>()});
        }
        std::sort(c.parameters.ranges.begin(), c.parameters.ranges.end(), [&](const auto& a, const auto& b) {
          return std::find(names.begin(), names.end(), a.name) < std::find(names.begin(), names.end(), b.name);
        });
      }
    }
  }

  if (doc.contains("calibration") &&
      r.object(doc["calibration"], "calibration", {"mode", "control", "refpoints", "delta", "alpha", "max_iter", "gap",
                                                   "det_floor", "few", "few_pod", "window", "identity"})) {
    const json& k = doc["calibration"];
    auto& cal = c.offline.calibration;
    r.read(k, "calibration", "mode", c.offline.mode);
    r.read(k, "calibration", "control", c.offline.control);
    r.read(k, "calibration", "refpoints", c.offline.refpoints);
    r.read(k, "calibration", "delta", cal.delta);
    r.read(k, "calibration", "alpha", cal.alpha);
    r.read(k, "calibration", "max_iter", cal.max_iter);
    r.read(k, "calibration", "gap", cal.gap_fraction);
    r.read(k, "calibration", "det_floor", cal.det_floor);
    r.read(k, "calibration", "few", cal.few);
    r.read(k, "calibration", "few_pod", cal.few_pod);
    r.read(k, "calibration", "identity", c.offline.identity_calibration);
    r.window(k, "calibration", "window", c.offline.calibration_window);
  }

  if (doc.contains("reduction") &&
      r.object(doc["reduction"], "reduction", {"tol", "cap", "window", "components"})) {
    const json& k = doc["reduction"];
    r.read(k, "reduction", "tol", c.offline.pod.tol);
    r.read(k, "reduction", "cap", c.offline.pod.cap);
    r.read(k, "reduction", "components", c.offline.components);
    r.window(k, "reduction", "window", c.offline.reduction_window);
  }

  r.net(doc, "calibration_net", c.offline.calibration_net);
  r.net(doc, "coefficient_net", c.offline.coefficient_net);

  if (doc.contains("errors") && r.object(doc["errors"], "errors", {"times", "N"})) {
    r.read(doc["errors"], "errors", "times", c.test_times);
    r.read(doc["errors"], "errors", "N", c.error_ns);
  }
}

void check_ranges(const RunConfig& c, Reader& r) {
  const auto& f = c.fom;
  if (f.problem != "sod" && f.problem != "dmr" && f.problem != "triple") {
    r.fail("fom.problem", "must be sod, dmr or triple");
    return;
  }
  const std::size_t dim = f.problem == "sod" ? 1 : 2;
  if (f.cells.size() != dim) r.fail("fom.cells", "needs " + std::to_string(dim) + " entries");
  for (int n : f.cells) {
    if (n < 5) r.fail("fom.cells", "every count must be >= 5");
  }
  if (!(f.final_time > 0.0)) r.fail("fom.final_time", "must be > 0");
  if (!(f.cfl > 0.0 && f.cfl <= 1.0)) r.fail("fom.cfl", "must lie in (0, 1]");
  if (f.reconstruction != "weno5" && f.reconstruction != "first-order")
    r.fail("fom.reconstruction", "must be weno5 or first-order");
  for (double v : {f.sod.rhoL, f.sod.pL, f.sod.rhoR, f.sod.pR}) {
    if (!(v > 0.0)) {
      r.fail("fom", "Sod states must be positive");
      break;
    }
  }

  const auto names = canonical_parameters(f.problem);
  if (c.parametric()) {
    if (c.parameters.ranges.size() != names.size())
      r.fail("parameters.ranges", "must give a range for every parameter of '" + f.problem + "'");
    for (const auto& pr : c.parameters.ranges) {
      if (!(pr.lo <= pr.hi)) r.fail("parameters.ranges." + pr.name, "lo must not exceed hi");
    }
    if (c.parameters.train < 1) r.fail("parameters.train", "must be >= 1");
    if (c.parameters.test < 0) r.fail("parameters.test", "must be >= 0");
    for (const auto& p : c.parameters.test_points) {
      if (p.size() != names.size()) r.fail("parameters.test_points", "each point needs " + std::to_string(names.size()) + " values");
    }
  }

  const auto& o = c.offline;
  const auto& k = o.calibration;
  if (o.mode != "self" && o.mode != "quasi") r.fail("calibration.mode", "must be self or quasi");
  if (o.control.size() != dim) r.fail("calibration.control", "needs one count per axis");
  for (int n : o.control) {
    if (n < 2) r.fail("calibration.control", "counts must be >= 2");
  }
  if (!o.refpoints.empty() && (dim != 1 || o.control.empty() || static_cast<int>(o.refpoints.size()) + 2 != o.control[0]))
    r.fail("calibration.refpoints", "1D only, one entry per interior control point");
  if (!(k.delta >= 0.0)) r.fail("calibration.delta", "must be >= 0");
  if (!(k.alpha >= 0.0)) r.fail("calibration.alpha", "must be >= 0");
  if (k.max_iter < 1) r.fail("calibration.max_iter", "must be >= 1");
  if (!(k.gap_fraction > 0.0 && k.gap_fraction < 0.5)) r.fail("calibration.gap", "must lie in (0, 0.5)");
  if (!(k.det_floor >= 0.0)) r.fail("calibration.det_floor", "must be >= 0");
  if (k.few < 1) r.fail("calibration.few", "must be >= 1");
  if (k.few_pod < 1) r.fail("calibration.few_pod", "must be >= 1");

  const auto window = [&](const TimeWindow& w, const std::string& path) {
    if (!(w.start >= 0.0 && w.start <= w.stop)) r.fail(path, "needs 0 <= start <= stop");
    if (w.count < 1) r.fail(path + ".count", "must be >= 1");
    if (w.stop > f.final_time + 1e-12) r.fail(path + ".stop", "exceeds fom.final_time");
  };
  window(o.calibration_window, "calibration.window");
  window(o.reduction_window, "reduction.window");

  if (!(o.pod.tol >= 0.0 && o.pod.tol < 1.0)) r.fail("reduction.tol", "must lie in [0, 1)");
  if (o.pod.cap < 1) r.fail("reduction.cap", "must be >= 1");
  const auto comps = ConservedField::component_names(static_cast<int>(dim));
  for (const auto& s : o.components) {
    if (std::find(comps.begin(), comps.end(), s) == comps.end()) r.fail("reduction.components", "unknown component '" + s + "'");
  }

  const auto net = [&](const MlpConfig& n, const std::string& path) {
    if (n.layers < 1) r.fail(path + ".layers", "must be >= 1");
    if (n.width < 1) r.fail(path + ".width", "must be >= 1");
    if (n.max_epochs < 1) r.fail(path + ".max_epochs", "must be >= 1");
    if (!(n.loss_tol >= 0.0)) r.fail(path + ".loss_tol", "must be >= 0");
    if (!(n.learning_rate > 0.0)) r.fail(path + ".learning_rate", "must be > 0");
  };
  net(o.calibration_net, "calibration_net");
  net(o.coefficient_net, "coefficient_net");

  if (c.test_times.empty()) r.fail("errors.times", "must not be empty");
  for (double t : c.test_times) {
    if (!(t >= 0.0 && t <= f.final_time + 1e-12)) r.fail("errors.times", "every time must lie in [0, fom.final_time]");
  }
  if (c.error_ns.empty()) r.fail("errors.N", "must not be empty");
  for (std::size_t n : c.error_ns) {
    if (n < 1) r.fail("errors.N", "every N must be >= 1");
  }
}

RunConfig build(const json& doc, std::vector<std::string>& errors) {
  Reader r(errors);
  std::string preset = "sod";
  if (doc.is_object() && doc.contains("preset")) {
    if (!doc["preset"].is_string()) {
      errors.push_back("preset: wrong type");
    } else {
      preset = doc["preset"].get<std::string>();
    }
  }
  RunConfig c;
  const auto names = preset_names();
  if (preset == "custom") {
    c = sod_preset();
    c.preset = "custom";
    c.output = "runs/custom";
  } else if (std::find(names.begin(), names.end(), preset) != names.end()) {
    c = preset_config(preset);
  } else {
    errors.push_back("preset: unknown preset '" + preset + "'");
    return c;
  }
  read_document(doc, c, r);
  if (errors.empty()) check_ranges(c, r);
  return c;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  json ranges = json::object();
  for (const auto& r : parameters.ranges) ranges[r.name] = {r.lo, r.hi};
  const auto& k = offline.calibration;
  json j{{"preset", preset},
         {"seed", seed},
         {"output", output},
         {"fom",
          {{"problem", fom.problem},
           {"cells", fom.cells},
           {"final_time", fom.final_time},
           {"cfl", fom.cfl},
           {"reconstruction", fom.reconstruction},
           {"rhoL", fom.sod.rhoL},
           {"pL", fom.sod.pL},
           {"rhoR", fom.sod.rhoR},
           {"pR", fom.sod.pR},
           {"beta", fom.beta}}},
         {"parameters",
          {{"ranges", ranges}, {"train", parameters.train}, {"test", parameters.test},
           {"test_points", parameters.test_points}}},
         {"calibration",
          {{"mode", offline.mode},
           {"control", offline.control},
           {"refpoints", offline.refpoints},
           {"delta", k.delta},
           {"alpha", k.alpha},
           {"max_iter", k.max_iter},
           {"gap", k.gap_fraction},
           {"det_floor", k.det_floor},
           {"few", k.few},
           {"few_pod", k.few_pod},
           {"identity", offline.identity_calibration},
           {"window", window_json(offline.calibration_window)}}},
         {"reduction",
          {{"tol", offline.pod.tol},
           {"cap", offline.pod.cap},
           {"components", offline.components},
           {"window", window_json(offline.reduction_window)}}},
         {"calibration_net", net_json(offline.calibration_net)},
         {"coefficient_net", net_json(offline.coefficient_net)},
         {"errors", {{"times", test_times}, {"N", error_ns}}}};
  return j;
}

std::vector<std::string> preset_names() { return {"sod", "sod-param", "dmr", "dmr-param", "triple"}; }

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "sod") c = sod_preset();
  else if (name == "sod-param") c = sod_param_preset();
  else if (name == "dmr") c = dmr_preset();
  else if (name == "dmr-param") c = dmr_param_preset();
  else if (name == "triple") c = triple_preset();
  else throw ConfigError("preset: unknown preset '" + name + "'");
  return c;
}

std::vector<std::string> validate_config(const nlohmann::json& doc) {
  std::vector<std::string> errors;
  build(doc, errors);
  return errors;
}

RunConfig parse_config(const nlohmann::json& doc) {
  std::vector<std::string> errors;
  RunConfig c = build(doc, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  c.offline.calibration.seed = c.seed;
  c.offline.calibration_net.seed = c.seed;
  c.offline.coefficient_net.seed = c.seed;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

void apply_grid(RunConfig& config, const std::string& text) {
  std::vector<int> cells;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      cells.push_back(n);
    } catch (const std::logic_error&) {
      throw ConfigError("grid: cannot parse '" + text + "'");
    }
  }
  const std::size_t dim = config.fom.problem == "sod" ? 1 : 2;
  if (cells.size() != dim) throw ConfigError("grid: problem '" + config.fom.problem + "' needs " + std::to_string(dim) + " counts");
  for (int n : cells) {
    if (n < 5) throw ConfigError("grid: every count must be >= 5");
  }
  config.fom.cells = cells;
}

ProblemSpec make_problem(const RunConfig& config, std::span<const double> physical) {
  const auto& f = config.fom;
  const bool param = config.parametric();
  if (param && physical.size() != config.parameters.ranges.size())
    throw ConfigError("parameter vector length does not match parameters.ranges");
  if (f.problem == "sod") {
    SodStates s = f.sod;
    if (param) {
      s.rhoL = physical[0];
      s.pL = physical[1];
      s.rhoR = physical[2];
      s.pR = physical[3];
    }
    return sod_problem(s, f.cells.at(0), param);
  }
  if (f.problem == "dmr") return dmr_problem(param ? physical[0] : f.beta, f.cells.at(0), f.cells.at(1), param);
  if (f.problem == "triple") return triple_point_problem(f.cells.at(0), f.cells.at(1));
  throw ConfigError("fom.problem: unknown problem '" + f.problem + "'");
}

SolverConfig make_solver(const RunConfig& config) {
  SolverConfig s;
  s.cfl = config.fom.cfl;
  s.reconstruction = config.fom.reconstruction == "first-order" ? Reconstruction::FirstOrder : Reconstruction::Weno5;
  s.final_time = config.fom.final_time;
  return s;
}

std::vector<double> window_times(const TimeWindow& window) {
  if (window.count < 1) throw ConfigError("window count must be >= 1 to generate times");
  if (window.count == 1) return {window.stop};
  std::vector<double> t;
  for (int k = 0; k < window.count; ++k)
    t.push_back(window.start + (window.stop - window.start) * k / (window.count - 1));
  return t;
}

ParameterSets sample_parameters(const RunConfig& config) {
  ParameterSets s;
  if (!config.parametric()) {
    s.train = {{}};
    s.test = {{}};
    return s;
  }
  std::mt19937_64 rng(config.seed);
  const auto draw = [&] {
    std::vector<double> mu;
    for (const auto& r : config.parameters.ranges) mu.push_back(std::uniform_real_distribution<double>(r.lo, r.hi)(rng));
    return mu;
  };
  for (int i = 0; i < config.parameters.train; ++i) s.train.push_back(draw());
  if (!config.parameters.test_points.empty()) {
    s.test = config.parameters.test_points;
  } else {
    for (int i = 0; i < config.parameters.test; ++i) s.test.push_back(draw());
  }
  return s;
}

}  // namespace calibra
