#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "calibra/calibration.hpp"
#include "calibra/config.hpp"
#include "calibra/errors.hpp"
#include "calibra/fom.hpp"
#include "calibra/pipeline.hpp"
#include "calibra/run.hpp"
#include "calibra/study.hpp"

using namespace calibra;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 2, kFom = 3, kCalibration = 4, kReduction = 5, kOnline = 6 };

int exit_for(Stage s) {
  switch (s) {
    case Stage::Config: return kConfig;
    case Stage::Fom: return kFom;
    case Stage::Calibration: return kCalibration;
    case Stage::Reduction: return kReduction;
    case Stage::Online: return kOnline;
  }
  return 1;
}

struct ConfigFlags {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string grid;
  std::string out;

  void attach(CLI::App* app, bool with_grid = true, bool with_preset = true) {
    if (with_preset) app->add_option("--preset", preset, "Preset name (sod, sod-param, dmr, dmr-param, triple)");
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--seed", seed, "Seed for parameter sampling and network initialisation");
    if (with_grid) app->add_option("--grid", grid, "FOM grid, N or NXxNY");
  }

  json document() const {
    json doc = json::object();
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw ConfigError("cannot open config " + config);
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config " + config + " is not valid JSON: " + e.what());
      }
    }
    if (!preset.empty()) {
      if (doc.is_object() && doc.contains("preset") && doc["preset"] != preset)
        throw ConfigError("--preset " + preset + " disagrees with the config file preset");
      if (doc.is_object()) doc["preset"] = preset;
    }
    if (seed && doc.is_object()) doc["seed"] = *seed;
    return doc;
  }

  RunConfig resolve() const {
    RunConfig c = parse_config(document());
    if (!grid.empty()) apply_grid(c, grid);
    if (!out.empty()) c.output = out;
    return c;
  }
};

std::vector<double> parse_list(const std::string& s);

std::vector<int> parse_counts(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse count list '" + s + "'");
    }
  }
  return v;
}

// Command-line overrides of the calibration settings.
struct CalibrationFlags {
  std::optional<std::string> mode, control, refpoints;
  std::optional<double> delta, alpha, det_floor;
  std::optional<int> few, few_pod, max_iter;

  void attach(CLI::App* app) {
    app->add_option("--mode", mode, "self or quasi");
    app->add_option("--control", control, "Control points per axis, M1 or M1xM2");
    app->add_option("--refpoints", refpoints, "auto or comma-separated interior reference coordinates (1D)");
    app->add_option("--delta", delta, "Smoothness penalty weight");
    app->add_option("--alpha", alpha, "Jacobian penalty weight");
    app->add_option("--det-floor", det_floor, "Lower bound on the map determinant");
    app->add_option("--max-iter", max_iter, "Minimiser iterations per snapshot");
    app->add_option("--few", few, "Snapshots in the joint stage (quasi mode)");
    app->add_option("--fewpod", few_pod, "Modes in the joint stage (quasi mode)");
  }

  void apply(RunConfig& c) const {
    json doc = c.to_json();
    json& k = doc["calibration"];
    if (mode) k["mode"] = *mode;
    if (control) k["control"] = parse_counts(*control);
    if (refpoints) k["refpoints"] = *refpoints == "auto" ? std::vector<double>{} : parse_list(*refpoints);
    if (delta) k["delta"] = *delta;
    if (alpha) k["alpha"] = *alpha;
    if (det_floor) k["det_floor"] = *det_floor;
    if (max_iter) k["max_iter"] = *max_iter;
    if (few) k["few"] = *few;
    if (few_pod) k["few_pod"] = *few_pod;
    c = parse_config(doc);
  }
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse number '" + part + "'");
    }
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_field_csv(const fs::path& path, const OnlineSolution& s) {
  const CartesianGrid& g = s.physical.grid();
  std::ostringstream out;
  out.precision(17);
  out << (g.dim() == 1 ? "x" : "x,y") << ",ale,eulerian,reference\n";
  for (int j = 0; j < (g.dim() == 2 ? g.cells(1) : 1); ++j)
    for (int i = 0; i < g.cells(0); ++i) {
      const std::size_t k = g.index(i, j);
      out << g.center(0, i);
      if (g.dim() == 2) out << ',' << g.center(1, j);
      out << ',' << s.physical[k] << ',' << s.eulerian[k] << ',' << s.reference[k] << '\n';
    }
  write_text(path, out.str());
}

struct FomFlags {
  std::string problem;
  std::optional<double> tf, cfl;
  std::string snapshots = "10";
  std::vector<std::string> params;

  void attach(CLI::App* app) {
    app->add_option("--case", problem, "Single run of sod, dmr or triple instead of a preset");
    app->add_option("--tf", tf, "Final time");
    app->add_option("--cfl", cfl, "CFL number");
    app->add_option("--snapshots", snapshots, "Snapshot count N (equispaced in (0, tf]) or comma-separated times");
    app->add_option("--param", params, "Physical parameter key=value, e.g. beta=0.5236 or rhoL=1.0");
  }
};

// One FOM run of a named case, every snapshot into a single archive.
int cmd_fom_case(const ConfigFlags& flags, const FomFlags& f) {
  if (f.problem != "sod" && f.problem != "dmr" && f.problem != "triple")
    throw ConfigError("--case must be sod, dmr or triple");
  RunConfig c = preset_config(f.problem);
  if (!flags.grid.empty()) apply_grid(c, flags.grid);
  if (f.tf) c.fom.final_time = *f.tf;
  if (f.cfl) c.fom.cfl = *f.cfl;
  for (const auto& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--param expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(kv.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("--param " + key + ": not a number");
    }
    if (f.problem == "sod" && key == "rhoL") c.fom.sod.rhoL = value;
    else if (f.problem == "sod" && key == "pL") c.fom.sod.pL = value;
    else if (f.problem == "sod" && key == "rhoR") c.fom.sod.rhoR = value;
    else if (f.problem == "sod" && key == "pR") c.fom.sod.pR = value;
    else if (f.problem == "dmr" && key == "beta") c.fom.beta = value;
    else throw ConfigError("--param " + key + ": not a parameter of " + f.problem);
  }
  std::vector<double> times;
  if (f.snapshots.find(',') != std::string::npos || f.snapshots.find('.') != std::string::npos) {
    times = parse_list(f.snapshots);
  } else {
    const auto n = parse_counts(f.snapshots);
    if (n.size() != 1 || n[0] < 1) throw ConfigError("--snapshots needs a positive count or a list of times");
    for (int k = 1; k <= n[0]; ++k) times.push_back(c.fom.final_time * k / n[0]);
  }
  std::sort(times.begin(), times.end());
  SolverConfig solver = make_solver(c);
  solver.snapshot_times = times;
  const bool tagged = !f.params.empty();
  ProblemSpec problem;
  if (f.problem == "sod") problem = sod_problem(c.fom.sod, c.fom.cells.at(0), tagged);
  else if (f.problem == "dmr") problem = dmr_problem(c.fom.beta, c.fom.cells.at(0), c.fom.cells.at(1), tagged);
  else problem = triple_point_problem(c.fom.cells.at(0), c.fom.cells.at(1));
  try {
    solver.validate();
    problem.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = flags.out.empty() ? fs::path("runs") / f.problem / "fom" : fs::path(flags.out);
  fs::remove_all(dir);
  auto names = problem.parameter_names;
  names.push_back("t");
  FieldArchive archive =
      FieldArchive::create(dir, problem.grid, names, ConservedField::component_names(problem.grid.dim()));
  try {
    run_fom(problem, solver, archive);
  } catch (const std::exception& e) {
    throw StageError(Stage::Fom, e.what());
  }
  std::cout << "wrote " << archive.size() << " snapshots to " << dir.string() << '\n';
  return kOk;
}

int cmd_fom(const ConfigFlags& flags, const FomFlags& f) {
  if (!f.problem.empty()) {
    if (!flags.preset.empty() || !flags.config.empty()) throw ConfigError("--case cannot be combined with --preset or --config");
    return cmd_fom_case(flags, f);
  }
  const RunConfig c = flags.resolve();
  const fs::path dir = flags.out.empty() ? fs::path(c.output) / "fom" : fs::path(flags.out);
  FomArchives a = [&] {
    try {
      return run_fom_stage(c, dir);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(Stage::Fom, e.what());
    }
  }();
  std::cout << "wrote " << a.train.size() << " training and " << a.test.size() << " test snapshots to " << dir.string()
            << '\n';
  return kOk;
}

int cmd_calibrate(const ConfigFlags& flags, const CalibrationFlags& k, const std::string& archive_dir) {
  RunConfig c = flags.resolve();
  k.apply(c);
  const FieldArchive archive = FieldArchive::open(archive_dir);
  const CalibrationResult r = calibrate_archive(archive, c.offline);
  const fs::path out = flags.out.empty() ? fs::path(c.output) / "calibration.json" : fs::path(flags.out);
  write_text(out, r.to_json().dump(2) + "\n");
  std::size_t failed = 0;
  for (const auto& s : r.samples) failed += s.failed ? 1 : 0;
  std::cout << "calibrated " << r.samples.size() << " snapshots (" << failed << " failed), wrote " << out.string()
            << '\n';
  return kOk;
}

int cmd_study(const std::string& out, int cells, int count, bool heat, int references) {
  if (cells < 5 || count < 2 || references < 1) throw ConfigError("study: cells >= 5, times >= 2 and references >= 1 required");
  const SodStates states;
  const ProblemSpec p = sod_problem(states, cells);
  SolverConfig sc;
  sc.final_time = 0.16;
  std::vector<double> times;
  for (int k = 0; k < count; ++k) times.push_back(0.01 + 0.15 * k / (count - 1));
  sc.snapshot_times = times;
  std::vector<ScalarField> snaps;
  try {
    integrate(p, sc, [&](double, const ConservedField& f) { snaps.push_back(f.density()); });
  } catch (const std::exception& e) {
    throw StageError(Stage::Fom, e.what());
  }
  StudyOptions o;
  o.heat_map = heat;
  o.heat_references = references;
  StudyReport report;
  try {
    report = run_order_study(sod_study_input(snaps, times, states), order_strategies(), o);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::Calibration, e.what());
  }
  fs::create_directories(out);
  report.write_csv(out);
  write_text(fs::path(out) / "study.json", report.to_json().dump(2) + "\n");
  std::cout << "wrote " << report.curves.size() << " strategy curves and " << report.maps.size() << " heat maps to "
            << out << '\n';
  return kOk;
}

int cmd_offline(const ConfigFlags& flags, const CalibrationFlags& k, const std::string& archive_dir) {
  RunConfig c = flags.resolve();
  k.apply(c);
  const FieldArchive archive = FieldArchive::open(archive_dir);
  const OfflineArtifacts a = offline_build(archive, c.offline);
  const fs::path out = flags.out.empty() ? fs::path(c.output) / "artifacts" : fs::path(flags.out);
  a.save(out);
  std::cout << "artifacts written to " << out.string() << '\n';
  for (std::size_t k = 0; k < a.components.size(); ++k)
    std::cout << "  " << a.components[k] << ": ALE modes " << a.ale[k].size() << ", Eulerian modes "
              << a.eulerian[k].size() << '\n';
  return kOk;
}

int cmd_online(const std::string& dir, const std::string& mu, std::size_t n, const std::string& comp,
               const std::string& out) {
  const OfflineArtifacts a = OfflineArtifacts::load(dir);
  const auto params = parse_list(mu);
  if (params.size() != a.parameter_names.size())
    throw ConfigError("--mu needs " + std::to_string(a.parameter_names.size()) + " values");
  const OnlineSolution s = online_solve(a, params, n, comp);
  write_field_csv(out, s);
  std::cout << "wrote " << out << " (ALE modes " << s.n_ale << ", Eulerian modes " << s.n_eulerian << ")\n";
  return kOk;
}

int cmd_errors(const std::string& dir, const std::string& truth_dir, const std::string& ns, const std::string& comp,
               const std::string& out) {
  const OfflineArtifacts a = OfflineArtifacts::load(dir);
  const FieldArchive truth = FieldArchive::open(truth_dir);
  std::vector<std::size_t> n;
  for (double v : parse_list(ns)) {
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) throw ConfigError("--N entries must be positive integers");
    n.push_back(static_cast<std::size_t>(v));
  }
  std::vector<std::size_t> rows(truth.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const ErrorReport r = error_report(a, truth, rows, n, comp);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  r.write_csv(out);
  std::cout << "wrote " << r.rows.size() << " error rows to " << out << '\n';
  return kOk;
}

int cmd_eigs(const std::string& dir, const std::string& comp, const std::string& out) {
  const OfflineArtifacts a = OfflineArtifacts::load(dir);
  const EigenComparison e = eigenvalue_comparison(a, comp);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  e.write_csv(out);
  std::cout << "wrote " << out << '\n';
  return kOk;
}

int cmd_validate(const ConfigFlags& flags) {
  const auto errors = validate_config(flags.document());
  if (errors.empty()) {
    std::cout << "ok\n";
    return kOk;
  }
  for (const auto& e : errors) std::cerr << e << '\n';
  return kConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calibra: calibrated model order reduction for transport-dominated flows"};
  app.require_subcommand(1);

  ConfigFlags fom_flags, cal_flags, off_flags, run_flags, val_flags;
  FomFlags fom_case;
  CalibrationFlags cal_over, off_over;
  std::string archive_dir, artifacts_dir, truth_dir, mu, ns = "3,7", comp = "rho", out_file;
  std::size_t n = 3;
  int study_cells = 1500, study_times = 100, heat_refs = 10;
  bool no_heat = false;
  std::string study_out = "runs/study";

  auto* fom = app.add_subcommand("fom", "Run the full-order solver and write train/test archives");
  fom_flags.attach(fom);
  fom_case.attach(fom);
  fom->add_option("--out", fom_flags.out, "Archive directory");

  auto* cal = app.add_subcommand("calibrate", "Calibrate the snapshots of an archive");
  cal_flags.attach(cal, false);
  cal_over.attach(cal);
  cal->add_option("--archive", archive_dir, "Training archive")->required();
  cal->add_option("--out", cal_flags.out, "Calibration JSON file");

  auto* study = app.add_subcommand("study", "Sod calibration-order study");
  study->add_option("--cells", study_cells, "Sod grid cells");
  study->add_option("--times", study_times, "Snapshot times in [0.01, 0.16]");
  study->add_option("--heat-references", heat_refs, "Reference times in the heat maps");
  study->add_flag("--no-heat-map", no_heat, "Skip the reference-time heat maps");
  study->add_option("--out", study_out, "Output directory");

  auto* off = app.add_subcommand("offline", "Build calibration, bases and networks from an archive");
  off_flags.attach(off, false);
  off_over.attach(off);
  off->add_option("--archive", archive_dir, "Training archive")->required();
  off->add_option("--out", off_flags.out, "Artifacts directory");

  auto* online = app.add_subcommand("online", "Evaluate the reduced models at one parameter");
  online->add_option("--artifacts", artifacts_dir, "Artifacts directory")->required();
  online->add_option("--mu", mu, "Comma-separated parameter vector, time last")->required();
  online->add_option("--N", n, "Number of modes")->required()->check(CLI::PositiveNumber);
  online->add_option("--component", comp, "Field component");
  online->add_option("--out", out_file, "Field CSV")->required();

  auto* errors = app.add_subcommand("errors", "Relative errors of both reduced models against truth snapshots");
  errors->add_option("--artifacts", artifacts_dir, "Artifacts directory")->required();
  errors->add_option("--truth", truth_dir, "Archive with the truth snapshots")->required();
  errors->add_option("--N", ns, "Comma-separated mode counts");
  errors->add_option("--component", comp, "Field component");
  errors->add_option("--out", out_file, "Error CSV")->required();

  auto* eigs = app.add_subcommand("eigs", "Normalised eigenvalue decay of both bases");
  eigs->add_option("--artifacts", artifacts_dir, "Artifacts directory")->required();
  eigs->add_option("--component", comp, "Field component");
  eigs->add_option("--out", out_file, "Eigenvalue CSV")->required();

  auto* run = app.add_subcommand("run", "Run a preset end to end");
  run->add_option("preset", run_flags.preset, "Preset name")->required();
  run_flags.attach(run, true, false);
  run->add_option("--out", run_flags.out, "Output directory");

  auto* validate = app.add_subcommand("validate", "Check a configuration");
  val_flags.attach(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  Stage fallback = Stage::Config;
  try {
    if (*fom) {
      fallback = Stage::Fom;
      return cmd_fom(fom_flags, fom_case);
    }
    if (*cal) {
      fallback = Stage::Calibration;
      return cmd_calibrate(cal_flags, cal_over, archive_dir);
    }
    if (*study) {
      fallback = Stage::Calibration;
      return cmd_study(study_out, study_cells, study_times, !no_heat, heat_refs);
    }
    if (*off) {
      fallback = Stage::Reduction;
      return cmd_offline(off_flags, off_over, archive_dir);
    }
    if (*online) {
      fallback = Stage::Online;
      return cmd_online(artifacts_dir, mu, n, comp, out_file);
    }
    if (*errors) {
      fallback = Stage::Online;
      return cmd_errors(artifacts_dir, truth_dir, ns, comp, out_file);
    }
    if (*eigs) {
      fallback = Stage::Reduction;
      return cmd_eigs(artifacts_dir, comp, out_file);
    }
    if (*run) {
      fallback = Stage::Reduction;
      const RunConfig c = run_flags.resolve();
      run_preset(c, std::cout);
      return kOk;
    }
    if (*validate) return cmd_validate(val_flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_for(e.stage);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_for(fallback);
  }
  return kOk;
}
