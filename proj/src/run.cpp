#include "calibra/run.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "calibra/errors.hpp"
#include "calibra/fom.hpp"
#include "calibra/pipeline.hpp"

namespace calibra {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTimeTol = 1e-12;

bool contains_time(const std::vector<double>& times, double t) {
  return std::any_of(times.begin(), times.end(), [&](double s) { return std::abs(s - t) <= kTimeTol; });
}

struct FomJob {
  std::vector<double> physical;
  std::vector<double> train_times, test_times;
  std::vector<std::pair<double, ConservedField>> train, test;
  std::exception_ptr error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

unsigned thread_cap() {
  if (const char* env = std::getenv("CALIBRA_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

FomArchives run_fom_stage(const RunConfig& config, const fs::path& dir) {
  const ParameterSets sets = sample_parameters(config);
  std::set<double> train_set;
  for (double t : window_times(config.offline.calibration_window)) train_set.insert(t);
  for (double t : window_times(config.offline.reduction_window)) train_set.insert(t);
  const std::vector<double> train_times(train_set.begin(), train_set.end());

  std::vector<FomJob> jobs;
  const auto job_for = [&](const std::vector<double>& mu) -> FomJob& {
    for (auto& j : jobs) {
      if (j.physical == mu) return j;
    }
    jobs.push_back({mu, {}, {}, {}, {}, {}});
    return jobs.back();
  };
  for (const auto& mu : sets.train) job_for(mu).train_times = train_times;
  for (const auto& mu : sets.test) job_for(mu).test_times = config.test_times;

  const SolverConfig base = make_solver(config);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      FomJob& job = jobs[k];
      try {
        const ProblemSpec problem = make_problem(config, job.physical);
        SolverConfig solver = base;
        std::set<double> all(job.train_times.begin(), job.train_times.end());
        all.insert(job.test_times.begin(), job.test_times.end());
        solver.snapshot_times.assign(all.begin(), all.end());
        solver.final_time = std::max(base.final_time, solver.snapshot_times.back());
        integrate(problem, solver, [&](double t, const ConservedField& f) {
          if (contains_time(job.train_times, t)) job.train.emplace_back(t, f);
          if (contains_time(job.test_times, t)) job.test.emplace_back(t, f);
        });
      } catch (...) {
        job.error = std::current_exception();
      }
    }
  };
  const unsigned n = std::min<unsigned>(thread_cap(), static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& j : jobs) {
    if (j.error) std::rethrow_exception(j.error);
  }

  const ProblemSpec probe = make_problem(config, jobs.front().physical);
  auto names = probe.parameter_names;
  names.push_back("t");
  const auto comps = ConservedField::component_names(probe.grid.dim());
  fs::remove_all(dir / "train");
  fs::remove_all(dir / "test");
  FomArchives out{FieldArchive::create(dir / "train", probe.grid, names, comps),
                  FieldArchive::create(dir / "test", probe.grid, names, comps)};
  const auto put = [](FieldArchive& archive, const std::vector<double>& physical, double t, const ConservedField& f) {
    std::vector<double> mu = physical;
    mu.push_back(t);
    archive.write(mu, f);
  };
  for (const auto& j : jobs) {
    for (const auto& [t, f] : j.train) put(out.train, j.physical, t, f);
  }
  for (const auto& j : jobs) {
    for (const auto& [t, f] : j.test) put(out.test, j.physical, t, f);
  }
  return out;
}

std::size_t modes_for_tolerance(const std::vector<double>& eigenvalues, double tol) {
  double total = 0.0;
  for (double l : eigenvalues) total += std::max(l, 0.0);
  if (total <= 0.0) return eigenvalues.empty() ? 0 : 1;
  double kept = 0.0;
  for (std::size_t n = 0; n < eigenvalues.size(); ++n) {
    kept += std::max(eigenvalues[n], 0.0);
    if (1.0 - kept / total < tol) return n + 1;
  }
  return eigenvalues.size();
}

nlohmann::json run_preset(const RunConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = config.output;
  fs::create_directories(out);
  json timings;

  log << "[fom] " << config.preset << " on " << make_problem(config, sample_parameters(config).train.front()).grid.describe()
      << '\n';
  auto t = std::chrono::steady_clock::now();
  FomArchives archives = [&] {
    try {
      return run_fom_stage(config, out / "fom");
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(Stage::Fom, std::string("fom: ") + e.what());
    }
  }();
  timings["fom"] = seconds_since(t);
  log << "[fom] " << archives.train.size() << " training rows, " << archives.test.size() << " test rows\n";

  t = std::chrono::steady_clock::now();
  OfflineArtifacts artifacts = offline_build(archives.train, config.offline);
  artifacts.save(out / "artifacts");
  timings["offline"] = seconds_since(t);
  log << "[offline] done in " << timings["offline"].get<double>() << " s\n";

  t = std::chrono::steady_clock::now();
  std::vector<std::size_t> rows(archives.test.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  json errors = json::object(), bases = json::object(), eigen = json::object();
  const double tol = config.offline.pod.tol > 0.0 ? config.offline.pod.tol : 1e-4;
  try {
    for (std::size_t c = 0; c < artifacts.components.size(); ++c) {
      const std::string& comp = artifacts.components[c];
      const ErrorReport report = error_report(artifacts, archives.test, rows, config.error_ns, comp);
      report.write_csv((out / ("errors_" + comp + ".csv")).string());
      errors[comp] = report.to_json();
      const EigenComparison ev = eigenvalue_comparison(artifacts, comp);
      ev.write_csv((out / ("eigs_" + comp + ".csv")).string());
      const std::size_t keep = std::min<std::size_t>(20, std::max(ev.ale.size(), ev.eulerian.size()));
      eigen[comp] = {{"ale", std::vector<double>(ev.ale.begin(), ev.ale.begin() + std::min(keep, ev.ale.size()))},
                     {"eulerian", std::vector<double>(ev.eulerian.begin(),
                                                      ev.eulerian.begin() + std::min(keep, ev.eulerian.size()))}};
      bases[comp] = {{"ale", artifacts.ale[c].size()},
                     {"eulerian", artifacts.eulerian[c].size()},
                     {"tolerance", tol},
                     {"ale_at_tolerance", modes_for_tolerance(artifacts.ale[c].eigenvalues, tol)},
                     {"eulerian_at_tolerance", modes_for_tolerance(artifacts.eulerian[c].eigenvalues, tol)}};
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::Online, std::string("errors: ") + e.what());
  }
  timings["errors"] = seconds_since(t);

  std::size_t failed = 0;
  double worst = 0.0, mean = 0.0;
  for (const auto& s : artifacts.calibration.samples) {
    failed += s.failed ? 1 : 0;
    worst = std::max(worst, s.residual);
    mean += s.residual;
  }
  if (!artifacts.calibration.samples.empty()) mean /= static_cast<double>(artifacts.calibration.samples.size());

  json summary{{"preset", config.preset},
               {"seed", config.seed},
               {"config", config.to_json()},
               {"grid", artifacts.grid.describe()},
               {"fom", {{"train_rows", archives.train.size()}, {"test_rows", archives.test.size()}}},
               {"calibration",
                {{"rows", artifacts.calibration.samples.size()},
                 {"failed", failed},
                 {"mean_residual", mean},
                 {"max_residual", worst}}},
               {"bases", bases},
               {"eigenvalues", eigen},
               {"errors", errors}};
  write_json(out / "summary.json", summary);
  timings["total"] = seconds_since(t0);
  write_json(out / "timings.json", timings);
  log << "[run] summary written to " << (out / "summary.json").string() << '\n';
  return summary;
}

}  // namespace calibra
