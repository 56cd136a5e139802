#pragma once

#include <filesystem>
#include <ostream>

#include "calibra/archive.hpp"
#include "calibra/config.hpp"
#include "json.hpp"

namespace calibra {

// Worker cap from CALIBRA_THREADS, else the hardware concurrency.
unsigned thread_cap();

struct FomArchives {
  FieldArchive train;
  FieldArchive test;
};

// Integrates every physical parameter once and routes its snapshots to dir/train and dir/test.
FomArchives run_fom_stage(const RunConfig& config, const std::filesystem::path& dir);

// Smallest basis size whose discarded energy falls below tol.
std::size_t modes_for_tolerance(const std::vector<double>& eigenvalues, double tol);

// fom, offline, errors and eigenvalue curves under config.output; returns the summary written to summary.json.
nlohmann::json run_preset(const RunConfig& config, std::ostream& log);

}  // namespace calibra
