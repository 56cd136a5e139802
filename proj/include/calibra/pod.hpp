#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "calibra/grid.hpp"

namespace calibra {

struct PodBasis {
  std::vector<ScalarField> modes;   // orthonormal in the volume-weighted product
  std::vector<double> eigenvalues;  // full spectrum of the snapshot Gram matrix, descending, clamped at 0
  double discarded = 0.0;           // discarded energy fraction at the chosen size

  std::size_t size() const { return modes.size(); }
  const CartesianGrid& grid() const { return modes.front().grid(); }
};

PodBasis pod_compress(std::span<const ScalarField> snapshots, double tol, std::size_t cap);

std::vector<double> project(const PodBasis& basis, const ScalarField& field, std::size_t n);
std::vector<double> project(const PodBasis& basis, const ScalarField& field);
ScalarField reconstruct(const PodBasis& basis, std::span<const double> coeffs);
// Orthogonal projection residual |f - P_N f|.
double projection_error(const PodBasis& basis, const ScalarField& field, std::size_t n);

struct DecayRow {
  std::size_t k;
  double normalized;
};
std::vector<DecayRow> eigenvalue_report(const PodBasis& basis);
void write_eigenvalue_csv(const PodBasis& basis, const std::string& path);

void save_basis(const PodBasis& basis, const std::filesystem::path& dir);
PodBasis load_basis(const std::filesystem::path& dir);

}  // namespace calibra
