#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "calibra/grid.hpp"

namespace calibra {

// On-disk snapshot store: manifest.json plus one raw little-endian float64 file per component.
class FieldArchive {
 public:
  struct Row {
    std::size_t index = 0;
    std::vector<double> mu;
  };

  static FieldArchive create(const std::filesystem::path& dir, const CartesianGrid& grid,
                             std::vector<std::string> parameter_names, std::vector<std::string> components);
  static FieldArchive open(const std::filesystem::path& dir);

  const std::filesystem::path& directory() const { return dir_; }
  const CartesianGrid& grid() const { return grid_; }
  const std::vector<std::string>& parameter_names() const { return params_; }
  const std::vector<std::string>& components() const { return comps_; }
  std::vector<Row> rows() const;
  std::size_t size() const;

  // Thread-safe; returns the row index.
  std::size_t write(const std::vector<double>& mu, std::span<const ScalarField> fields);
  std::size_t write(const std::vector<double>& mu, const ConservedField& field);

  ScalarField read_component(std::size_t index, const std::string& component) const;
  ScalarField read_component(std::size_t index, const std::string& component, const CartesianGrid& expected) const;
  std::vector<ScalarField> read_all(std::size_t index) const;

 private:
  FieldArchive() = default;
  void save_manifest() const;
  std::string file_name(std::size_t index, const std::string& component) const;

  std::filesystem::path dir_;
  CartesianGrid grid_;
  std::vector<std::string> params_;
  std::vector<std::string> comps_;
  std::vector<Row> rows_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

void write_f64(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64(const std::filesystem::path& path);

}  // namespace calibra
