#include "calibra/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "calibra/errors.hpp"
#include "json.hpp"

namespace calibra {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json grid_to_json(const CartesianGrid& g) {
  json j;
  j["dim"] = g.dim();
  j["lo"] = std::vector<double>(g.box().lo.begin(), g.box().lo.begin() + g.dim());
  j["hi"] = std::vector<double>(g.box().hi.begin(), g.box().hi.begin() + g.dim());
  std::vector<int> cells{g.cells(0)};
  if (g.dim() == 2) cells.push_back(g.cells(1));
  j["cells"] = cells;
  return j;
}

CartesianGrid grid_from_json(const json& j) {
  Box box;
  box.dim = j.at("dim").get<int>();
  auto lo = j.at("lo").get<std::vector<double>>();
  auto hi = j.at("hi").get<std::vector<double>>();
  auto cells = j.at("cells").get<std::vector<int>>();
  if (static_cast<int>(lo.size()) != box.dim || static_cast<int>(hi.size()) != box.dim ||
      static_cast<int>(cells.size()) != box.dim)
    throw ShapeMismatch("grid descriptor inconsistent with its dimension");
  std::array<int, 2> n{1, 1};
  for (int a = 0; a < box.dim; ++a) {
    box.lo[a] = lo[a];
    box.hi[a] = hi[a];
    n[a] = cells[a];
  }
  return CartesianGrid(box, n);
}

}  // namespace

void write_f64(const fs::path& path, std::span<const double> values) {
  std::vector<double> buf(values.begin(), values.end());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : buf) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      bits = __builtin_bswap64(bits);
      v = std::bit_cast<double>(bits);
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<double> read_f64(const fs::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes % sizeof(double) != 0) throw ShapeMismatch(path.string() + " is not a float64 array");
  std::vector<double> buf(bytes / sizeof(double));
  is.seekg(0);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (!is) throw IoError("read failed for " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : buf) v = std::bit_cast<double>(__builtin_bswap64(std::bit_cast<std::uint64_t>(v)));
  }
  return buf;
}

FieldArchive FieldArchive::create(const fs::path& dir, const CartesianGrid& grid, std::vector<std::string> parameter_names,
                                  std::vector<std::string> components) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create archive directory " + dir.string() + ": " + ec.message());
  if (parameter_names.empty()) throw ConfigError("archive needs at least one parameter name");
  if (components.empty()) throw ConfigError("archive needs at least one component");
  FieldArchive ar;
  ar.dir_ = dir;
  ar.grid_ = grid;
  ar.params_ = std::move(parameter_names);
  ar.comps_ = std::move(components);
  ar.save_manifest();
  return ar;
}

FieldArchive FieldArchive::open(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("no manifest.json in " + dir.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  FieldArchive ar;
  ar.dir_ = dir;
  try {
    ar.grid_ = grid_from_json(j.at("grid"));
    ar.params_ = j.at("parameters").get<std::vector<std::string>>();
    ar.comps_ = j.at("components").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      Row row{r.at("index").get<std::size_t>(), r.at("mu").get<std::vector<double>>()};
      if (row.mu.size() != ar.params_.size()) throw ShapeMismatch("manifest row parameter length mismatch");
      ar.rows_.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  return ar;
}

std::vector<FieldArchive::Row> FieldArchive::rows() const {
  std::lock_guard lock(*mutex_);
  return rows_;
}

std::size_t FieldArchive::size() const {
  std::lock_guard lock(*mutex_);
  return rows_.size();
}

std::string FieldArchive::file_name(std::size_t index, const std::string& component) const {
  return "snap_" + std::to_string(index) + "_" + component + ".f64";
}

void FieldArchive::save_manifest() const {
  json j;
  j["format"] = "calibra-archive-1";
  j["grid"] = grid_to_json(grid_);
  j["parameters"] = params_;
  j["components"] = comps_;
  j["rows"] = json::array();
  for (const auto& r : rows_) {
    json files = json::object();
    for (const auto& c : comps_) files[c] = file_name(r.index, c);
    j["rows"].push_back({{"index", r.index}, {"mu", r.mu}, {"files", files}, {"grid", grid_.describe()}});
  }
  const fs::path tmp = dir_ / "manifest.json.tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << j.dump(1) << '\n';
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, dir_ / "manifest.json", ec);
  if (ec) throw IoError("cannot replace manifest: " + ec.message());
}

std::size_t FieldArchive::write(const std::vector<double>& mu, std::span<const ScalarField> fields) {
  if (mu.size() != params_.size())
    throw ShapeMismatch("parameter vector has " + std::to_string(mu.size()) + " entries, archive expects " +
                        std::to_string(params_.size()));
  if (fields.size() != comps_.size()) throw ShapeMismatch("component count does not match archive");
  for (const auto& f : fields) check_same_grid(f.grid(), grid_, "archive write");
  std::lock_guard lock(*mutex_);
  const std::size_t index = rows_.empty() ? 0 : rows_.back().index + 1;
  for (std::size_t c = 0; c < comps_.size(); ++c) write_f64(dir_ / file_name(index, comps_[c]), fields[c].values());
  rows_.push_back({index, mu});
  save_manifest();
  return index;
}

std::size_t FieldArchive::write(const std::vector<double>& mu, const ConservedField& field) {
  std::vector<ScalarField> comps;
  for (int c = 0; c < field.components(); ++c) comps.push_back(field.component(c));
  return write(mu, comps);
}

ScalarField FieldArchive::read_component(std::size_t index, const std::string& component) const {
  return read_component(index, component, grid_);
}

ScalarField FieldArchive::read_component(std::size_t index, const std::string& component,
                                         const CartesianGrid& expected) const {
  if (std::find(comps_.begin(), comps_.end(), component) == comps_.end())
    throw ShapeMismatch("archive has no component '" + component + "'");
  check_same_grid(expected, grid_, "archive read");
  auto values = read_f64(dir_ / file_name(index, component));
  if (values.size() != grid_.size())
    throw ShapeMismatch("snapshot " + std::to_string(index) + " holds " + std::to_string(values.size()) +
                        " values, grid expects " + std::to_string(grid_.size()));
  return ScalarField(grid_, std::move(values));
}

std::vector<ScalarField> FieldArchive::read_all(std::size_t index) const {
  std::vector<ScalarField> out;
  for (const auto& c : comps_) out.push_back(read_component(index, c));
  return out;
}

}  // namespace calibra
