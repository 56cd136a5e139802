#include "calibra/control_grid.hpp"

#include <cmath>
#include <sstream>

#include "calibra/errors.hpp"

namespace calibra {

namespace {

bool on_bound(double v, double lo, double hi) {
  const double tol = 1e-14 * (hi - lo);
  return std::abs(v - lo) <= tol || std::abs(v - hi) <= tol;
}

}  // namespace

ControlGrid::ControlGrid(Box domain, std::vector<double> xs, std::vector<double> ys) : domain_(domain) {
  axes_[0] = std::move(xs);
  axes_[1] = std::move(ys);
  if (domain_.dim == 1) axes_[1].clear();
  build();
}

ControlGrid ControlGrid::uniform(Box domain, int m1, int m2) {
  auto line = [&](int axis, int m) {
    if (m < 2) throw InvalidControlPoints("uniform control grid needs at least 2 points per axis");
    std::vector<double> v(m);
    for (int k = 0; k < m; ++k) v[k] = domain.lo[axis] + domain.length(axis) * k / (m - 1);
    v.back() = domain.hi[axis];
    return v;
  };
  if (domain.dim == 1) return ControlGrid(domain, line(0, m1));
  return ControlGrid(domain, line(0, m1), line(1, m2));
}

void ControlGrid::set_gap_fraction(double f) {
  if (!(f >= 0.0 && f < 0.5)) throw ConfigError("gap fraction must lie in [0, 0.5)");
  gap_fraction_ = f;
}

void ControlGrid::build() {
  const int d = domain_.dim;
  if (d != 1 && d != 2) throw InvalidControlPoints("control grid dimension must be 1 or 2");
  for (int a = 0; a < d; ++a) {
    const auto& v = axes_[a];
    if (v.empty()) throw InvalidControlPoints("control grid axis is empty");
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] < domain_.lo[a] || v[k] > domain_.hi[a]) throw InvalidControlPoints("reference point outside domain");
      if (k > 0 && !(v[k - 1] < v[k])) throw InvalidControlPoints("reference coordinates must increase");
    }
    if (d == 2 && (v.size() < 2 || v.front() != domain_.lo[a] || v.back() != domain_.hi[a]))
      throw InvalidControlPoints("2D control grids must contain the boundary lines of the domain");
  }
  const int m1 = count(0);
  const int m2 = d == 2 ? count(1) : 1;
  reference_.clear();
  for (int a2 = 0; a2 < m2; ++a2)
    for (int a1 = 0; a1 < m1; ++a1) {
      reference_.push_back(axes_[0][a1]);
      if (d == 2) reference_.push_back(axes_[1][a2]);
    }
  slot_to_var_.assign(reference_.size(), -1);
  free_slots_.clear();
  for (std::size_t s = 0; s < reference_.size(); ++s) {
    const int c = static_cast<int>(s % d);
    if (!on_bound(reference_[s], domain_.lo[c], domain_.hi[c])) {
      slot_to_var_[s] = static_cast<int>(free_slots_.size());
      free_slots_.push_back(static_cast<int>(s));
    }
  }
  chains_.clear();
  auto walk = [&](int axis, const std::vector<int>& slots) {
    Chain current{axis, {}, domain_.lo[axis], domain_.hi[axis]};
    for (int s : slots) {
      if (slot_to_var_[s] >= 0) {
        current.vars.push_back(slot_to_var_[s]);
      } else {
        if (!current.vars.empty()) {
          current.upper = reference_[s];
          chains_.push_back(current);
        }
        current = Chain{axis, {}, reference_[s], domain_.hi[axis]};
      }
    }
    if (!current.vars.empty()) chains_.push_back(current);
  };
  for (int a2 = 0; a2 < m2; ++a2) {
    std::vector<int> slots;
    for (int a1 = 0; a1 < m1; ++a1) slots.push_back(point_index(a1, a2) * d);
    walk(0, slots);
  }
  if (d == 2)
    for (int a1 = 0; a1 < m1; ++a1) {
      std::vector<int> slots;
      for (int a2 = 0; a2 < m2; ++a2) slots.push_back(point_index(a1, a2) * d + 1);
      walk(1, slots);
    }
}

std::vector<double> ControlGrid::pack(std::span<const double> w) const {
  if (w.size() != reference_.size())
    throw ShapeMismatch("control point vector has " + std::to_string(w.size()) + " entries, expected " +
                        std::to_string(reference_.size()));
  std::vector<double> theta(free_slots_.size());
  for (std::size_t q = 0; q < free_slots_.size(); ++q) theta[q] = w[free_slots_[q]];
  return theta;
}

std::vector<double> ControlGrid::unpack(std::span<const double> theta) const {
  if (theta.size() != free_slots_.size())
    throw ShapeMismatch("theta has " + std::to_string(theta.size()) + " entries, expected " +
                        std::to_string(free_slots_.size()));
  std::vector<double> w = reference_;
  for (std::size_t q = 0; q < free_slots_.size(); ++q) w[free_slots_[q]] = theta[q];
  return w;
}

bool ControlGrid::ordered(std::span<const double> w) const {
  const int d = dim();
  const int m1 = count(0);
  const int m2 = d == 2 ? count(1) : 1;
  for (int a2 = 0; a2 < m2; ++a2)
    for (int a1 = 0; a1 + 1 < m1; ++a1)
      if (!(w[point_index(a1, a2) * d] < w[point_index(a1 + 1, a2) * d])) return false;
  if (d == 2)
    for (int a1 = 0; a1 < m1; ++a1)
      for (int a2 = 0; a2 + 1 < m2; ++a2)
        if (!(w[point_index(a1, a2) * d + 1] < w[point_index(a1, a2 + 1) * d + 1])) return false;
  return true;
}

void ControlGrid::validate_points(std::span<const double> w) const {
  if (w.size() != reference_.size()) throw ShapeMismatch("control point vector has the wrong length");
  for (std::size_t s = 0; s < w.size(); ++s) {
    if (!std::isfinite(w[s])) throw InvalidControlPoints("control point coordinate is not finite");
    if (slot_to_var_[s] < 0 && w[s] != reference_[s]) {
      std::ostringstream os;
      os << "fixed coordinate " << s << " moved from " << reference_[s] << " to " << w[s];
      throw InvalidControlPoints(os.str());
    }
  }
  if (!ordered(w)) throw InvalidControlPoints("control points violate the per-line ordering");
}

nlohmann::json ControlGrid::to_json() const {
  nlohmann::json j;
  j["dim"] = dim();
  j["lo"] = std::vector<double>(domain_.lo.begin(), domain_.lo.begin() + dim());
  j["hi"] = std::vector<double>(domain_.hi.begin(), domain_.hi.begin() + dim());
  j["x"] = axes_[0];
  if (dim() == 2) j["y"] = axes_[1];
  j["gap_fraction"] = gap_fraction_;
  return j;
}

ControlGrid ControlGrid::from_json(const nlohmann::json& j) {
  Box b;
  b.dim = j.at("dim").get<int>();
  auto lo = j.at("lo").get<std::vector<double>>();
  auto hi = j.at("hi").get<std::vector<double>>();
  for (int a = 0; a < b.dim; ++a) {
    b.lo[a] = lo.at(a);
    b.hi[a] = hi.at(a);
  }
  ControlGrid cg(b, j.at("x").get<std::vector<double>>(),
                 b.dim == 2 ? j.at("y").get<std::vector<double>>() : std::vector<double>{});
  if (j.contains("gap_fraction")) cg.set_gap_fraction(j.at("gap_fraction").get<double>());
  return cg;
}

}  // namespace calibra
