#include "calibra/transform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "calibra/errors.hpp"

namespace calibra {

namespace {

constexpr double kPadFraction = 0.05;

Pchip padded_line(const std::vector<double>& ref, const std::vector<double>& values, double lo, double hi,
                  double pad_value_lo, double pad_value_hi) {
  const double pad = kPadFraction * (hi - lo);
  std::vector<double> knots, vals;
  knots.reserve(ref.size() + 2);
  vals.reserve(ref.size() + 2);
  knots.push_back(lo - pad);
  vals.push_back(pad_value_lo);
  for (std::size_t k = 0; k < ref.size(); ++k) {
    knots.push_back(ref[k]);
    vals.push_back(values[k]);
  }
  knots.push_back(hi + pad);
  vals.push_back(pad_value_hi);
  return Pchip(std::move(knots), std::move(vals));
}

std::vector<Pchip> blending(const std::vector<double>& ref, double lo, double hi) {
  std::vector<Pchip> out;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    std::vector<double> delta(ref.size(), 0.0);
    delta[k] = 1.0;
    out.push_back(padded_line(ref, delta, lo, hi, 0.0, 0.0));
  }
  return out;
}

}  // namespace

double det(const Mat2& j, int dim) { return dim == 1 ? j[0] : j[0] * j[3] - j[1] * j[2]; }

TransformMap::TransformMap(ControlGrid cg, std::vector<double> points) : cg_(std::move(cg)), w_(std::move(points)) {
  cg_.validate_points(w_);
  identity_ = w_ == cg_.reference();
  const Box& b = cg_.domain();
  if (cg_.dim() == 1) {
    const double pad = kPadFraction * b.length(0);
    line_ = padded_line(cg_.axis(0), w_, b.lo[0], b.hi[0], b.lo[0] - pad, b.hi[0] + pad);
    return;
  }
  const int m1 = cg_.count(0), m2 = cg_.count(1);
  const double padx = kPadFraction * b.length(0), pady = kPadFraction * b.length(1);
  for (int l = 0; l < m2; ++l) {
    std::vector<double> row(m1);
    for (int k = 0; k < m1; ++k) row[k] = w_[cg_.point_index(k, l) * 2];
    px_.push_back(padded_line(cg_.axis(0), row, b.lo[0], b.hi[0], b.lo[0] - padx, b.hi[0] + padx));
  }
  for (int k = 0; k < m1; ++k) {
    std::vector<double> col(m2);
    for (int l = 0; l < m2; ++l) col[l] = w_[cg_.point_index(k, l) * 2 + 1];
    py_.push_back(padded_line(cg_.axis(1), col, b.lo[1], b.hi[1], b.lo[1] - pady, b.hi[1] + pady));
  }
  gx_ = blending(cg_.axis(0), b.lo[0], b.hi[0]);
  gy_ = blending(cg_.axis(1), b.lo[1], b.hi[1]);
}

TransformMap TransformMap::identity(ControlGrid cg) {
  auto ref = cg.reference();
  return TransformMap(std::move(cg), std::move(ref));
}

void TransformMap::evaluate(Vec2 ref, Vec2& out, Mat2& jac) const {
  if (identity_) {
    out = ref;
    jac = {1.0, 0.0, 0.0, 1.0};
    return;
  }
  if (dim() == 1) {
    line_.evaluate(ref[0], out[0], jac[0]);
    out[1] = 0.0;
    jac[1] = jac[2] = 0.0;
    jac[3] = 1.0;
    return;
  }
  out = {0.0, 0.0};
  jac = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t l = 0; l < px_.size(); ++l) {
    double g, dg, p, dp;
    gy_[l].evaluate(ref[1], g, dg);
    if (g == 0.0 && dg == 0.0) continue;
    px_[l].evaluate(ref[0], p, dp);
    out[0] += g * p;
    jac[0] += g * dp;
    jac[1] += dg * p;
  }
  for (std::size_t k = 0; k < py_.size(); ++k) {
    double g, dg, p, dp;
    gx_[k].evaluate(ref[0], g, dg);
    if (g == 0.0 && dg == 0.0) continue;
    py_[k].evaluate(ref[1], p, dp);
    out[1] += g * p;
    jac[2] += dg * p;
    jac[3] += g * dp;
  }
}

Vec2 TransformMap::operator()(Vec2 ref) const {
  Vec2 out;
  Mat2 j;
  evaluate(ref, out, j);
  return out;
}

Mat2 TransformMap::jacobian(Vec2 ref) const {
  Vec2 out;
  Mat2 j;
  evaluate(ref, out, j);
  return j;
}

struct TransformMap::AxisTables {
  int nx = 0, ny = 0, m1 = 0, m2 = 0;
  std::vector<double> px, dpx, gx, dgx;  // per x-centre
  std::vector<double> py, dpy, gy, dgy;  // per y-centre
};

TransformMap::AxisTables TransformMap::tables(const CartesianGrid& grid) const {
  AxisTables t;
  t.nx = grid.cells(0);
  t.ny = grid.cells(1);
  t.m1 = cg_.count(0);
  t.m2 = cg_.count(1);
  t.px.resize(t.nx * t.m2);
  t.dpx.resize(t.nx * t.m2);
  t.gx.resize(t.nx * t.m1);
  t.dgx.resize(t.nx * t.m1);
  t.py.resize(t.ny * t.m1);
  t.dpy.resize(t.ny * t.m1);
  t.gy.resize(t.ny * t.m2);
  t.dgy.resize(t.ny * t.m2);
  for (int i = 0; i < t.nx; ++i) {
    const double x = grid.center(0, i);
    for (int l = 0; l < t.m2; ++l) px_[l].evaluate(x, t.px[i * t.m2 + l], t.dpx[i * t.m2 + l]);
    for (int k = 0; k < t.m1; ++k) gx_[k].evaluate(x, t.gx[i * t.m1 + k], t.dgx[i * t.m1 + k]);
  }
  for (int j = 0; j < t.ny; ++j) {
    const double y = grid.center(1, j);
    for (int k = 0; k < t.m1; ++k) py_[k].evaluate(y, t.py[j * t.m1 + k], t.dpy[j * t.m1 + k]);
    for (int l = 0; l < t.m2; ++l) gy_[l].evaluate(y, t.gy[j * t.m2 + l], t.dgy[j * t.m2 + l]);
  }
  return t;
}

std::vector<double> TransformMap::map_centers(const CartesianGrid& grid) const {
  if (grid.dim() != dim()) throw ShapeMismatch("map and grid dimensions differ");
  if (identity_) return grid.centers();
  if (dim() == 1) {
    std::vector<double> out(grid.size());
    for (int i = 0; i < grid.cells(0); ++i) out[i] = line_(grid.center(0, i));
    return out;
  }
  const AxisTables t = tables(grid);
  std::vector<double> out(grid.size() * 2);
  for (int j = 0; j < t.ny; ++j)
    for (int i = 0; i < t.nx; ++i) {
      double x = 0.0, y = 0.0;
      for (int l = 0; l < t.m2; ++l) x += t.gy[j * t.m2 + l] * t.px[i * t.m2 + l];
      for (int k = 0; k < t.m1; ++k) y += t.gx[i * t.m1 + k] * t.py[j * t.m1 + k];
      const std::size_t c = grid.index(i, j);
      out[2 * c] = x;
      out[2 * c + 1] = y;
    }
  return out;
}

MapScreen TransformMap::screen(const CartesianGrid& coarse, int refine) const {
  if (coarse.dim() != dim()) throw ShapeMismatch("map and grid dimensions differ");
  if (refine < 1) throw ConfigError("screen refinement must be positive");
  MapScreen s{std::numeric_limits<double>::infinity(), 0.0};
  if (identity_) return {1.0, std::sqrt(static_cast<double>(dim()))};
  const CartesianGrid grid = dim() == 1 ? CartesianGrid(coarse.box().lo[0], coarse.box().hi[0], coarse.cells(0) * refine)
                                        : CartesianGrid(coarse.box(), {coarse.cells(0) * refine, coarse.cells(1) * refine});
  if (dim() == 1) {
    for (int i = 0; i < grid.cells(0); ++i) {
      const double d = line_.derivative(grid.center(0, i));
      s.min_det = std::min(s.min_det, d);
      s.max_norm = std::max(s.max_norm, d > 0.0 ? std::max(std::abs(d), 1.0 / d) : std::numeric_limits<double>::infinity());
    }
    return s;
  }
  const AxisTables t = tables(grid);
  for (int j = 0; j < t.ny; ++j)
    for (int i = 0; i < t.nx; ++i) {
      double a = 0, b = 0, c = 0, d = 0;
      for (int l = 0; l < t.m2; ++l) {
        a += t.gy[j * t.m2 + l] * t.dpx[i * t.m2 + l];
        b += t.dgy[j * t.m2 + l] * t.px[i * t.m2 + l];
      }
      for (int k = 0; k < t.m1; ++k) {
        c += t.dgx[i * t.m1 + k] * t.py[j * t.m1 + k];
        d += t.gx[i * t.m1 + k] * t.dpy[j * t.m1 + k];
      }
      const double dt = a * d - b * c;
      const double fro = std::sqrt(a * a + b * b + c * c + d * d);
      s.min_det = std::min(s.min_det, dt);
      // |J^-1|_F = |J|_F / |det J| for 2x2 matrices.
      s.max_norm = std::max(s.max_norm, dt > 0.0 ? std::max(fro, fro / dt) : std::numeric_limits<double>::infinity());
    }
  return s;
}

nlohmann::json TransformMap::to_json() const { return {{"control", cg_.to_json()}, {"points", w_}}; }

TransformMap TransformMap::from_json(const nlohmann::json& j) {
  return TransformMap(ControlGrid::from_json(j.at("control")), j.at("points").get<std::vector<double>>());
}

TransformMap build_map(const ControlGrid& cg, std::span<const double> points) {
  return TransformMap(cg, {points.begin(), points.end()});
}

Mat2 jacobian(const TransformMap& map, Vec2 ref) { return map.jacobian(ref); }

double det_grid(const TransformMap& map, const CartesianGrid& grid) { return map.screen(grid).min_det; }

// ---------------------------------------------------------------------------------------------

namespace {

// Homography sending the unit square (0,0),(1,0),(1,1),(0,1) onto the quad p0..p3.
Eigen::Matrix3d square_to_quad(const std::array<Vec2, 4>& p) {
  const double dx1 = p[1][0] - p[2][0], dx2 = p[3][0] - p[2][0], dx3 = p[0][0] - p[1][0] + p[2][0] - p[3][0];
  const double dy1 = p[1][1] - p[2][1], dy2 = p[3][1] - p[2][1], dy3 = p[0][1] - p[1][1] + p[2][1] - p[3][1];
  double g = 0.0, h = 0.0;
  const double den = dx1 * dy2 - dx2 * dy1;
  if (den != 0.0) {
    g = (dx3 * dy2 - dx2 * dy3) / den;
    h = (dx1 * dy3 - dx3 * dy1) / den;
  }
  Eigen::Matrix3d m;
  m << p[1][0] - p[0][0] + g * p[1][0], p[3][0] - p[0][0] + h * p[3][0], p[0][0],
      p[1][1] - p[0][1] + g * p[1][1], p[3][1] - p[0][1] + h * p[3][1], p[0][1], g, h, 1.0;
  return m;
}

}  // namespace

InverseMap::InverseMap(const TransformMap& map) : InverseMap(map, CartesianGrid(map.control().domain(), {64, 64})) {}

InverseMap::InverseMap(const TransformMap& map, const CartesianGrid& lattice) : map_(map), lattice_(lattice) {
  if (lattice.dim() != map.dim()) throw ShapeMismatch("inverse lattice dimension differs from the map");
  if (map.is_identity()) return;
  const double min_det = map.screen(lattice).min_det;
  if (!(min_det > 0.0)) {
    std::ostringstream os;
    os << "map is not invertible: minimum Jacobian determinant " << min_det;
    throw InversionError(os.str());
  }
  if (map.dim() == 1) return;

  const int nx = lattice.cells(0), ny = lattice.cells(1);
  const Box& box = lattice.box();
  std::vector<Vec2> nodes((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      nodes[j * (nx + 1) + i] = map({box.lo[0] + i * lattice.spacing(0), box.lo[1] + j * lattice.spacing(1)});
  bins_x_ = nx;
  bins_y_ = ny;
  bins_.assign(static_cast<std::size_t>(bins_x_) * bins_y_, {});
  const Box& dom = map.control().domain();
  const double bx = dom.length(0) / bins_x_, by = dom.length(1) / bins_y_;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const std::array<Vec2, 4> q{nodes[j * (nx + 1) + i], nodes[j * (nx + 1) + i + 1],
                                  nodes[(j + 1) * (nx + 1) + i + 1], nodes[(j + 1) * (nx + 1) + i]};
      const Eigen::Matrix3d inv = square_to_quad(q).inverse();
      Quad quad{{}, i, j};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) quad.inverse_homography[r * 3 + c] = inv(r, c);
      const int id = static_cast<int>(quads_.size());
      quads_.push_back(quad);
      double xmin = q[0][0], xmax = q[0][0], ymin = q[0][1], ymax = q[0][1];
      for (const auto& v : q) {
        xmin = std::min(xmin, v[0]);
        xmax = std::max(xmax, v[0]);
        ymin = std::min(ymin, v[1]);
        ymax = std::max(ymax, v[1]);
      }
      const int i0 = std::clamp(static_cast<int>(std::floor((xmin - dom.lo[0]) / bx)) - 1, 0, bins_x_ - 1);
      const int i1 = std::clamp(static_cast<int>(std::floor((xmax - dom.lo[0]) / bx)) + 1, 0, bins_x_ - 1);
      const int j0 = std::clamp(static_cast<int>(std::floor((ymin - dom.lo[1]) / by)) - 1, 0, bins_y_ - 1);
      const int j1 = std::clamp(static_cast<int>(std::floor((ymax - dom.lo[1]) / by)) + 1, 0, bins_y_ - 1);
      for (int bj = j0; bj <= j1; ++bj)
        for (int bi = i0; bi <= i1; ++bi) bins_[bj * bins_x_ + bi].push_back(id);
    }
}

double InverseMap::invert_1d(double x) const {
  const Box& dom = map_.control().domain();
  const double a = dom.lo[0], b = dom.hi[0];
  const double tol = 1e-12 * std::max(1.0, b - a);
  const double ta = map_(a), tb = map_(b);
  if (x < ta - tol || x > tb + tol) {
    std::ostringstream os;
    os << "point " << x << " lies outside the image [" << ta << ", " << tb << "]";
    throw OutOfDomain(os.str());
  }
  if (x <= ta) return a;
  if (x >= tb) return b;
  double lo = a, hi = b;
  // Narrow the bracket to one knot interval.
  for (double k : map_.control().axis(0)) {
    const double v = map_(k);
    if (v <= x) lo = std::max(lo, k);
    if (v >= x) hi = std::min(hi, k);
  }
  double flo = map_(lo) - x, fhi = map_(hi) - x;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  double z = lo + (hi - lo) * (-flo) / (fhi - flo);
  for (int it = 0; it < 200; ++it) {
    double v, s;
    Vec2 out;
    Mat2 j;
    map_.evaluate({z, 0.0}, out, j);
    v = out[0] - x;
    s = j[0];
    if (std::abs(v) <= 1e-14 * std::max(1.0, std::abs(x))) return z;
    if (v < 0.0)
      lo = z;
    else
      hi = z;
    double next = s > 0.0 ? z - v / s : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z))) return next;
    z = next;
  }
  if (std::abs(map_(z) - x) <= 1e-10) return z;
  throw InversionError("1D inverse did not converge");
}

Vec2 InverseMap::initial_guess(Vec2 x) const {
  const Box& dom = map_.control().domain();
  const int bi = std::clamp(static_cast<int>((x[0] - dom.lo[0]) / dom.length(0) * bins_x_), 0, bins_x_ - 1);
  const int bj = std::clamp(static_cast<int>((x[1] - dom.lo[1]) / dom.length(1) * bins_y_), 0, bins_y_ - 1);
  double best_violation = std::numeric_limits<double>::infinity();
  Vec2 best{0.5 * (dom.lo[0] + dom.hi[0]), 0.5 * (dom.lo[1] + dom.hi[1])};
  for (int id : bins_[bj * bins_x_ + bi]) {
    const Quad& q = quads_[id];
    const auto& h = q.inverse_homography;
    const double w = h[6] * x[0] + h[7] * x[1] + h[8];
    if (w == 0.0) continue;
    const double u = (h[0] * x[0] + h[1] * x[1] + h[2]) / w;
    const double v = (h[3] * x[0] + h[4] * x[1] + h[5]) / w;
    const double violation = std::max({0.0, -u, u - 1.0, -v, v - 1.0});
    if (violation < best_violation) {
      best_violation = violation;
      const double uc = std::clamp(u, 0.0, 1.0), vc = std::clamp(v, 0.0, 1.0);
      best = {lattice_.box().lo[0] + (q.i + uc) * lattice_.spacing(0),
              lattice_.box().lo[1] + (q.j + vc) * lattice_.spacing(1)};
      if (violation == 0.0) break;
    }
  }
  return best;
}

Vec2 InverseMap::invert_2d(Vec2 x) const {
  const Box& dom = map_.control().domain();
  for (int a = 0; a < 2; ++a) {
    const double tol = 1e-12 * std::max(1.0, dom.length(a));
    if (x[a] < dom.lo[a] - tol || x[a] > dom.hi[a] + tol) {
      std::ostringstream os;
      os << "point (" << x[0] << ", " << x[1] << ") lies outside the mapped domain";
      throw OutOfDomain(os.str());
    }
  }
  Vec2 z = initial_guess(x);
  Vec2 tz;
  Mat2 j;
  map_.evaluate(z, tz, j);
  double r0 = tz[0] - x[0], r1 = tz[1] - x[1];
  double res = std::hypot(r0, r1);
  const double target = 1e-13 * std::max(1.0, std::max(dom.length(0), dom.length(1)));
  for (int it = 0; it < 50 && res > target; ++it) {
    const double dt = j[0] * j[3] - j[1] * j[2];
    if (!(std::abs(dt) > 0.0)) break;
    const double s0 = -(j[3] * r0 - j[1] * r1) / dt;
    const double s1 = -(-j[2] * r0 + j[0] * r1) / dt;
    double step = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k) {
      const Vec2 trial{z[0] + step * s0, z[1] + step * s1};
      Vec2 tt;
      Mat2 jt;
      map_.evaluate(trial, tt, jt);
      const double q0 = tt[0] - x[0], q1 = tt[1] - x[1];
      const double rt = std::hypot(q0, q1);
      if (rt < res) {
        z = trial;
        j = jt;
        r0 = q0;
        r1 = q1;
        res = rt;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  if (res > 1e-10) {
    std::ostringstream os;
    os << "Newton inverse stalled at residual " << res << " for point (" << x[0] << ", " << x[1] << ")";
    throw InversionError(os.str());
  }
  return z;
}

Vec2 InverseMap::operator()(Vec2 x) const {
  if (map_.is_identity()) return x;
  if (map_.dim() == 1) return {invert_1d(x[0]), 0.0};
  return invert_2d(x);
}

std::vector<double> InverseMap::apply(std::span<const double> points) const {
  const int d = map_.dim();
  std::vector<double> out(points.size());
  for (std::size_t k = 0; k < points.size() / d; ++k) {
    const Vec2 r = (*this)(Vec2{points[k * d], d == 2 ? points[k * d + 1] : 0.0});
    out[k * d] = r[0];
    if (d == 2) out[k * d + 1] = r[1];
  }
  return out;
}

Vec2 map_inverse(const TransformMap& map, Vec2 x) { return InverseMap(map)(x); }

}  // namespace calibra
