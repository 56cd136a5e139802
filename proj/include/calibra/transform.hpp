#pragma once

#include <array>
#include <span>
#include <vector>

#include "calibra/control_grid.hpp"
#include "calibra/grid.hpp"
#include "calibra/pchip.hpp"
#include "json.hpp"

namespace calibra {

using Vec2 = std::array<double, 2>;
// Row-major [dTx/dx, dTx/dy, dTy/dx, dTy/dy]; 1D maps use entry 0 only.
using Mat2 = std::array<double, 4>;

inline constexpr int kScreenRefine = 4;

struct MapScreen {
  double min_det = 0.0;
  double max_norm = 0.0;  // max over cells of max(|J|_F, |J^-1|_F)
};

class TransformMap {
 public:
  TransformMap() = default;
  TransformMap(ControlGrid cg, std::vector<double> points);
  static TransformMap identity(ControlGrid cg);

  int dim() const { return cg_.dim(); }
  const ControlGrid& control() const { return cg_; }
  const std::vector<double>& points() const { return w_; }
  std::vector<double> theta() const { return cg_.pack(w_); }
  bool is_identity() const { return identity_; }

  Vec2 operator()(Vec2 ref) const;
  double operator()(double ref) const { return (*this)(Vec2{ref, 0.0})[0]; }
  Mat2 jacobian(Vec2 ref) const;
  void evaluate(Vec2 ref, Vec2& out, Mat2& jac) const;

  // Images of every cell centre of the grid (dim coordinates per cell).
  std::vector<double> map_centers(const CartesianGrid& grid) const;
  // Samples every cell at refine x refine sub-cell centres.
  MapScreen screen(const CartesianGrid& grid, int refine = kScreenRefine) const;

  nlohmann::json to_json() const;
  static TransformMap from_json(const nlohmann::json& j);

 private:
  struct AxisTables;
  AxisTables tables(const CartesianGrid& grid) const;

  ControlGrid cg_;
  std::vector<double> w_;
  bool identity_ = true;
  Pchip line_;                            // 1D
  std::vector<Pchip> px_, py_, gx_, gy_;  // 2D rows, columns and blending weights
};

TransformMap build_map(const ControlGrid& cg, std::span<const double> points);
Mat2 jacobian(const TransformMap& map, Vec2 ref);
double det(const Mat2& j, int dim);
double det_grid(const TransformMap& map, const CartesianGrid& grid);

// Newton inverse of a map; the 2D version seeds Newton from a projective guess inside the image quad.
class InverseMap {
 public:
  InverseMap(const TransformMap& map, const CartesianGrid& lattice);
  explicit InverseMap(const TransformMap& map);

  Vec2 operator()(Vec2 x) const;
  double operator()(double x) const { return (*this)(Vec2{x, 0.0})[0]; }
  std::vector<double> apply(std::span<const double> points) const;

 private:
  struct Quad {
    std::array<double, 9> inverse_homography;
    int i, j;
  };
  double invert_1d(double x) const;
  Vec2 invert_2d(Vec2 x) const;
  Vec2 initial_guess(Vec2 x) const;

  TransformMap map_;
  CartesianGrid lattice_;
  std::vector<Quad> quads_;
  std::vector<std::vector<int>> bins_;
  int bins_x_ = 1, bins_y_ = 1;
};

Vec2 map_inverse(const TransformMap& map, Vec2 x);

}  // namespace calibra
