#include "calibra/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "calibra/errors.hpp"

namespace calibra {

Constraints Constraints::from_control_grid(const ControlGrid& cg) {
  Constraints c;
  c.chains = cg.chains();
  for (const auto& ch : c.chains) c.gaps.push_back(cg.gap(ch.axis));
  c.scale.assign(cg.free_count(), 1.0);
  for (int q = 0; q < cg.free_count(); ++q) c.scale[q] = cg.domain().length(cg.free_slots()[q] % cg.dim());
  c.restoration_point = cg.reference_theta();
  return c;
}

Constraints Constraints::replicated(int copies, int vars_per_copy) const {
  Constraints out;
  out.nonlinear_margin = nonlinear_margin;
  for (int k = 0; k < copies; ++k) {
    for (std::size_t i = 0; i < chains.size(); ++i) {
      Chain ch = chains[i];
      for (auto& v : ch.vars) v += k * vars_per_copy;
      out.chains.push_back(ch);
      out.gaps.push_back(gaps[i]);
    }
    out.restoration_point.insert(out.restoration_point.end(), restoration_point.begin(), restoration_point.end());
    out.scale.insert(out.scale.end(), scale.begin(), scale.end());
  }
  return out;
}

void project_chain(std::span<double> x, const Chain& chain, double gap) {
  const std::size_t n = chain.vars.size();
  if (n == 0) return;
  const double lo = chain.lower;
  const double hi = chain.upper - static_cast<double>(n + 1) * gap;
  if (lo > hi + 1e-15) throw InvalidControlPoints("chain has no room for its points with the required gap");
  // Shift out the gaps, then pool adjacent violators.
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[chain.vars[i]] - static_cast<double>(i + 1) * gap;
  std::vector<double> block_value;
  std::vector<std::size_t> block_size;
  for (std::size_t i = 0; i < n; ++i) {
    block_value.push_back(y[i]);
    block_size.push_back(1);
    while (block_value.size() > 1 && block_value[block_value.size() - 2] > block_value.back()) {
      const std::size_t b = block_value.size();
      const double sa = block_size[b - 2], sb = block_size[b - 1];
      block_value[b - 2] = (sa * block_value[b - 2] + sb * block_value[b - 1]) / (sa + sb);
      block_size[b - 2] += block_size[b - 1];
      block_value.pop_back();
      block_size.pop_back();
    }
  }
  std::size_t i = 0;
  for (std::size_t b = 0; b < block_value.size(); ++b)
    for (std::size_t k = 0; k < block_size[b]; ++k, ++i) y[i] = std::clamp(block_value[b], lo, std::max(lo, hi));
  for (std::size_t k = 0; k < n; ++k) x[chain.vars[k]] = y[k] + static_cast<double>(k + 1) * gap;
}

void project(std::span<double> x, const Constraints& c) {
  for (std::size_t i = 0; i < c.chains.size(); ++i) project_chain(x, c.chains[i], c.gaps[i]);
}

bool linear_feasible(std::span<const double> x, const Constraints& c, double slack) {
  for (std::size_t i = 0; i < c.chains.size(); ++i) {
    const auto& ch = c.chains[i];
    const double gap = c.gaps[i];
    double prev = ch.lower;
    for (int v : ch.vars) {
      if (x[v] < prev + gap - slack) return false;
      prev = x[v];
    }
    if (prev > ch.upper - gap + slack) return false;
  }
  return true;
}

namespace {

class Scaled {
 public:
  Scaled(const Objective& f, const Constraints& c, std::size_t n, double penalty)
      : f_(f), c_(c), scale_(c.scale.empty() ? std::vector<double>(n, 1.0) : c.scale), penalty_(penalty) {
    if (scale_.size() != n) throw ShapeMismatch("constraint scale length differs from the variable count");
  }

  std::vector<double> to_x(const Eigen::VectorXd& z) const {
    std::vector<double> x(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) x[i] = z[i] * scale_[i];
    return x;
  }
  Eigen::VectorXd to_z(std::span<const double> x) const {
    Eigen::VectorXd z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] / scale_[i];
    return z;
  }
  Eigen::VectorXd projected(const Eigen::VectorXd& z) const {
    auto x = to_x(z);
    project(x, c_);
    return to_z(x);
  }
  double margin(const Eigen::VectorXd& z) const {
    if (!c_.nonlinear_margin) return 1.0;
    const double m = c_.nonlinear_margin(to_x(z));
    return std::isfinite(m) ? m : -1.0;
  }
  double value(const Eigen::VectorXd& z) {
    ++evaluations;
    const auto x = to_x(z);
    if (c_.nonlinear_margin && !(c_.nonlinear_margin(x) >= 0.0)) {
      nonlinear_blocked = true;
      return penalty_;
    }
    double v;
    try {
      v = f_(x);
    } catch (const Error&) {
      return penalty_;
    }
    return std::isfinite(v) ? std::min(v, penalty_) : penalty_;
  }
  bool rejected(double v) const { return v >= penalty_; }

  int evaluations = 0;
  bool nonlinear_blocked = false;

 private:
  const Objective& f_;
  const Constraints& c_;
  std::vector<double> scale_;
  double penalty_;
};

}  // namespace

MinimizeResult minimize_constrained(const Objective& objective, std::span<const double> x0, const Constraints& c,
                                    const MinimizeOptions& o) {
  const std::size_t n = x0.size();
  MinimizeResult r;
  for (double v : x0)
    if (!std::isfinite(v)) throw Error("minimize_constrained needs a finite starting point");
  Scaled s(objective, c, n, o.penalty);

  if (o.max_iter <= 0) {
    r.x.assign(x0.begin(), x0.end());
    r.value = s.value(s.to_z(x0));
    r.evaluations = s.evaluations;
    r.feasible = linear_feasible(r.x, c) && !s.rejected(r.value);
    r.max_iter_reached = true;
    r.message = "max_iter reached before any iteration";
    return r;
  }

  Eigen::VectorXd z = s.projected(s.to_z(x0));
  double f = s.value(z);
  if (s.rejected(f) && !c.restoration_point.empty()) {
    // Walk back toward the known feasible point until the objective accepts the map.
    const Eigen::VectorXd anchor = s.projected(s.to_z(c.restoration_point));
    double good = 0.0, bad = 1.0;
    Eigen::VectorXd best = anchor;
    double fbest = s.value(anchor);
    for (int k = 0; k < 30; ++k) {
      const double mid = 0.5 * (good + bad);
      const Eigen::VectorXd trial = anchor + mid * (z - anchor);
      const double ft = s.value(trial);
      if (s.rejected(ft)) {
        bad = mid;
      } else {
        good = mid;
        best = trial;
        fbest = ft;
      }
    }
    z = best;
    f = fbest;
  }
  if (s.rejected(f)) {
    r.x = s.to_x(z);
    r.value = f;
    r.feasible = false;
    r.evaluations = s.evaluations;
    r.message = "no feasible starting point found";
    return r;
  }

  const double h = o.fd_step;
  auto gradient = [&](const Eigen::VectorXd& at, double fat) {
    Eigen::VectorXd g(n);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd t = at;
      t[i] += h;
      double ft = s.value(t);
      if (!s.rejected(ft)) {
        g[i] = (ft - fat) / h;
        continue;
      }
      t[i] = at[i] - h;
      ft = s.value(t);
      g[i] = s.rejected(ft) ? 0.0 : (fat - ft) / h;
    }
    return g;
  };

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;  // H is still a scaled identity
  Eigen::VectorXd g = gradient(z, f);
  for (r.iterations = 0; r.iterations < o.max_iter;) {
    ++r.iterations;
    const double gnorm = g.cwiseAbs().maxCoeff();
    if (gnorm == 0.0 || (s.projected(z - g) - z).cwiseAbs().maxCoeff() <= 1e-14) {
      r.converged = true;
      r.message = "projected gradient vanished";
      break;
    }
    if (fresh) H = Eigen::MatrixXd::Identity(n, n) * (0.05 / gnorm);

    bool accepted = false;
    bool restarted = fresh;
    s.nonlinear_blocked = false;
    Eigen::VectorXd z_new;
    double f_new = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Eigen::VectorXd d = -H * g;
      if (g.dot(d) >= 0.0) {
        H = Eigen::MatrixXd::Identity(n, n) * (0.05 / gnorm);
        fresh = restarted = true;
        d = -H * g;
      }
      double step = 1.0;
      for (int k = 0; k < 40; ++k, step *= 0.5) {
        const Eigen::VectorXd trial = s.projected(z + step * d);
        if ((trial - z).cwiseAbs().maxCoeff() == 0.0) break;
        const double ft = s.value(trial);
        if (!s.rejected(ft) && ft <= f + 1e-4 * g.dot(trial - z)) {
          z_new = trial;
          f_new = ft;
          accepted = true;
          break;
        }
      }
      if (!accepted && !fresh) {
        H = Eigen::MatrixXd::Identity(n, n) * (0.05 / gnorm);
        fresh = restarted = true;
      } else {
        break;
      }
    }
    if (!accepted && s.nonlinear_blocked && c.nonlinear_margin) {
      // Bend the steepest-descent direction along the active nonlinear constraint.
      Eigen::VectorXd a(n);
      const double m0 = s.margin(z);
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd t = z;
        t[i] += h;
        a[i] = (s.margin(t) - m0) / h;
      }
      const double an = a.norm();
      if (an > 0.0) {
        Eigen::VectorXd d = -(0.05 / gnorm) * g;
        const double ad = a.dot(d);
        if (ad < 0.0) d -= (ad / (an * an)) * a;
        d += 0.1 * d.norm() / an * a;
        if (g.dot(d) < 0.0) {
          double step = 1.0;
          for (int k = 0; k < 40; ++k, step *= 0.5) {
            const Eigen::VectorXd trial = s.projected(z + step * d);
            if ((trial - z).cwiseAbs().maxCoeff() == 0.0) break;
            const double ft = s.value(trial);
            if (!s.rejected(ft) && ft <= f + 1e-4 * g.dot(trial - z)) {
              z_new = trial;
              f_new = ft;
              accepted = true;
              break;
            }
          }
        }
      }
      H = Eigen::MatrixXd::Identity(n, n) * (0.05 / gnorm);
      fresh = restarted = true;
    }
    if (!accepted) {
      r.converged = true;
      r.message = "no descent along the projected arc";
      break;
    }
    const Eigen::VectorXd step_vec = z_new - z;
    const double df = f - f_new;
    z = z_new;
    f = f_new;
    // Only quasi-Newton steps may stop on step size.
    if (!restarted && step_vec.cwiseAbs().maxCoeff() < o.xtol) {
      r.converged = true;
      r.message = "step below tolerance";
      break;
    }
    if (!restarted && df <= o.ftol * std::max(std::abs(f), o.ftol)) {
      r.converged = true;
      r.message = "objective change below tolerance";
      break;
    }
    const Eigen::VectorXd g_new = gradient(z, f);
    const Eigen::VectorXd y = g_new - g;
    const double sy = step_vec.dot(y);
    if (sy > 1e-12 * step_vec.norm() * y.norm()) {
      if (fresh) H = Eigen::MatrixXd::Identity(n, n) * (sy / y.dot(y));
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * step_vec * y.transpose()) * H * (I - rho * y * step_vec.transpose()) +
          rho * step_vec * step_vec.transpose();
      fresh = false;
    }
    g = g_new;
  }
  if (!r.converged && r.iterations >= o.max_iter) {
    r.max_iter_reached = true;
    r.message = "max_iter reached";
  }
  r.x = s.to_x(z);
  r.value = f;
  r.evaluations = s.evaluations;
  r.feasible = linear_feasible(r.x, c, 1e-9) && !s.rejected(f);
  return r;
}

}  // namespace calibra
