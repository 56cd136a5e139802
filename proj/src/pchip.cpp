#include "calibra/pchip.hpp"

#include <algorithm>
#include <cmath>

#include "calibra/errors.hpp"

namespace calibra {

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

double end_slope(double h0, double h1, double m0, double m1) {
  double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
  if (sign(d) != sign(m0))
    d = 0.0;
  else if (sign(m0) != sign(m1) && std::abs(d) > 3.0 * std::abs(m0))
    d = 3.0 * m0;
  return d;
}

}  // namespace

Pchip::Pchip(std::vector<double> knots, std::vector<double> values) : x_(std::move(knots)), y_(std::move(values)) {
  const std::size_t n = x_.size();
  if (n < 2) throw InvalidControlPoints("pchip needs at least two knots");
  if (y_.size() != n) throw ShapeMismatch("pchip knots and values differ in length");
  for (std::size_t k = 0; k + 1 < n; ++k)
    if (!(x_[k] < x_[k + 1])) throw InvalidControlPoints("pchip knots must be strictly increasing");
  std::vector<double> h(n - 1), m(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = x_[k + 1] - x_[k];
    m[k] = (y_[k + 1] - y_[k]) / h[k];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = m[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (m[k - 1] == 0.0 || m[k] == 0.0 || sign(m[k - 1]) != sign(m[k])) continue;
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    d_[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
  }
  d_[0] = end_slope(h[0], h[1], m[0], m[1]);
  d_[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
}

std::size_t Pchip::interval(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(k, x_.size() - 2);
}

void Pchip::evaluate(double x, double& value, double& slope) const {
  if (x <= x_.front()) {
    slope = d_.front();
    value = y_.front() + slope * (x - x_.front());
    return;
  }
  if (x >= x_.back()) {
    slope = d_.back();
    value = y_.back() + slope * (x - x_.back());
    return;
  }
  const std::size_t k = interval(x);
  const double h = x_[k + 1] - x_[k];
  const double t = (x - x_[k]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double y0 = y_[k], y1 = y_[k + 1], d0 = d_[k] * h, d1 = d_[k + 1] * h;
  value = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1;
  slope = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * d0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * d1) / h;
}

double Pchip::operator()(double x) const {
  double v, s;
  evaluate(x, v, s);
  return v;
}

double Pchip::derivative(double x) const {
  double v, s;
  evaluate(x, v, s);
  return s;
}

Pchip pchip_fit(std::span<const double> knots, std::span<const double> values) {
  return Pchip({knots.begin(), knots.end()}, {values.begin(), values.end()});
}

}  // namespace calibra
