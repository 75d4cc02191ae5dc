#include "fourshape/contour.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fourshape {

FourierCoefficients::FourierCoefficients(int order) : order_(order) {
  if (order < 0) {
    raise(ErrorCode::invalid_argument, "harmonic order must be non-negative");
  }
  flat_.assign(2 * static_cast<std::size_t>(2 * order + 1), 0.0);
}

FourierCoefficients FourierCoefficients::circle(int order, double radius) {
  if (order < 1) {
    raise(ErrorCode::invalid_argument, "circle initialization needs order >= 1");
  }
  FourierCoefficients c(order);
  c.set_coeff(1, {radius, 0.0});
  return c;
}

FourierCoefficients FourierCoefficients::from_flat(int order, std::vector<double> flat) {
  FourierCoefficients c(order);
  if (flat.size() != c.flat_.size()) {
    raise(ErrorCode::invalid_argument,
          "flat coefficient vector has " + std::to_string(flat.size()) + " entries, expected " +
              std::to_string(c.flat_.size()));
  }
  c.flat_ = std::move(flat);
  return c;
}

std::size_t FourierCoefficients::flat_index(int k, int order) {
  return 2 * static_cast<std::size_t>(k + order);
}

std::complex<double> FourierCoefficients::coeff(int k) const {
  const std::size_t i = flat_index(k, order_);
  return {flat_[i], flat_[i + 1]};
}

void FourierCoefficients::set_coeff(int k, std::complex<double> value) {
  const std::size_t i = flat_index(k, order_);
  flat_[i] = value.real();
  flat_[i + 1] = value.imag();
}

double FourierCoefficients::a(int k) const { return flat_[flat_index(k, order_)]; }
double FourierCoefficients::b(int k) const { return flat_[flat_index(k, order_) + 1]; }

bool FourierCoefficients::all_finite() const noexcept {
  return std::all_of(flat_.begin(), flat_.end(), [](double v) { return std::isfinite(v); });
}

void FourierCoefficients::require_finite() const {
  if (!all_finite()) {
    raise(ErrorCode::invalid_coefficients, "coefficient store contains non-finite values");
  }
}

namespace {

// c_k e^{ikt} = (a cos kt - b sin kt) + i (a sin kt + b cos kt)
Point point_at(std::span<const double> flat, int order, double t) {
  double x = 0.0, y = 0.0;
  for (int k = -order; k <= order; ++k) {
    const std::size_t i = FourierCoefficients::flat_index(k, order);
    const double a = flat[i], b = flat[i + 1];
    const double ck = std::cos(k * t), sk = std::sin(k * t);
    x += a * ck - b * sk;
    y += a * sk + b * ck;
  }
  return {x, y};
}

// d/dt c_k e^{ikt} = k * [-(a sin kt + b cos kt) + i (a cos kt - b sin kt)]
Point tangent_at(std::span<const double> flat, int order, double t) {
  double dx = 0.0, dy = 0.0;
  for (int k = -order; k <= order; ++k) {
    const std::size_t i = FourierCoefficients::flat_index(k, order);
    const double a = flat[i], b = flat[i + 1];
    const double ck = std::cos(k * t), sk = std::sin(k * t);
    dx += k * (-a * sk - b * ck);
    dy += k * (a * ck - b * sk);
  }
  return {dx, dy};
}

}  // namespace

Point evaluate_contour(const FourierCoefficients& c, double t) {
  c.require_finite();
  if (!std::isfinite(t)) {
    raise(ErrorCode::invalid_argument, "contour parameter t must be finite");
  }
  return point_at(c.flat(), c.order(), t);
}

Point evaluate_derivative(const FourierCoefficients& c, double t) {
  c.require_finite();
  if (!std::isfinite(t)) {
    raise(ErrorCode::invalid_argument, "contour parameter t must be finite");
  }
  return tangent_at(c.flat(), c.order(), t);
}

int sampling_floor(int order) { return std::max(1, 4 * order); }

int default_sample_count(int order) { return std::max(256, 8 * order); }

ContourSamples sample_contour(const FourierCoefficients& c, int count) {
  c.require_finite();
  const int floor = sampling_floor(c.order());
  if (count < floor) {
    raise(ErrorCode::config, "sample count " + std::to_string(count) +
                                 " is below the sampling floor 4*K = " + std::to_string(floor) +
                                 " for order K = " + std::to_string(c.order()));
  }
  ContourSamples s;
  s.count = count;
  s.t.resize(count);
  s.x.resize(count);
  s.y.resize(count);
  s.dx.resize(count);
  s.dy.resize(count);
  const double step = 2.0 * std::numbers::pi / count;
  const auto flat = c.flat();
  const int order = c.order();
  for (int j = 0; j < count; ++j) {
    const double t = j * step;
    s.t[j] = t;
    const Point p = point_at(flat, order, t);
    const Point d = tangent_at(flat, order, t);
    s.x[j] = p.x;
    s.y[j] = p.y;
    s.dx[j] = d.x;
    s.dy[j] = d.y;
  }
  return s;
}

std::vector<double> amplitude_spectrum(const FourierCoefficients& c) {
  c.require_finite();
  std::vector<double> amps(static_cast<std::size_t>(c.term_count()));
  for (int k = -c.order(); k <= c.order(); ++k) {
    amps[static_cast<std::size_t>(k + c.order())] = std::hypot(c.a(k), c.b(k));
  }
  return amps;
}

}  // namespace fourshape
