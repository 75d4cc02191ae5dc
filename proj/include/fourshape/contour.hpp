#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "fourshape/error.hpp"

namespace fourshape {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Closed 2D contour as a truncated complex Fourier series
//
//   F(t) = sum_{k=-K..K} c_k e^{ikt},   c_k = a_k + i*b_k,   t in [0, 2*pi).
//
// c_0 is the centroid, c_{+-1} the fundamental ellipse, |k| >= 2 the
// harmonics. Parameters are stored flat as [a_{-K}, b_{-K}, ..., a_K, b_K];
// every gradient and optimizer buffer in the project shares this layout.
class FourierCoefficients {
public:
  explicit FourierCoefficients(int order);

  // A circle of the given radius: c_1 = radius, everything else zero.
  static FourierCoefficients circle(int order, double radius);
  static FourierCoefficients from_flat(int order, std::vector<double> flat);

  int order() const noexcept { return order_; }  // K
  int term_count() const noexcept { return 2 * order_ + 1; }
  std::size_t parameter_count() const noexcept { return flat_.size(); }

  std::complex<double> coeff(int k) const;
  void set_coeff(int k, std::complex<double> value);
  double a(int k) const;
  double b(int k) const;

  std::span<const double> flat() const noexcept { return flat_; }
  std::vector<double>& flat_mutable() noexcept { return flat_; }

  // Index of a_k in the flat layout; b_k follows at +1.
  static std::size_t flat_index(int k, int order);

  bool all_finite() const noexcept;
  void require_finite() const;

private:
  int order_;
  std::vector<double> flat_;
};

// Uniform parameter samples t_j = j*(2*pi/N) with contour points and
// tangents evaluated at each t_j.
struct ContourSamples {
  int count = 0;
  std::vector<double> t;
  std::vector<double> x, y;    // F(t_j)
  std::vector<double> dx, dy;  // F'(t_j)
};

// F(t) as (Re, Im). Throws invalid_coefficients on non-finite input.
Point evaluate_contour(const FourierCoefficients& c, double t);

// dF/dt = sum ik c_k e^{ikt} as (Re, Im).
Point evaluate_derivative(const FourierCoefficients& c, double t);

// Minimum sample count for order K; below this high harmonics alias in
// the winding sum.
int sampling_floor(int order);

// max(256, 8*K)
int default_sample_count(int order);

// Uniform samples; requires count >= sampling_floor(K).
ContourSamples sample_contour(const FourierCoefficients& c, int count);

// |c_k| for k = -K..K.
std::vector<double> amplitude_spectrum(const FourierCoefficients& c);

}  // namespace fourshape
