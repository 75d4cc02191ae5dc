#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fourshape/contour.hpp"

namespace fourshape::oracle {

// Brute-force references used by tests, the acceptance suite, and the
// gradcheck CLI verb. These deliberately avoid the production winding /
// backward code paths; only contour evaluation is shared.

struct FiniteDiffConfig {
  double h = 1e-5;                    // central-difference step
  double kink_exclusion_band = 5e-3;  // raw-winding units around 0 and +-1
};

// One probe of the differentiated function: its value plus optional raw
// winding samples used for kink detection.
struct FdProbe {
  double loss = 0.0;
  std::vector<double> kink_values;
};

using ProbeFn = std::function<FdProbe(std::span<const double>)>;
using LossFn = std::function<double(std::span<const double>)>;

struct FdResult {
  std::vector<double> gradient;
  std::vector<bool> excluded;  // parameter crossed (or nearly crossed) an abs/clip kink
};

// Central differences per parameter. When probes supply kink values, a
// parameter is flagged if, between its two probe points, any raw value
// crosses one of the kinks {-1, 0, +1} or comes within
// min(band, 4*|delta|) of one, where delta is that value's own movement.
FdResult fd_gradient(const ProbeFn& probe, std::span<const double> params,
                     const FiniteDiffConfig& cfg);
FdResult fd_gradient(const LossFn& loss, std::span<const double> params,
                     const FiniteDiffConfig& cfg);

enum class PointClass { inside, outside, boundary };

// Even-odd ray casting against a closed polygon. `boundary` is reported for
// points within 1e-9 of an edge.
PointClass point_in_polygon(Point p, std::span<const Point> polygon);

// Minimum distance from p to the polygon's edges.
double distance_to_polygon(Point p, std::span<const Point> polygon);

// High-resolution rendition of the winding quadrature, written out directly
// from the line-integral discretization. Ground truth for convergence tests.
double quadrature_winding(const FourierCoefficients& c, Point p, int sample_count = 65536,
                          double epsilon = 1e-9);

// Comparison of an analytic gradient against fd_gradient.
struct GradCheckReport {
  int checked = 0;   // parameters compared (excluded ones are not)
  int excluded = 0;  // parameters skipped by kink detection
  int failed = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::vector<std::size_t> failed_indices;

  double pass_fraction() const {
    return checked == 0 ? 1.0 : 1.0 - static_cast<double>(failed) / checked;
  }
};

GradCheckReport compare_gradients(std::span<const double> analytic, const FdResult& fd,
                                  double rel_tol, double abs_tol);

}  // namespace fourshape::oracle
