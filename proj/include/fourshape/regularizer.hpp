#pragma once

#include "fourshape/contour.hpp"
#include "fourshape/raster.hpp"

namespace fourshape {

struct RegularizerConfig {
  double lambda = 2.0;       // fundamental dominance factor, > 1
  double gamma = 0.25;       // per-harmonic amplitude cap, in (0, 1)
  double lambda_reg = 0.1;   // weight of the spectral penalty in the total loss
  double lambda_area = 1.0;  // weight of the mask-area term

  void validate() const;
};

// S_fund = |c_1| + |c_-1|,  S_harm = sum_{|k|=2..K} |c_k|.  c_0 is excluded
// from both sums.
struct SpectrumSums {
  double fundamental = 0.0;
  double harmonic = 0.0;
};

SpectrumSums fundamental_and_harmonic_sums(const FourierCoefficients& c);

// Signal-energy penalty
//   L_reg = ReLU(lambda * S_harm - S_fund) + sum_{|k|=2..K} ReLU(|c_k| - gamma * S_fund)
// Zero exactly when the dominance and per-harmonic constraints both hold.
// |c_k| is differentiated as (a_k, b_k)/|c_k| with subgradient 0 at the
// origin; ReLU takes subgradient 0 at 0.
struct RegLoss {
  double value = 0.0;
  CoefficientGradient grad;
};

RegLoss reg_loss(const FourierCoefficients& c, const RegularizerConfig& cfg);

// mean(mask) plus the adjoint of the mean, ready to feed rasterize_backward.
struct AreaTerm {
  double value = 0.0;
  std::vector<double> upstream;  // 1/(H*W) everywhere
};

AreaTerm area_term(const RasterGrid& mask);

}  // namespace fourshape
