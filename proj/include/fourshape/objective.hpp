#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fourshape/image.hpp"
#include "fourshape/model.hpp"
#include "fourshape/regularizer.hpp"

namespace fourshape {

enum class ObjectiveMode { generate, saliency_keep, saliency_occlude, patch_attack };

ObjectiveMode parse_objective_mode(const std::string& name);
const char* objective_mode_name(ObjectiveMode mode) noexcept;

struct ObjectiveSpec {
  ObjectiveMode mode = ObjectiveMode::generate;
  int target_label = 0;                       // generate
  int true_label = 0;                         // saliency modes
  std::vector<BoundingBox> boxes;             // patch mode
  double patch_scale = 0.6;
  std::vector<double> patch_color = {1.0, 1.0, 1.0};
  RegularizerConfig reg;
  ModelBinding model;

  void validate() const;
};

// x * mask, the mask broadcast across channels.
NaturalImage composite_mask(const NaturalImage& x, const RasterGrid& mask);

// Adjoint of composite_mask with respect to the mask values:
// upstream_mask[p] = sum_c upstream_image[p,c] * x[p,c].
std::vector<double> composite_mask_backward(const NaturalImage& x,
                                            std::span<const double> upstream_image);

// Alpha-composites the mask, affinely scaled to patch_scale * (box w, h) and
// centred on each box, as a solid-colour occluder:
//   out = x * (1 - alpha) + patch_color * alpha
// with alpha bilinearly resampled from the mask. Pixels outside every scaled
// box are left bit-identical to x.
NaturalImage render_patch(const NaturalImage& x, const RasterGrid& mask,
                          const std::vector<BoundingBox>& boxes, double patch_scale,
                          std::span<const double> patch_color);

// Adjoint of render_patch with respect to the mask values.
std::vector<double> render_patch_backward(const NaturalImage& x, const RasterGrid& mask,
                                          const std::vector<BoundingBox>& boxes,
                                          double patch_scale,
                                          std::span<const double> patch_color,
                                          std::span<const double> upstream_image);

struct LossBreakdown {
  double total = 0.0;
  double data = 0.0;  // the model term, sign as it enters the total
  double reg = 0.0;   // unweighted L_reg
  double area = 0.0;  // mean of the normalized mask
  CoefficientGradient grad;
  std::vector<double> model_outputs;  // class probabilities or objectness scores
  bool clamped = false;
};

// The four optimization objectives. Each returns the loss value and its
// exact gradient with respect to the flat coefficient vector.
LossBreakdown loss_generate(const FourierCoefficients& c, const ObjectiveSpec& spec, Model& model,
                            const CanvasSpec& canvas, int sample_count);
LossBreakdown loss_saliency_keep(const FourierCoefficients& c, const NaturalImage& x,
                                 const ObjectiveSpec& spec, Model& model, const CanvasSpec& canvas,
                                 int sample_count);
LossBreakdown loss_saliency_occlude(const FourierCoefficients& c, const NaturalImage& x,
                                    const ObjectiveSpec& spec, Model& model,
                                    const CanvasSpec& canvas, int sample_count);
LossBreakdown loss_patch_attack(const FourierCoefficients& c, const NaturalImage& x,
                                const ObjectiveSpec& spec, Model& model, const CanvasSpec& canvas,
                                int sample_count);

// Owns the bound model and the natural image and dispatches on the mode.
class ObjectiveEngine {
public:
  ObjectiveEngine(ObjectiveSpec spec, CanvasSpec canvas, int sample_count,
                  std::optional<NaturalImage> image, std::unique_ptr<Model> model);

  // Convenience constructor that binds spec.model itself.
  ObjectiveEngine(ObjectiveSpec spec, CanvasSpec canvas, int sample_count,
                  std::optional<NaturalImage> image);

  LossBreakdown evaluate(const FourierCoefficients& c);

  // Mode-specific success rule: generate -> target top-1; keep -> true
  // top-1 retained; occlude -> true class displaced; patch -> all scores
  // below the threshold.
  bool success(const LossBreakdown& loss, double threshold) const;

  const ObjectiveSpec& spec() const noexcept { return spec_; }
  const CanvasSpec& canvas() const noexcept { return canvas_; }
  int sample_count() const noexcept { return sample_count_; }
  Model& model() noexcept { return *model_; }

private:
  ObjectiveSpec spec_;
  CanvasSpec canvas_;
  int sample_count_;
  std::optional<NaturalImage> image_;
  std::unique_ptr<Model> model_;
};

}  // namespace fourshape
