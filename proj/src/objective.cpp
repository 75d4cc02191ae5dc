#include "fourshape/objective.hpp"

#include <algorithm>
#include <cmath>

namespace fourshape {

ObjectiveMode parse_objective_mode(const std::string& name) {
  if (name == "generate") return ObjectiveMode::generate;
  if (name == "saliency-keep") return ObjectiveMode::saliency_keep;
  if (name == "saliency-occlude") return ObjectiveMode::saliency_occlude;
  if (name == "patch-attack") return ObjectiveMode::patch_attack;
  raise(ErrorCode::config, "unknown objective mode \"" + name + "\"");
}

const char* objective_mode_name(ObjectiveMode mode) noexcept {
  switch (mode) {
    case ObjectiveMode::generate: return "generate";
    case ObjectiveMode::saliency_keep: return "saliency-keep";
    case ObjectiveMode::saliency_occlude: return "saliency-occlude";
    case ObjectiveMode::patch_attack: return "patch-attack";
  }
  return "?";
}

void ObjectiveSpec::validate() const {
  reg.validate();
  if (!(patch_scale > 0.0) || !(patch_scale <= 1.0)) {
    raise(ErrorCode::config, "patch_scale must lie in (0, 1]");
  }
  if (mode == ObjectiveMode::patch_attack && boxes.empty()) {
    raise(ErrorCode::config, "patch-attack needs at least one bounding box");
  }
  for (double v : patch_color) {
    if (!(v >= 0.0 && v <= 1.0)) {
      raise(ErrorCode::config, "patch colour components must lie in [0, 1]");
    }
  }
  if (patch_color.empty()) {
    raise(ErrorCode::config, "patch colour must have at least one component");
  }
}

NaturalImage composite_mask(const NaturalImage& x, const RasterGrid& mask) {
  if (mask.canvas.height != x.height || mask.canvas.width != x.width) {
    raise(ErrorCode::shape_mismatch,
          "mask is " + std::to_string(mask.canvas.height) + "x" +
              std::to_string(mask.canvas.width) + " but the image is " +
              std::to_string(x.height) + "x" + std::to_string(x.width));
  }
  NaturalImage out = x;
  for (int row = 0; row < x.height; ++row) {
    for (int col = 0; col < x.width; ++col) {
      const double m = mask.at(row, col);
      for (int ch = 0; ch < x.channels; ++ch) out.at(row, col, ch) = x.at(row, col, ch) * m;
    }
  }
  return out;
}

std::vector<double> composite_mask_backward(const NaturalImage& x,
                                            std::span<const double> upstream_image) {
  if (upstream_image.size() != x.element_count()) {
    raise(ErrorCode::shape_mismatch, "upstream image field does not match the image");
  }
  std::vector<double> upstream_mask(static_cast<std::size_t>(x.height) * x.width, 0.0);
  for (int row = 0; row < x.height; ++row) {
    for (int col = 0; col < x.width; ++col) {
      double acc = 0.0;
      for (int ch = 0; ch < x.channels; ++ch) {
        acc += upstream_image[x.index(row, col, ch)] * x.at(row, col, ch);
      }
      upstream_mask[static_cast<std::size_t>(row) * x.width + col] = acc;
    }
  }
  return upstream_mask;
}

namespace {

double color_component(std::span<const double> color, int channel, int channels) {
  if (color.size() == 1) return color[0];
  if (color.size() != static_cast<std::size_t>(channels)) {
    raise(ErrorCode::shape_mismatch, "patch colour must have 1 component or one per channel");
  }
  return color[static_cast<std::size_t>(channel)];
}

// bilinear taps into the mask for an image pixel centre, with edge clamping
struct BilinearSample {
  int c0, c1, r0, r1;
  double w00, w01, w10, w11;  // (r0,c0), (r0,c1), (r1,c0), (r1,c1)
};

BilinearSample mask_sample(const RasterGrid& mask, const BoundingBox& box, double scale,
                           int col, int row) {
  const double sw = scale * box.w;
  const double sh = scale * box.h;
  const double u = ((col + 0.5) - (box.cx - 0.5 * sw)) / sw * mask.canvas.width - 0.5;
  const double v = ((row + 0.5) - (box.cy - 0.5 * sh)) / sh * mask.canvas.height - 0.5;

  BilinearSample s;
  const double uf = std::floor(u);
  const double vf = std::floor(v);
  const double du = u - uf;
  const double dv = v - vf;
  s.c0 = std::clamp(static_cast<int>(uf), 0, mask.canvas.width - 1);
  s.c1 = std::clamp(static_cast<int>(uf) + 1, 0, mask.canvas.width - 1);
  s.r0 = std::clamp(static_cast<int>(vf), 0, mask.canvas.height - 1);
  s.r1 = std::clamp(static_cast<int>(vf) + 1, 0, mask.canvas.height - 1);
  s.w00 = (1.0 - du) * (1.0 - dv);
  s.w01 = du * (1.0 - dv);
  s.w10 = (1.0 - du) * dv;
  s.w11 = du * dv;
  return s;
}

double sample_alpha(const RasterGrid& mask, const BilinearSample& s) {
  return s.w00 * mask.at(s.r0, s.c0) + s.w01 * mask.at(s.r0, s.c1) +
         s.w10 * mask.at(s.r1, s.c0) + s.w11 * mask.at(s.r1, s.c1);
}

}  // namespace

NaturalImage render_patch(const NaturalImage& x, const RasterGrid& mask,
                          const std::vector<BoundingBox>& boxes, double patch_scale,
                          std::span<const double> patch_color) {
  if (boxes.empty()) {
    raise(ErrorCode::invalid_argument, "render_patch needs at least one box");
  }
  NaturalImage out = x;
  for (const BoundingBox& box : boxes) {
    const PixelRect rect = box_pixel_rect(box, x.width, x.height, patch_scale);
    for (int row = rect.y0; row < rect.y1; ++row) {
      for (int col = rect.x0; col < rect.x1; ++col) {
        const BilinearSample s = mask_sample(mask, box, patch_scale, col, row);
        const double alpha = sample_alpha(mask, s);
        for (int ch = 0; ch < x.channels; ++ch) {
          const double color = color_component(patch_color, ch, x.channels);
          double& v = out.at(row, col, ch);
          v = v * (1.0 - alpha) + color * alpha;
        }
      }
    }
  }
  return out;
}

std::vector<double> render_patch_backward(const NaturalImage& x, const RasterGrid& mask,
                                          const std::vector<BoundingBox>& boxes,
                                          double patch_scale,
                                          std::span<const double> patch_color,
                                          std::span<const double> upstream_image) {
  if (upstream_image.size() != x.element_count()) {
    raise(ErrorCode::shape_mismatch, "upstream image field does not match the image");
  }
  // replay the forward pass, keeping the image state below each box
  std::vector<NaturalImage> below;
  below.reserve(boxes.size());
  NaturalImage current = x;
  for (const BoundingBox& box : boxes) {
    below.push_back(current);
    const PixelRect rect = box_pixel_rect(box, x.width, x.height, patch_scale);
    for (int row = rect.y0; row < rect.y1; ++row) {
      for (int col = rect.x0; col < rect.x1; ++col) {
        const BilinearSample s = mask_sample(mask, box, patch_scale, col, row);
        const double alpha = sample_alpha(mask, s);
        for (int ch = 0; ch < x.channels; ++ch) {
          const double color = color_component(patch_color, ch, x.channels);
          double& v = current.at(row, col, ch);
          v = v * (1.0 - alpha) + color * alpha;
        }
      }
    }
  }

  std::vector<double> upstream(upstream_image.begin(), upstream_image.end());
  std::vector<double> upstream_mask(mask.values.size(), 0.0);
  for (std::size_t bi = boxes.size(); bi-- > 0;) {
    const BoundingBox& box = boxes[bi];
    const NaturalImage& base = below[bi];
    const PixelRect rect = box_pixel_rect(box, x.width, x.height, patch_scale);
    for (int row = rect.y0; row < rect.y1; ++row) {
      for (int col = rect.x0; col < rect.x1; ++col) {
        const BilinearSample s = mask_sample(mask, box, patch_scale, col, row);
        const double alpha = sample_alpha(mask, s);
        double dalpha = 0.0;
        for (int ch = 0; ch < x.channels; ++ch) {
          const double color = color_component(patch_color, ch, x.channels);
          const std::size_t idx = x.index(row, col, ch);
          dalpha += upstream[idx] * (color - base.at(row, col, ch));
          upstream[idx] *= (1.0 - alpha);  // gradient to the layers below
        }
        const std::size_t w = static_cast<std::size_t>(mask.canvas.width);
        upstream_mask[static_cast<std::size_t>(s.r0) * w + s.c0] += dalpha * s.w00;
        upstream_mask[static_cast<std::size_t>(s.r0) * w + s.c1] += dalpha * s.w01;
        upstream_mask[static_cast<std::size_t>(s.r1) * w + s.c0] += dalpha * s.w10;
        upstream_mask[static_cast<std::size_t>(s.r1) * w + s.c1] += dalpha * s.w11;
      }
    }
  }
  return upstream_mask;
}

namespace {

void require_finite_model_loss(double loss) {
  if (!std::isfinite(loss)) {
    raise(ErrorCode::numeric, "model returned a non-finite loss");
  }
}

LossBreakdown finish_classify(const FourierCoefficients& c, const ObjectiveSpec& spec,
                              const CanvasSpec& canvas, int sample_count,
                              const RasterGrid& mask, const ClassifyResult& cr, double data_sign,
                              std::vector<double> upstream_mask, double area_sign) {
  require_finite_model_loss(cr.loss);
  const RegLoss rl = reg_loss(c, spec.reg);

  LossBreakdown out;
  out.data = data_sign * cr.loss;
  out.reg = rl.value;
  out.area = mask.mean();
  out.model_outputs = cr.probabilities;
  out.total = out.data + spec.reg.lambda_reg * rl.value + area_sign * spec.reg.lambda_area * out.area;

  if (area_sign != 0.0) {
    const double adj = area_sign * spec.reg.lambda_area / static_cast<double>(mask.values.size());
    for (double& u : upstream_mask) u += adj;
  }
  out.grad = rasterize_backward(c, canvas, sample_count, upstream_mask);
  out.grad.accumulate_scaled(rl.grad, spec.reg.lambda_reg);
  return out;
}

}  // namespace

LossBreakdown loss_generate(const FourierCoefficients& c, const ObjectiveSpec& spec, Model& model,
                            const CanvasSpec& canvas, int sample_count) {
  const RasterGrid mask = rasterize_mask(c, canvas, sample_count);
  const NaturalImage input = image_from_grid(mask);
  const ClassifyResult cr = model.classify(input, spec.target_label);
  return finish_classify(c, spec, canvas, sample_count, mask, cr, +1.0, cr.pixel_grad, 0.0);
}

LossBreakdown loss_saliency_keep(const FourierCoefficients& c, const NaturalImage& x,
                                 const ObjectiveSpec& spec, Model& model, const CanvasSpec& canvas,
                                 int sample_count) {
  const RasterGrid mask = rasterize_mask(c, canvas, sample_count);
  const NaturalImage composited = composite_mask(x, mask);
  const ClassifyResult cr = model.classify(composited, spec.true_label);
  std::vector<double> upstream_mask = composite_mask_backward(x, cr.pixel_grad);
  return finish_classify(c, spec, canvas, sample_count, mask, cr, +1.0, std::move(upstream_mask),
                         +1.0);
}

LossBreakdown loss_saliency_occlude(const FourierCoefficients& c, const NaturalImage& x,
                                    const ObjectiveSpec& spec, Model& model,
                                    const CanvasSpec& canvas, int sample_count) {
  const RasterGrid mask = rasterize_mask(c, canvas, sample_count);
  const NaturalImage composited = composite_mask(x, mask);
  const ClassifyResult cr = model.classify(composited, spec.true_label);
  std::vector<double> upstream_image(cr.pixel_grad.size());
  for (std::size_t i = 0; i < upstream_image.size(); ++i) upstream_image[i] = -cr.pixel_grad[i];
  std::vector<double> upstream_mask = composite_mask_backward(x, upstream_image);
  return finish_classify(c, spec, canvas, sample_count, mask, cr, -1.0, std::move(upstream_mask),
                         -1.0);
}

LossBreakdown loss_patch_attack(const FourierCoefficients& c, const NaturalImage& x,
                                const ObjectiveSpec& spec, Model& model, const CanvasSpec& canvas,
                                int sample_count) {
  const RasterGrid mask = rasterize_mask(c, canvas, sample_count);
  const NaturalImage rendered = render_patch(x, mask, spec.boxes, spec.patch_scale,
                                             spec.patch_color);
  const DetectResult dr = model.detect(rendered, spec.boxes);
  require_finite_model_loss(dr.loss);
  std::vector<double> upstream_mask = render_patch_backward(x, mask, spec.boxes, spec.patch_scale,
                                                            spec.patch_color, dr.pixel_grad);
  const RegLoss rl = reg_loss(c, spec.reg);

  LossBreakdown out;
  out.data = dr.loss;
  out.reg = rl.value;
  out.area = mask.mean();
  out.model_outputs = dr.scores;
  out.clamped = dr.clamped;
  out.total = out.data + spec.reg.lambda_reg * rl.value;
  out.grad = rasterize_backward(c, canvas, sample_count, upstream_mask);
  out.grad.accumulate_scaled(rl.grad, spec.reg.lambda_reg);
  return out;
}

ObjectiveEngine::ObjectiveEngine(ObjectiveSpec spec, CanvasSpec canvas, int sample_count,
                                 std::optional<NaturalImage> image, std::unique_ptr<Model> model)
    : spec_(std::move(spec)),
      canvas_(canvas),
      sample_count_(sample_count),
      image_(std::move(image)),
      model_(std::move(model)) {
  spec_.validate();
  canvas_.validate();
  const bool needs_image = spec_.mode != ObjectiveMode::generate;
  if (needs_image && !image_) {
    raise(ErrorCode::config, std::string(objective_mode_name(spec_.mode)) +
                                 " needs a natural image");
  }
  if (image_) image_->validate();
}

ObjectiveEngine::ObjectiveEngine(ObjectiveSpec spec, CanvasSpec canvas, int sample_count,
                                 std::optional<NaturalImage> image)
    : ObjectiveEngine(std::move(spec), canvas, sample_count, std::move(image), nullptr) {
  model_ = make_model(spec_.model);
}

LossBreakdown ObjectiveEngine::evaluate(const FourierCoefficients& c) {
  switch (spec_.mode) {
    case ObjectiveMode::generate:
      return loss_generate(c, spec_, *model_, canvas_, sample_count_);
    case ObjectiveMode::saliency_keep:
      return loss_saliency_keep(c, *image_, spec_, *model_, canvas_, sample_count_);
    case ObjectiveMode::saliency_occlude:
      return loss_saliency_occlude(c, *image_, spec_, *model_, canvas_, sample_count_);
    case ObjectiveMode::patch_attack:
      return loss_patch_attack(c, *image_, spec_, *model_, canvas_, sample_count_);
  }
  raise(ErrorCode::config, "unhandled objective mode");
}

namespace {

int argmax(std::span<const double> values) {
  return static_cast<int>(std::distance(
      values.begin(), std::max_element(values.begin(), values.end())));
}

}  // namespace

bool ObjectiveEngine::success(const LossBreakdown& loss, double threshold) const {
  if (loss.model_outputs.empty()) return false;
  switch (spec_.mode) {
    case ObjectiveMode::generate:
      return argmax(loss.model_outputs) == spec_.target_label;
    case ObjectiveMode::saliency_keep:
      return argmax(loss.model_outputs) == spec_.true_label;
    case ObjectiveMode::saliency_occlude:
      return argmax(loss.model_outputs) != spec_.true_label;
    case ObjectiveMode::patch_attack:
      return std::all_of(loss.model_outputs.begin(), loss.model_outputs.end(),
                         [threshold](double o) { return o < threshold; });
  }
  return false;
}

}  // namespace fourshape
