#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fourshape/image.hpp"

namespace fourshape {

enum class ModelKind { builtin_linear, builtin_mlp, builtin_detector, external_adapter };

ModelKind parse_model_kind(const std::string& name);
const char* model_kind_name(ModelKind kind) noexcept;

struct ModelBinding {
  ModelKind kind = ModelKind::builtin_linear;
  std::filesystem::path weights;      // builtin kinds: sidecar JSON path
  std::vector<std::string> command;   // external adapter argv
  int timeout_ms = 10000;
};

struct ClassifyResult {
  double loss = 0.0;                  // -log p[target]
  std::vector<double> probabilities;
  std::vector<double> pixel_grad;     // d(loss)/d(pixel), image layout
};

struct DetectResult {
  double loss = 0.0;                  // sum_j -log(1 - o_j)
  std::vector<double> scores;         // objectness o_j per box
  std::vector<double> pixel_grad;
  bool clamped = false;               // some o_j hit the 1 - 1e-7 guard
};

// A bound classification or detection network: forward pass plus exact
// pixel gradients of its canonical data loss.
class Model {
public:
  virtual ~Model() = default;
  virtual bool is_detector() const noexcept = 0;
  virtual int class_count() const noexcept { return 0; }
  virtual ClassifyResult classify(const NaturalImage& image, int target) = 0;
  virtual DetectResult detect(const NaturalImage& image, const std::vector<BoundingBox>& boxes) = 0;
};

std::unique_ptr<Model> make_model(const ModelBinding& binding);

// --- fixed toy weights -------------------------------------------------
// Builtin models are loaded, never trained. Tensors live in WNDR float
// files next to a JSON sidecar that names the files and shapes.

struct LinearWeights {
  int height = 0, width = 0, channels = 1, classes = 0;
  std::vector<double> w;  // classes x (h*w*ch), row-major
  std::vector<double> b;  // classes
};

struct MlpWeights {
  int height = 0, width = 0, channels = 1, classes = 0, hidden = 0;
  std::vector<double> w1, b1;  // hidden x D, hidden
  std::vector<double> w2, b2;  // classes x hidden, classes
};

struct DetectorWeights {
  double weight = -12.0;  // slope on the in-box mean intensity
  double bias = 3.0;
};

void save_weights(const LinearWeights& weights, const std::filesystem::path& sidecar);
void save_weights(const MlpWeights& weights, const std::filesystem::path& sidecar);
void save_weights(const DetectorWeights& weights, const std::filesystem::path& sidecar);

LinearWeights make_random_linear(int height, int width, int channels, int classes,
                                 std::uint64_t seed);
MlpWeights make_random_mlp(int height, int width, int channels, int classes, int hidden,
                           std::uint64_t seed);

// Integer pixel block covered by a box after clamping to the image;
// [x0, x1) x [y0, y1). Errors (naming the box) when nothing remains.
struct PixelRect {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
};
PixelRect box_pixel_rect(const BoundingBox& box, int width, int height, double scale = 1.0);

}  // namespace fourshape
