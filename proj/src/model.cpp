#include "fourshape/model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "fourshape/adapter.hpp"
#include "fourshape/io.hpp"
#include "fourshape/rng.hpp"

namespace fourshape {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "builtin-linear") return ModelKind::builtin_linear;
  if (name == "builtin-mlp") return ModelKind::builtin_mlp;
  if (name == "builtin-detector") return ModelKind::builtin_detector;
  if (name == "external-adapter") return ModelKind::external_adapter;
  raise(ErrorCode::config, "unknown model kind \"" + name + "\"");
}

const char* model_kind_name(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::builtin_linear: return "builtin-linear";
    case ModelKind::builtin_mlp: return "builtin-mlp";
    case ModelKind::builtin_detector: return "builtin-detector";
    case ModelKind::external_adapter: return "external-adapter";
  }
  return "?";
}

namespace {

void require_finite(std::span<const double> values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) raise(ErrorCode::numeric, what + " contains non-finite values");
  }
}

void check_input_shape(const NaturalImage& image, int h, int w, int ch) {
  if (image.height != h || image.width != w || image.channels != ch) {
    raise(ErrorCode::shape_mismatch,
          "model expects " + std::to_string(h) + "x" + std::to_string(w) + "x" +
              std::to_string(ch) + " input, got " + std::to_string(image.height) + "x" +
              std::to_string(image.width) + "x" + std::to_string(image.channels));
  }
}

// softmax with the max-shift; returns probabilities and -log p[target]
double stable_softmax(std::span<const double> logits, int target, std::vector<double>& probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return std::log(sum) - (logits[static_cast<std::size_t>(target)] - m);
}

class LinearClassifier final : public Model {
public:
  explicit LinearClassifier(LinearWeights weights) : w_(std::move(weights)) {}

  bool is_detector() const noexcept override { return false; }
  int class_count() const noexcept override { return w_.classes; }

  ClassifyResult classify(const NaturalImage& image, int target) override {
    check_input_shape(image, w_.height, w_.width, w_.channels);
    if (target < 0 || target >= w_.classes) {
      raise(ErrorCode::invalid_argument, "target class out of range");
    }
    const std::size_t d = image.element_count();
    std::vector<double> logits(static_cast<std::size_t>(w_.classes), 0.0);
    for (int c = 0; c < w_.classes; ++c) {
      const double* row = w_.w.data() + static_cast<std::size_t>(c) * d;
      double acc = w_.b[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < d; ++i) acc += row[i] * image.values[i];
      logits[static_cast<std::size_t>(c)] = acc;
    }
    ClassifyResult out;
    out.loss = stable_softmax(logits, target, out.probabilities);

    std::vector<double> dlogits = out.probabilities;
    dlogits[static_cast<std::size_t>(target)] -= 1.0;
    out.pixel_grad.assign(d, 0.0);
    for (int c = 0; c < w_.classes; ++c) {
      const double* row = w_.w.data() + static_cast<std::size_t>(c) * d;
      const double g = dlogits[static_cast<std::size_t>(c)];
      if (g == 0.0) continue;
      for (std::size_t i = 0; i < d; ++i) out.pixel_grad[i] += g * row[i];
    }
    return out;
  }

  DetectResult detect(const NaturalImage&, const std::vector<BoundingBox>&) override {
    raise(ErrorCode::config, "builtin-linear is a classifier, not a detector");
  }

private:
  LinearWeights w_;
};

class MlpClassifier final : public Model {
public:
  explicit MlpClassifier(MlpWeights weights) : w_(std::move(weights)) {}

  bool is_detector() const noexcept override { return false; }
  int class_count() const noexcept override { return w_.classes; }

  ClassifyResult classify(const NaturalImage& image, int target) override {
    check_input_shape(image, w_.height, w_.width, w_.channels);
    if (target < 0 || target >= w_.classes) {
      raise(ErrorCode::invalid_argument, "target class out of range");
    }
    const std::size_t d = image.element_count();
    const std::size_t hdim = static_cast<std::size_t>(w_.hidden);

    std::vector<double> hidden(hdim);
    for (std::size_t j = 0; j < hdim; ++j) {
      const double* row = w_.w1.data() + j * d;
      double acc = w_.b1[j];
      for (std::size_t i = 0; i < d; ++i) acc += row[i] * image.values[i];
      hidden[j] = std::tanh(acc);
    }
    std::vector<double> logits(static_cast<std::size_t>(w_.classes));
    for (int c = 0; c < w_.classes; ++c) {
      const double* row = w_.w2.data() + static_cast<std::size_t>(c) * hdim;
      double acc = w_.b2[static_cast<std::size_t>(c)];
      for (std::size_t j = 0; j < hdim; ++j) acc += row[j] * hidden[j];
      logits[static_cast<std::size_t>(c)] = acc;
    }

    ClassifyResult out;
    out.loss = stable_softmax(logits, target, out.probabilities);

    std::vector<double> dlogits = out.probabilities;
    dlogits[static_cast<std::size_t>(target)] -= 1.0;
    std::vector<double> dhidden(hdim, 0.0);
    for (int c = 0; c < w_.classes; ++c) {
      const double* row = w_.w2.data() + static_cast<std::size_t>(c) * hdim;
      const double g = dlogits[static_cast<std::size_t>(c)];
      for (std::size_t j = 0; j < hdim; ++j) dhidden[j] += g * row[j];
    }
    out.pixel_grad.assign(d, 0.0);
    for (std::size_t j = 0; j < hdim; ++j) {
      const double dz = dhidden[j] * (1.0 - hidden[j] * hidden[j]);
      if (dz == 0.0) continue;
      const double* row = w_.w1.data() + j * d;
      for (std::size_t i = 0; i < d; ++i) out.pixel_grad[i] += dz * row[i];
    }
    return out;
  }

  DetectResult detect(const NaturalImage&, const std::vector<BoundingBox>&) override {
    raise(ErrorCode::config, "builtin-mlp is a classifier, not a detector");
  }

private:
  MlpWeights w_;
};

// Surrogate detector: objectness is a sigmoid of an affine function of the
// mean intensity inside each box.
class BoxMeanDetector final : public Model {
public:
  explicit BoxMeanDetector(DetectorWeights weights) : w_(weights) {}

  bool is_detector() const noexcept override { return true; }

  ClassifyResult classify(const NaturalImage&, int) override {
    raise(ErrorCode::config, "builtin-detector is a detector, not a classifier");
  }

  DetectResult detect(const NaturalImage& image, const std::vector<BoundingBox>& boxes) override {
    image.validate();
    if (boxes.empty()) {
      raise(ErrorCode::invalid_argument, "detector needs at least one box");
    }
    DetectResult out;
    out.pixel_grad.assign(image.element_count(), 0.0);
    for (const BoundingBox& box : boxes) {
      const PixelRect rect = box_pixel_rect(box, image.width, image.height);
      double mean = 0.0;
      for (int row = rect.y0; row < rect.y1; ++row) {
        for (int col = rect.x0; col < rect.x1; ++col) {
          for (int ch = 0; ch < image.channels; ++ch) mean += image.at(row, col, ch);
        }
      }
      const std::size_t count = static_cast<std::size_t>(rect.x1 - rect.x0) *
                                (rect.y1 - rect.y0) * image.channels;
      mean /= static_cast<double>(count);

      const double z = w_.weight * mean + w_.bias;
      const double o = 1.0 / (1.0 + std::exp(-z));
      out.scores.push_back(o);

      double oc = o;
      if (oc >= 1.0 - 1e-7) {
        oc = 1.0 - 1e-7;
        out.clamped = true;
      }
      out.loss += -std::log1p(-oc);

      // dL/dz = (1/(1-oc)) * o * (1-o), then dz/dpixel = weight / count
      const double dz = o * (1.0 - o) / (1.0 - oc);
      const double dpix = dz * w_.weight / static_cast<double>(count);
      for (int row = rect.y0; row < rect.y1; ++row) {
        for (int col = rect.x0; col < rect.x1; ++col) {
          for (int ch = 0; ch < image.channels; ++ch) {
            out.pixel_grad[image.index(row, col, ch)] += dpix;
          }
        }
      }
    }
    return out;
  }

private:
  DetectorWeights w_;
};

// --- weight file handling ----------------------------------------------

std::filesystem::path tensor_path(const std::filesystem::path& sidecar, const std::string& name) {
  std::filesystem::path p = sidecar;
  p.replace_extension();  // strip .json
  p += "." + name + ".wndr";
  return p;
}

void save_tensor(const std::filesystem::path& sidecar, const std::string& name,
                 std::uint32_t rows, std::uint32_t cols, std::span<const double> data,
                 nlohmann::json& tensors) {
  std::vector<float> f(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) f[i] = static_cast<float>(data[i]);
  const auto path = tensor_path(sidecar, name);
  write_wndr(path, rows, cols, f);
  tensors[name] = {{"file", path.filename().string()}, {"rows", rows}, {"cols", cols}};
}

std::vector<double> load_tensor(const std::filesystem::path& sidecar, const nlohmann::json& doc,
                                const std::string& name, std::uint32_t rows, std::uint32_t cols) {
  if (!doc.contains("tensors") || !doc["tensors"].contains(name)) {
    raise(ErrorCode::parse, "weight sidecar is missing tensor \"" + name + "\"");
  }
  const auto& entry = doc["tensors"][name];
  const auto file = sidecar.parent_path() / entry.at("file").get<std::string>();
  const FloatMatrix m = read_wndr(file);
  if (m.rows != rows || m.cols != cols) {
    raise(ErrorCode::shape_mismatch,
          "tensor \"" + name + "\" has shape " + std::to_string(m.rows) + "x" +
              std::to_string(m.cols) + ", expected " + std::to_string(rows) + "x" +
              std::to_string(cols));
  }
  std::vector<double> out(m.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.data[i];
  require_finite(out, "tensor \"" + name + "\"");
  return out;
}

nlohmann::json load_sidecar(const std::filesystem::path& sidecar, const std::string& expected_kind) {
  std::ifstream in(sidecar);
  if (!in) {
    raise(ErrorCode::io, "cannot open weight sidecar " + sidecar.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::parse, sidecar.string() + ": " + e.what());
  }
  if (doc.value("kind", "") != expected_kind) {
    raise(ErrorCode::config, sidecar.string() + " holds \"" + doc.value("kind", "?") +
                                 "\" weights, expected \"" + expected_kind + "\"");
  }
  return doc;
}

}  // namespace

void save_weights(const LinearWeights& weights, const std::filesystem::path& sidecar) {
  nlohmann::json tensors = nlohmann::json::object();
  const std::size_t d =
      static_cast<std::size_t>(weights.height) * weights.width * weights.channels;
  save_tensor(sidecar, "w", static_cast<std::uint32_t>(weights.classes),
              static_cast<std::uint32_t>(d), weights.w, tensors);
  save_tensor(sidecar, "b", 1, static_cast<std::uint32_t>(weights.classes), weights.b, tensors);
  nlohmann::json doc{{"kind", "builtin-linear"},
                     {"input",
                      {{"height", weights.height},
                       {"width", weights.width},
                       {"channels", weights.channels}}},
                     {"classes", weights.classes},
                     {"tensors", std::move(tensors)}};
  std::ofstream out(sidecar);
  out << doc.dump(2) << "\n";
  if (!out) raise(ErrorCode::io, "cannot write " + sidecar.string());
}

void save_weights(const MlpWeights& weights, const std::filesystem::path& sidecar) {
  nlohmann::json tensors = nlohmann::json::object();
  const std::size_t d =
      static_cast<std::size_t>(weights.height) * weights.width * weights.channels;
  save_tensor(sidecar, "w1", static_cast<std::uint32_t>(weights.hidden),
              static_cast<std::uint32_t>(d), weights.w1, tensors);
  save_tensor(sidecar, "b1", 1, static_cast<std::uint32_t>(weights.hidden), weights.b1, tensors);
  save_tensor(sidecar, "w2", static_cast<std::uint32_t>(weights.classes),
              static_cast<std::uint32_t>(weights.hidden), weights.w2, tensors);
  save_tensor(sidecar, "b2", 1, static_cast<std::uint32_t>(weights.classes), weights.b2, tensors);
  nlohmann::json doc{{"kind", "builtin-mlp"},
                     {"input",
                      {{"height", weights.height},
                       {"width", weights.width},
                       {"channels", weights.channels}}},
                     {"classes", weights.classes},
                     {"hidden", weights.hidden},
                     {"tensors", std::move(tensors)}};
  std::ofstream out(sidecar);
  out << doc.dump(2) << "\n";
  if (!out) raise(ErrorCode::io, "cannot write " + sidecar.string());
}

void save_weights(const DetectorWeights& weights, const std::filesystem::path& sidecar) {
  nlohmann::json tensors = nlohmann::json::object();
  const double affine[2] = {weights.weight, weights.bias};
  save_tensor(sidecar, "affine", 1, 2, affine, tensors);
  nlohmann::json doc{{"kind", "builtin-detector"}, {"tensors", std::move(tensors)}};
  std::ofstream out(sidecar);
  out << doc.dump(2) << "\n";
  if (!out) raise(ErrorCode::io, "cannot write " + sidecar.string());
}

LinearWeights make_random_linear(int height, int width, int channels, int classes,
                                 std::uint64_t seed) {
  LinearWeights w;
  w.height = height;
  w.width = width;
  w.channels = channels;
  w.classes = classes;
  const std::size_t d = static_cast<std::size_t>(height) * width * channels;
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  w.w.resize(static_cast<std::size_t>(classes) * d);
  for (double& v : w.w) v = rng.uniform(-scale, scale);
  w.b.assign(static_cast<std::size_t>(classes), 0.0);
  return w;
}

MlpWeights make_random_mlp(int height, int width, int channels, int classes, int hidden,
                           std::uint64_t seed) {
  MlpWeights w;
  w.height = height;
  w.width = width;
  w.channels = channels;
  w.classes = classes;
  w.hidden = hidden;
  const std::size_t d = static_cast<std::size_t>(height) * width * channels;
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.5 / std::sqrt(static_cast<double>(hidden));
  w.w1.resize(static_cast<std::size_t>(hidden) * d);
  for (double& v : w.w1) v = rng.uniform(-s1, s1);
  w.b1.resize(static_cast<std::size_t>(hidden));
  for (double& v : w.b1) v = rng.uniform(-0.1, 0.1);
  w.w2.resize(static_cast<std::size_t>(classes) * static_cast<std::size_t>(hidden));
  for (double& v : w.w2) v = rng.uniform(-s2, s2);
  w.b2.assign(static_cast<std::size_t>(classes), 0.0);
  return w;
}

PixelRect box_pixel_rect(const BoundingBox& box, int width, int height, double scale) {
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    raise(ErrorCode::invalid_argument, "box \"" + box.label + "\" has non-positive extent");
  }
  const double sw = scale * box.w;
  const double sh = scale * box.h;
  PixelRect r;
  r.x0 = std::max(0, static_cast<int>(std::ceil(box.cx - 0.5 * sw - 0.5)));
  r.x1 = std::min(width, static_cast<int>(std::floor(box.cx + 0.5 * sw - 0.5)) + 1);
  r.y0 = std::max(0, static_cast<int>(std::ceil(box.cy - 0.5 * sh - 0.5)));
  r.y1 = std::min(height, static_cast<int>(std::floor(box.cy + 0.5 * sh - 0.5)) + 1);
  if (r.empty()) {
    raise(ErrorCode::invalid_argument,
          "box \"" + box.label + "\" centred at (" + std::to_string(box.cx) + ", " +
              std::to_string(box.cy) + ") lies outside the image after clamping");
  }
  return r;
}

std::unique_ptr<Model> make_model(const ModelBinding& binding) {
  switch (binding.kind) {
    case ModelKind::builtin_linear: {
      const auto doc = load_sidecar(binding.weights, "builtin-linear");
      LinearWeights w;
      w.height = doc.at("input").at("height").get<int>();
      w.width = doc.at("input").at("width").get<int>();
      w.channels = doc.at("input").at("channels").get<int>();
      w.classes = doc.at("classes").get<int>();
      if (w.classes < 2) raise(ErrorCode::config, "classifier needs at least 2 classes");
      const std::size_t d = static_cast<std::size_t>(w.height) * w.width * w.channels;
      w.w = load_tensor(binding.weights, doc, "w", static_cast<std::uint32_t>(w.classes),
                        static_cast<std::uint32_t>(d));
      w.b = load_tensor(binding.weights, doc, "b", 1, static_cast<std::uint32_t>(w.classes));
      return std::make_unique<LinearClassifier>(std::move(w));
    }
    case ModelKind::builtin_mlp: {
      const auto doc = load_sidecar(binding.weights, "builtin-mlp");
      MlpWeights w;
      w.height = doc.at("input").at("height").get<int>();
      w.width = doc.at("input").at("width").get<int>();
      w.channels = doc.at("input").at("channels").get<int>();
      w.classes = doc.at("classes").get<int>();
      w.hidden = doc.at("hidden").get<int>();
      if (w.classes < 2 || w.hidden < 1) {
        raise(ErrorCode::config, "MLP needs at least 2 classes and 1 hidden unit");
      }
      const std::size_t d = static_cast<std::size_t>(w.height) * w.width * w.channels;
      w.w1 = load_tensor(binding.weights, doc, "w1", static_cast<std::uint32_t>(w.hidden),
                         static_cast<std::uint32_t>(d));
      w.b1 = load_tensor(binding.weights, doc, "b1", 1, static_cast<std::uint32_t>(w.hidden));
      w.w2 = load_tensor(binding.weights, doc, "w2", static_cast<std::uint32_t>(w.classes),
                         static_cast<std::uint32_t>(w.hidden));
      w.b2 = load_tensor(binding.weights, doc, "b2", 1, static_cast<std::uint32_t>(w.classes));
      return std::make_unique<MlpClassifier>(std::move(w));
    }
    case ModelKind::builtin_detector: {
      const auto doc = load_sidecar(binding.weights, "builtin-detector");
      const auto affine = load_tensor(binding.weights, doc, "affine", 1, 2);
      return std::make_unique<BoxMeanDetector>(DetectorWeights{affine[0], affine[1]});
    }
    case ModelKind::external_adapter:
      return make_adapter_model(binding);
  }
  raise(ErrorCode::config, "unhandled model kind");
}

}  // namespace fourshape
