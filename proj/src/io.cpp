#include "fourshape/io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fourshape {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::io, "cannot open " + path.string() + " for reading");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    raise(ErrorCode::io, "read failure on " + path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    raise(ErrorCode::io, "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    raise(ErrorCode::io, "write failure on " + path.string());
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

std::uint8_t quantize(double v) {
  const double scaled = std::round(255.0 * v);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

}  // namespace

// --- coefficient files -----------------------------------------------------

std::string coefficients_to_json(const FourierCoefficients& c) {
  c.require_finite();
  nlohmann::json pairs = nlohmann::json::array();
  for (int k = -c.order(); k <= c.order(); ++k) {
    pairs.push_back({c.a(k), c.b(k)});
  }
  nlohmann::json doc{{"K", c.order()}, {"coeffs", std::move(pairs)}};
  return doc.dump(2) + "\n";
}

FourierCoefficients parse_coefficients_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::parse, std::string("coefficient file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("K") || !doc.contains("coeffs")) {
    raise(ErrorCode::parse, "coefficient file must be an object with keys \"K\" and \"coeffs\"");
  }
  if (!doc["K"].is_number_integer() || doc["K"].get<int>() < 0) {
    raise(ErrorCode::parse, "\"K\" must be a non-negative integer");
  }
  const int order = doc["K"].get<int>();
  const auto& pairs = doc["coeffs"];
  if (!pairs.is_array() || pairs.size() != static_cast<std::size_t>(2 * order + 1)) {
    raise(ErrorCode::parse, "\"coeffs\" must hold exactly 2K+1 = " + std::to_string(2 * order + 1) +
                                " [a, b] pairs, found " + std::to_string(pairs.size()));
  }
  FourierCoefficients c(order);
  for (int k = -order; k <= order; ++k) {
    const auto& entry = pairs[static_cast<std::size_t>(k + order)];
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() || !entry[1].is_number()) {
      raise(ErrorCode::parse, "coefficient entry for k = " + std::to_string(k) +
                                  " must be a pair of numbers");
    }
    c.set_coeff(k, {entry[0].get<double>(), entry[1].get<double>()});
  }
  c.require_finite();
  return c;
}

FourierCoefficients load_coefficients_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_coefficients_json(std::string(bytes.begin(), bytes.end()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::parse) {
      raise(ErrorCode::parse, path.string() + ": " + e.what());
    }
    throw;
  }
}

void save_coefficients_json(const FourierCoefficients& c, const std::filesystem::path& path) {
  write_file(path, coefficients_to_json(c));
}

// --- raw float matrices ----------------------------------------------------

void write_wndr(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                std::span<const float> data) {
  if (data.size() != static_cast<std::size_t>(rows) * cols) {
    raise(ErrorCode::shape_mismatch, "float matrix payload does not match rows*cols");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + 4 * data.size());
  bytes.insert(bytes.end(), {'W', 'N', 'D', 'R'});
  put_u32le(bytes, rows);
  put_u32le(bytes, cols);
  put_u32le(bytes, 0);
  for (float v : data) {
    put_u32le(bytes, std::bit_cast<std::uint32_t>(v));
  }
  write_file(path, bytes);
}

FloatMatrix read_wndr(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "WNDR", 4) != 0) {
    raise(ErrorCode::parse, path.string() + ": missing WNDR header");
  }
  FloatMatrix m;
  m.rows = get_u32le(bytes.data() + 4);
  m.cols = get_u32le(bytes.data() + 8);
  const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
  if (bytes.size() != 16 + 4 * count) {
    raise(ErrorCode::parse, path.string() + ": payload size does not match header dimensions");
  }
  m.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    m.data[i] = std::bit_cast<float>(get_u32le(bytes.data() + 16 + 4 * i));
  }
  return m;
}

void write_raw_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  std::vector<float> data(grid.values.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(grid.values[i]);
  write_wndr(path, static_cast<std::uint32_t>(grid.canvas.height),
             static_cast<std::uint32_t>(grid.canvas.width), data);
}

// --- PGM ---------------------------------------------------------------

namespace {

void write_pgm_bytes(int width, int height, std::span<const std::uint8_t> gray,
                     const std::filesystem::path& path) {
  std::ostringstream header;
  header << "P5\n" << width << " " << height << "\n255\n";
  const std::string head = header.str();
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), gray.begin(), gray.end());
  write_file(path, bytes);
}

}  // namespace

void write_pgm(const RasterGrid& grid, const std::filesystem::path& path) {
  std::vector<std::uint8_t> gray(grid.values.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = quantize(grid.values[i]);
  write_pgm_bytes(grid.canvas.width, grid.canvas.height, gray, path);
}

void save_image_pgm(const NaturalImage& image, const std::filesystem::path& path) {
  if (image.channels != 1) {
    raise(ErrorCode::invalid_argument, "PGM export requires a single-channel image");
  }
  std::vector<std::uint8_t> gray(image.values.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = quantize(image.values[i]);
  write_pgm_bytes(image.width, image.height, gray, path);
}

// --- PNG ---------------------------------------------------------------

namespace {

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  std::span<const std::uint8_t> data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_offset = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0, out.data() + type_offset, static_cast<uInt>(4 + data.size()));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
  const int p = static_cast<int>(a) + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> png_encode(int width, int height, int channels,
                                     std::span<const std::uint8_t> pixels) {
  if (channels != 1 && channels != 3) {
    raise(ErrorCode::invalid_argument, "PNG encoder supports 1 or 3 channels");
  }
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    raise(ErrorCode::shape_mismatch, "PNG pixel buffer does not match dimensions");
  }

  // scanlines with filter byte 0
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * height);
  for (int row = 0; row < height; ++row) {
    raw.push_back(0);
    const std::uint8_t* line = pixels.data() + static_cast<std::size_t>(row) * stride;
    raw.insert(raw.end(), line, line + stride);
  }

  uLongf compressed_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(compressed_len);
  if (compress2(compressed.data(), &compressed_len, raw.data(), static_cast<uLong>(raw.size()),
                Z_DEFAULT_COMPRESSION) != Z_OK) {
    raise(ErrorCode::io, "zlib compression failed while encoding PNG");
  }
  compressed.resize(compressed_len);

  std::vector<std::uint8_t> ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(width));
  put_u32be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);                                      // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);                  // color type
  ihdr.insert(ihdr.end(), {0, 0, 0});                     // compression, filter, interlace

  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  return out;
}

void png_decode(std::span<const std::uint8_t> bytes, int& width, int& height, int& channels,
                std::vector<std::uint8_t>& pixels) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
    raise(ErrorCode::parse, "not a PNG file (bad signature)");
  }

  int w = 0, h = 0;
  int color_type = -1;
  int src_channels = 0;
  std::vector<std::uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;

  std::size_t pos = 8;
  while (pos + 12 <= bytes.size() && !saw_iend) {
    const std::uint32_t len = get_u32be(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) {
      raise(ErrorCode::parse, "PNG chunk overruns the file");
    }
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* data = bytes.data() + pos + 8;
    const std::uint32_t stored_crc = get_u32be(data + len);
    const auto computed_crc = crc32(0, bytes.data() + pos + 4, static_cast<uInt>(4 + len));
    if (stored_crc != static_cast<std::uint32_t>(computed_crc)) {
      raise(ErrorCode::parse, "PNG chunk CRC mismatch");
    }

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) raise(ErrorCode::parse, "PNG IHDR has wrong length");
      w = static_cast<int>(get_u32be(data));
      h = static_cast<int>(get_u32be(data + 4));
      const int depth = data[8];
      color_type = data[9];
      const int interlace = data[12];
      if (depth != 8) raise(ErrorCode::parse, "PNG decoder supports 8-bit depth only");
      if (interlace != 0) raise(ErrorCode::parse, "PNG decoder does not support interlacing");
      switch (color_type) {
        case 0: src_channels = 1; break;
        case 2: src_channels = 3; break;
        case 4: src_channels = 2; break;
        case 6: src_channels = 4; break;
        default: raise(ErrorCode::parse, "PNG decoder does not support palette images");
      }
      if (w < 1 || h < 1) raise(ErrorCode::parse, "PNG has degenerate dimensions");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || idat.empty()) {
    raise(ErrorCode::parse, "PNG is missing required chunks");
  }

  const std::size_t stride = static_cast<std::size_t>(w) * src_channels;
  std::vector<std::uint8_t> raw((stride + 1) * h);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size()) {
    raise(ErrorCode::parse, "PNG image data failed to decompress to the expected size");
  }

  // undo per-scanline filters in place
  std::vector<std::uint8_t> decoded(stride * h);
  const int bpp = src_channels;
  for (int row = 0; row < h; ++row) {
    const std::uint8_t filter = raw[(stride + 1) * row];
    const std::uint8_t* src = raw.data() + (stride + 1) * row + 1;
    std::uint8_t* dst = decoded.data() + stride * row;
    const std::uint8_t* up = row > 0 ? decoded.data() + stride * (row - 1) : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const std::uint8_t left = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      const std::uint8_t above = up ? up[i] : 0;
      const std::uint8_t corner = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, corner); break;
        default: raise(ErrorCode::parse, "PNG scanline uses an unknown filter");
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  // drop alpha, keep gray or RGB
  const int out_channels = (src_channels == 1 || src_channels == 2) ? 1 : 3;
  pixels.resize(static_cast<std::size_t>(w) * h * out_channels);
  for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p) {
    for (int c = 0; c < out_channels; ++c) {
      pixels[p * out_channels + c] = decoded[p * src_channels + c];
    }
  }
  width = w;
  height = h;
  channels = out_channels;
}

void write_png(const RasterGrid& grid, const std::filesystem::path& path) {
  std::vector<std::uint8_t> gray(grid.values.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = quantize(grid.values[i]);
  write_file(path, png_encode(grid.canvas.width, grid.canvas.height, 1, gray));
}

void save_image_png(const NaturalImage& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(image.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(image.values[i]);
  write_file(path, png_encode(image.width, image.height, image.channels, bytes));
}

NaturalImage load_image_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  NaturalImage img;
  std::vector<std::uint8_t> pixels;
  try {
    png_decode(bytes, img.width, img.height, img.channels, pixels);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::parse) {
      raise(ErrorCode::parse, path.string() + ": " + e.what());
    }
    throw;
  }
  img.values.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) img.values[i] = pixels[i] / 255.0;
  img.validate();
  return img;
}

// --- SVG ---------------------------------------------------------------

void write_polygon_svg(std::span<const Point> polygon, const std::filesystem::path& path) {
  if (polygon.size() < 3) {
    raise(ErrorCode::invalid_argument, "SVG export needs at least 3 polygon vertices");
  }
  double x_lo = polygon[0].x, x_hi = polygon[0].x;
  double y_lo = -polygon[0].y, y_hi = -polygon[0].y;
  for (const Point& p : polygon) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, -p.y);
    y_hi = std::max(y_hi, -p.y);
  }
  const double pad = 0.05 * std::max(x_hi - x_lo, y_hi - y_lo) + 1e-6;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << (x_lo - pad) << " "
      << (y_lo - pad) << " " << (x_hi - x_lo + 2 * pad) << " " << (y_hi - y_lo + 2 * pad)
      << "\">\n";
  svg << "  <path d=\"";
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    svg << (i == 0 ? "M " : " L ") << polygon[i].x << " " << -polygon[i].y;
  }
  svg << " Z\" fill=\"black\" stroke=\"none\"/>\n</svg>\n";
  write_file(path, svg.str());
}

}  // namespace fourshape
