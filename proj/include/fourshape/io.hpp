#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fourshape/contour.hpp"
#include "fourshape/image.hpp"
#include "fourshape/raster.hpp"

namespace fourshape {

// --- coefficient files -----------------------------------------------------
// JSON object {"K": int, "coeffs": [[a, b], ...]} with exactly 2K+1 pairs
// ordered k = -K..K.

std::string coefficients_to_json(const FourierCoefficients& c);
FourierCoefficients parse_coefficients_json(const std::string& text);
FourierCoefficients load_coefficients_json(const std::filesystem::path& path);
void save_coefficients_json(const FourierCoefficients& c, const std::filesystem::path& path);

// --- raw float matrices ----------------------------------------------------
// 16-byte header {magic "WNDR", u32 rows, u32 cols, u32 reserved}, then
// rows*cols little-endian 32-bit floats. Raw winding grids use rows = H,
// cols = W; builtin-model weight tensors reuse the same container.

struct FloatMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;
};

void write_wndr(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                std::span<const float> data);
FloatMatrix read_wndr(const std::filesystem::path& path);
void write_raw_grid(const RasterGrid& grid, const std::filesystem::path& path);

// --- images ------------------------------------------------------------
// PGM is binary P5 with maxval 255, value = round(255 * v). PNG is 8-bit
// grayscale or RGB, non-interlaced.

void write_pgm(const RasterGrid& grid, const std::filesystem::path& path);
void write_png(const RasterGrid& grid, const std::filesystem::path& path);

void save_image_png(const NaturalImage& image, const std::filesystem::path& path);
void save_image_pgm(const NaturalImage& image, const std::filesystem::path& path);
NaturalImage load_image_png(const std::filesystem::path& path);

// Raw PNG byte-level codec (8-bit depth, color types 0/2/4/6, no interlace).
std::vector<std::uint8_t> png_encode(int width, int height, int channels,
                                     std::span<const std::uint8_t> pixels);
void png_decode(std::span<const std::uint8_t> bytes, int& width, int& height, int& channels,
                std::vector<std::uint8_t>& pixels);

// --- vector export -----------------------------------------------------
// Closed polygon as an SVG path (M/L/Z commands), y axis flipped so that
// +y in contour coordinates points up on screen.

void write_polygon_svg(std::span<const Point> polygon, const std::filesystem::path& path);

}  // namespace fourshape
