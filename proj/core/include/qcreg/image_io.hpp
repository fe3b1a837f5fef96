#pragma once

#include "qcreg/intensity.hpp"
#include "qcreg/mesh.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace qcreg::image {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit raster, row 0 at the top. Grids are drawn with v pointing up.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> data;

    static Image blank(int width, int height, int channels, std::uint8_t fill = 0);
};

[[nodiscard]] Image from_mask(const intensity::PixelMask& mask);

/// Per-pixel |moving - static| on the overlap, colored blue to red; pixels
/// off the overlap are black.
[[nodiscard]] Image difference_heat(const intensity::IntensityGrid& moving, const intensity::IntensityGrid& static_,
                                    const intensity::PixelMask& overlap);

/// Gray rendering of grid values (normalized to their own range) inside the mask.
[[nodiscard]] Image grayscale(const intensity::IntensityGrid& grid);

void draw_line(Image& img, const Vec2& a, const Vec2& b, const Rgb& color);

/// Draws every mesh edge with vertices at `positions` (uv in [0,1]^2).
void draw_wireframe(Image& img, const mesh::ParamMesh& mesh, std::span<const Vec2> positions, const Rgb& color);

// Binary P5 for gray images.
void write_pgm(const Image& img, const std::filesystem::path& path);
[[nodiscard]] Image read_pgm(const std::filesystem::path& path);

void write_png(const Image& img, const std::filesystem::path& path);

}  // namespace qcreg::image
