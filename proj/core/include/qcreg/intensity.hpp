#pragma once

#include "qcreg/mesh.hpp"
#include "qcreg/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qcreg::intensity {

/// Raster size over the normalized [0,1]^2 frame. Pixel (i, j) has its
/// center at ((i + 0.5) / width, (j + 0.5) / height); rows grow with v.
struct Resolution {
    int width = 512;
    int height = 512;

    [[nodiscard]] std::size_t pixels() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    void validate() const;
    friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct PixelMask {
    Resolution resolution;
    std::vector<std::uint8_t> values;

    [[nodiscard]] bool at(int i, int j) const { return values[index(i, j)] != 0; }
    [[nodiscard]] std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * resolution.width + static_cast<std::size_t>(i);
    }
    [[nodiscard]] std::size_t count() const noexcept;
};

/// Intensity raster with its coverage mask and masked gradient.
///
/// The gradient is in intensity units per pixel (central differences, one
/// sided next to the mask edge) and is zero wherever the mask is false.
struct IntensityGrid {
    Resolution resolution;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
    std::vector<Vec2> gradient;
    // Pixels written by more than one face (non-injective push-forward).
    std::size_t double_covered = 0;

    [[nodiscard]] std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * resolution.width + static_cast<std::size_t>(i);
    }
    [[nodiscard]] PixelMask coverage() const { return {resolution, mask}; }
};

/// Per-pixel displacement in uv units, zero outside `mask`.
struct DisplacementGrid {
    Resolution resolution;
    std::vector<Vec2> vectors;
    std::vector<std::uint8_t> mask;
};

[[nodiscard]] Vec2 pixel_center(const Resolution& res, int i, int j) noexcept;

/// Push-forward rendering: each face of `source` is drawn at `positions`
/// and pixel centers take the barycentric blend of the vertex intensities.
/// Later faces overwrite earlier ones; such pixels are counted in
/// double_covered. Requires a resolution of at least 16x16.
[[nodiscard]] IntensityGrid rasterize(const mesh::ParamMesh& source, std::span<const Vec2> positions,
                                      std::span<const double> intensity, const Resolution& res);

/// Recomputes the masked gradient of a grid in place.
void update_gradient(IntensityGrid& grid);

// Throws ResolutionMismatch.
[[nodiscard]] PixelMask overlap_mask(const IntensityGrid& moving, const IntensityGrid& static_);

/// u* = d grad / (|grad|^2 + tau^2 d^2) with d = i1 - i2; zero when the
/// denominator is below 1e-12. Units follow `grad`.
[[nodiscard]] Vec2 demons_displacement(double i1, double i2, const Vec2& grad, double tau) noexcept;

/// Demons field on the overlap, evaluated with pixel-unit gradients and
/// returned in uv units scaled by `sign` (+1 or -1). Throws
/// ResolutionMismatch.
[[nodiscard]] DisplacementGrid demons_step(const IntensityGrid& moving, const IntensityGrid& static_,
                                           const PixelMask& overlap, double tau, int sign = 1);

/// Separable Gaussian (sigma in pixels, truncated at 3 sigma, weights
/// renormalized over the in-frame support), then re-masked.
[[nodiscard]] DisplacementGrid gaussian_smooth(const DisplacementGrid& field, double sigma);

/// Bilinear samples at each position; zero outside the frame or where the
/// containing pixel is outside the field mask.
[[nodiscard]] std::vector<Vec2> sample_to_vertices(const DisplacementGrid& field, std::span<const Vec2> positions);

/// Pixel-area weighted sum of (moving - static)^2 over the overlap.
[[nodiscard]] double fidelity_energy(const IntensityGrid& moving, const IntensityGrid& static_,
                                     const PixelMask& overlap);

}  // namespace qcreg::intensity
