#include "qcreg/intensity.hpp"

#include "qcreg/error.hpp"
#include "qcreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qcreg::intensity {

void Resolution::validate() const {
    if (width < 16 || height < 16) {
        raise(ErrorCode::invalid_argument, "grid resolution must be at least 16x16");
    }
}

std::size_t PixelMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

Vec2 pixel_center(const Resolution& res, int i, int j) noexcept {
    return {(i + 0.5) / res.width, (j + 0.5) / res.height};
}

namespace {

double raw_edge(const Vec2& a, const Vec2& b, const Vec2& p) noexcept {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Evaluated from the lexicographically smaller endpoint so that
// edge(a, b, p) == -edge(b, a, p) holds exactly.
double edge(const Vec2& a, const Vec2& b, const Vec2& p) noexcept {
    const bool swap = b.x() < a.x() || (b.x() == a.x() && b.y() < a.y());
    return swap ? -raw_edge(b, a, p) : raw_edge(a, b, p);
}

// Shared edges are traversed in opposite directions by their two faces, so
// exactly one face claims pixel centers lying on the edge.
bool owns_edge(const Vec2& a, const Vec2& b) noexcept {
    const Vec2 d = b - a;
    return d.y() > 0.0 || (d.y() == 0.0 && d.x() < 0.0);
}

bool inside(double e, bool owned) noexcept { return e > 0.0 || (e == 0.0 && owned); }

void require_same(const Resolution& a, const Resolution& b) {
    if (!(a == b)) {
        raise(ErrorCode::resolution_mismatch, "grid resolutions differ (" + std::to_string(a.width) + "x" +
                                                  std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                                  "x" + std::to_string(b.height) + ")");
    }
}

}  // namespace

IntensityGrid rasterize(const mesh::ParamMesh& source, std::span<const Vec2> positions,
                        std::span<const double> intensity, const Resolution& res) {
    res.validate();
    if (static_cast<int>(positions.size()) != source.num_vertices() ||
        static_cast<int>(intensity.size()) != source.num_vertices()) {
        raise(ErrorCode::invalid_argument, "rasterize: per-vertex data size mismatch");
    }
    IntensityGrid grid;
    grid.resolution = res;
    grid.values.assign(res.pixels(), 0.0);
    grid.mask.assign(res.pixels(), 0);

    const Vec2 scale(res.width, res.height);
    for (const auto& f : source.faces()) {
        Vec2 p[3];
        double val[3];
        for (int k = 0; k < 3; ++k) {
            p[k] = positions[f[k]].cwiseProduct(scale);
            val[k] = intensity[f[k]];
        }
        double area2 = edge(p[0], p[1], p[2]);
        if (!std::isfinite(area2) || area2 == 0.0) continue;
        if (area2 < 0.0) {
            std::swap(p[1], p[2]);
            std::swap(val[1], val[2]);
            area2 = -area2;
        }
        const Vec2 lo = p[0].cwiseMin(p[1]).cwiseMin(p[2]);
        const Vec2 hi = p[0].cwiseMax(p[1]).cwiseMax(p[2]);
        const int i0 = std::max(0, static_cast<int>(std::ceil(lo.x() - 0.5)));
        const int i1 = std::min(res.width - 1, static_cast<int>(std::floor(hi.x() - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::ceil(lo.y() - 0.5)));
        const int j1 = std::min(res.height - 1, static_cast<int>(std::floor(hi.y() - 0.5)));
        const bool own0 = owns_edge(p[1], p[2]);
        const bool own1 = owns_edge(p[2], p[0]);
        const bool own2 = owns_edge(p[0], p[1]);
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                const Vec2 c(i + 0.5, j + 0.5);
                const double e0 = edge(p[1], p[2], c);
                const double e1 = edge(p[2], p[0], c);
                const double e2 = edge(p[0], p[1], c);
                if (!inside(e0, own0) || !inside(e1, own1) || !inside(e2, own2)) continue;
                const std::size_t idx = grid.index(i, j);
                if (grid.mask[idx]) ++grid.double_covered;
                grid.mask[idx] = 1;
                grid.values[idx] = (e0 * val[0] + e1 * val[1] + e2 * val[2]) / area2;
            }
        }
    }
    update_gradient(grid);
    return grid;
}

void update_gradient(IntensityGrid& grid) {
    const int w = grid.resolution.width;
    const int h = grid.resolution.height;
    grid.gradient.assign(grid.resolution.pixels(), Vec2::Zero());
    auto axis = [&](std::size_t idx, bool has_lo, std::size_t lo, bool has_hi, std::size_t hi) {
        const bool l = has_lo && grid.mask[lo];
        const bool r = has_hi && grid.mask[hi];
        if (l && r) return 0.5 * (grid.values[hi] - grid.values[lo]);
        if (r) return grid.values[hi] - grid.values[idx];
        if (l) return grid.values[idx] - grid.values[lo];
        return 0.0;
    };
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t begin, std::size_t end) {
        for (std::size_t jj = begin; jj < end; ++jj) {
            const int j = static_cast<int>(jj);
            for (int i = 0; i < w; ++i) {
                const std::size_t idx = grid.index(i, j);
                if (!grid.mask[idx]) continue;
                grid.gradient[idx] = Vec2(axis(idx, i > 0, idx - 1, i + 1 < w, idx + 1),
                                          axis(idx, j > 0, idx - w, j + 1 < h, idx + w));
            }
        }
    });
}

PixelMask overlap_mask(const IntensityGrid& moving, const IntensityGrid& static_) {
    require_same(moving.resolution, static_.resolution);
    PixelMask out{moving.resolution, std::vector<std::uint8_t>(moving.resolution.pixels(), 0)};
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = (moving.mask[k] && static_.mask[k]) ? 1 : 0;
    return out;
}

Vec2 demons_displacement(double i1, double i2, const Vec2& grad, double tau) noexcept {
    const double d = i1 - i2;
    const double denom = grad.squaredNorm() + tau * tau * d * d;
    if (!(denom >= 1e-12)) return Vec2::Zero();
    return (d / denom) * grad;
}

DisplacementGrid demons_step(const IntensityGrid& moving, const IntensityGrid& static_, const PixelMask& overlap,
                             double tau, int sign) {
    require_same(moving.resolution, static_.resolution);
    require_same(moving.resolution, overlap.resolution);
    if (!(tau > 0.0)) raise(ErrorCode::invalid_argument, "Demons tau must be positive");
    if (sign != 1 && sign != -1) raise(ErrorCode::invalid_argument, "Demons sign must be +1 or -1");
    const auto& res = moving.resolution;
    DisplacementGrid out{res, std::vector<Vec2>(res.pixels(), Vec2::Zero()), overlap.values};
    const Vec2 to_uv(static_cast<double>(sign) / res.width, static_cast<double>(sign) / res.height);
    parallel_for(res.pixels(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            if (!overlap.values[k]) continue;
            const Vec2 px = demons_displacement(moving.values[k], static_.values[k], moving.gradient[k], tau);
            out.vectors[k] = px.cwiseProduct(to_uv);
        }
    });
    return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    for (int t = -radius; t <= radius; ++t) k[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (auto& v : k) v /= sum;
    return k;
}

// One separable pass along rows (horizontal) or columns.
std::vector<Vec2> convolve(const std::vector<Vec2>& in, const Resolution& res, const std::vector<double>& kernel,
                           bool horizontal) {
    const int radius = static_cast<int>(kernel.size() / 2);
    const int w = res.width;
    const int h = res.height;
    std::vector<Vec2> out(in.size(), Vec2::Zero());
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t begin, std::size_t end) {
        for (std::size_t jj = begin; jj < end; ++jj) {
            const int j = static_cast<int>(jj);
            for (int i = 0; i < w; ++i) {
                Vec2 acc = Vec2::Zero();
                double weight = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    const int ii = horizontal ? i + t : i;
                    const int jt = horizontal ? j : j + t;
                    if (ii < 0 || ii >= w || jt < 0 || jt >= h) continue;
                    const double kt = kernel[t + radius];
                    acc += kt * in[static_cast<std::size_t>(jt) * w + ii];
                    weight += kt;
                }
                out[static_cast<std::size_t>(j) * w + i] = acc / weight;
            }
        }
    });
    return out;
}

}  // namespace

DisplacementGrid gaussian_smooth(const DisplacementGrid& field, double sigma) {
    if (!(sigma >= 0.0)) raise(ErrorCode::invalid_argument, "Gaussian sigma must be nonnegative");
    if (sigma == 0.0) return field;
    const auto kernel = gaussian_kernel(sigma);
    DisplacementGrid out = field;
    out.vectors = convolve(convolve(field.vectors, field.resolution, kernel, true), field.resolution, kernel, false);
    for (std::size_t k = 0; k < out.vectors.size(); ++k) {
        if (!out.mask[k]) out.vectors[k] = Vec2::Zero();
    }
    return out;
}

std::vector<Vec2> sample_to_vertices(const DisplacementGrid& field, std::span<const Vec2> positions) {
    const int w = field.resolution.width;
    const int h = field.resolution.height;
    std::vector<Vec2> out(positions.size(), Vec2::Zero());
    auto at = [&](int i, int j) -> Vec2 {
        i = std::clamp(i, 0, w - 1);
        j = std::clamp(j, 0, h - 1);
        return field.vectors[static_cast<std::size_t>(j) * w + i];
    };
    for (std::size_t v = 0; v < positions.size(); ++v) {
        const Vec2& p = positions[v];
        if (!p.allFinite() || p.x() < 0.0 || p.y() < 0.0 || p.x() > 1.0 || p.y() > 1.0) continue;
        const int ci = std::min(w - 1, static_cast<int>(p.x() * w));
        const int cj = std::min(h - 1, static_cast<int>(p.y() * h));
        if (!field.mask[static_cast<std::size_t>(cj) * w + ci]) continue;
        const double x = p.x() * w - 0.5;
        const double y = p.y() * h - 0.5;
        const int i0 = static_cast<int>(std::floor(x));
        const int j0 = static_cast<int>(std::floor(y));
        const double fx = x - i0;
        const double fy = y - j0;
        out[v] = (1 - fx) * (1 - fy) * at(i0, j0) + fx * (1 - fy) * at(i0 + 1, j0) + (1 - fx) * fy * at(i0, j0 + 1) +
                 fx * fy * at(i0 + 1, j0 + 1);
    }
    return out;
}

double fidelity_energy(const IntensityGrid& moving, const IntensityGrid& static_, const PixelMask& overlap) {
    require_same(moving.resolution, static_.resolution);
    require_same(moving.resolution, overlap.resolution);
    double sum = 0.0;
    for (std::size_t k = 0; k < overlap.values.size(); ++k) {
        if (!overlap.values[k]) continue;
        const double d = moving.values[k] - static_.values[k];
        sum += d * d;
    }
    return sum / static_cast<double>(moving.resolution.pixels());
}

}  // namespace qcreg::intensity
