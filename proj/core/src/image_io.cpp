#include "qcreg/image_io.hpp"

#include "qcreg/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace qcreg::image {

Image Image::blank(int width, int height, int channels, std::uint8_t fill) {
    return {width, height, channels,
            std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * channels, fill)};
}

namespace {

// Grid row j (v up) maps to image row height - 1 - j.
std::size_t flipped(const intensity::Resolution& res, int i, int j, int channels) {
    return (static_cast<std::size_t>(res.height - 1 - j) * res.width + i) * channels;
}

Rgb heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto c = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
    return {c(1.5 * t), c(1.5 - std::abs(2.0 * t - 1.0) * 1.5), c(1.5 * (1.0 - t))};
}

}  // namespace

Image from_mask(const intensity::PixelMask& mask) {
    const auto& res = mask.resolution;
    Image img = Image::blank(res.width, res.height, 1);
    for (int j = 0; j < res.height; ++j) {
        for (int i = 0; i < res.width; ++i) img.data[flipped(res, i, j, 1)] = mask.at(i, j) ? 255 : 0;
    }
    return img;
}

Image difference_heat(const intensity::IntensityGrid& moving, const intensity::IntensityGrid& static_,
                      const intensity::PixelMask& overlap) {
    const auto& res = overlap.resolution;
    Image img = Image::blank(res.width, res.height, 3);
    for (int j = 0; j < res.height; ++j) {
        for (int i = 0; i < res.width; ++i) {
            const auto k = overlap.index(i, j);
            if (!overlap.values[k]) continue;
            const auto c = heat_color(std::abs(moving.values[k] - static_.values[k]));
            std::copy(c.begin(), c.end(), img.data.begin() + static_cast<std::ptrdiff_t>(flipped(res, i, j, 3)));
        }
    }
    return img;
}

Image grayscale(const intensity::IntensityGrid& grid) {
    const auto& res = grid.resolution;
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t k = 0; k < grid.values.size(); ++k) {
        if (!grid.mask[k]) continue;
        lo = any ? std::min(lo, grid.values[k]) : grid.values[k];
        hi = any ? std::max(hi, grid.values[k]) : grid.values[k];
        any = true;
    }
    const double span = hi > lo ? hi - lo : 1.0;
    Image img = Image::blank(res.width, res.height, 1);
    for (int j = 0; j < res.height; ++j) {
        for (int i = 0; i < res.width; ++i) {
            const auto k = grid.index(i, j);
            if (!grid.mask[k]) continue;
            img.data[flipped(res, i, j, 1)] =
                static_cast<std::uint8_t>(std::lround(255.0 * (grid.values[k] - lo) / span));
        }
    }
    return img;
}

void draw_line(Image& img, const Vec2& a, const Vec2& b, const Rgb& color) {
    auto to_px = [&](const Vec2& p) { return Vec2(p.x() * img.width - 0.5, (1.0 - p.y()) * img.height - 0.5); };
    const Vec2 pa = to_px(a), pb = to_px(b);
    if (!pa.allFinite() || !pb.allFinite()) return;
    const int steps = std::max(1, static_cast<int>(std::ceil((pb - pa).cwiseAbs().maxCoeff())));
    if (steps > 100000) return;
    for (int s = 0; s <= steps; ++s) {
        const Vec2 p = pa + (pb - pa) * (static_cast<double>(s) / steps);
        const int x = static_cast<int>(std::lround(p.x()));
        const int y = static_cast<int>(std::lround(p.y()));
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
        const auto base = (static_cast<std::size_t>(y) * img.width + x) * img.channels;
        if (img.channels == 3) {
            std::copy(color.begin(), color.end(), img.data.begin() + static_cast<std::ptrdiff_t>(base));
        } else {
            img.data[base] = color[0];
        }
    }
}

void draw_wireframe(Image& img, const mesh::ParamMesh& mesh, std::span<const Vec2> positions, const Rgb& color) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    for (const auto& [a, b] : edges) draw_line(img, positions[a], positions[b], color);
}

void write_pgm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1) raise(ErrorCode::invalid_argument, "PGM output needs a gray image");
    std::ofstream os(path, std::ios::binary);
    if (!os) raise(ErrorCode::io_error, "cannot write " + path.string());
    os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise(ErrorCode::io_error, "cannot read " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) raise(ErrorCode::parse_error, "unsupported PGM header");
    is.get();
    Image img = Image::blank(w, h, 1);
    is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!is) raise(ErrorCode::parse_error, "truncated PGM " + path.string());
    return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3) raise(ErrorCode::invalid_argument, "PNG output needs 1 or 3 channels");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) raise(ErrorCode::io_error, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::io_error, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::io_error, "PNG encoding failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto stride = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(img.data.data() + y * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace qcreg::image
