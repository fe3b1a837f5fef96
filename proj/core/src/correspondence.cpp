#include "qcreg/error.hpp"
#include "qcreg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qcreg::pipeline {

std::size_t Correspondence::omega1_count() const noexcept {
    return static_cast<std::size_t>(std::count(omega1_faces.begin(), omega1_faces.end(), std::uint8_t{1}));
}

PointLocator::PointLocator(const mesh::ParamMesh& mesh) : mesh_(&mesh) {
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const auto& p : mesh.uv) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    if (mesh.uv.empty()) return;
    const Vec2 extent = (hi - lo).cwiseMax(Vec2::Constant(1e-12));
    const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_faces()))));
    nx_ = side;
    ny_ = side;
    lo_ = lo;
    cell_ = Vec2(extent.x() / nx_, extent.y() / ny_);
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    const auto& faces = mesh.faces();
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
        Vec2 flo = mesh.uv[faces[f][0]];
        Vec2 fhi = flo;
        for (int k = 1; k < 3; ++k) {
            flo = flo.cwiseMin(mesh.uv[faces[f][k]]);
            fhi = fhi.cwiseMax(mesh.uv[faces[f][k]]);
        }
        const int i0 = std::clamp(static_cast<int>(std::floor((flo.x() - lo_.x()) / cell_.x())), 0, nx_ - 1);
        const int i1 = std::clamp(static_cast<int>(std::floor((fhi.x() - lo_.x()) / cell_.x())), 0, nx_ - 1);
        const int j0 = std::clamp(static_cast<int>(std::floor((flo.y() - lo_.y()) / cell_.y())), 0, ny_ - 1);
        const int j1 = std::clamp(static_cast<int>(std::floor((fhi.y() - lo_.y()) / cell_.y())), 0, ny_ - 1);
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(f);
        }
    }
}

std::optional<PartnerLocation> PointLocator::locate(const Vec2& p) const {
    if (buckets_.empty() || !p.allFinite()) return std::nullopt;
    const double fx = (p.x() - lo_.x()) / cell_.x();
    const double fy = (p.y() - lo_.y()) / cell_.y();
    constexpr double slack = 1e-9;
    if (fx < -slack || fy < -slack || fx > nx_ + slack || fy > ny_ + slack) return std::nullopt;
    const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, ny_ - 1);

    std::optional<PartnerLocation> best;
    double best_min = -std::numeric_limits<double>::infinity();
    const auto& faces = mesh_->faces();
    for (int f : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
        const Vec2& a = mesh_->uv[faces[f][0]];
        const Vec2& b = mesh_->uv[faces[f][1]];
        const Vec2& c = mesh_->uv[faces[f][2]];
        const double area = mesh::signed_area(a, b, c);
        const Vec3 bary(mesh::signed_area(p, b, c) / area, mesh::signed_area(a, p, c) / area,
                        mesh::signed_area(a, b, p) / area);
        const double m = bary.minCoeff();
        if (m < -slack) continue;
        // Prefer the face that contains p most centrally; ties keep the lower index.
        if (m > best_min) {
            best_min = m;
            Vec3 clamped = bary.cwiseMax(0.0);
            clamped /= clamped.sum();
            best = PartnerLocation{f, clamped};
        }
    }
    return best;
}

Correspondence extract_correspondence(const mesh::ParamMesh& moving, const qc::PlanarMap& map,
                                      const mesh::ParamMesh& static_, const intensity::Resolution& res) {
    if (static_cast<int>(map.target_uv.size()) != moving.num_vertices()) {
        raise(ErrorCode::invalid_argument, "map size does not match vertex count");
    }
    const std::vector<double> zeros_moving(moving.num_vertices(), 0.0);
    const std::vector<double> zeros_static(static_.num_vertices(), 0.0);
    const auto moving_grid = intensity::rasterize(moving, map.target_uv, zeros_moving, res);
    const auto static_grid = intensity::rasterize(static_, static_.uv, zeros_static, res);

    Correspondence out;
    out.omega2_mask = intensity::overlap_mask(moving_grid, static_grid);

    // Images up to half a pixel outside the frame snap to the edge pixel.
    auto on_overlap = [&](const Vec2& p) {
        if (!p.allFinite()) return false;
        const double x = p.x() * res.width;
        const double y = p.y() * res.height;
        if (x < -0.5 || y < -0.5 || x > res.width + 0.5 || y > res.height + 0.5) return false;
        const int i = std::clamp(static_cast<int>(std::floor(x)), 0, res.width - 1);
        const int j = std::clamp(static_cast<int>(std::floor(y)), 0, res.height - 1);
        return out.omega2_mask.at(i, j);
    };
    std::vector<std::uint8_t> vertex_in(moving.num_vertices());
    for (int v = 0; v < moving.num_vertices(); ++v) vertex_in[v] = on_overlap(map.target_uv[v]) ? 1 : 0;
    out.omega1_faces.resize(moving.faces().size());
    for (std::size_t f = 0; f < moving.faces().size(); ++f) {
        const auto& t = moving.faces()[f];
        out.omega1_faces[f] = (vertex_in[t[0]] && vertex_in[t[1]] && vertex_in[t[2]]) ? 1 : 0;
    }

    const PointLocator locator(static_);
    out.partners.resize(moving.num_vertices());
    for (int v = 0; v < moving.num_vertices(); ++v) out.partners[v] = locator.locate(map.target_uv[v]);
    return out;
}

}  // namespace qcreg::pipeline
