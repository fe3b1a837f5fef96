#include "qcreg/distortion.hpp"

#include "qcreg/error.hpp"
#include "qcreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qcreg::distortion {

void DistortionBounds::validate() const {
    if (!(k2 > 0.0) || !(k2 <= k1) || !std::isfinite(k1)) {
        raise(ErrorCode::invalid_argument, "distortion bounds need 0 < k2 <= k1");
    }
}

bool DistortionBounds::contains(const Mat2& m, double tolerance) const {
    const auto s = numerics::svd2x2(m);
    return s.orientation_sign > 0 && s.sigma2 >= k2 - tolerance && s.sigma1 <= k1 + tolerance;
}

JacobianField map_jacobian(const mesh::ParamMesh& source, const qc::PlanarMap& map) {
    if (static_cast<int>(map.target_uv.size()) != source.num_vertices()) {
        raise(ErrorCode::invalid_argument, "map size does not match vertex count");
    }
    const auto geometry = numerics::face_geometries(source);
    return {qc::face_differentials(geometry, source.faces(), map.target_uv)};
}

Mat2 project_bounds(const Mat2& df, const DistortionBounds& bounds) {
    const auto s = numerics::svd2x2(df);
    const double s1 = std::clamp(s.sigma1, bounds.k2, bounds.k1);
    const double s2 = std::clamp(s.orientation_sign * s.sigma2, bounds.k2, bounds.k1);
    Mat2 d = Mat2::Zero();
    d(0, 0) = s1;
    d(1, 1) = s2;
    return s.u * d * s.v.transpose();
}

PoissonRecovery::PoissonRecovery(const mesh::ParamMesh& source, std::vector<int> pinned)
    : source_(&source),
      geometry_(numerics::face_geometries(source)),
      solver_([&] {
          const std::vector<Mat2> identity(source.faces().size(), Mat2::Identity());
          return numerics::assemble_div_a_grad(geometry_, source.faces(), source.num_vertices(), identity).matrix();
      }(),
              std::move(pinned)) {
    if (solver_.constrained().empty()) {
        raise(ErrorCode::singular_system, "Poisson recovery needs at least one landmark or anchor");
    }
}

PoissonRecovery::Result PoissonRecovery::recover(std::span<const Mat2> target_field,
                                                 std::span<const Vec2> pinned_positions) const {
    const auto& faces = source_->faces();
    if (target_field.size() != faces.size()) raise(ErrorCode::invalid_argument, "Jacobian field size mismatch");
    if (pinned_positions.size() != solver_.constrained().size()) {
        raise(ErrorCode::invalid_argument, "pinned position count mismatch");
    }
    const int n = source_->num_vertices();
    numerics::Vector bu = numerics::Vector::Zero(n);
    numerics::Vector bv = numerics::Vector::Zero(n);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& g = geometry_[f];
        const Vec2 row_u = target_field[f].row(0).transpose();
        const Vec2 row_v = target_field[f].row(1).transpose();
        for (int k = 0; k < 3; ++k) {
            bu[faces[f][k]] += g.area * g.grad[k].dot(row_u);
            bv[faces[f][k]] += g.area * g.grad[k].dot(row_v);
        }
    }
    std::vector<double> fu(pinned_positions.size()), fv(pinned_positions.size());
    for (std::size_t k = 0; k < pinned_positions.size(); ++k) {
        fu[k] = pinned_positions[k].x();
        fv[k] = pinned_positions[k].y();
    }
    const auto u = solver_.solve(bu, fu);
    const auto v = solver_.solve(bv, fv);

    Result out;
    out.map.target_uv.resize(n);
    for (int i = 0; i < n; ++i) out.map.target_uv[i] = Vec2(u[i], v[i]);

    const auto dg = qc::face_differentials(geometry_, faces, out.map.target_uv);
    double misfit = 0.0, norm = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        misfit += geometry_[f].area * (dg[f] - target_field[f]).squaredNorm();
        norm += geometry_[f].area * target_field[f].squaredNorm();
    }
    out.relative_residual = norm > 0.0 ? std::sqrt(misfit / norm) : std::sqrt(misfit);
    return out;
}

namespace {

std::pair<std::vector<int>, std::vector<Vec2>> pins_for(const mesh::ParamMesh& source,
                                                        const mesh::LandmarkSet& landmarks,
                                                        std::optional<qc::DirichletPoint> anchor) {
    std::vector<int> idx;
    std::vector<Vec2> pos;
    if (!landmarks.empty()) {
        for (const auto& lm : landmarks.pairs) {
            if (lm.moving_vertex < 0 || lm.moving_vertex >= source.num_vertices()) {
                raise(ErrorCode::index_out_of_range, "landmark vertex " + std::to_string(lm.moving_vertex));
            }
            idx.push_back(lm.moving_vertex);
            pos.push_back(lm.target);
        }
    } else if (anchor) {
        idx.push_back(anchor->vertex);
        pos.push_back(anchor->position);
    } else {
        raise(ErrorCode::singular_system, "Poisson recovery needs at least one landmark or anchor");
    }
    return {std::move(idx), std::move(pos)};
}

}  // namespace

PoissonRecovery::Result recover_map(const mesh::ParamMesh& source, const JacobianField& target_field,
                                    const mesh::LandmarkSet& landmarks, std::optional<qc::DirichletPoint> anchor) {
    auto [idx, pos] = pins_for(source, landmarks, anchor);
    const PoissonRecovery recovery(source, std::move(idx));
    return recovery.recover(target_field.values, pos);
}

SigmaRange sigma_range(std::span<const Mat2> differentials) {
    SigmaRange r;
    r.max_sigma1 = 0.0;
    r.min_sigma2 = std::numeric_limits<double>::infinity();
    for (const auto& d : differentials) {
        const auto s = numerics::svd2x2(d);
        r.max_sigma1 = std::max(r.max_sigma1, s.sigma1);
        r.min_sigma2 = std::min(r.min_sigma2, s.orientation_sign * s.sigma2);
    }
    if (differentials.empty()) r.min_sigma2 = 0.0;
    return r;
}

ProjectionResult project_map(const PoissonRecovery& recovery, const qc::PlanarMap& map,
                             const DistortionBounds& bounds, std::span<const Vec2> pinned_positions, int iterations) {
    bounds.validate();
    if (iterations < 1) raise(ErrorCode::invalid_argument, "projection needs at least one iteration");
    const auto geometry = recovery.geometry();
    const auto& faces = recovery.faces();

    ProjectionResult out;
    out.map = map;
    std::vector<Mat2> projected(geometry.size());
    for (int it = 0; it < iterations; ++it) {
        const auto df = qc::face_differentials(geometry, faces, out.map.target_uv);
        parallel_for(df.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t f = begin; f < end; ++f) projected[f] = project_bounds(df[f], bounds);
        });
        auto rec = recovery.recover(projected, pinned_positions);
        out.map = std::move(rec.map);
        out.relative_residual = rec.relative_residual;
    }
    const auto df = qc::face_differentials(geometry, faces, out.map.target_uv);
    out.sigma = sigma_range(df);
    out.overshoot = std::max({0.0, out.sigma.max_sigma1 - bounds.k1, bounds.k2 - out.sigma.min_sigma2});
    out.bounds_conflict = out.overshoot > 1e-6;
    return out;
}

ProjectionResult project_map(const mesh::ParamMesh& source, const qc::PlanarMap& map, const DistortionBounds& bounds,
                             const mesh::LandmarkSet& landmarks, int iterations,
                             std::optional<qc::DirichletPoint> anchor) {
    if (static_cast<int>(map.target_uv.size()) != source.num_vertices()) {
        raise(ErrorCode::invalid_argument, "map size does not match vertex count");
    }
    auto [idx, pos] = pins_for(source, landmarks, anchor);
    const PoissonRecovery recovery(source, std::move(idx));
    return project_map(recovery, map, bounds, pos, iterations);
}

}  // namespace qcreg::distortion
