#pragma once

#include "qcreg/mesh.hpp"
#include "qcreg/numerics.hpp"
#include "qcreg/qc.hpp"

#include <optional>
#include <span>
#include <vector>

namespace qcreg::distortion {

/// Per-face differential Df of a piecewise-linear uv -> uv map.
struct JacobianField {
    std::vector<Mat2> values;
};

/// Admissible principal distortions: k2 <= sigma2 <= sigma1 <= k1.
struct DistortionBounds {
    double k1 = 2.0;
    double k2 = 0.5;

    void validate() const;
    [[nodiscard]] bool contains(const Mat2& m, double tolerance = 0.0) const;
};

[[nodiscard]] JacobianField map_jacobian(const mesh::ParamMesh& source, const qc::PlanarMap& map);

/// Nearest matrix (Frobenius) whose singular values lie in [k2, k1].
///
/// The SVD is taken with rotations only, so an orientation-reversing input
/// has a negative signed second singular value; clamping it up to k2 > 0
/// returns an orientation-preserving matrix. Throws NonFiniteInput.
[[nodiscard]] Mat2 project_bounds(const Mat2& df, const DistortionBounds& bounds);

/// Cached factorization of the Poisson recovery for a fixed set of pinned
/// vertices; reused across iterations of the projection loop.
class PoissonRecovery {
public:
    PoissonRecovery(const mesh::ParamMesh& source, std::vector<int> pinned);

    struct Result {
        qc::PlanarMap map;
        // sqrt(sum area |Dg - M|^2) / sqrt(sum area |M|^2)
        double relative_residual = 0.0;
    };

    // pinned_positions[k] is the image of pinned()[k].
    [[nodiscard]] Result recover(std::span<const Mat2> target_field, std::span<const Vec2> pinned_positions) const;

    [[nodiscard]] const std::vector<int>& pinned() const noexcept { return solver_.constrained(); }
    [[nodiscard]] std::span<const numerics::FaceGeometry> geometry() const noexcept { return geometry_; }
    [[nodiscard]] const std::vector<mesh::Face>& faces() const noexcept { return source_->faces(); }

private:
    const mesh::ParamMesh* source_;
    std::vector<numerics::FaceGeometry> geometry_;
    numerics::ConstrainedSolver solver_;
};

/// Least-squares map whose differential best matches target_field with the
/// landmark (or, without landmarks, anchor) positions imposed exactly.
/// Throws SingularSystem when neither is given.
[[nodiscard]] PoissonRecovery::Result recover_map(const mesh::ParamMesh& source, const JacobianField& target_field,
                                                  const mesh::LandmarkSet& landmarks,
                                                  std::optional<qc::DirichletPoint> anchor = std::nullopt);

struct SigmaRange {
    double max_sigma1 = 0.0;
    double min_sigma2 = 0.0;  // signed: negative on flipped faces
};

[[nodiscard]] SigmaRange sigma_range(std::span<const Mat2> differentials);

struct ProjectionResult {
    qc::PlanarMap map;
    SigmaRange sigma;
    // The recovered map leaves [k2, k1] by more than 1e-6 (typically because
    // landmarks demand more stretch than the bounds allow).
    bool bounds_conflict = false;
    double overshoot = 0.0;
    double relative_residual = 0.0;
};

/// Alternates per-face projection and Poisson recovery `iterations` times.
[[nodiscard]] ProjectionResult project_map(const mesh::ParamMesh& source, const qc::PlanarMap& map,
                                           const DistortionBounds& bounds, const mesh::LandmarkSet& landmarks,
                                           int iterations, std::optional<qc::DirichletPoint> anchor = std::nullopt);

/// Same loop on a prebuilt recovery; pinned positions follow recovery.pinned().
[[nodiscard]] ProjectionResult project_map(const PoissonRecovery& recovery, const qc::PlanarMap& map,
                                           const DistortionBounds& bounds, std::span<const Vec2> pinned_positions,
                                           int iterations);

}  // namespace qcreg::distortion
