#pragma once

#include "qcreg/mesh.hpp"
#include "qcreg/types.hpp"

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace qcreg::conformal {

struct Pin {
    int vertex;
    Vec2 position;
};

struct FlatteningResult {
    mesh::ParamMesh param;
    std::vector<double> conformality;  // per-face |mu| of the flattening
    std::array<Pin, 2> pinned{};
    int repair_iterations = 0;
};

/// Two boundary vertices far apart in graph distance (double BFS sweep).
[[nodiscard]] std::pair<int, int> default_pins(const mesh::TriMesh& mesh);

/// Least-squares conformal map with pin_a -> (0,0) and pin_b -> (1,0).
///
/// Requires a manifold disk (one boundary loop, Euler characteristic 1);
/// otherwise throws NotDiskTopology. Faces flipped by the linear solve get
/// up to 20 rounds of local Laplacian smoothing before FlippedFaces is raised.
[[nodiscard]] FlatteningResult flatten_lscm(const mesh::TriMesh& mesh, int pin_a, int pin_b);
[[nodiscard]] FlatteningResult flatten_lscm(const mesh::TriMesh& mesh);

/// Discrete conformal energy E_D - A of a planar embedding of a 3D mesh;
/// zero exactly for conformal (similarity) embeddings.
[[nodiscard]] double conformal_energy(const mesh::TriMesh& mesh, std::span<const Vec2> uv);

/// Per-face |mu| of the map from each 3D triangle (in an isometric local
/// frame) to its uv image.
[[nodiscard]] std::vector<double> face_conformality(const mesh::TriMesh& mesh, std::span<const Vec2> uv);

/// uv -> scale * (uv - origin).
struct FrameTransform {
    Vec2 origin = Vec2::Zero();
    double scale = 1.0;

    [[nodiscard]] Vec2 apply(const Vec2& p) const { return scale * (p - origin); }
};

// Bounding box of the points scaled into [0,1]^2 with aspect ratio kept.
// Throws NonFiniteScale for empty, collapsed or non-finite input.
[[nodiscard]] FrameTransform normalizing_transform(std::span<const Vec2> points);

[[nodiscard]] mesh::ParamMesh apply(const FrameTransform& frame, mesh::ParamMesh param);

[[nodiscard]] mesh::ParamMesh normalize_domain(mesh::ParamMesh param);

/// One transform for both domains (from the union of their boxes), so their
/// relative placement survives normalization.
[[nodiscard]] FrameTransform joint_frame(const mesh::ParamMesh& a, const mesh::ParamMesh& b);

}  // namespace qcreg::conformal
