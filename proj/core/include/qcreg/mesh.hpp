#pragma once

#include "qcreg/types.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace qcreg::mesh {

using Face = std::array<int, 3>;

/// Triangle mesh with optional per-vertex intensity (e.g. curvature).
///
/// Faces are counterclockwise. A mesh returned by any loader has passed
/// validate(): indices are in range, no face repeats a vertex, no face has
/// zero area and no edge is shared by more than two faces.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::optional<std::vector<double>> intensity;

    [[nodiscard]] int num_vertices() const noexcept { return static_cast<int>(vertices.size()); }
    [[nodiscard]] int num_faces() const noexcept { return static_cast<int>(faces.size()); }
};

/// A TriMesh with planar parameter coordinates.
///
/// Every face has positive signed area in uv. boundary is the single closed
/// boundary loop, ordered so that the domain lies to its left.
struct ParamMesh {
    TriMesh base;
    std::vector<Vec2> uv;
    std::vector<int> boundary;

    [[nodiscard]] int num_vertices() const noexcept { return base.num_vertices(); }
    [[nodiscard]] int num_faces() const noexcept { return base.num_faces(); }
    [[nodiscard]] const std::vector<Face>& faces() const noexcept { return base.faces; }
};

struct Landmark {
    int moving_vertex;
    Vec2 target;
};

/// Pairs p_i -> q_i: a vertex of the moving mesh and a target position in
/// the static domain's uv frame.
struct LandmarkSet {
    std::vector<Landmark> pairs;

    [[nodiscard]] bool empty() const noexcept { return pairs.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return pairs.size(); }
};

enum class MeshFormat { obj, off, ply };

[[nodiscard]] double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) noexcept;
[[nodiscard]] double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) noexcept;
[[nodiscard]] double bounding_box_diagonal(std::span<const Vec3> points) noexcept;

// Throws DegenerateFace, NonManifold or IndexOutOfRange.
void validate(const TriMesh& mesh);

/// All boundary loops, each ordered along the face orientation.
[[nodiscard]] std::vector<std::vector<int>> boundary_loops(const TriMesh& mesh);

[[nodiscard]] int euler_characteristic(const TriMesh& mesh);

// Builds a ParamMesh, flipping every face once if the total signed uv area is
// negative. Throws NotDiskTopology (boundary count != 1), DegenerateFace or
// FlippedFaces when individual faces are not positively oriented.
[[nodiscard]] ParamMesh make_param_mesh(TriMesh mesh, std::vector<Vec2> uv);

/// Uses each vertex's (x, y) as its parameter coordinates.
[[nodiscard]] ParamMesh param_from_planar(TriMesh mesh);

[[nodiscard]] MeshFormat format_from_extension(const std::filesystem::path& path);

[[nodiscard]] TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
[[nodiscard]] TriMesh load_mesh(const std::filesystem::path& path);

struct LoadedMesh {
    TriMesh mesh;
    std::optional<std::vector<Vec2>> uv;  // from OBJ vt records
};

[[nodiscard]] LoadedMesh load_mesh_with_uv(const std::filesystem::path& path);

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format);

/// Writes an OBJ whose vt records carry the given per-vertex uv.
void save_obj_with_uv(const TriMesh& mesh, std::span<const Vec2> uv, const std::filesystem::path& path);

// CSV rows are either "moving_id,target_id" (resolved to target.uv) or
// "moving_id,u,v". A leading non-numeric header row and '#' comments are
// skipped.
[[nodiscard]] LandmarkSet load_landmarks(const std::filesystem::path& path, const ParamMesh& moving,
                                         const ParamMesh& target);

/// Same as load_landmarks with "target_id" rows resolved against `moving`
/// itself (single-domain deformation).
[[nodiscard]] LandmarkSet load_landmarks(const std::filesystem::path& path, const ParamMesh& moving);

// Throws InvalidLandmark if any target lies outside the convex hull of the
// target uv (tolerance relative to the hull size).
void check_targets_in_hull(const LandmarkSet& landmarks, std::span<const Vec2> target_uv);

// CSV rows "vertex_id,value", one per vertex.
[[nodiscard]] TriMesh attach_intensity(TriMesh mesh, const std::filesystem::path& path);

}  // namespace qcreg::mesh
