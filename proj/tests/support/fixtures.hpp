#pragma once

#include "qcreg/mesh.hpp"
#include "qcreg/pipeline.hpp"
#include "qcreg/qc.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using qcreg::Vec2;
using qcreg::Vec3;

/// Planar grid with nx x ny cells over [x0,x1] x [y0,y1] (z = 0), two
/// counterclockwise triangles per cell.
qcreg::mesh::TriMesh grid_mesh(int nx, int ny, double x0 = 0.0, double y0 = 0.0, double x1 = 1.0, double y1 = 1.0);
qcreg::mesh::ParamMesh grid_param(int nx, int ny, double x0 = 0.0, double y0 = 0.0, double x1 = 1.0,
                                  double y1 = 1.0);

int grid_vertex(int nx, int i, int j);

/// Vertex of `param` nearest to p.
int nearest_vertex(const qcreg::mesh::ParamMesh& param, const Vec2& p);

/// Upper hemisphere of radius 1 as a polar grid (rings x sectors), open at
/// the equator.
qcreg::mesh::TriMesh hemisphere(int rings, int sectors);

/// Polar grid of the unit disk.
qcreg::mesh::TriMesh disk(int rings, int sectors);

/// Torus triangulation (genus one, closed).
qcreg::mesh::TriMesh torus(int nu, int nv);

/// Identity plus a smooth displacement of max magnitude `amplitude` that
/// vanishes nowhere in particular; seeded for reproducibility.
qcreg::qc::PlanarMap smooth_perturbation(const qcreg::mesh::ParamMesh& param, double amplitude, std::mt19937& rng);

/// Uniform-weight Tutte embedding of a disk mesh onto the unit circle.
std::vector<Vec2> tutte_embedding(const qcreg::mesh::TriMesh& mesh);

/// Soft-edged letter "A" intensity inside the box [cx - w/2, cx + w/2] x
/// [cy - h/2, cy + h/2].
struct Glyph {
    Vec2 center;
    double width;
    double height;
    double stroke = 0.035;

    [[nodiscard]] double intensity(const Vec2& p) const;
    // Left foot, right foot, apex, crossbar midpoint.
    [[nodiscard]] std::vector<Vec2> anchors() const;
};

struct LetterPair {
    qcreg::mesh::ParamMesh moving;
    qcreg::mesh::ParamMesh static_;
    qcreg::mesh::LandmarkSet landmarks;
    Glyph moving_glyph;
    Glyph static_glyph;
};

/// Tall "A" on the moving square versus a wide "A" on a partially
/// overlapping static square; 4 landmarks tie the feet, apex and crossbar.
LetterPair letter_pair(int cells = 71);

/// Letter-pair config: identity start, Demons field smoothed at mesh scale.
qcreg::pipeline::RegistrationConfig letter_config();

struct DeformCase {
    qcreg::mesh::ParamMesh mesh;
    qcreg::mesh::LandmarkSet landmarks;
};

/// Grid square with 5 interior landmarks pushed along different directions.
DeformCase example1_replica();

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace fixtures
