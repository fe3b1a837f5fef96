#include "fixtures.hpp"

#include "qcreg/error.hpp"
#include "qcreg/mesh.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace qcreg;
using fixtures::read_text;
using fixtures::temp_dir;
using fixtures::write_text;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::invalid_argument;
}

}  // namespace

TEST(MeshLoad, SingleTriangleOff) {
    const auto dir = temp_dir("mesh_off");
    write_text(dir / "tri.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    const auto m = mesh::load_mesh(dir / "tri.off");
    EXPECT_EQ(m.num_vertices(), 3);
    ASSERT_EQ(m.num_faces(), 1);
    EXPECT_EQ(m.faces[0], (mesh::Face{0, 1, 2}));
}

TEST(MeshLoad, RepeatedVertexIsDegenerate) {
    const auto dir = temp_dir("mesh_degenerate");
    write_text(dir / "bad.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 0 1\n");
    EXPECT_EQ(code_of([&] { (void)mesh::load_mesh(dir / "bad.off"); }), ErrorCode::degenerate_face);
}

TEST(MeshLoad, IndexOutOfRange) {
    const auto dir = temp_dir("mesh_oob");
    write_text(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n");
    EXPECT_EQ(code_of([&] { (void)mesh::load_mesh(dir / "bad.obj"); }), ErrorCode::index_out_of_range);
}

TEST(MeshLoad, NonManifoldEdge) {
    mesh::TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
    m.faces = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
    EXPECT_EQ(code_of([&] { mesh::validate(m); }), ErrorCode::non_manifold);
}

TEST(MeshLoad, MissingFileIsIoError) {
    EXPECT_EQ(code_of([] { (void)mesh::load_mesh("/nonexistent/none.obj"); }), ErrorCode::io_error);
}

TEST(MeshLoad, PlyQualityBecomesIntensity) {
    const auto dir = temp_dir("mesh_ply");
    write_text(dir / "t.ply",
               "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
               "property float quality\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
               "0 0 0 0.5\n1 0 0 1.5\n0 1 0 2.5\n3 0 1 2\n");
    const auto m = mesh::load_mesh(dir / "t.ply");
    ASSERT_TRUE(m.intensity.has_value());
    EXPECT_DOUBLE_EQ((*m.intensity)[2], 2.5);
}

TEST(MeshParam, UnitSquareBoundaryLoop) {
    mesh::TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    const auto p = mesh::param_from_planar(m);
    EXPECT_EQ(p.boundary.size(), 4u);
    EXPECT_EQ(std::set<int>(p.boundary.begin(), p.boundary.end()).size(), 4u);
}

TEST(MeshParam, NegativeOrientationFlippedOnce) {
    mesh::TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    m.faces = {{0, 2, 1}, {0, 3, 2}};
    const auto p = mesh::param_from_planar(m);
    for (const auto& f : p.faces()) EXPECT_GT(mesh::signed_area(p.uv[f[0]], p.uv[f[1]], p.uv[f[2]]), 0.0);
}

TEST(MeshParam, TorusIsNotDisk) {
    const auto t = fixtures::torus(12, 8);
    EXPECT_EQ(mesh::euler_characteristic(t), 0);
    std::vector<Vec2> uv(t.vertices.size(), Vec2::Zero());
    EXPECT_EQ(code_of([&] { (void)mesh::make_param_mesh(t, uv); }), ErrorCode::not_disk_topology);
}

TEST(MeshParam, BoundaryLoopIsConnected) {
    const auto p = fixtures::grid_param(7, 5);
    std::set<std::pair<int, int>> edges;
    for (const auto& f : p.faces()) {
        for (int k = 0; k < 3; ++k) {
            edges.insert({std::min(f[k], f[(k + 1) % 3]), std::max(f[k], f[(k + 1) % 3])});
        }
    }
    ASSERT_EQ(p.boundary.size(), 24u);
    EXPECT_EQ(std::set<int>(p.boundary.begin(), p.boundary.end()).size(), p.boundary.size());
    for (std::size_t i = 0; i < p.boundary.size(); ++i) {
        const int a = p.boundary[i];
        const int b = p.boundary[(i + 1) % p.boundary.size()];
        EXPECT_TRUE(edges.contains({std::min(a, b), std::max(a, b)}));
    }
    // Domain lies to the left: the loop is counterclockwise.
    double area = 0.0;
    for (std::size_t i = 0; i < p.boundary.size(); ++i) {
        const Vec2& a = p.uv[p.boundary[i]];
        const Vec2& b = p.uv[p.boundary[(i + 1) % p.boundary.size()]];
        area += a.x() * b.y() - a.y() * b.x();
    }
    EXPECT_GT(area, 0.0);
}

class MeshRoundTrip : public ::testing::TestWithParam<mesh::MeshFormat> {};

TEST_P(MeshRoundTrip, PositionsAndFacesSurvive) {
    const auto dir = temp_dir("mesh_roundtrip");
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    auto m = fixtures::hemisphere(6, 10);
    for (auto& v : m.vertices) v += Vec3(jitter(rng), jitter(rng), jitter(rng)) * 1e3;
    const char* ext[] = {".obj", ".off", ".ply"};
    const auto path = dir / (std::string("m") + ext[static_cast<int>(GetParam())]);
    mesh::save_mesh(m, path, GetParam());
    const auto back = mesh::load_mesh(path);
    ASSERT_EQ(back.num_vertices(), m.num_vertices());
    EXPECT_EQ(back.faces, m.faces);
    for (int i = 0; i < m.num_vertices(); ++i) {
        EXPECT_LE((back.vertices[i] - m.vertices[i]).norm(), 1e-9 * m.vertices[i].norm() + 1e-12);
    }
}

INSTANTIATE_TEST_SUITE_P(Formats, MeshRoundTrip,
                         ::testing::Values(mesh::MeshFormat::obj, mesh::MeshFormat::off, mesh::MeshFormat::ply));

TEST(MeshIo, ObjUvRoundTrip) {
    const auto dir = temp_dir("mesh_uv");
    const auto p = fixtures::grid_param(3, 3);
    std::vector<Vec2> uv = p.uv;
    for (auto& q : uv) q = 0.5 * q + Vec2(0.25, 0.125);
    mesh::save_obj_with_uv(p.base, uv, dir / "u.obj");
    const auto loaded = mesh::load_mesh_with_uv(dir / "u.obj");
    ASSERT_TRUE(loaded.uv.has_value());
    for (std::size_t i = 0; i < uv.size(); ++i) EXPECT_LE(((*loaded.uv)[i] - uv[i]).norm(), 1e-12);
}

class Landmarks : public ::testing::Test {
protected:
    void SetUp() override {
        dir = temp_dir("landmarks");
        moving = fixtures::grid_param(4, 4);
        target = fixtures::grid_param(4, 4);
        target.uv[12] = Vec2(0.3, 0.7);
    }
    std::filesystem::path dir;
    mesh::ParamMesh moving;
    mesh::ParamMesh target;
};

TEST_F(Landmarks, TargetVertexRow) {
    write_text(dir / "l.csv", "moving_id,target_id\n5,12\n");
    const auto l = mesh::load_landmarks(dir / "l.csv", moving, target);
    ASSERT_EQ(l.size(), 1u);
    EXPECT_EQ(l.pairs[0].moving_vertex, 5);
    EXPECT_EQ(l.pairs[0].target, Vec2(0.3, 0.7));
}

TEST_F(Landmarks, CoordinateRow) {
    write_text(dir / "l.csv", "# comment\n5,0.3,0.7\n");
    const auto l = mesh::load_landmarks(dir / "l.csv", moving, target);
    ASSERT_EQ(l.size(), 1u);
    EXPECT_EQ(l.pairs[0].moving_vertex, 5);
    EXPECT_EQ(l.pairs[0].target, Vec2(0.3, 0.7));
}

TEST_F(Landmarks, DuplicateMovingVertex) {
    write_text(dir / "l.csv", "5,12\n5,13\n");
    EXPECT_EQ(code_of([&] { (void)mesh::load_landmarks(dir / "l.csv", moving, target); }),
              ErrorCode::duplicate_moving_vertex);
}

TEST_F(Landmarks, MixedFormats) {
    write_text(dir / "l.csv", "5,12\n6,0.1,0.1\n");
    EXPECT_EQ(code_of([&] { (void)mesh::load_landmarks(dir / "l.csv", moving, target); }),
              ErrorCode::mixed_row_formats);
}

TEST_F(Landmarks, OutOfRange) {
    write_text(dir / "l.csv", "99,0.1,0.1\n");
    EXPECT_EQ(code_of([&] { (void)mesh::load_landmarks(dir / "l.csv", moving, target); }),
              ErrorCode::index_out_of_range);
}

TEST_F(Landmarks, TargetOutsideHull) {
    mesh::LandmarkSet l{{{5, Vec2(1.5, 0.5)}}};
    EXPECT_EQ(code_of([&] { mesh::check_targets_in_hull(l, target.uv); }), ErrorCode::invalid_landmark);
    mesh::LandmarkSet on_edge{{{5, Vec2(1.0, 0.5)}}};
    EXPECT_NO_THROW(mesh::check_targets_in_hull(on_edge, target.uv));
}

class Intensity : public ::testing::Test {
protected:
    void SetUp() override {
        dir = temp_dir("intensity");
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
        m.faces = {{0, 1, 2}, {0, 2, 3}};
    }
    std::filesystem::path dir;
    mesh::TriMesh m;
};

TEST_F(Intensity, AllZeros) {
    write_text(dir / "i.csv", "vertex_id,value\n0,0\n1,0\n2,0\n3,0\n");
    const auto with = mesh::attach_intensity(m, dir / "i.csv");
    ASSERT_TRUE(with.intensity.has_value());
    for (double v : *with.intensity) EXPECT_EQ(v, 0.0);
}

TEST_F(Intensity, MissingVertex) {
    write_text(dir / "i.csv", "0,1\n1,1\n3,1\n");
    EXPECT_EQ(code_of([&] { (void)mesh::attach_intensity(m, dir / "i.csv"); }), ErrorCode::missing_vertex);
}

TEST_F(Intensity, NanValue) {
    write_text(dir / "i.csv", "0,1\n1,NaN\n2,1\n3,1\n");
    EXPECT_EQ(code_of([&] { (void)mesh::attach_intensity(m, dir / "i.csv"); }), ErrorCode::non_finite_value);
}

TEST(MeshGeometry, AreasAndDiagonal) {
    EXPECT_DOUBLE_EQ(mesh::signed_area({0, 0}, {1, 0}, {0, 1}), 0.5);
    EXPECT_DOUBLE_EQ(mesh::signed_area({0, 0}, {0, 1}, {1, 0}), -0.5);
    EXPECT_DOUBLE_EQ(mesh::triangle_area({0, 0, 0}, {2, 0, 0}, {0, 0, 2}), 2.0);
    const std::vector<Vec3> pts{{0, 0, 0}, {1, 2, 2}};
    EXPECT_DOUBLE_EQ(mesh::bounding_box_diagonal(pts), 3.0);
}

TEST(MeshIo, FormatFromExtension) {
    EXPECT_EQ(mesh::format_from_extension("a/b.OBJ"), mesh::MeshFormat::obj);
    EXPECT_EQ(mesh::format_from_extension("x.off"), mesh::MeshFormat::off);
    EXPECT_EQ(mesh::format_from_extension("x.ply"), mesh::MeshFormat::ply);
    EXPECT_EQ(code_of([] { (void)mesh::format_from_extension("x.stl"); }), ErrorCode::parse_error);
}
