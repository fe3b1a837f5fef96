#include "fixtures.hpp"

#include "qcreg/conformal.hpp"
#include "qcreg/error.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <algorithm>

using namespace qcreg;

namespace {

// Max residual of the best complex-affine fit w = a z + b, relative to the
// spread of w.
double similarity_residual(const std::vector<Vec2>& z, const std::vector<Vec2>& w) {
    const int n = static_cast<int>(z.size());
    Eigen::MatrixXd m(2 * n, 4);
    Eigen::VectorXd rhs(2 * n);
    for (int i = 0; i < n; ++i) {
        m.row(2 * i) << z[i].x(), -z[i].y(), 1, 0;
        m.row(2 * i + 1) << z[i].y(), z[i].x(), 0, 1;
        rhs[2 * i] = w[i].x();
        rhs[2 * i + 1] = w[i].y();
    }
    const Eigen::VectorXd c = m.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd r = m * c - rhs;
    return r.cwiseAbs().maxCoeff() / std::max(1e-300, rhs.cwiseAbs().maxCoeff());
}

std::vector<Vec2> xy(const mesh::TriMesh& m) {
    std::vector<Vec2> out;
    for (const auto& v : m.vertices) out.emplace_back(v.x(), v.y());
    return out;
}

}  // namespace

TEST(Lscm, PlanarSquareIsSimilarity) {
    const auto m = fixtures::grid_mesh(8, 8);
    const auto r = conformal::flatten_lscm(m);
    EXPECT_LT(*std::max_element(r.conformality.begin(), r.conformality.end()), 1e-8);
    EXPECT_LT(similarity_residual(xy(m), r.param.uv), 1e-8);
    EXPECT_EQ(r.param.uv[r.pinned[0].vertex], Vec2(0, 0));
    EXPECT_EQ(r.param.uv[r.pinned[1].vertex], Vec2(1, 0));
}

TEST(Lscm, HemisphereDistortionDecreasesWithRefinement) {
    double previous = 1.0;
    for (int level : {4, 8, 16}) {
        const auto m = fixtures::hemisphere(level, 4 * level);
        const auto r = conformal::flatten_lscm(m);
        const double worst = *std::max_element(r.conformality.begin(), r.conformality.end());
        EXPECT_LT(worst, previous) << "rings " << level;
        for (double c : r.conformality) {
            EXPECT_GE(c, 0.0);
            EXPECT_LT(c, 1.0);
        }
        for (const auto& f : r.param.faces()) {
            EXPECT_GT(mesh::signed_area(r.param.uv[f[0]], r.param.uv[f[1]], r.param.uv[f[2]]), 0.0);
        }
        previous = worst;
    }
}

TEST(Lscm, SamePinsRejected) {
    const auto m = fixtures::disk(4, 12);
    const int b = mesh::boundary_loops(m).front().front();
    EXPECT_THROW((void)conformal::flatten_lscm(m, b, b), Error);
}

TEST(Lscm, TorusRejected) {
    try {
        (void)conformal::flatten_lscm(fixtures::torus(16, 8));
        FAIL() << "expected NotDiskTopology";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_disk_topology);
    }
}

TEST(Lscm, RigidMotionChangesUvBySimilarity) {
    const auto m = fixtures::hemisphere(8, 24);
    auto moved = m;
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    for (auto& v : moved.vertices) v = rot * v + Vec3(0.3, -2.0, 5.0);
    const auto pins = conformal::default_pins(m);
    const auto a = conformal::flatten_lscm(m, pins.first, pins.second);
    const auto b = conformal::flatten_lscm(moved, pins.first, pins.second);
    EXPECT_LT(similarity_residual(a.param.uv, b.param.uv), 1e-6);
}

TEST(Lscm, BeatsTutteEmbedding) {
    const auto m = fixtures::hemisphere(10, 30);
    const auto r = conformal::flatten_lscm(m);
    const double lscm = conformal::conformal_energy(m, r.param.uv);
    const double tutte = conformal::conformal_energy(m, fixtures::tutte_embedding(m));
    EXPECT_LE(lscm, tutte);
    EXPECT_GE(lscm, -1e-12);
}

TEST(Lscm, DefaultPinsAreBoundaryVertices) {
    const auto m = fixtures::disk(5, 16);
    const auto [a, b] = conformal::default_pins(m);
    const auto loop = mesh::boundary_loops(m).front();
    EXPECT_NE(a, b);
    EXPECT_NE(std::find(loop.begin(), loop.end(), a), loop.end());
    EXPECT_NE(std::find(loop.begin(), loop.end(), b), loop.end());
}

TEST(Normalize, BoxFitsUnitSquare) {
    auto p = fixtures::grid_param(4, 2, -2.0, -2.0, 2.0, 2.0);
    const auto n = conformal::normalize_domain(p);
    Vec2 lo = n.uv.front(), hi = n.uv.front();
    for (const auto& q : n.uv) {
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    EXPECT_DOUBLE_EQ(lo.x(), 0.0);
    EXPECT_DOUBLE_EQ(lo.y(), 0.0);
    EXPECT_DOUBLE_EQ(hi.x(), 1.0);
    EXPECT_LE(hi.y(), 1.0);
}

TEST(Normalize, AspectKept) {
    const auto p = fixtures::grid_param(4, 2, 0.0, 0.0, 4.0, 1.0);
    const auto n = conformal::normalize_domain(p);
    double top = 0.0;
    for (const auto& q : n.uv) top = std::max(top, q.y());
    EXPECT_DOUBLE_EQ(top, 0.25);
}

TEST(Normalize, AlreadyNormalizedIsIdentity) {
    const auto p = fixtures::grid_param(3, 3);
    const auto n = conformal::normalize_domain(p);
    for (std::size_t i = 0; i < p.uv.size(); ++i) EXPECT_LE((n.uv[i] - p.uv[i]).norm(), 1e-15);
}

TEST(Normalize, CollapsedInputRejected) {
    const std::vector<Vec2> same(5, Vec2(0.3, 0.3));
    try {
        (void)conformal::normalizing_transform(same);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::non_finite_scale);
    }
}

TEST(Normalize, JointFrameKeepsRelativePlacement) {
    const auto a = fixtures::grid_param(2, 2, 0.0, 0.0, 1.0, 1.0);
    const auto b = fixtures::grid_param(2, 2, 1.0, 0.0, 2.0, 1.0);
    const auto frame = conformal::joint_frame(a, b);
    EXPECT_DOUBLE_EQ(frame.apply(Vec2(0, 0)).x(), 0.0);
    EXPECT_DOUBLE_EQ(frame.apply(Vec2(2, 0)).x(), 1.0);
    EXPECT_DOUBLE_EQ(frame.apply(Vec2(1, 0)).x(), 0.5);
}
