#include "qcreg/conformal.hpp"

#include "qcreg/error.hpp"
#include "qcreg/numerics.hpp"
#include "qcreg/qc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace qcreg::conformal {

namespace {

std::vector<std::vector<int>> vertex_neighbors(const mesh::TriMesh& mesh) {
    std::vector<std::set<int>> sets(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            sets[f[k]].insert(f[(k + 1) % 3]);
            sets[f[k]].insert(f[(k + 2) % 3]);
        }
    }
    std::vector<std::vector<int>> out(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
}

std::vector<int> bfs_distance(const std::vector<std::vector<int>>& nbrs, int start) {
    std::vector<int> dist(nbrs.size(), -1);
    std::queue<int> q;
    dist[start] = 0;
    q.push(start);
    while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int w : nbrs[v]) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
        }
    }
    return dist;
}

void require_disk(const mesh::TriMesh& mesh) {
    const auto loops = mesh::boundary_loops(mesh);
    const int chi = mesh::euler_characteristic(mesh);
    if (loops.size() != 1 || chi != 1) {
        raise(ErrorCode::not_disk_topology,
              "mesh is not a topological disk (boundary loops: " + std::to_string(loops.size()) +
                  ", Euler characteristic: " + std::to_string(chi) +
                  "); supply a pre-flattened fundamental domain with --preflattened");
    }
}

// Cotangent stiffness (positive semidefinite) of the 3D mesh.
std::vector<numerics::Triplet> cotan_triplets(const mesh::TriMesh& mesh, int offset) {
    std::vector<numerics::Triplet> t;
    t.reserve(mesh.faces.size() * 12);
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int i = f[(k + 1) % 3];
            const int j = f[(k + 2) % 3];
            const Vec3 a = mesh.vertices[i] - mesh.vertices[f[k]];
            const Vec3 b = mesh.vertices[j] - mesh.vertices[f[k]];
            const double w = 0.5 * a.dot(b) / a.cross(b).norm();
            t.emplace_back(offset + i, offset + j, -w);
            t.emplace_back(offset + j, offset + i, -w);
            t.emplace_back(offset + i, offset + i, w);
            t.emplace_back(offset + j, offset + j, w);
        }
    }
    return t;
}

numerics::SparseSpdSystem lscm_system(const mesh::TriMesh& mesh) {
    const int n = mesh.num_vertices();
    numerics::SparseSpdSystem sys;
    sys.dimension = 2 * n;
    sys.entries = cotan_triplets(mesh, 0);
    auto v_block = cotan_triplets(mesh, n);
    sys.entries.insert(sys.entries.end(), v_block.begin(), v_block.end());
    // Signed area 1/2 sum (u_i v_j - u_j v_i) over oriented boundary edges,
    // subtracted as the quadratic form x^T S x with symmetric S; the matrix
    // of E_D - A is blkdiag(K, K) - 2 S.
    for (const auto& loop : mesh::boundary_loops(mesh)) {
        for (std::size_t e = 0; e < loop.size(); ++e) {
            const int i = loop[e];
            const int j = loop[(e + 1) % loop.size()];
            sys.entries.emplace_back(i, n + j, -0.5);
            sys.entries.emplace_back(n + j, i, -0.5);
            sys.entries.emplace_back(j, n + i, 0.5);
            sys.entries.emplace_back(n + i, j, 0.5);
        }
    }
    return sys;
}

}  // namespace

std::pair<int, int> default_pins(const mesh::TriMesh& mesh) {
    const auto loops = mesh::boundary_loops(mesh);
    if (loops.empty()) raise(ErrorCode::not_disk_topology, "mesh has no boundary to pin");
    const auto& boundary = loops.front();
    const auto nbrs = vertex_neighbors(mesh);
    auto farthest = [&](int from) {
        const auto d = bfs_distance(nbrs, from);
        int best = boundary.front();
        for (int b : boundary) {
            if (d[b] > d[best]) best = b;
        }
        return best;
    };
    const int b = farthest(boundary.front());
    const int a = farthest(b);
    return {std::min(a, b), std::max(a, b)};
}

double conformal_energy(const mesh::TriMesh& mesh, std::span<const Vec2> uv) {
    const auto sys = lscm_system(mesh);
    const auto m = sys.matrix();
    const int n = mesh.num_vertices();
    numerics::Vector x(2 * n);
    for (int i = 0; i < n; ++i) {
        x[i] = uv[i].x();
        x[n + i] = uv[i].y();
    }
    return 0.5 * x.dot(m * x);
}

std::vector<double> face_conformality(const mesh::TriMesh& mesh, std::span<const Vec2> uv) {
    std::vector<double> out(mesh.faces.size());
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto& f = mesh.faces[fi];
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        const double l1 = e1.norm();
        const Vec3 x = e1 / l1;
        const double px = e2.dot(x);
        const double py = (e2 - px * x).norm();
        Mat2 local;
        local << l1, px, 0.0, py;
        Mat2 image;
        image.col(0) = uv[f[1]] - uv[f[0]];
        image.col(1) = uv[f[2]] - uv[f[0]];
        out[fi] = std::abs(qc::beltrami_of_differential(image * local.inverse()));
    }
    return out;
}

FlatteningResult flatten_lscm(const mesh::TriMesh& mesh, int pin_a, int pin_b) {
    const int n = mesh.num_vertices();
    if (pin_a == pin_b) raise(ErrorCode::invalid_argument, "the two pinned vertices must differ");
    if (pin_a < 0 || pin_a >= n || pin_b < 0 || pin_b >= n) {
        raise(ErrorCode::index_out_of_range, "pinned vertex out of range");
    }
    require_disk(mesh);

    auto sys = lscm_system(mesh);
    sys.constrained = {{pin_a, 0.0}, {n + pin_a, 0.0}, {pin_b, 1.0}, {n + pin_b, 0.0}};
    const auto x = numerics::solve_constrained(sys, numerics::Vector::Zero(2 * n));

    std::vector<Vec2> uv(n);
    for (int i = 0; i < n; ++i) uv[i] = Vec2(x[i], x[n + i]);

    auto flipped_faces = [&] {
        std::vector<int> out;
        for (int f = 0; f < mesh.num_faces(); ++f) {
            const auto& t = mesh.faces[f];
            if (!(mesh::signed_area(uv[t[0]], uv[t[1]], uv[t[2]]) > 0.0)) out.push_back(f);
        }
        return out;
    };

    FlatteningResult out;
    auto flipped = flipped_faces();
    if (!flipped.empty()) {
        const auto nbrs = vertex_neighbors(mesh);
        for (int it = 0; it < 20 && !flipped.empty(); ++it) {
            std::set<int> star;
            for (int f : flipped) {
                for (int k = 0; k < 3; ++k) star.insert(mesh.faces[f][k]);
            }
            for (int v : star) {
                if (v == pin_a || v == pin_b || nbrs[v].empty()) continue;
                Vec2 mean = Vec2::Zero();
                for (int w : nbrs[v]) mean += uv[w];
                uv[v] = mean / static_cast<double>(nbrs[v].size());
            }
            ++out.repair_iterations;
            flipped = flipped_faces();
        }
        if (!flipped.empty()) {
            raise(ErrorCode::flipped_faces, std::to_string(flipped.size()) + " faces remain flipped after repair");
        }
    }

    out.conformality = face_conformality(mesh, uv);
    out.pinned = {Pin{pin_a, Vec2(0.0, 0.0)}, Pin{pin_b, Vec2(1.0, 0.0)}};
    out.param = mesh::make_param_mesh(mesh, std::move(uv));
    return out;
}

FlatteningResult flatten_lscm(const mesh::TriMesh& mesh) {
    require_disk(mesh);
    const auto [a, b] = default_pins(mesh);
    return flatten_lscm(mesh, a, b);
}

FrameTransform normalizing_transform(std::span<const Vec2> points) {
    if (points.empty()) raise(ErrorCode::non_finite_scale, "cannot normalize an empty domain");
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo).maxCoeff();
    if (!std::isfinite(extent) || !(extent > 0.0) || !lo.allFinite()) {
        raise(ErrorCode::non_finite_scale, "domain has no finite positive extent");
    }
    return {lo, 1.0 / extent};
}

mesh::ParamMesh apply(const FrameTransform& frame, mesh::ParamMesh param) {
    for (auto& p : param.uv) p = frame.apply(p);
    return param;
}

mesh::ParamMesh normalize_domain(mesh::ParamMesh param) {
    const auto frame = normalizing_transform(param.uv);
    auto out = apply(frame, std::move(param));
    // Pin the maximal extent to exactly 1 against rounding.
    for (auto& p : out.uv) p = p.cwiseMin(Vec2(1.0, 1.0)).cwiseMax(Vec2(0.0, 0.0));
    return out;
}

FrameTransform joint_frame(const mesh::ParamMesh& a, const mesh::ParamMesh& b) {
    std::vector<Vec2> all(a.uv.begin(), a.uv.end());
    all.insert(all.end(), b.uv.begin(), b.uv.end());
    return normalizing_transform(all);
}

}  // namespace qcreg::conformal
