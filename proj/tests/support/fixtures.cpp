#include "fixtures.hpp"

#include "qcreg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace fixtures {

using namespace qcreg;

int grid_vertex(int nx, int i, int j) { return j * (nx + 1) + i; }

mesh::TriMesh grid_mesh(int nx, int ny, double x0, double y0, double x1, double y1) {
    mesh::TriMesh m;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            m.vertices.emplace_back(x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny, 0.0);
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = grid_vertex(nx, i, j), b = grid_vertex(nx, i + 1, j);
            const int c = grid_vertex(nx, i + 1, j + 1), d = grid_vertex(nx, i, j + 1);
            m.faces.push_back({a, b, c});
            m.faces.push_back({a, c, d});
        }
    }
    return m;
}

mesh::ParamMesh grid_param(int nx, int ny, double x0, double y0, double x1, double y1) {
    return mesh::param_from_planar(grid_mesh(nx, ny, x0, y0, x1, y1));
}

int nearest_vertex(const mesh::ParamMesh& param, const Vec2& p) {
    int best = 0;
    for (int v = 1; v < param.num_vertices(); ++v) {
        if ((param.uv[v] - p).squaredNorm() < (param.uv[best] - p).squaredNorm()) best = v;
    }
    return best;
}

namespace {

mesh::TriMesh polar(int rings, int sectors, const std::function<Vec3(double, double)>& point) {
    mesh::TriMesh m;
    m.vertices.push_back(point(0.0, 0.0));
    for (int r = 1; r <= rings; ++r) {
        for (int s = 0; s < sectors; ++s) {
            m.vertices.push_back(point(static_cast<double>(r) / rings, 2.0 * std::numbers::pi * s / sectors));
        }
    }
    auto id = [&](int r, int s) { return 1 + (r - 1) * sectors + ((s % sectors) + sectors) % sectors; };
    for (int s = 0; s < sectors; ++s) m.faces.push_back({0, id(1, s), id(1, s + 1)});
    for (int r = 1; r < rings; ++r) {
        for (int s = 0; s < sectors; ++s) {
            m.faces.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
            m.faces.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
        }
    }
    return m;
}

}  // namespace

mesh::TriMesh hemisphere(int rings, int sectors) {
    return polar(rings, sectors, [](double t, double phi) {
        const double theta = t * std::numbers::pi / 2.0;
        return Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
    });
}

mesh::TriMesh disk(int rings, int sectors) {
    return polar(rings, sectors, [](double t, double phi) { return Vec3(t * std::cos(phi), t * std::sin(phi), 0.0); });
}

mesh::TriMesh torus(int nu, int nv) {
    mesh::TriMesh m;
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
            const double a = 2.0 * std::numbers::pi * i / nu, b = 2.0 * std::numbers::pi * j / nv;
            m.vertices.emplace_back((2.0 + std::cos(b)) * std::cos(a), (2.0 + std::cos(b)) * std::sin(a), std::sin(b));
        }
    }
    auto id = [&](int i, int j) { return (j % nv) * nu + (i % nu); };
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return m;
}

qc::PlanarMap smooth_perturbation(const mesh::ParamMesh& param, double amplitude, std::mt19937& rng) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    struct Mode {
        double kx, ky, ax, ay, ph;
    };
    std::vector<Mode> modes;
    for (int kx = 0; kx <= 1; ++kx) {
        for (int ky = 0; ky <= 1; ++ky) {
            if (kx == 0 && ky == 0) continue;
            modes.push_back({static_cast<double>(kx), static_cast<double>(ky), coef(rng), coef(rng), phase(rng)});
        }
    }
    std::vector<Vec2> d(param.uv.size());
    double peak = 0.0;
    for (std::size_t v = 0; v < d.size(); ++v) {
        Vec2 s = Vec2::Zero();
        for (const auto& m : modes) {
            const double w = std::sin(2.0 * std::numbers::pi * (m.kx * param.uv[v].x() + m.ky * param.uv[v].y()) + m.ph);
            s += w * Vec2(m.ax, m.ay);
        }
        d[v] = s;
        peak = std::max(peak, s.norm());
    }
    qc::PlanarMap out;
    out.target_uv.resize(d.size());
    for (std::size_t v = 0; v < d.size(); ++v) out.target_uv[v] = param.uv[v] + (amplitude / peak) * d[v];
    return out;
}

std::vector<Vec2> tutte_embedding(const mesh::TriMesh& mesh) {
    const auto loops = mesh::boundary_loops(mesh);
    if (loops.size() != 1) throw std::runtime_error("tutte_embedding needs a disk");
    const auto& loop = loops.front();
    const int n = mesh.num_vertices();
    std::vector<numerics::Triplet> t;
    std::vector<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& [a, b] : edges) {
        t.emplace_back(a, b, -1.0);
        t.emplace_back(b, a, -1.0);
        t.emplace_back(a, a, 1.0);
        t.emplace_back(b, b, 1.0);
    }
    numerics::SparseMatrix lap(n, n);
    lap.setFromTriplets(t.begin(), t.end());

    std::vector<double> arc(loop.size() + 1, 0.0);
    for (std::size_t k = 0; k < loop.size(); ++k) {
        arc[k + 1] = arc[k] + (mesh.vertices[loop[(k + 1) % loop.size()]] - mesh.vertices[loop[k]]).norm();
    }
    std::vector<double> fu(loop.size()), fv(loop.size());
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const double a = 2.0 * std::numbers::pi * arc[k] / arc.back();
        fu[k] = std::cos(a);
        fv[k] = std::sin(a);
    }
    const numerics::ConstrainedSolver solver(lap, loop);
    const numerics::Vector zero = numerics::Vector::Zero(n);
    const auto u = solver.solve(zero, fu);
    const auto v = solver.solve(zero, fv);
    std::vector<Vec2> out(n);
    for (int i = 0; i < n; ++i) out[i] = Vec2(u[i], v[i]);
    return out;
}

namespace {

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (p - (a + t * d)).norm();
}

}  // namespace

std::vector<Vec2> Glyph::anchors() const {
    const Vec2 left(center.x() - width / 2, center.y() - height / 2);
    const Vec2 right(center.x() + width / 2, center.y() - height / 2);
    const Vec2 apex(center.x(), center.y() + height / 2);
    const Vec2 bar(center.x(), center.y() - height / 2 + 0.4 * height);
    return {left, right, apex, bar};
}

double Glyph::intensity(const Vec2& p) const {
    const auto a = anchors();
    const Vec2 bar_l = a[0] + 0.4 * (a[2] - a[0]);
    const Vec2 bar_r = a[1] + 0.4 * (a[2] - a[1]);
    const double d = std::min({segment_distance(p, a[0], a[2]), segment_distance(p, a[2], a[1]),
                               segment_distance(p, bar_l, bar_r)});
    return std::exp(-(d / stroke) * (d / stroke));
}

LetterPair letter_pair(int cells) {
    LetterPair lp;
    lp.moving_glyph = Glyph{Vec2(0.42, 0.5), 0.36, 0.66};
    lp.static_glyph = Glyph{Vec2(0.58, 0.5), 0.5, 0.5};
    lp.moving = grid_param(cells, cells, 0.0, 0.05, 0.8, 0.95);
    lp.static_ = grid_param(cells, cells, 0.2, 0.1, 1.0, 0.9);
    std::vector<double> i1(lp.moving.num_vertices()), i2(lp.static_.num_vertices());
    for (int v = 0; v < lp.moving.num_vertices(); ++v) i1[v] = lp.moving_glyph.intensity(lp.moving.uv[v]);
    for (int v = 0; v < lp.static_.num_vertices(); ++v) i2[v] = lp.static_glyph.intensity(lp.static_.uv[v]);
    lp.moving.base.intensity = i1;
    lp.static_.base.intensity = i2;
    const auto from = lp.moving_glyph.anchors();
    const auto to = lp.static_glyph.anchors();
    for (std::size_t k = 0; k < from.size(); ++k) {
        lp.landmarks.pairs.push_back({nearest_vertex(lp.moving, from[k]), to[k]});
    }
    return lp;
}

pipeline::RegistrationConfig letter_config() {
    pipeline::RegistrationConfig c;
    c.alpha = 0.01;
    c.beta = 0.01;
    c.m_outer = 1;
    c.m_smooth = 10;
    c.bounds = {1.4, 0.2};
    c.n_proj = 1;
    c.n_outer = 20;
    c.prealign = false;
    // About one mesh edge at 512^2 (71 cells over 0.8).
    c.sigma_gauss = 6.0;
    return c;
}

DeformCase example1_replica() {
    DeformCase c;
    c.mesh = grid_param(32, 32);
    const std::vector<std::pair<Vec2, Vec2>> moves = {
        {{0.25, 0.25}, {0.12, 0.04}},  {{0.75, 0.25}, {0.04, 0.12}}, {{0.75, 0.75}, {-0.12, 0.04}},
        {{0.25, 0.75}, {-0.04, -0.12}}, {{0.5, 0.5}, {0.0, 0.0}},
    };
    for (const auto& [p, d] : moves) {
        const int v = nearest_vertex(c.mesh, p);
        c.landmarks.pairs.push_back({v, c.mesh.uv[v] + d});
    }
    return c;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("qcreg_test_" + std::to_string(::getpid()) + "_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    os << content;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace fixtures
