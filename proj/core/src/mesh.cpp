#include "qcreg/mesh.hpp"

#include "qcreg/error.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace qcreg::mesh {

namespace {

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::io_error, "cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
    return lines;
}

// Splits CSV content into numeric rows, skipping blanks, '#' comments and a
// single leading header row whose first field is not numeric.
std::vector<std::vector<std::string_view>> csv_rows(const std::vector<std::string>& lines,
                                                    const std::filesystem::path& path) {
    std::vector<std::vector<std::string_view>> rows;
    bool first = true;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = text::trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        auto fields = text::split(line, ',');
        if (first) {
            first = false;
            if (!text::parse_double(fields.front())) continue;
        }
        for (const auto& f : fields) {
            if (f.empty()) {
                raise(ErrorCode::parse_error,
                      path.string() + ":" + std::to_string(i + 1) + ": empty field");
            }
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

int parse_index(std::string_view field, const std::filesystem::path& path) {
    const auto v = text::parse_int(field);
    if (!v) raise(ErrorCode::parse_error, path.string() + ": expected integer index, got '" + std::string(field) + "'");
    if (*v < 0 || *v > std::numeric_limits<int>::max()) {
        raise(ErrorCode::index_out_of_range, path.string() + ": index " + std::string(field));
    }
    return static_cast<int>(*v);
}

double parse_value(std::string_view field, const std::filesystem::path& path) {
    const auto v = text::parse_double(field);
    if (!v) raise(ErrorCode::parse_error, path.string() + ": expected number, got '" + std::string(field) + "'");
    return *v;
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Vec2> convex_hull(std::span<const Vec2> points) {
    std::vector<Vec2> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    if (pts.size() < 3) return pts;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) noexcept {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) noexcept {
    return 0.5 * (b - a).cross(c - a).norm();
}

double bounding_box_diagonal(std::span<const Vec3> points) noexcept {
    if (points.empty()) return 0.0;
    Vec3 lo = points.front();
    Vec3 hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

void validate(const TriMesh& mesh) {
    const int n = mesh.num_vertices();
    for (const auto& p : mesh.vertices) {
        if (!p.allFinite()) raise(ErrorCode::non_finite_value, "vertex position is not finite");
    }
    const double diag = bounding_box_diagonal(mesh.vertices);
    const double min_area = 1e-12 * diag * diag;

    std::unordered_map<std::uint64_t, int> edge_count;
    edge_count.reserve(mesh.faces.size() * 2);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const auto& face = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            if (face[k] < 0 || face[k] >= n) {
                raise(ErrorCode::index_out_of_range,
                      "face " + std::to_string(f) + " references vertex " + std::to_string(face[k]));
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            raise(ErrorCode::degenerate_face, "face " + std::to_string(f) + " repeats a vertex");
        }
        if (triangle_area(mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]) <= min_area) {
            raise(ErrorCode::degenerate_face, "face " + std::to_string(f) + " has zero area");
        }
        for (int k = 0; k < 3; ++k) {
            if (++edge_count[edge_key(face[k], face[(k + 1) % 3])] > 2) {
                raise(ErrorCode::non_manifold, "edge (" + std::to_string(face[k]) + "," +
                                                   std::to_string(face[(k + 1) % 3]) +
                                                   ") is shared by more than two faces");
            }
        }
    }
    if (mesh.intensity && static_cast<int>(mesh.intensity->size()) != n) {
        raise(ErrorCode::missing_vertex, "intensity count does not match vertex count");
    }
}

std::vector<std::vector<int>> boundary_loops(const TriMesh& mesh) {
    std::unordered_map<std::uint64_t, int> edge_count;
    for (const auto& face : mesh.faces) {
        for (int k = 0; k < 3; ++k) ++edge_count[edge_key(face[k], face[(k + 1) % 3])];
    }
    std::unordered_multimap<int, int> next;
    std::vector<std::pair<int, int>> starts;
    for (const auto& face : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = face[k];
            const int b = face[(k + 1) % 3];
            if (edge_count[edge_key(a, b)] == 1) {
                next.emplace(a, b);
                starts.emplace_back(a, b);
            }
        }
    }
    std::sort(starts.begin(), starts.end());

    std::unordered_set<std::uint64_t> used;
    std::vector<std::vector<int>> loops;
    for (const auto& [a0, b0] : starts) {
        if (used.contains(edge_key(a0, b0))) continue;
        std::vector<int> loop{a0};
        used.insert(edge_key(a0, b0));
        int cur = b0;
        while (cur != a0) {
            loop.push_back(cur);
            int nxt = -1;
            auto [lo, hi] = next.equal_range(cur);
            for (auto it = lo; it != hi; ++it) {
                if (!used.contains(edge_key(cur, it->second))) {
                    nxt = it->second;
                    break;
                }
            }
            if (nxt < 0) break;
            used.insert(edge_key(cur, nxt));
            cur = nxt;
        }
        loops.push_back(std::move(loop));
    }
    return loops;
}

int euler_characteristic(const TriMesh& mesh) {
    std::unordered_set<std::uint64_t> edges;
    std::unordered_set<int> used_vertices;
    for (const auto& face : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            edges.insert(edge_key(face[k], face[(k + 1) % 3]));
            used_vertices.insert(face[k]);
        }
    }
    return static_cast<int>(used_vertices.size()) - static_cast<int>(edges.size()) + mesh.num_faces();
}

ParamMesh make_param_mesh(TriMesh mesh, std::vector<Vec2> uv) {
    if (static_cast<int>(uv.size()) != mesh.num_vertices()) {
        raise(ErrorCode::invalid_argument, "uv count does not match vertex count");
    }
    for (const auto& p : uv) {
        if (!p.allFinite()) raise(ErrorCode::non_finite_value, "uv coordinate is not finite");
    }
    if (const auto count = boundary_loops(mesh).size(); count != 1) {
        raise(ErrorCode::not_disk_topology, "expected a single boundary loop, found " + std::to_string(count));
    }
    double total = 0.0;
    for (const auto& f : mesh.faces) total += signed_area(uv[f[0]], uv[f[1]], uv[f[2]]);
    if (total < 0.0) {
        for (auto& f : mesh.faces) std::swap(f[1], f[2]);
        total = -total;
    }
    const double min_area = 1e-12 * total;
    int flipped = 0;
    for (int i = 0; i < mesh.num_faces(); ++i) {
        const auto& f = mesh.faces[i];
        const double a = signed_area(uv[f[0]], uv[f[1]], uv[f[2]]);
        if (std::abs(a) <= min_area) {
            raise(ErrorCode::degenerate_face, "face " + std::to_string(i) + " has zero uv area");
        }
        if (a < 0.0) ++flipped;
    }
    if (flipped > 0) {
        raise(ErrorCode::flipped_faces, std::to_string(flipped) + " faces have negative uv orientation");
    }
    auto loops = boundary_loops(mesh);
    ParamMesh out;
    out.boundary = std::move(loops.front());
    out.base = std::move(mesh);
    out.uv = std::move(uv);
    return out;
}

ParamMesh param_from_planar(TriMesh mesh) {
    std::vector<Vec2> uv;
    uv.reserve(mesh.vertices.size());
    for (const auto& p : mesh.vertices) uv.emplace_back(p.x(), p.y());
    return make_param_mesh(std::move(mesh), std::move(uv));
}

namespace {

LandmarkSet parse_landmarks(const std::filesystem::path& path, const ParamMesh& moving,
                            std::span<const Vec2> target_uv) {
    const auto lines = read_lines(path);
    const auto rows = csv_rows(lines, path);
    LandmarkSet out;
    std::unordered_set<int> seen;
    std::size_t width = 0;
    for (const auto& row : rows) {
        if (row.size() != 2 && row.size() != 3) {
            raise(ErrorCode::parse_error, path.string() + ": landmark rows need 2 or 3 fields");
        }
        if (width == 0) width = row.size();
        if (row.size() != width) raise(ErrorCode::mixed_row_formats, path.string() + ": mixed landmark row formats");

        const int id = parse_index(row[0], path);
        if (id >= moving.num_vertices()) {
            raise(ErrorCode::index_out_of_range, "moving vertex " + std::to_string(id) + " out of range");
        }
        if (!seen.insert(id).second) {
            raise(ErrorCode::duplicate_moving_vertex, "moving vertex " + std::to_string(id) + " listed twice");
        }
        Vec2 target;
        if (row.size() == 2) {
            const int tid = parse_index(row[1], path);
            if (tid >= static_cast<int>(target_uv.size())) {
                raise(ErrorCode::index_out_of_range, "target vertex " + std::to_string(tid) + " out of range");
            }
            target = target_uv[tid];
        } else {
            target = Vec2(parse_value(row[1], path), parse_value(row[2], path));
            if (!target.allFinite()) raise(ErrorCode::non_finite_value, "landmark target is not finite");
        }
        out.pairs.push_back({id, target});
    }
    return out;
}

}  // namespace

LandmarkSet load_landmarks(const std::filesystem::path& path, const ParamMesh& moving, const ParamMesh& target) {
    auto out = parse_landmarks(path, moving, target.uv);
    check_targets_in_hull(out, target.uv);
    return out;
}

LandmarkSet load_landmarks(const std::filesystem::path& path, const ParamMesh& moving) {
    return parse_landmarks(path, moving, moving.uv);
}

void check_targets_in_hull(const LandmarkSet& landmarks, std::span<const Vec2> target_uv) {
    const auto hull = convex_hull(target_uv);
    if (hull.size() < 3) raise(ErrorCode::invalid_argument, "target domain has a degenerate hull");
    double extent = 0.0;
    for (const auto& p : hull) extent = std::max(extent, (p - hull.front()).norm());
    const double tol = 1e-9 * extent;
    for (const auto& lm : landmarks.pairs) {
        for (std::size_t i = 0; i < hull.size(); ++i) {
            const Vec2& a = hull[i];
            const Vec2& b = hull[(i + 1) % hull.size()];
            const double edge = (b - a).norm();
            if (cross(a, b, lm.target) < -tol * edge) {
                raise(ErrorCode::invalid_landmark, "landmark target for vertex " +
                                                       std::to_string(lm.moving_vertex) +
                                                       " lies outside the target domain");
            }
        }
    }
}

TriMesh attach_intensity(TriMesh mesh, const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    const auto rows = csv_rows(lines, path);
    std::vector<double> values(mesh.vertices.size(), 0.0);
    std::vector<char> have(mesh.vertices.size(), 0);
    for (const auto& row : rows) {
        if (row.size() != 2) raise(ErrorCode::parse_error, path.string() + ": intensity rows need 2 fields");
        const int id = parse_index(row[0], path);
        if (id >= mesh.num_vertices()) {
            raise(ErrorCode::index_out_of_range, "intensity vertex " + std::to_string(id) + " out of range");
        }
        if (have[id]) raise(ErrorCode::parse_error, "intensity vertex " + std::to_string(id) + " listed twice");
        const double v = parse_value(row[1], path);
        if (!std::isfinite(v)) {
            raise(ErrorCode::non_finite_value, "intensity of vertex " + std::to_string(id) + " is not finite");
        }
        values[id] = v;
        have[id] = 1;
    }
    for (std::size_t i = 0; i < have.size(); ++i) {
        if (!have[i]) raise(ErrorCode::missing_vertex, "no intensity for vertex " + std::to_string(i));
    }
    mesh.intensity = std::move(values);
    return mesh;
}

}  // namespace qcreg::mesh
