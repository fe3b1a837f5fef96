#include "qcreg/error.hpp"
#include "qcreg/mesh.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace qcreg::mesh {

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::io_error, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string_view> lines_of(std::string_view content) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= content.size()) {
        const auto pos = content.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < content.size()) out.push_back(content.substr(start));
            break;
        }
        out.push_back(content.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    raise(ErrorCode::parse_error, path.string() + ":" + std::to_string(line) + ": " + what);
}

double need_double(std::string_view tok, const std::filesystem::path& path, std::size_t line) {
    const auto v = text::parse_double(tok);
    if (!v) parse_fail(path, line, "bad number '" + std::string(tok) + "'");
    return *v;
}

long long need_int(std::string_view tok, const std::filesystem::path& path, std::size_t line) {
    const auto v = text::parse_int(tok);
    if (!v) parse_fail(path, line, "bad integer '" + std::string(tok) + "'");
    return *v;
}

int resolve_obj_index(long long idx, std::size_t count, const std::filesystem::path& path, std::size_t line) {
    long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(count) + idx;
    if (idx == 0 || resolved < 0 || resolved >= static_cast<long long>(count)) {
        raise(ErrorCode::index_out_of_range, path.string() + ":" + std::to_string(line) + ": index " +
                                                 std::to_string(idx) + " out of range");
    }
    return static_cast<int>(resolved);
}

LoadedMesh read_obj(const std::filesystem::path& path) {
    const auto content = slurp(path);
    const auto lines = lines_of(content);
    LoadedMesh out;
    std::vector<Vec2> texcoords;
    std::vector<std::array<int, 3>> face_tex;
    bool any_face_tex = false;

    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        auto line = text::trim(lines[ln]);
        if (line.empty() || line.front() == '#') continue;
        const auto tok = text::split_ws(line);
        const auto& kind = tok.front();
        if (kind == "v") {
            if (tok.size() < 4) parse_fail(path, ln + 1, "vertex needs 3 coordinates");
            out.mesh.vertices.emplace_back(need_double(tok[1], path, ln + 1), need_double(tok[2], path, ln + 1),
                                           need_double(tok[3], path, ln + 1));
        } else if (kind == "vt") {
            if (tok.size() < 3) parse_fail(path, ln + 1, "texture coordinate needs 2 values");
            texcoords.emplace_back(need_double(tok[1], path, ln + 1), need_double(tok[2], path, ln + 1));
        } else if (kind == "f") {
            if (tok.size() != 4) parse_fail(path, ln + 1, "only triangular faces are supported");
            Face face{};
            std::array<int, 3> tex{-1, -1, -1};
            for (int k = 0; k < 3; ++k) {
                const auto parts = text::split(tok[k + 1], '/');
                face[k] = resolve_obj_index(need_int(parts[0], path, ln + 1), out.mesh.vertices.size(), path, ln + 1);
                if (parts.size() >= 2 && !parts[1].empty()) {
                    tex[k] = resolve_obj_index(need_int(parts[1], path, ln + 1), texcoords.size(), path, ln + 1);
                    any_face_tex = true;
                }
            }
            out.mesh.faces.push_back(face);
            face_tex.push_back(tex);
        }
    }

    if (!texcoords.empty()) {
        std::vector<Vec2> uv(out.mesh.vertices.size(), Vec2::Constant(std::nan("")));
        if (any_face_tex) {
            for (std::size_t f = 0; f < out.mesh.faces.size(); ++f) {
                for (int k = 0; k < 3; ++k) {
                    const int t = face_tex[f][k];
                    if (t < 0) parse_fail(path, 0, "face " + std::to_string(f) + " lacks texture indices");
                    auto& slot = uv[out.mesh.faces[f][k]];
                    if (std::isnan(slot.x())) {
                        slot = texcoords[t];
                    } else if ((slot - texcoords[t]).norm() > 1e-12) {
                        parse_fail(path, 0, "vertex " + std::to_string(out.mesh.faces[f][k]) +
                                                " has multiple texture coordinates (seams are not supported)");
                    }
                }
            }
        } else if (texcoords.size() == out.mesh.vertices.size()) {
            uv = texcoords;
        }
        if (std::all_of(uv.begin(), uv.end(), [](const Vec2& p) { return p.allFinite(); })) {
            out.uv = std::move(uv);
        }
    }
    return out;
}

// Token stream with comment stripping and line tracking for OFF.
struct TokenStream {
    std::vector<std::pair<std::string_view, std::size_t>> tokens;
    std::size_t pos = 0;

    explicit TokenStream(std::string_view content) {
        const auto lines = lines_of(content);
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            auto line = lines[ln];
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            for (const auto& t : text::split_ws(line)) tokens.emplace_back(t, ln + 1);
        }
    }
    [[nodiscard]] bool done() const { return pos >= tokens.size(); }
    std::pair<std::string_view, std::size_t> next(const std::filesystem::path& path) {
        if (done()) parse_fail(path, tokens.empty() ? 0 : tokens.back().second, "unexpected end of file");
        return tokens[pos++];
    }
};

TriMesh read_off(const std::filesystem::path& path) {
    const auto content = slurp(path);
    TokenStream ts(content);
    auto [header, hl] = ts.next(path);
    if (header != "OFF") parse_fail(path, hl, "missing OFF header");
    auto [nv_tok, l1] = ts.next(path);
    auto [nf_tok, l2] = ts.next(path);
    auto [ne_tok, l3] = ts.next(path);
    (void)ne_tok;
    (void)l3;
    const auto nv = need_int(nv_tok, path, l1);
    const auto nf = need_int(nf_tok, path, l2);
    if (nv < 0 || nf < 0) parse_fail(path, l1, "negative element count");

    TriMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long long i = 0; i < nv; ++i) {
        Vec3 p;
        for (int k = 0; k < 3; ++k) {
            auto [t, l] = ts.next(path);
            p[k] = need_double(t, path, l);
        }
        mesh.vertices.push_back(p);
    }
    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long long i = 0; i < nf; ++i) {
        auto [cnt_tok, l] = ts.next(path);
        const std::size_t face_line = l;
        if (need_int(cnt_tok, path, l) != 3) parse_fail(path, l, "only triangular faces are supported");
        Face face{};
        for (int k = 0; k < 3; ++k) {
            auto [t, lk] = ts.next(path);
            const auto idx = need_int(t, path, lk);
            if (idx < 0 || idx >= nv) {
                raise(ErrorCode::index_out_of_range,
                      path.string() + ":" + std::to_string(lk) + ": index " + std::to_string(idx) + " out of range");
            }
            face[k] = static_cast<int>(idx);
        }
        // Anything else on the face line (colors) is ignored.
        while (!ts.done() && ts.tokens[ts.pos].second == face_line) ++ts.pos;
        mesh.faces.push_back(face);
    }
    return mesh;
}

TriMesh read_ply(const std::filesystem::path& path) {
    const auto content = slurp(path);
    const auto lines = lines_of(content);
    if (lines.empty() || text::trim(lines[0]) != "ply") parse_fail(path, 1, "missing ply magic");

    struct Element {
        std::string name;
        long long count = 0;
        std::vector<std::string> properties;
        bool list = false;
    };
    std::vector<Element> elements;
    std::size_t ln = 1;
    bool ascii = false;
    for (; ln < lines.size(); ++ln) {
        const auto tok = text::split_ws(lines[ln]);
        if (tok.empty()) continue;
        if (tok[0] == "end_header") {
            ++ln;
            break;
        }
        if (tok[0] == "format") {
            if (tok.size() < 2 || tok[1] != "ascii") parse_fail(path, ln + 1, "only ASCII PLY is supported");
            ascii = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) parse_fail(path, ln + 1, "bad element declaration");
            elements.push_back({std::string(tok[1]), need_int(tok[2], path, ln + 1), {}, false});
        } else if (tok[0] == "property") {
            if (elements.empty()) parse_fail(path, ln + 1, "property before element");
            if (tok.size() >= 2 && tok[1] == "list") {
                elements.back().list = true;
                elements.back().properties.emplace_back(tok.back());
            } else if (tok.size() == 3) {
                elements.back().properties.emplace_back(tok[2]);
            } else {
                parse_fail(path, ln + 1, "bad property declaration");
            }
        }
    }
    if (!ascii) parse_fail(path, 1, "missing format line");

    TriMesh mesh;
    std::vector<double> intensity;
    bool has_intensity = false;
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, ii = -1;
            for (int k = 0; k < static_cast<int>(el.properties.size()); ++k) {
                const auto& p = el.properties[k];
                if (p == "x") ix = k;
                if (p == "y") iy = k;
                if (p == "z") iz = k;
                if ((p == "quality" || p == "intensity") && ii < 0) ii = k;
            }
            if (ix < 0 || iy < 0 || iz < 0) parse_fail(path, ln, "vertex element needs x, y, z");
            has_intensity = ii >= 0;
            for (long long i = 0; i < el.count; ++i, ++ln) {
                while (ln < lines.size() && text::trim(lines[ln]).empty()) ++ln;
                if (ln >= lines.size()) parse_fail(path, ln, "unexpected end of vertex data");
                const auto tok = text::split_ws(lines[ln]);
                if (tok.size() < el.properties.size()) parse_fail(path, ln + 1, "short vertex row");
                mesh.vertices.emplace_back(need_double(tok[ix], path, ln + 1), need_double(tok[iy], path, ln + 1),
                                           need_double(tok[iz], path, ln + 1));
                if (has_intensity) intensity.push_back(need_double(tok[ii], path, ln + 1));
            }
        } else if (el.name == "face") {
            for (long long i = 0; i < el.count; ++i, ++ln) {
                while (ln < lines.size() && text::trim(lines[ln]).empty()) ++ln;
                if (ln >= lines.size()) parse_fail(path, ln, "unexpected end of face data");
                const auto tok = text::split_ws(lines[ln]);
                if (tok.empty() || need_int(tok[0], path, ln + 1) != 3 || tok.size() < 4) {
                    parse_fail(path, ln + 1, "only triangular faces are supported");
                }
                Face face{};
                for (int k = 0; k < 3; ++k) {
                    const auto idx = need_int(tok[k + 1], path, ln + 1);
                    if (idx < 0 || idx >= static_cast<long long>(mesh.vertices.size())) {
                        raise(ErrorCode::index_out_of_range, path.string() + ":" + std::to_string(ln + 1) +
                                                                 ": index " + std::to_string(idx) + " out of range");
                    }
                    face[k] = static_cast<int>(idx);
                }
                mesh.faces.push_back(face);
            }
        } else {
            ln += static_cast<std::size_t>(el.count);
        }
    }
    if (has_intensity) {
        for (double v : intensity) {
            if (!std::isfinite(v)) raise(ErrorCode::non_finite_value, path.string() + ": non-finite intensity");
        }
        mesh.intensity = std::move(intensity);
    }
    return mesh;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
    return out;
}

}  // namespace

MeshFormat format_from_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") return MeshFormat::obj;
    if (ext == ".off") return MeshFormat::off;
    if (ext == ".ply") return MeshFormat::ply;
    raise(ErrorCode::parse_error, "unrecognized mesh extension '" + ext + "'");
}

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
    TriMesh mesh;
    switch (format) {
        case MeshFormat::obj: mesh = read_obj(path).mesh; break;
        case MeshFormat::off: mesh = read_off(path); break;
        case MeshFormat::ply: mesh = read_ply(path); break;
    }
    validate(mesh);
    return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_extension(path)); }

LoadedMesh load_mesh_with_uv(const std::filesystem::path& path) {
    const auto format = format_from_extension(path);
    LoadedMesh out;
    if (format == MeshFormat::obj) {
        out = read_obj(path);
        validate(out.mesh);
    } else {
        out.mesh = load_mesh(path, format);
    }
    return out;
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
    auto out = open_out(path);
    using text::format_double;
    switch (format) {
        case MeshFormat::obj:
            for (const auto& p : mesh.vertices) {
                out << "v " << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z())
                    << '\n';
            }
            for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
            break;
        case MeshFormat::off:
            out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
            for (const auto& p : mesh.vertices) {
                out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
            }
            for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
            break;
        case MeshFormat::ply: {
            out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
                << "\nproperty double x\nproperty double y\nproperty double z\n";
            if (mesh.intensity) out << "property double intensity\n";
            out << "element face " << mesh.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
            for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
                const auto& p = mesh.vertices[i];
                out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z());
                if (mesh.intensity) out << ' ' << format_double((*mesh.intensity)[i]);
                out << '\n';
            }
            for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
            break;
        }
    }
    if (!out) raise(ErrorCode::io_error, "failed writing " + path.string());
}

void save_obj_with_uv(const TriMesh& mesh, std::span<const Vec2> uv, const std::filesystem::path& path) {
    if (uv.size() != mesh.vertices.size()) raise(ErrorCode::invalid_argument, "uv count does not match vertices");
    auto out = open_out(path);
    using text::format_double;
    for (const auto& p : mesh.vertices) {
        out << "v " << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
    }
    for (const auto& t : uv) out << "vt " << format_double(t.x()) << ' ' << format_double(t.y()) << '\n';
    for (const auto& f : mesh.faces) {
        out << "f";
        for (int k = 0; k < 3; ++k) out << ' ' << f[k] + 1 << '/' << f[k] + 1;
        out << '\n';
    }
    if (!out) raise(ErrorCode::io_error, "failed writing " + path.string());
}

}  // namespace qcreg::mesh
