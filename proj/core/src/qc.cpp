#include "qcreg/qc.hpp"

#include "qcreg/error.hpp"
#include "qcreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace qcreg::qc {

double BeltramiField::max_abs() const noexcept {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, std::abs(v));
    return m;
}

bool PlanarMap::finite() const noexcept {
    return std::all_of(target_uv.begin(), target_uv.end(), [](const Vec2& p) { return p.allFinite(); });
}

std::vector<Mat2> face_differentials(std::span<const numerics::FaceGeometry> geometry,
                                     std::span<const mesh::Face> faces, std::span<const Vec2> targets) {
    std::vector<Mat2> out(faces.size());
    parallel_for(faces.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t f = begin; f < end; ++f) {
            Mat2 d = Mat2::Zero();
            for (int k = 0; k < 3; ++k) d += targets[faces[f][k]] * geometry[f].grad[k].transpose();
            out[f] = d;
        }
    });
    return out;
}

std::vector<double> face_determinants(const mesh::ParamMesh& source, const PlanarMap& map) {
    const auto& faces = source.faces();
    std::vector<double> out(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& t = faces[f];
        const double src = mesh::signed_area(source.uv[t[0]], source.uv[t[1]], source.uv[t[2]]);
        const double dst = mesh::signed_area(map.target_uv[t[0]], map.target_uv[t[1]], map.target_uv[t[2]]);
        out[f] = dst / src;
    }
    return out;
}

bool is_diffeomorphic(const mesh::ParamMesh& source, const PlanarMap& map) { return count_flipped(source, map) == 0; }

int count_flipped(const mesh::ParamMesh& source, const PlanarMap& map) {
    const auto dets = face_determinants(source, map);
    return static_cast<int>(std::count_if(dets.begin(), dets.end(), [](double d) { return !(d > 0.0); }));
}

Complex beltrami_of_differential(const Mat2& df) noexcept {
    const double ux = df(0, 0), uy = df(0, 1), vx = df(1, 0), vy = df(1, 1);
    const Complex fz(0.5 * (ux + vy), 0.5 * (vx - uy));
    const Complex fzbar(0.5 * (ux - vy), 0.5 * (uy + vx));
    if (std::abs(fz) < 1e-14) return {1.0, 0.0};
    return fzbar / fz;
}

BeltramiField beltrami_of_map(std::span<const numerics::FaceGeometry> geometry, std::span<const mesh::Face> faces,
                              const PlanarMap& map) {
    const auto df = face_differentials(geometry, faces, map.target_uv);
    BeltramiField out;
    out.values.resize(df.size());
    for (std::size_t f = 0; f < df.size(); ++f) out.values[f] = beltrami_of_differential(df[f]);
    return out;
}

BeltramiField beltrami_of_map(const mesh::ParamMesh& source, const PlanarMap& map) {
    if (static_cast<int>(map.target_uv.size()) != source.num_vertices()) {
        raise(ErrorCode::invalid_argument, "map size does not match vertex count");
    }
    const auto geometry = numerics::face_geometries(source);
    return beltrami_of_map(geometry, source.faces(), map);
}

double condition_number(Complex mu) {
    const double k = std::abs(mu);
    if (!(k < 1.0)) raise(ErrorCode::mu_out_of_range, "|mu| >= 1 has no finite condition number");
    return (1.0 + k) / (1.0 - k);
}

BeltramiField threshold(BeltramiField mu) {
    for (auto& v : mu.values) {
        if (!(std::abs(v) < 1.0)) v = 0.0;
    }
    return mu;
}

Mat2 diffusion_matrix(Complex mu) {
    const double rho = mu.real();
    const double tau = mu.imag();
    const double n2 = std::norm(mu);
    if (!(n2 < 1.0)) {
        std::ostringstream ss;
        ss << "|mu| = " << std::sqrt(n2) << " >= 1";
        raise(ErrorCode::mu_out_of_range, ss.str());
    }
    const double s = 1.0 / (1.0 - n2);
    Mat2 a;
    a << s * ((rho - 1.0) * (rho - 1.0) + tau * tau), -2.0 * tau * s, -2.0 * tau * s,
        s * ((1.0 + rho) * (1.0 + rho) + tau * tau);
    return a;
}

PlanarMap lbs(std::span<const numerics::FaceGeometry> geometry, const mesh::ParamMesh& source,
              const BeltramiField& mu, std::span<const DirichletPoint> dirichlet) {
    if (mu.values.size() != source.faces().size()) {
        raise(ErrorCode::invalid_argument, "Beltrami field size does not match face count");
    }
    if (dirichlet.empty()) raise(ErrorCode::singular_system, "lbs needs at least one Dirichlet point");

    std::vector<Mat2> a(mu.values.size());
    for (std::size_t f = 0; f < a.size(); ++f) a[f] = diffusion_matrix(mu.values[f]);
    const auto sys = numerics::assemble_div_a_grad(geometry, source.faces(), source.num_vertices(), a);

    std::unordered_map<int, std::size_t> slot;
    std::vector<int> indices;
    std::vector<Vec2> positions;
    for (const auto& d : dirichlet) {
        if (d.vertex < 0 || d.vertex >= source.num_vertices()) {
            raise(ErrorCode::index_out_of_range, "Dirichlet vertex " + std::to_string(d.vertex));
        }
        auto [it, inserted] = slot.emplace(d.vertex, indices.size());
        if (inserted) {
            indices.push_back(d.vertex);
            positions.push_back(d.position);
        } else {
            positions[it->second] = d.position;
        }
    }
    std::vector<double> fu(indices.size()), fv(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        fu[k] = positions[k].x();
        fv[k] = positions[k].y();
    }
    const numerics::ConstrainedSolver solver(sys.matrix(), indices);
    const numerics::Vector zero = numerics::Vector::Zero(source.num_vertices());
    const auto u = solver.solve(zero, fu);
    const auto v = solver.solve(zero, fv);

    PlanarMap out;
    out.target_uv.resize(source.uv.size());
    for (int i = 0; i < source.num_vertices(); ++i) out.target_uv[i] = Vec2(u[i], v[i]);
    return out;
}

PlanarMap lbs(const mesh::ParamMesh& source, const BeltramiField& mu, std::span<const DirichletPoint> dirichlet) {
    const auto geometry = numerics::face_geometries(source);
    return lbs(geometry, source, mu, dirichlet);
}

BeltramiField smooth_beltrami(const BeltramiField& mu_prime, const BeltramiField& nu0, double alpha, double beta,
                              int steps, const numerics::SparseMatrix& laplacian) {
    const auto n = static_cast<Eigen::Index>(mu_prime.values.size());
    if (static_cast<Eigen::Index>(nu0.values.size()) != n || laplacian.rows() != n || laplacian.cols() != n) {
        raise(ErrorCode::invalid_argument, "smooth_beltrami: size mismatch");
    }
    if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || steps < 0) {
        raise(ErrorCode::invalid_argument, "smooth_beltrami: need alpha in [0,1], beta >= 0, steps >= 0");
    }
    Eigen::VectorXcd target(n), nu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        target[i] = mu_prime.values[i];
        nu[i] = nu0.values[i];
    }
    const Eigen::SparseMatrix<Complex> lap = laplacian.cast<Complex>();
    for (int s = 0; s < steps; ++s) {
        Eigen::VectorXcd diffused = lap * nu;
        nu = (1.0 - alpha) * nu + alpha * target + beta * diffused;
    }
    BeltramiField out;
    out.values.assign(nu.data(), nu.data() + n);
    return threshold(std::move(out));
}

}  // namespace qcreg::qc
