#include "qcreg/numerics.hpp"

#include "qcreg/error.hpp"
#include "qcreg/parallel.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>

namespace qcreg::numerics {

using mesh::Face;

FaceGeometry face_geometry(const Vec2& a, const Vec2& b, const Vec2& c) {
    FaceGeometry g;
    g.area = mesh::signed_area(a, b, c);
    const double inv = 1.0 / (2.0 * g.area);
    const std::array<const Vec2*, 3> p{&a, &b, &c};
    for (int i = 0; i < 3; ++i) {
        const Vec2 e = *p[(i + 2) % 3] - *p[(i + 1) % 3];
        g.grad[i] = Vec2(-e.y(), e.x()) * inv;
    }
    return g;
}

std::vector<FaceGeometry> face_geometries(const mesh::ParamMesh& mesh) {
    const auto& faces = mesh.faces();
    std::vector<FaceGeometry> out(faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        out[f] = face_geometry(mesh.uv[faces[f][0]], mesh.uv[faces[f][1]], mesh.uv[faces[f][2]]);
        total += std::abs(out[f].area);
    }
    const double min_area = 1e-12 * total;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (!(out[f].area > min_area)) {
            raise(ErrorCode::degenerate_face, "face " + std::to_string(f) + " is degenerate or flipped in uv");
        }
    }
    return out;
}

SparseMatrix SparseSpdSystem::matrix() const {
    SparseMatrix m(dimension, dimension);
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

std::vector<Vec2> face_gradient(std::span<const FaceGeometry> geometry, std::span<const Face> faces,
                                std::span<const double> scalar) {
    std::vector<Vec2> out(faces.size());
    parallel_for(faces.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t f = begin; f < end; ++f) {
            Vec2 g = Vec2::Zero();
            for (int k = 0; k < 3; ++k) g += scalar[faces[f][k]] * geometry[f].grad[k];
            out[f] = g;
        }
    });
    return out;
}

std::vector<Vec2> face_gradient(const mesh::ParamMesh& mesh, std::span<const double> scalar) {
    if (static_cast<int>(scalar.size()) != mesh.num_vertices()) {
        raise(ErrorCode::invalid_argument, "scalar field size does not match vertex count");
    }
    const auto geometry = face_geometries(mesh);
    return face_gradient(geometry, mesh.faces(), scalar);
}

SparseSpdSystem assemble_div_a_grad(std::span<const FaceGeometry> geometry, std::span<const Face> faces,
                                    int num_vertices, std::span<const Mat2> a_field) {
    if (a_field.size() != faces.size()) raise(ErrorCode::invalid_argument, "A field size does not match faces");
    constexpr double kEps = 1e-10;
    SparseSpdSystem sys;
    sys.dimension = num_vertices;
    sys.entries.resize(faces.size() * 9);
    parallel_for(faces.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t f = begin; f < end; ++f) {
            const Mat2& a = a_field[f];
            const double tr = a.trace();
            const double det = a.determinant();
            const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
            if (!a.allFinite() || std::abs(a(0, 1) - a(1, 0)) > 1e-12 * std::max(1.0, std::abs(tr)) ||
                0.5 * tr - disc <= kEps) {
                raise(ErrorCode::non_positive_definite_a,
                      "diffusion matrix on face " + std::to_string(f) + " is not positive definite");
            }
            const auto& g = geometry[f];
            for (int i = 0; i < 3; ++i) {
                const Vec2 ag = a * g.grad[i];
                for (int j = 0; j < 3; ++j) {
                    sys.entries[f * 9 + i * 3 + j] = Triplet(faces[f][j], faces[f][i], g.area * g.grad[j].dot(ag));
                }
            }
        }
    });
    return sys;
}

SparseSpdSystem assemble_div_a_grad(const mesh::ParamMesh& mesh, std::span<const Mat2> a_field) {
    const auto geometry = face_geometries(mesh);
    return assemble_div_a_grad(geometry, mesh.faces(), mesh.num_vertices(), a_field);
}

SparseSpdSystem assemble_laplacian(const mesh::ParamMesh& mesh) {
    const std::vector<Mat2> identity(mesh.faces().size(), Mat2::Identity());
    return assemble_div_a_grad(mesh, identity);
}

// ---------------------------------------------------------------------------
// Constrained solves
// ---------------------------------------------------------------------------

struct ConstrainedSolver::Impl {
    SolverOptions options;
    std::vector<int> free_of_full;  // -1 for constrained
    std::vector<int> free_indices;
    SparseMatrix k_ff;
    SparseMatrix k_fc;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    bool direct_ok = false;
    bool laplacian_like = false;
    bool gauge_pinned = false;  // no constraints, kernel = constants, x[0] pinned
};

ConstrainedSolver::~ConstrainedSolver() = default;
ConstrainedSolver::ConstrainedSolver(ConstrainedSolver&&) noexcept = default;
ConstrainedSolver& ConstrainedSolver::operator=(ConstrainedSolver&&) noexcept = default;

ConstrainedSolver::ConstrainedSolver(const SparseMatrix& matrix, std::vector<int> constrained, SolverOptions options)
    : impl_(std::make_unique<Impl>()), constrained_(std::move(constrained)), dimension_(static_cast<int>(matrix.rows())) {
    if (matrix.rows() != matrix.cols()) raise(ErrorCode::invalid_argument, "system matrix is not square");
    impl_->options = options;
    const int n = dimension_;

    std::vector<int> is_fixed(n, 0);
    for (int c : constrained_) {
        if (c < 0 || c >= n) raise(ErrorCode::index_out_of_range, "constrained index " + std::to_string(c));
        if (is_fixed[c]++) raise(ErrorCode::invalid_argument, "constrained index repeated: " + std::to_string(c));
    }

    if (constrained_.empty() && n > 0) {
        const Vector ones = Vector::Ones(n);
        const Vector row_sums = matrix * ones;
        const double scale = std::max(1e-300, matrix.diagonal().cwiseAbs().maxCoeff());
        impl_->laplacian_like = row_sums.cwiseAbs().maxCoeff() <= 1e-10 * scale;
        if (impl_->laplacian_like) {
            impl_->gauge_pinned = true;
            is_fixed[0] = 1;
        }
    }

    impl_->free_of_full.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        if (!is_fixed[i]) {
            impl_->free_of_full[i] = static_cast<int>(impl_->free_indices.size());
            impl_->free_indices.push_back(i);
        }
    }
    const int nf = static_cast<int>(impl_->free_indices.size());
    // Column slot for each fixed index, in the order constraints are given.
    std::vector<int> fixed_slot(n, -1);
    for (std::size_t k = 0; k < constrained_.size(); ++k) fixed_slot[constrained_[k]] = static_cast<int>(k);
    const int nc = impl_->gauge_pinned ? 1 : static_cast<int>(constrained_.size());
    if (impl_->gauge_pinned) fixed_slot[0] = 0;

    std::vector<Triplet> ff;
    std::vector<Triplet> fc;
    ff.reserve(static_cast<std::size_t>(matrix.nonZeros()));
    for (int col = 0; col < matrix.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
            const int r = static_cast<int>(it.row());
            const int c = static_cast<int>(it.col());
            const int fr = impl_->free_of_full[r];
            if (fr < 0) continue;
            const int fcol = impl_->free_of_full[c];
            if (fcol >= 0) {
                ff.emplace_back(fr, fcol, it.value());
            } else {
                fc.emplace_back(fr, fixed_slot[c], it.value());
            }
        }
    }
    impl_->k_ff.resize(nf, nf);
    impl_->k_ff.setFromTriplets(ff.begin(), ff.end());
    impl_->k_fc.resize(nf, nc);
    impl_->k_fc.setFromTriplets(fc.begin(), fc.end());

    if (nf > 0 && nf <= options.direct_limit) {
        impl_->ldlt.compute(impl_->k_ff);
        impl_->direct_ok = impl_->ldlt.info() == Eigen::Success;
        if (impl_->direct_ok) {
            const auto d = impl_->ldlt.vectorD();
            const double dmax = d.cwiseAbs().maxCoeff();
            impl_->direct_ok = d.minCoeff() > 1e-14 * dmax;
        }
    }
}

Vector ConstrainedSolver::solve(const Vector& rhs, std::span<const double> fixed_values, SolveReport* report) const {
    const int n = dimension_;
    if (rhs.size() != n) raise(ErrorCode::invalid_argument, "rhs size does not match system dimension");
    if (fixed_values.size() != constrained_.size()) {
        raise(ErrorCode::invalid_argument, "fixed value count does not match constrained indices");
    }
    const auto& im = *impl_;
    const int nf = static_cast<int>(im.free_indices.size());

    Vector x = Vector::Zero(n);
    Vector xc;
    if (im.gauge_pinned) {
        const double total = rhs.sum();
        if (std::abs(total) > 1e-10 * std::max(1.0, rhs.cwiseAbs().sum())) {
            raise(ErrorCode::singular_system,
                  "system has no constrained indices and the right-hand side is not orthogonal to constants");
        }
        xc = Vector::Zero(1);
    } else {
        xc = Eigen::Map<const Vector>(fixed_values.data(), static_cast<Eigen::Index>(fixed_values.size()));
        for (std::size_t k = 0; k < constrained_.size(); ++k) x[constrained_[k]] = fixed_values[k];
    }
    if (nf == 0) {
        if (report) *report = {};
        return x;
    }

    Vector b(nf);
    for (int i = 0; i < nf; ++i) b[i] = rhs[im.free_indices[i]];
    if (xc.size() > 0) b -= im.k_fc * xc;

    const double bnorm = b.norm();
    const double scale = bnorm > 0.0 ? bnorm : 1.0;
    SolveReport rep;
    Vector xf;
    bool ok = false;
    if (im.direct_ok) {
        xf = im.ldlt.solve(b);
        rep.relative_residual = (im.k_ff * xf - b).norm() / scale;
        ok = xf.allFinite() && rep.relative_residual < 1e-8;
    }
    if (!ok) {
        Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
        cg.setTolerance(im.options.tolerance);
        cg.setMaxIterations(std::max(1, im.options.max_iteration_factor * nf));
        cg.compute(im.k_ff);
        if (im.direct_ok && xf.allFinite()) {
            xf = cg.solveWithGuess(b, xf);
        } else {
            xf = cg.solve(b);
        }
        rep.used_iterative = true;
        rep.iterations = static_cast<int>(cg.iterations());
        rep.relative_residual = (im.k_ff * xf - b).norm() / scale;
        if (!xf.allFinite() || rep.relative_residual >= 1e-8) {
            if (!im.direct_ok && constrained_.empty() && !im.gauge_pinned) {
                raise(ErrorCode::singular_system, "unconstrained system is singular");
            }
            raise(ErrorCode::non_convergence, "linear solve did not converge (relative residual " +
                                                  std::to_string(rep.relative_residual) + ")");
        }
    }
    for (int i = 0; i < nf; ++i) x[im.free_indices[i]] = xf[i];
    if (report) *report = rep;
    return x;
}

Vector solve_constrained(const SparseSpdSystem& system, const Vector& rhs, SolveReport* report,
                         SolverOptions options) {
    std::vector<int> idx;
    std::vector<double> vals;
    idx.reserve(system.constrained.size());
    for (const auto& [i, v] : system.constrained) {
        idx.push_back(i);
        vals.push_back(v);
    }
    const ConstrainedSolver solver(system.matrix(), std::move(idx), options);
    return solver.solve(rhs, vals, report);
}

// ---------------------------------------------------------------------------
// 2x2 SVD
// ---------------------------------------------------------------------------

Mat2 Svd2x2::reconstruct() const {
    Mat2 d = Mat2::Zero();
    d(0, 0) = sigma1;
    d(1, 1) = orientation_sign * sigma2;
    return u * d * v.transpose();
}

namespace {
Mat2 rotation(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}
}  // namespace

Svd2x2 svd2x2(const Mat2& m) {
    if (!m.allFinite()) raise(ErrorCode::non_finite_input, "svd2x2 input is not finite");
    // m = R(phi) diag(q + r, q - r) R(theta), from the similarity/anti-similarity split.
    const double e = 0.5 * (m(0, 0) + m(1, 1));
    const double f = 0.5 * (m(0, 0) - m(1, 1));
    const double g = 0.5 * (m(1, 0) + m(0, 1));
    const double h = 0.5 * (m(1, 0) - m(0, 1));
    const double q = std::hypot(e, h);
    const double r = std::hypot(f, g);
    const double a1 = std::atan2(g, f);
    const double a2 = std::atan2(h, e);
    const double theta = 0.5 * (a2 - a1);
    const double phi = 0.5 * (a2 + a1);

    Svd2x2 out;
    out.u = rotation(phi);
    out.v = rotation(-theta);
    out.sigma1 = q + r;
    out.sigma2 = std::abs(q - r);
    out.orientation_sign = m.determinant() < 0.0 ? -1 : 1;
    if (q - r < 0.0 && out.orientation_sign > 0) out.sigma2 = 0.0;  // rounding at det == 0
    return out;
}

// ---------------------------------------------------------------------------
// Face adjacency
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> face_neighbors(std::span<const Face> faces) {
    std::unordered_map<std::uint64_t, int> first_face;
    first_face.reserve(faces.size() * 2);
    std::vector<std::vector<int>> nbrs(faces.size());
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int a = faces[f][k];
            const int b = faces[f][(k + 1) % 3];
            const auto key = (static_cast<std::uint64_t>(std::max(a, b)) << 32) | static_cast<std::uint64_t>(std::min(a, b));
            auto [it, inserted] = first_face.emplace(key, f);
            if (!inserted) {
                nbrs[f].push_back(it->second);
                nbrs[it->second].push_back(f);
            }
        }
    }
    for (auto& n : nbrs) std::sort(n.begin(), n.end());
    return nbrs;
}

SparseSpdSystem face_adjacency_laplacian(const mesh::ParamMesh& mesh) {
    const auto nbrs = face_neighbors(mesh.faces());
    SparseSpdSystem sys;
    sys.dimension = mesh.num_faces();
    for (int f = 0; f < sys.dimension; ++f) {
        sys.entries.emplace_back(f, f, static_cast<double>(nbrs[f].size()));
        for (int g : nbrs[f]) sys.entries.emplace_back(f, g, -1.0);
    }
    if (sys.dimension == 1) sys.entries.emplace_back(0, 0, 0.0);
    return sys;
}

SparseMatrix face_adjacency_operator(std::span<const Face> faces, AdjacencyNormalization normalization) {
    const auto nbrs = face_neighbors(faces);
    const int n = static_cast<int>(faces.size());
    std::vector<Triplet> t;
    for (int f = 0; f < n; ++f) {
        if (nbrs[f].empty()) continue;
        const double w = normalization == AdjacencyNormalization::degree ? 1.0 / static_cast<double>(nbrs[f].size()) : 1.0;
        t.emplace_back(f, f, -w * static_cast<double>(nbrs[f].size()));
        for (int g : nbrs[f]) t.emplace_back(f, g, w);
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

}  // namespace qcreg::numerics
