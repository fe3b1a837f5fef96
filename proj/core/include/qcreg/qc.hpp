#pragma once

#include "qcreg/mesh.hpp"
#include "qcreg/numerics.hpp"
#include "qcreg/types.hpp"

#include <span>
#include <vector>

namespace qcreg::qc {

/// Per-face Beltrami coefficient mu = rho + i tau.
struct BeltramiField {
    std::vector<Complex> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] double max_abs() const noexcept;
};

/// Image of every source vertex under a piecewise-linear planar map.
struct PlanarMap {
    std::vector<Vec2> target_uv;

    [[nodiscard]] static PlanarMap identity(const mesh::ParamMesh& source) { return {source.uv}; }
    [[nodiscard]] bool finite() const noexcept;
};

/// Per-face constant differential [du/dx du/dy; dv/dx dv/dy].
[[nodiscard]] std::vector<Mat2> face_differentials(std::span<const numerics::FaceGeometry> geometry,
                                                   std::span<const mesh::Face> faces, std::span<const Vec2> targets);

/// det(Df) on every face: target area over source area.
[[nodiscard]] std::vector<double> face_determinants(const mesh::ParamMesh& source, const PlanarMap& map);

/// True iff every face of the image has positive signed area.
[[nodiscard]] bool is_diffeomorphic(const mesh::ParamMesh& source, const PlanarMap& map);
[[nodiscard]] int count_flipped(const mesh::ParamMesh& source, const PlanarMap& map);

// mu = f_zbar / f_z; a collapsed differential (|f_z| < 1e-14) yields 1 + 0i.
[[nodiscard]] Complex beltrami_of_differential(const Mat2& df) noexcept;

[[nodiscard]] BeltramiField beltrami_of_map(const mesh::ParamMesh& source, const PlanarMap& map);
[[nodiscard]] BeltramiField beltrami_of_map(std::span<const numerics::FaceGeometry> geometry,
                                            std::span<const mesh::Face> faces, const PlanarMap& map);

// K = (1 + |mu|) / (1 - |mu|); throws MuOutOfRange for |mu| >= 1.
[[nodiscard]] double condition_number(Complex mu);

/// Zeroes every coefficient with |mu| >= 1, leaves the rest untouched.
[[nodiscard]] BeltramiField threshold(BeltramiField mu);

// A(mu) = 1/(1-|mu|^2) [[(rho-1)^2 + tau^2, -2 tau], [-2 tau, (1+rho)^2 + tau^2]].
// Throws MuOutOfRange.
[[nodiscard]] Mat2 diffusion_matrix(Complex mu);

struct DirichletPoint {
    int vertex;
    Vec2 position;
};

/// Linear Beltrami Solver: solves div(A(mu) grad u) = 0 and the same for v
/// with the given vertex positions fixed. A vertex listed more than once takes
/// its last position, so landmarks placed after boundary points win.
[[nodiscard]] PlanarMap lbs(const mesh::ParamMesh& source, const BeltramiField& mu,
                            std::span<const DirichletPoint> dirichlet);
[[nodiscard]] PlanarMap lbs(std::span<const numerics::FaceGeometry> geometry, const mesh::ParamMesh& source,
                            const BeltramiField& mu, std::span<const DirichletPoint> dirichlet);

/// nu <- (1 - alpha) nu + alpha mu' + beta L nu, repeated `steps` times, then
/// thresholded so the result can feed lbs.
[[nodiscard]] BeltramiField smooth_beltrami(const BeltramiField& mu_prime, const BeltramiField& nu0, double alpha,
                                            double beta, int steps, const numerics::SparseMatrix& laplacian);

}  // namespace qcreg::qc
