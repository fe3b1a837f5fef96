#pragma once

#include "qcreg/mesh.hpp"
#include "qcreg/types.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace qcreg::numerics {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

/// Area and hat-function gradients of one uv triangle.
struct FaceGeometry {
    double area = 0.0;
    std::array<Vec2, 3> grad{};
};

[[nodiscard]] FaceGeometry face_geometry(const Vec2& a, const Vec2& b, const Vec2& c);

// Throws DegenerateFace if some face's signed uv area falls below 1e-12 of
// the total domain area.
[[nodiscard]] std::vector<FaceGeometry> face_geometries(const mesh::ParamMesh& mesh);

/// Coordinate-format symmetric system with Dirichlet-style fixed indices.
struct SparseSpdSystem {
    int dimension = 0;
    std::vector<Triplet> entries;
    std::map<int, double> constrained;

    [[nodiscard]] SparseMatrix matrix() const;
};

/// Exact gradient of the piecewise-linear interpolant, one vector per face.
[[nodiscard]] std::vector<Vec2> face_gradient(const mesh::ParamMesh& mesh, std::span<const double> scalar);
[[nodiscard]] std::vector<Vec2> face_gradient(std::span<const FaceGeometry> geometry,
                                              std::span<const mesh::Face> faces, std::span<const double> scalar);

/// K_ij = sum over faces of area * grad(phi_i)^T A grad(phi_j).
[[nodiscard]] SparseSpdSystem assemble_div_a_grad(const mesh::ParamMesh& mesh, std::span<const Mat2> a_field);
[[nodiscard]] SparseSpdSystem assemble_div_a_grad(std::span<const FaceGeometry> geometry,
                                                  std::span<const mesh::Face> faces, int num_vertices,
                                                  std::span<const Mat2> a_field);

/// assemble_div_a_grad with A = I on every face.
[[nodiscard]] SparseSpdSystem assemble_laplacian(const mesh::ParamMesh& mesh);

struct SolverOptions {
    double tolerance = 1e-10;
    // Free-dimension count above which conjugate gradient replaces Cholesky.
    int direct_limit = 2'000'000;
    // Iteration budget for conjugate gradient is max_iteration_factor * n.
    int max_iteration_factor = 10;
};

struct SolveReport {
    bool used_iterative = false;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Factorizes the free block of a symmetric matrix once and solves for many
/// right-hand sides and fixed-value sets sharing the same constrained indices.
///
/// Constraints are eliminated (known columns move to the right-hand side).
/// Without constraints, a matrix whose kernel contains the constants (a
/// Laplacian) is solvable only for right-hand sides orthogonal to constants;
/// the solution is then normalized to x[0] = 0.
class ConstrainedSolver {
public:
    ConstrainedSolver(const SparseMatrix& matrix, std::vector<int> constrained, SolverOptions options = {});
    ~ConstrainedSolver();
    ConstrainedSolver(ConstrainedSolver&&) noexcept;
    ConstrainedSolver& operator=(ConstrainedSolver&&) noexcept;

    // fixed_values[k] is the value of index constrained()[k].
    [[nodiscard]] Vector solve(const Vector& rhs, std::span<const double> fixed_values,
                               SolveReport* report = nullptr) const;

    [[nodiscard]] const std::vector<int>& constrained() const noexcept { return constrained_; }
    [[nodiscard]] int dimension() const noexcept { return dimension_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::vector<int> constrained_;
    int dimension_ = 0;
};

// Throws SingularSystem or NonConvergence.
[[nodiscard]] Vector solve_constrained(const SparseSpdSystem& system, const Vector& rhs,
                                       SolveReport* report = nullptr, SolverOptions options = {});

/// m = u * diag(sigma1, orientation_sign * sigma2) * v^T with u, v rotations.
struct Svd2x2 {
    Mat2 u = Mat2::Identity();
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    Mat2 v = Mat2::Identity();
    int orientation_sign = 1;

    [[nodiscard]] Mat2 reconstruct() const;
};

// Closed form; throws NonFiniteInput.
[[nodiscard]] Svd2x2 svd2x2(const Mat2& m);

enum class AdjacencyNormalization { none, degree };

/// Faces sharing an edge, each list sorted ascending.
[[nodiscard]] std::vector<std::vector<int>> face_neighbors(std::span<const mesh::Face> faces);

/// Graph Laplacian over faces as a PSD system: D - W.
[[nodiscard]] SparseSpdSystem face_adjacency_laplacian(const mesh::ParamMesh& mesh);

/// Discrete Laplace operator on per-face values: (L x)_f = sum of neighbor
/// differences (none) or their mean (degree), i.e. mean(x_g) - x_f.
[[nodiscard]] SparseMatrix face_adjacency_operator(std::span<const mesh::Face> faces,
                                                   AdjacencyNormalization normalization);

}  // namespace qcreg::numerics
