#pragma once

#include "qcreg/distortion.hpp"
#include "qcreg/intensity.hpp"
#include "qcreg/mesh.hpp"
#include "qcreg/qc.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qcreg::pipeline {

struct RegistrationConfig {
    double alpha = 0.01;
    double beta = 0.1;
    distortion::DistortionBounds bounds{2.0, 0.5};
    int n_outer = 50;   // N
    int n_proj = 1;     // N1
    int m_outer = 1;    // M1
    int m_smooth = 5;   // M2
    double tau_demons = 1.0;
    double sigma_gauss = 2.0;  // pixels
    intensity::Resolution grid_res{512, 512};
    // Stop once the relative change of the total energy stays below
    // early_stop_rel for 3 consecutive outer iterations. Off by default so
    // that traces always hold n_outer records.
    bool early_stop = false;
    double early_stop_rel = 1e-6;
    bool prealign = true;
    int demons_sign = 1;

    // Throws InvalidArgument.
    void validate() const;
};

struct EnergyRecord {
    int iter = 0;
    double fidelity = 0.0;
    double coupling = 0.0;    // (alpha/2) sum_f area_f |mu_f - nu_f|^2
    double smoothness = 0.0;  // (beta/2) sum over adjacent face pairs |nu_f - nu_g|^2
    double total = 0.0;
    double landmark_rmse = 0.0;
    double max_abs_mu = 0.0;
    double min_face_det = 0.0;
};

struct EnergyTrace {
    std::vector<EnergyRecord> records;

    static constexpr const char* csv_header =
        "iter,fidelity,coupling,smoothness,total,landmark_rmse,max_abs_mu,min_face_det";

    [[nodiscard]] std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

[[nodiscard]] std::string format_record(const EnergyRecord& r);

/// Root-mean-square distance between f(p_i) and q_i.
[[nodiscard]] double landmark_rmse(const qc::PlanarMap& map, const mesh::LandmarkSet& landmarks);
[[nodiscard]] double max_landmark_error(const qc::PlanarMap& map, const mesh::LandmarkSet& landmarks);

/// Grids used for the fidelity term; both null means no intensity term.
struct FidelityInputs {
    const intensity::IntensityGrid* moving = nullptr;
    const intensity::IntensityGrid* static_ = nullptr;
};

/// Split energy E_ISR(f, nu) and diagnostics for one state.
[[nodiscard]] EnergyRecord energy(const mesh::ParamMesh& moving, const qc::PlanarMap& map, const qc::BeltramiField& nu,
                                  FidelityInputs grids, const RegistrationConfig& config,
                                  const mesh::LandmarkSet& landmarks);

/// Least-squares similarity (rotation, uniform scale, translation) taking the
/// moving landmark vertices onto their targets; a single pair gives a
/// translation.
[[nodiscard]] qc::PlanarMap similarity_prealign(const mesh::ParamMesh& moving, const mesh::LandmarkSet& landmarks);

/// Per-iterate bookkeeping shared by both drivers.
struct IterateStats {
    int iteration = 0;
    // Largest number of flipped faces seen at any intermediate map of this
    // outer iteration (after each projection and each lbs).
    int max_flipped = 0;
    int flipped_at_end = 0;
    double max_landmark_error_after_lbs = 0.0;
    bool bounds_conflict = false;
    double overshoot = 0.0;
};

struct DeformResult {
    qc::PlanarMap map;
    qc::BeltramiField nu;
    EnergyTrace trace;
    EnergyRecord initial;
    std::vector<IterateStats> iterates;
    bool stopped_early = false;

    [[nodiscard]] int max_flipped_any_iterate() const noexcept;
    [[nodiscard]] bool any_bounds_conflict() const noexcept;
};

/// Free-boundary quasiconformal deformation driven by landmarks only.
/// Throws EmptyLandmarks.
[[nodiscard]] DeformResult free_boundary_deform(const mesh::ParamMesh& moving, const mesh::LandmarkSet& landmarks,
                                                const RegistrationConfig& config);

struct PartnerLocation {
    int face = -1;
    Vec3 barycentric = Vec3::Zero();
};

struct Correspondence {
    std::vector<std::uint8_t> omega1_faces;
    intensity::PixelMask omega2_mask;
    std::vector<std::optional<PartnerLocation>> partners;

    [[nodiscard]] std::size_t omega1_count() const noexcept;
};

/// Regions in correspondence under `map`: omega2 is the overlap of the two
/// rasterized domains, omega1 the moving faces whose three images fall on
/// overlap pixels, partners the static face containing each image vertex.
[[nodiscard]] Correspondence extract_correspondence(const mesh::ParamMesh& moving, const qc::PlanarMap& map,
                                                    const mesh::ParamMesh& static_, const intensity::Resolution& res);

/// Static-mesh face containing p (with barycentric coordinates), found
/// through a uniform bucket grid over the uv bounding box.
class PointLocator {
public:
    explicit PointLocator(const mesh::ParamMesh& mesh);
    [[nodiscard]] std::optional<PartnerLocation> locate(const Vec2& p) const;

private:
    const mesh::ParamMesh* mesh_;
    Vec2 lo_ = Vec2::Zero();
    Vec2 cell_ = Vec2::Ones();
    int nx_ = 1;
    int ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

struct RegistrationResult {
    qc::PlanarMap map;
    qc::BeltramiField nu;
    Correspondence correspondence;
    EnergyTrace trace;
    EnergyRecord initial;
    std::vector<IterateStats> iterates;
    // Some iteration (or the final state) had no overlapping pixels.
    bool empty_overlap = false;
    std::size_t max_double_covered = 0;
    bool stopped_early = false;
    intensity::IntensityGrid final_moving;
    intensity::IntensityGrid static_grid;

    [[nodiscard]] bool any_bounds_conflict() const noexcept;
};

/// Registration of inconsistent domains. Both meshes must carry intensity
/// and live in one normalized frame; intensities are jointly rescaled to
/// [0,1] before iterating. Throws EmptyLandmarks or InvalidArgument.
[[nodiscard]] RegistrationResult register_domains(const mesh::ParamMesh& moving, const mesh::ParamMesh& static_,
                                                  const mesh::LandmarkSet& landmarks,
                                                  const RegistrationConfig& config);

}  // namespace qcreg::pipeline
