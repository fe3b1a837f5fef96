#include "qcreg/pipeline.hpp"

#include "qcreg/error.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace qcreg::pipeline {

void RegistrationConfig::validate() const {
    auto fail = [](const std::string& m) { raise(ErrorCode::invalid_argument, m); };
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) fail("beta must be nonnegative");
    bounds.validate();
    if (n_outer < 0 || n_proj < 0 || m_outer < 0 || m_smooth < 0) fail("iteration counts must be nonnegative");
    if (!(tau_demons > 0.0)) fail("tau_demons must be positive");
    if (!(sigma_gauss >= 0.0)) fail("sigma_gauss must be nonnegative");
    grid_res.validate();
    if (!(early_stop_rel >= 0.0)) fail("early_stop_rel must be nonnegative");
    if (demons_sign != 1 && demons_sign != -1) fail("demons_sign must be +1 or -1");
}

std::string format_record(const EnergyRecord& r) {
    std::string s = std::to_string(r.iter);
    for (double v : {r.fidelity, r.coupling, r.smoothness, r.total, r.landmark_rmse, r.max_abs_mu, r.min_face_det}) {
        s += ',';
        s += text::format_double(v);
    }
    return s;
}

std::string EnergyTrace::to_csv() const {
    std::string out = csv_header;
    out += '\n';
    for (const auto& r : records) {
        out += format_record(r);
        out += '\n';
    }
    return out;
}

void EnergyTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) raise(ErrorCode::io_error, "cannot write " + path.string());
    os << to_csv();
}

double landmark_rmse(const qc::PlanarMap& map, const mesh::LandmarkSet& landmarks) {
    if (landmarks.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& lm : landmarks.pairs) sum += (map.target_uv[lm.moving_vertex] - lm.target).squaredNorm();
    return std::sqrt(sum / static_cast<double>(landmarks.size()));
}

double max_landmark_error(const qc::PlanarMap& map, const mesh::LandmarkSet& landmarks) {
    double m = 0.0;
    for (const auto& lm : landmarks.pairs) m = std::max(m, (map.target_uv[lm.moving_vertex] - lm.target).norm());
    return m;
}

int DeformResult::max_flipped_any_iterate() const noexcept {
    int m = 0;
    for (const auto& s : iterates) m = std::max(m, s.max_flipped);
    return m;
}

bool DeformResult::any_bounds_conflict() const noexcept {
    return std::any_of(iterates.begin(), iterates.end(), [](const IterateStats& s) { return s.bounds_conflict; });
}

bool RegistrationResult::any_bounds_conflict() const noexcept {
    return std::any_of(iterates.begin(), iterates.end(), [](const IterateStats& s) { return s.bounds_conflict; });
}

namespace {

// Everything about the moving domain that stays fixed across iterations.
struct Context {
    const mesh::ParamMesh& moving;
    const mesh::LandmarkSet& landmarks;
    const RegistrationConfig& config;
    std::vector<numerics::FaceGeometry> geometry;
    std::vector<std::pair<int, int>> face_pairs;
    numerics::SparseMatrix smoothing;
    std::optional<distortion::PoissonRecovery> recovery;
    std::vector<Vec2> pinned_positions;

    Context(const mesh::ParamMesh& m, const mesh::LandmarkSet& l, const RegistrationConfig& c, bool with_recovery)
        : moving(m), landmarks(l), config(c), geometry(numerics::face_geometries(m)) {
        const auto nbrs = numerics::face_neighbors(m.faces());
        for (int f = 0; f < static_cast<int>(nbrs.size()); ++f) {
            for (int g : nbrs[f]) {
                if (f < g) face_pairs.emplace_back(f, g);
            }
        }
        smoothing = numerics::face_adjacency_operator(m.faces(), numerics::AdjacencyNormalization::degree);
        if (with_recovery) {
            std::vector<int> idx;
            for (const auto& lm : l.pairs) {
                if (lm.moving_vertex < 0 || lm.moving_vertex >= m.num_vertices()) {
                    raise(ErrorCode::index_out_of_range, "landmark vertex " + std::to_string(lm.moving_vertex));
                }
                idx.push_back(lm.moving_vertex);
                pinned_positions.push_back(lm.target);
            }
            recovery.emplace(m, std::move(idx));
        }
    }

    [[nodiscard]] qc::BeltramiField mu(const qc::PlanarMap& map) const {
        return qc::beltrami_of_map(geometry, moving.faces(), map);
    }

    [[nodiscard]] std::vector<qc::DirichletPoint> dirichlet(const qc::PlanarMap& boundary_source) const {
        std::vector<qc::DirichletPoint> d;
        d.reserve(moving.boundary.size() + landmarks.size());
        for (int b : moving.boundary) d.push_back({b, boundary_source.target_uv[b]});
        for (const auto& lm : landmarks.pairs) d.push_back({lm.moving_vertex, lm.target});
        return d;
    }

    [[nodiscard]] EnergyRecord evaluate(const qc::PlanarMap& map, const qc::BeltramiField& nu,
                                        FidelityInputs grids) const {
        EnergyRecord r;
        if (grids.moving && grids.static_) {
            const auto overlap = intensity::overlap_mask(*grids.moving, *grids.static_);
            r.fidelity = intensity::fidelity_energy(*grids.moving, *grids.static_, overlap);
        }
        const auto df = qc::face_differentials(geometry, moving.faces(), map.target_uv);
        double coupling = 0.0;
        r.max_abs_mu = 0.0;
        r.min_face_det = std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < df.size(); ++f) {
            const Complex m = qc::beltrami_of_differential(df[f]);
            coupling += geometry[f].area * std::norm(m - nu.values[f]);
            r.max_abs_mu = std::max(r.max_abs_mu, std::abs(m));
            r.min_face_det = std::min(r.min_face_det, df[f].determinant());
        }
        if (df.empty()) r.min_face_det = 0.0;
        double smooth = 0.0;
        for (const auto& [f, g] : face_pairs) smooth += std::norm(nu.values[f] - nu.values[g]);
        r.coupling = 0.5 * config.alpha * coupling;
        r.smoothness = 0.5 * config.beta * smooth;
        r.total = r.fidelity + r.coupling + r.smoothness;
        r.landmark_rmse = landmark_rmse(map, landmarks);
        return r;
    }

    void project(qc::PlanarMap& g, IterateStats& stats) const {
        for (int l = 0; l < config.n_proj; ++l) {
            auto res = distortion::project_map(*recovery, g, config.bounds, pinned_positions, 1);
            g = std::move(res.map);
            stats.bounds_conflict = stats.bounds_conflict || res.bounds_conflict;
            stats.overshoot = std::max(stats.overshoot, res.overshoot);
            stats.max_flipped = std::max(stats.max_flipped, qc::count_flipped(moving, g));
        }
    }

    [[nodiscard]] qc::BeltramiField smooth(const qc::PlanarMap& map) const {
        const auto mu_prime = qc::threshold(mu(map));
        return qc::smooth_beltrami(mu_prime, mu_prime, config.alpha, config.beta, config.m_smooth, smoothing);
    }

    void solve(qc::PlanarMap& g, const qc::BeltramiField& nu, const qc::PlanarMap& boundary_source,
               IterateStats& stats) const {
        const auto d = dirichlet(boundary_source);
        g = qc::lbs(geometry, moving, nu, d);
        stats.max_flipped = std::max(stats.max_flipped, qc::count_flipped(moving, g));
        stats.max_landmark_error_after_lbs =
            std::max(stats.max_landmark_error_after_lbs, max_landmark_error(g, landmarks));
    }
};

class EarlyStop {
public:
    explicit EarlyStop(const RegistrationConfig& c) : enabled_(c.early_stop), rel_(c.early_stop_rel) {}

    bool update(double total) {
        if (!enabled_) return false;
        if (has_previous_) {
            const double scale = std::max(std::abs(previous_), std::numeric_limits<double>::min());
            streak_ = std::abs(total - previous_) / scale < rel_ ? streak_ + 1 : 0;
        }
        previous_ = total;
        has_previous_ = true;
        return streak_ >= 3;
    }

private:
    bool enabled_;
    double rel_;
    bool has_previous_ = false;
    double previous_ = 0.0;
    int streak_ = 0;
};

void require_landmarks(const mesh::LandmarkSet& landmarks) {
    if (landmarks.empty()) raise(ErrorCode::empty_landmarks, "at least one landmark is required");
}

}  // namespace

EnergyRecord energy(const mesh::ParamMesh& moving, const qc::PlanarMap& map, const qc::BeltramiField& nu,
                    FidelityInputs grids, const RegistrationConfig& config, const mesh::LandmarkSet& landmarks) {
    if (static_cast<int>(map.target_uv.size()) != moving.num_vertices() ||
        nu.values.size() != moving.faces().size()) {
        raise(ErrorCode::invalid_argument, "energy: size mismatch");
    }
    const Context ctx(moving, landmarks, config, false);
    return ctx.evaluate(map, nu, grids);
}

qc::PlanarMap similarity_prealign(const mesh::ParamMesh& moving, const mesh::LandmarkSet& landmarks) {
    require_landmarks(landmarks);
    const auto n = static_cast<double>(landmarks.size());
    Complex pm = 0.0, qm = 0.0;
    for (const auto& lm : landmarks.pairs) {
        const Vec2& p = moving.uv.at(lm.moving_vertex);
        pm += Complex(p.x(), p.y());
        qm += Complex(lm.target.x(), lm.target.y());
    }
    pm /= n;
    qm /= n;
    Complex num = 0.0;
    double den = 0.0;
    for (const auto& lm : landmarks.pairs) {
        const Vec2& p = moving.uv[lm.moving_vertex];
        const Complex pc = Complex(p.x(), p.y()) - pm;
        const Complex qc = Complex(lm.target.x(), lm.target.y()) - qm;
        num += std::conj(pc) * qc;
        den += std::norm(pc);
    }
    const Complex a = (den > 0.0 && std::abs(num) > 0.0) ? num / den : Complex(1.0, 0.0);
    const Complex b = qm - a * pm;
    qc::PlanarMap out;
    out.target_uv.resize(moving.uv.size());
    for (std::size_t i = 0; i < moving.uv.size(); ++i) {
        const Complex z = a * Complex(moving.uv[i].x(), moving.uv[i].y()) + b;
        out.target_uv[i] = Vec2(z.real(), z.imag());
    }
    return out;
}

DeformResult free_boundary_deform(const mesh::ParamMesh& moving, const mesh::LandmarkSet& landmarks,
                                  const RegistrationConfig& config) {
    config.validate();
    require_landmarks(landmarks);
    const Context ctx(moving, landmarks, config, true);

    DeformResult out;
    out.map = qc::PlanarMap::identity(moving);
    out.nu = qc::threshold(ctx.mu(out.map));
    out.initial = ctx.evaluate(out.map, out.nu, {});
    EarlyStop stop(config);

    for (int i = 1; i <= config.n_outer; ++i) {
        IterateStats stats;
        stats.iteration = i;
        qc::PlanarMap g = out.map;
        ctx.project(g, stats);
        if (config.m_outer == 0) out.nu = qc::threshold(ctx.mu(g));
        for (int j = 0; j < config.m_outer; ++j) {
            out.nu = ctx.smooth(g);
            const qc::PlanarMap boundary_source = g;
            ctx.solve(g, out.nu, boundary_source, stats);
        }
        out.map = std::move(g);
        stats.flipped_at_end = qc::count_flipped(moving, out.map);
        out.iterates.push_back(stats);

        auto record = ctx.evaluate(out.map, out.nu, {});
        record.iter = i;
        out.trace.records.push_back(record);
        if (stop.update(record.total)) {
            out.stopped_early = true;
            break;
        }
    }
    return out;
}

namespace {

std::vector<double> checked_intensity(const mesh::ParamMesh& m, const char* which) {
    if (!m.base.intensity || static_cast<int>(m.base.intensity->size()) != m.num_vertices()) {
        raise(ErrorCode::invalid_argument, std::string(which) + " mesh has no per-vertex intensity");
    }
    return *m.base.intensity;
}

}  // namespace

RegistrationResult register_domains(const mesh::ParamMesh& moving, const mesh::ParamMesh& static_,
                                    const mesh::LandmarkSet& landmarks, const RegistrationConfig& config) {
    config.validate();
    require_landmarks(landmarks);
    auto i1 = checked_intensity(moving, "moving");
    auto i2 = checked_intensity(static_, "static");
    {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto* v : {&i1, &i2}) {
            for (double x : *v) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
        const double span = hi - lo;
        for (auto* v : {&i1, &i2}) {
            for (double& x : *v) x = span > 0.0 ? (x - lo) / span : 0.0;
        }
    }

    const Context ctx(moving, landmarks, config, true);
    const auto& res = config.grid_res;

    RegistrationResult out;
    out.static_grid = intensity::rasterize(static_, static_.uv, i2, res);
    auto render = [&](const qc::PlanarMap& map) {
        auto grid = intensity::rasterize(moving, map.target_uv, i1, res);
        out.max_double_covered = std::max(out.max_double_covered, grid.double_covered);
        return grid;
    };

    out.map = config.prealign ? similarity_prealign(moving, landmarks) : qc::PlanarMap::identity(moving);
    out.nu = qc::threshold(ctx.mu(out.map));
    {
        const auto grid = render(out.map);
        out.initial = ctx.evaluate(out.map, out.nu, {&grid, &out.static_grid});
    }
    EarlyStop stop(config);

    for (int i = 1; i <= config.n_outer; ++i) {
        IterateStats stats;
        stats.iteration = i;
        qc::PlanarMap g = out.map;
        ctx.project(g, stats);
        if (config.m_outer == 0) out.nu = qc::threshold(ctx.mu(g));
        for (int j = 0; j < config.m_outer; ++j) {
            const auto grid = render(g);
            const auto overlap = intensity::overlap_mask(grid, out.static_grid);
            qc::PlanarMap moved = g;
            if (overlap.count() == 0) {
                out.empty_overlap = true;
            } else {
                const auto field = intensity::gaussian_smooth(
                    intensity::demons_step(grid, out.static_grid, overlap, config.tau_demons, config.demons_sign),
                    config.sigma_gauss);
                const auto dv = intensity::sample_to_vertices(field, g.target_uv);
                for (std::size_t v = 0; v < dv.size(); ++v) moved.target_uv[v] += dv[v];
            }
            out.nu = ctx.smooth(moved);
            const qc::PlanarMap boundary_source = g;
            ctx.solve(g, out.nu, boundary_source, stats);
        }
        out.map = std::move(g);
        stats.flipped_at_end = qc::count_flipped(moving, out.map);
        out.iterates.push_back(stats);

        auto grid = render(out.map);
        auto record = ctx.evaluate(out.map, out.nu, {&grid, &out.static_grid});
        record.iter = i;
        out.trace.records.push_back(record);
        out.final_moving = std::move(grid);
        if (stop.update(record.total)) {
            out.stopped_early = true;
            break;
        }
    }
    if (out.trace.records.empty()) out.final_moving = render(out.map);

    out.correspondence = extract_correspondence(moving, out.map, static_, res);
    if (out.correspondence.omega2_mask.count() == 0) out.empty_overlap = true;
    return out;
}

}  // namespace qcreg::pipeline
