#include "commands.hpp"

#include "config_file.hpp"
#include "manifest.hpp"
#include "version.hpp"

#include "qcreg/conformal.hpp"
#include "qcreg/image_io.hpp"
#include "qcreg/mesh.hpp"
#include "qcreg/parallel.hpp"
#include "qcreg/pipeline.hpp"
#include "qcreg/qc.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <thread>

namespace qcreg::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::not_disk_topology: return exit_unsupported;
        case ErrorCode::non_positive_definite_a:
        case ErrorCode::singular_system:
        case ErrorCode::non_convergence:
        case ErrorCode::flipped_faces:
        case ErrorCode::non_finite_scale:
        case ErrorCode::mu_out_of_range:
        case ErrorCode::non_finite_input: return exit_numeric_failure;
        default: return exit_input_error;
    }
}

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) raise(ErrorCode::io_error, what + " not found: " + path.string());
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
    return out;
}

void write_json(const ordered_json& j, const fs::path& path) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

unsigned configure_threads() {
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QCREG_THREADS"); env && *env) {
        const std::string_view s(env);
        unsigned v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0) {
            raise(ErrorCode::invalid_argument, "QCREG_THREADS must be a positive integer, got '" + std::string(s) + "'");
        }
        threads = v;
    }
    set_max_threads(threads);
    return threads;
}

/// Registration settings shared by deform and register: an optional TOML
/// file overlaid by any flags given on the command line.
struct ConfigFlags {
    std::string config_path;
    pipeline::RegistrationConfig values;
    std::string grid;
    bool prealign = true;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void add(CLI::App& app) {
        app.add_option("--config", config_path, "TOML file with registration settings");
        auto number = [&](const std::string& key, const std::string& flag, auto& target, const std::string& help) {
            options.emplace_back(key, app.add_option(flag, target, help));
        };
        number("alpha", "--alpha", values.alpha, "coupling weight");
        number("beta", "--beta", values.beta, "smoothness weight and step");
        number("k1", "--k1", values.bounds.k1, "upper singular value bound");
        number("k2", "--k2", values.bounds.k2, "lower singular value bound");
        number("n", "--n", values.n_outer, "outer iterations");
        number("n1", "--n1", values.n_proj, "projection iterations per outer iteration");
        number("m1", "--m1", values.m_outer, "smoothing rounds per outer iteration");
        number("m2", "--m2", values.m_smooth, "Beltrami smoothing steps per round");
        number("tau_demons", "--tau-demons", values.tau_demons, "Demons regularization");
        number("sigma_gauss", "--sigma-gauss", values.sigma_gauss, "Gaussian smoothing of the Demons field (pixels)");
        number("grid_res", "--grid-res", grid, "raster size, N or WxH");
        number("early_stop_rel", "--early-stop-rel", values.early_stop_rel, "relative energy change threshold");
        number("demons_sign", "--demons-sign", values.demons_sign, "+1 or -1");
        options.emplace_back("early_stop", app.add_flag("--early-stop", values.early_stop, "enable early stopping"));
        options.emplace_back("prealign", app.add_flag("--prealign,!--no-prealign", prealign,
                                                      "landmark similarity pre-alignment (register)"));
    }

    [[nodiscard]] pipeline::RegistrationConfig resolve(ordered_json& flags_json) const {
        pipeline::RegistrationConfig config;
        if (!config_path.empty()) apply_config(load_toml(config_path), config);
        flags_json = ordered_json::object();
        for (const auto& [key, opt] : options) {
            if (opt->count() == 0) continue;
            if (key == "alpha") config.alpha = values.alpha, flags_json[key] = values.alpha;
            else if (key == "beta") config.beta = values.beta, flags_json[key] = values.beta;
            else if (key == "k1") config.bounds.k1 = values.bounds.k1, flags_json[key] = values.bounds.k1;
            else if (key == "k2") config.bounds.k2 = values.bounds.k2, flags_json[key] = values.bounds.k2;
            else if (key == "n") config.n_outer = values.n_outer, flags_json[key] = values.n_outer;
            else if (key == "n1") config.n_proj = values.n_proj, flags_json[key] = values.n_proj;
            else if (key == "m1") config.m_outer = values.m_outer, flags_json[key] = values.m_outer;
            else if (key == "m2") config.m_smooth = values.m_smooth, flags_json[key] = values.m_smooth;
            else if (key == "tau_demons") config.tau_demons = values.tau_demons, flags_json[key] = values.tau_demons;
            else if (key == "sigma_gauss") config.sigma_gauss = values.sigma_gauss, flags_json[key] = values.sigma_gauss;
            else if (key == "early_stop_rel") {
                config.early_stop_rel = values.early_stop_rel;
                flags_json[key] = values.early_stop_rel;
            } else if (key == "demons_sign") {
                config.demons_sign = values.demons_sign;
                flags_json[key] = values.demons_sign;
            } else if (key == "early_stop") {
                config.early_stop = values.early_stop;
                flags_json[key] = values.early_stop;
            } else if (key == "prealign") {
                config.prealign = prealign;
                flags_json[key] = prealign;
            } else if (key == "grid_res") {
                config.grid_res = parse_resolution(grid);
                flags_json[key] = grid;
            }
        }
        config.validate();
        return config;
    }
};

// uv source: OBJ vt records when present, else (x, y) with --preflattened,
// else a normalized LSCM flattening.
mesh::ParamMesh load_domain(const fs::path& path, bool preflattened) {
    auto loaded = mesh::load_mesh_with_uv(path);
    if (loaded.uv) return mesh::make_param_mesh(std::move(loaded.mesh), std::move(*loaded.uv));
    if (preflattened) return mesh::param_from_planar(std::move(loaded.mesh));
    auto flat = conformal::flatten_lscm(loaded.mesh);
    return conformal::normalize_domain(std::move(flat.param));
}

image::Image to_rgb(const image::Image& gray) {
    if (gray.channels == 3) return gray;
    auto out = image::Image::blank(gray.width, gray.height, 3);
    for (std::size_t k = 0; k < gray.data.size(); ++k) {
        for (int c = 0; c < 3; ++c) out.data[3 * k + c] = gray.data[k];
    }
    return out;
}

std::vector<Vec2> transformed(std::span<const Vec2> points, const conformal::FrameTransform& frame) {
    std::vector<Vec2> out(points.size());
    std::transform(points.begin(), points.end(), out.begin(), [&](const Vec2& p) { return frame.apply(p); });
    return out;
}

std::vector<Vec2> untransformed(std::span<const Vec2> points, const conformal::FrameTransform& frame) {
    std::vector<Vec2> out(points.size());
    std::transform(points.begin(), points.end(), out.begin(),
                   [&](const Vec2& p) { return Vec2(p / frame.scale + frame.origin); });
    return out;
}

ordered_json map_summary(const mesh::ParamMesh& source, const qc::PlanarMap& map, const mesh::LandmarkSet& landmarks) {
    const auto dets = qc::face_determinants(source, map);
    ordered_json j;
    j["flipped_faces"] = qc::count_flipped(source, map);
    j["min_face_det"] = dets.empty() ? 0.0 : *std::min_element(dets.begin(), dets.end());
    j["max_abs_mu"] = qc::beltrami_of_map(source, map).max_abs();
    j["landmark_rmse"] = pipeline::landmark_rmse(map, landmarks);
    j["max_landmark_error"] = pipeline::max_landmark_error(map, landmarks);
    return j;
}

double min_det_over(const pipeline::EnergyTrace& trace) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : trace.records) m = std::min(m, r.min_face_det);
    return std::isfinite(m) ? m : 0.0;
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    std::vector<std::string> arguments;
    unsigned threads = 1;
};

void print_config(std::ostream& out, const pipeline::RegistrationConfig& c) {
    out << "config: alpha=" << format_double(c.alpha) << " beta=" << format_double(c.beta)
        << " k1=" << format_double(c.bounds.k1) << " k2=" << format_double(c.bounds.k2) << " n=" << c.n_outer
        << " n1=" << c.n_proj << " m1=" << c.m_outer << " m2=" << c.m_smooth << '\n';
}

// ---------------------------------------------------------------- flatten

struct FlattenArgs {
    std::string mesh;
    std::string out;
    int pin_a = -1;
    int pin_b = -1;
};

int cmd_flatten(const FlattenArgs& a, Context& ctx) {
    require_file(a.mesh, "mesh");
    const auto tri = mesh::load_mesh(a.mesh);
    if ((a.pin_a < 0) != (a.pin_b < 0)) raise(ErrorCode::invalid_argument, "--pin-a and --pin-b go together");
    auto flat = a.pin_a >= 0 ? conformal::flatten_lscm(tri, a.pin_a, a.pin_b) : conformal::flatten_lscm(tri);
    const auto param = conformal::normalize_domain(flat.param);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const auto obj = dir / (fs::path(a.mesh).stem().string() + "_flat.obj");
    mesh::save_obj_with_uv(param.base, param.uv, obj);
    {
        auto os = open_output(dir / "conformality.csv");
        os << "face,abs_mu\n";
        for (std::size_t f = 0; f < flat.conformality.size(); ++f) {
            os << f << ',' << format_double(flat.conformality[f]) << '\n';
        }
    }
    RunManifest manifest;
    manifest.subcommand = "flatten";
    manifest.inputs = {{"mesh", a.mesh}};
    manifest.output_dir = dir;
    manifest.arguments = ctx.arguments;
    manifest.flags = {{"pin_a", flat.pinned[0].vertex}, {"pin_b", flat.pinned[1].vertex}};
    manifest.threads = ctx.threads;
    manifest.write(dir / "run_manifest.json");

    const double worst = flat.conformality.empty()
                             ? 0.0
                             : *std::max_element(flat.conformality.begin(), flat.conformality.end());
    ctx.out << "flattened " << tri.num_faces() << " faces; max |mu| = " << format_double(worst)
            << "; repair rounds = " << flat.repair_iterations << '\n'
            << "wrote " << obj.string() << '\n';
    return exit_ok;
}

// ----------------------------------------------------------------- deform

struct DeformArgs {
    std::string mesh;
    std::string landmarks;
    std::string out;
    bool preflattened = false;
    ConfigFlags config;
};

int cmd_deform(const DeformArgs& a, Context& ctx) {
    require_file(a.mesh, "mesh");
    require_file(a.landmarks, "landmarks");
    ordered_json flags;
    const auto config = a.config.resolve(flags);
    const auto param = load_domain(a.mesh, a.preflattened);
    const auto landmarks = mesh::load_landmarks(a.landmarks, param);
    print_config(ctx.out, config);

    const auto result = pipeline::free_boundary_deform(param, landmarks, config);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const auto obj = dir / (fs::path(a.mesh).stem().string() + "_deformed.obj");
    mesh::save_obj_with_uv(param.base, result.map.target_uv, obj);
    result.trace.write_csv(dir / "energy.csv");

    auto report = map_summary(param, result.map, landmarks);
    report["faces"] = param.num_faces();
    report["iterations"] = result.trace.records.size();
    report["stopped_early"] = result.stopped_early;
    report["max_flipped_any_iterate"] = result.max_flipped_any_iterate();
    report["min_face_det_any_iterate"] = std::min(min_det_over(result.trace), report["min_face_det"].get<double>());
    report["bounds_conflict"] = result.any_bounds_conflict();
    write_json(report, dir / "report.json");

    std::vector<Vec2> both(param.uv);
    both.insert(both.end(), result.map.target_uv.begin(), result.map.target_uv.end());
    const auto frame = conformal::normalizing_transform(both);
    for (const auto& [name, points] :
         {std::pair{"before.png", std::cref(param.uv)}, std::pair{"after.png", std::cref(result.map.target_uv)}}) {
        auto img = image::Image::blank(512, 512, 3, 255);
        image::draw_wireframe(img, param, transformed(points.get(), frame), {40, 60, 160});
        image::write_png(img, dir / name);
    }

    RunManifest manifest;
    manifest.subcommand = "deform";
    manifest.inputs = {{"mesh", a.mesh}, {"landmarks", a.landmarks}};
    if (!a.config.config_path.empty()) manifest.config_file = fs::path(a.config.config_path);
    manifest.output_dir = dir;
    manifest.arguments = ctx.arguments;
    manifest.flags = flags;
    manifest.flags["preflattened"] = a.preflattened;
    manifest.config = config_to_json(config);
    manifest.threads = ctx.threads;
    manifest.write(dir / "run_manifest.json");

    ctx.out << "deformed " << param.num_faces() << " faces in " << result.trace.records.size()
            << " iterations; flipped faces = " << report["flipped_faces"].get<int>()
            << "; max landmark error = " << format_double(report["max_landmark_error"].get<double>()) << '\n';
    return exit_ok;
}

// --------------------------------------------------------------- register

struct RegisterArgs {
    std::string moving;
    std::string static_;
    std::string landmarks;
    std::string moving_intensity;
    std::string static_intensity;
    std::string out;
    bool preflattened = false;
    ConfigFlags config;
};

void write_correspondence(const fs::path& dir, const pipeline::Correspondence& c, const intensity::Resolution& res,
                          bool empty) {
    {
        auto os = open_output(dir / "omega1_faces.csv");
        os << "face\n";
        if (!empty) {
            for (std::size_t f = 0; f < c.omega1_faces.size(); ++f) {
                if (c.omega1_faces[f]) os << f << '\n';
            }
        }
    }
    intensity::PixelMask mask = c.omega2_mask;
    if (empty || mask.values.size() != res.pixels()) mask = {res, std::vector<std::uint8_t>(res.pixels(), 0)};
    image::write_pgm(image::from_mask(mask), dir / "omega2_mask.pgm");
    {
        auto os = open_output(dir / "partners.csv");
        os << "vertex,static_face,b0,b1,b2\n";
        if (!empty) {
            for (std::size_t v = 0; v < c.partners.size(); ++v) {
                if (!c.partners[v]) continue;
                const auto& p = *c.partners[v];
                os << v << ',' << p.face << ',' << format_double(p.barycentric[0]) << ','
                   << format_double(p.barycentric[1]) << ',' << format_double(p.barycentric[2]) << '\n';
            }
        }
    }
}

int cmd_register(const RegisterArgs& a, Context& ctx) {
    require_file(a.moving, "moving mesh");
    require_file(a.static_, "static mesh");
    require_file(a.landmarks, "landmarks");
    if (!a.moving_intensity.empty()) require_file(a.moving_intensity, "moving intensity");
    if (!a.static_intensity.empty()) require_file(a.static_intensity, "static intensity");
    ordered_json flags;
    const auto config = a.config.resolve(flags);

    auto moving = load_domain(a.moving, a.preflattened);
    auto static_ = load_domain(a.static_, a.preflattened);
    if (!a.moving_intensity.empty()) moving.base = mesh::attach_intensity(std::move(moving.base), a.moving_intensity);
    if (!a.static_intensity.empty()) static_.base = mesh::attach_intensity(std::move(static_.base), a.static_intensity);
    if (!moving.base.intensity || !static_.base.intensity) {
        raise(ErrorCode::invalid_argument,
              "register needs intensity on both meshes (PLY quality/intensity or --moving-intensity/--static-intensity)");
    }
    auto landmarks = mesh::load_landmarks(a.landmarks, moving, static_);

    const auto frame = conformal::joint_frame(moving, static_);
    moving = conformal::apply(frame, std::move(moving));
    static_ = conformal::apply(frame, std::move(static_));
    for (auto& p : landmarks.pairs) p.target = frame.apply(p.target);
    print_config(ctx.out, config);

    const auto result = pipeline::register_domains(moving, static_, landmarks, config);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const auto obj = dir / (fs::path(a.moving).stem().string() + "_registered.obj");
    mesh::save_obj_with_uv(moving.base, untransformed(result.map.target_uv, frame), obj);
    result.trace.write_csv(dir / "energy.csv");
    write_correspondence(dir, result.correspondence, config.grid_res, result.empty_overlap);

    const auto overlap = intensity::overlap_mask(result.final_moving, result.static_grid);
    image::write_png(image::difference_heat(result.final_moving, result.static_grid, overlap),
                     dir / "difference.png");
    {
        auto img = to_rgb(image::grayscale(result.static_grid));
        image::draw_wireframe(img, static_, static_.uv, {70, 160, 70});
        image::draw_wireframe(img, moving, result.map.target_uv, {220, 60, 40});
        image::write_png(img, dir / "overlay.png");
    }

    auto report = map_summary(moving, result.map, landmarks);
    report["faces"] = moving.num_faces();
    report["iterations"] = result.trace.records.size();
    report["stopped_early"] = result.stopped_early;
    report["empty_overlap"] = result.empty_overlap;
    report["initial_fidelity"] = result.initial.fidelity;
    report["final_fidelity"] = result.trace.records.empty() ? result.initial.fidelity
                                                            : result.trace.records.back().fidelity;
    report["initial_landmark_rmse"] = result.initial.landmark_rmse;
    report["omega1_faces"] = result.empty_overlap ? 0 : result.correspondence.omega1_count();
    report["omega2_pixels"] = result.empty_overlap ? 0 : result.correspondence.omega2_mask.count();
    report["max_double_covered_pixels"] = result.max_double_covered;
    report["bounds_conflict"] = result.any_bounds_conflict();
    write_json(report, dir / "report.json");

    RunManifest manifest;
    manifest.subcommand = "register";
    manifest.inputs = {{"moving", a.moving}, {"static", a.static_}, {"landmarks", a.landmarks}};
    if (!a.moving_intensity.empty()) manifest.inputs.emplace_back("moving_intensity", a.moving_intensity);
    if (!a.static_intensity.empty()) manifest.inputs.emplace_back("static_intensity", a.static_intensity);
    if (!a.config.config_path.empty()) manifest.config_file = fs::path(a.config.config_path);
    manifest.output_dir = dir;
    manifest.arguments = ctx.arguments;
    manifest.flags = flags;
    manifest.flags["preflattened"] = a.preflattened;
    manifest.config = config_to_json(config);
    manifest.threads = ctx.threads;
    manifest.write(dir / "run_manifest.json");

    if (result.empty_overlap) {
        ctx.err << "WARNING: empty overlap between the registered moving domain and the static domain; "
                   "correspondence files are empty\n";
    }
    ctx.out << "registered " << moving.num_faces() << " faces in " << result.trace.records.size()
            << " iterations; fidelity " << format_double(report["initial_fidelity"].get<double>()) << " -> "
            << format_double(report["final_fidelity"].get<double>()) << "; omega1 faces = "
            << report["omega1_faces"].get<std::size_t>() << '\n';
    return exit_ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Free-boundary quasiconformal registration of partially overlapping surfaces", "qcreg"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    FlattenArgs flatten;
    auto* flatten_cmd = app.add_subcommand("flatten", "LSCM flattening of a disk-topology mesh");
    flatten_cmd->add_option("--mesh", flatten.mesh, "input mesh (OBJ, OFF, PLY)")->required();
    flatten_cmd->add_option("--out", flatten.out, "output directory")->required();
    flatten_cmd->add_option("--pin-a", flatten.pin_a, "vertex pinned at (0,0)");
    flatten_cmd->add_option("--pin-b", flatten.pin_b, "vertex pinned at (1,0)");

    DeformArgs deform;
    auto* deform_cmd = app.add_subcommand("deform", "landmark-driven free-boundary deformation");
    deform_cmd->add_option("--mesh", deform.mesh, "moving mesh; OBJ vt records give its uv")->required();
    deform_cmd->add_option("--landmarks", deform.landmarks, "landmark CSV")->required();
    deform_cmd->add_option("--out", deform.out, "output directory")->required();
    deform_cmd->add_flag("--preflattened", deform.preflattened, "use vertex (x, y) as uv when no vt is present");
    deform.config.add(*deform_cmd);

    RegisterArgs reg;
    auto* register_cmd = app.add_subcommand("register", "registration of two partially overlapping domains");
    register_cmd->add_option("--moving", reg.moving, "moving mesh")->required();
    register_cmd->add_option("--static", reg.static_, "static mesh")->required();
    register_cmd->add_option("--landmarks", reg.landmarks, "landmark CSV")->required();
    register_cmd->add_option("--moving-intensity", reg.moving_intensity, "per-vertex intensity CSV of the moving mesh");
    register_cmd->add_option("--static-intensity", reg.static_intensity, "per-vertex intensity CSV of the static mesh");
    register_cmd->add_option("--out", reg.out, "output directory")->required();
    register_cmd->add_flag("--preflattened", reg.preflattened, "use vertex (x, y) as uv when no vt is present");
    reg.config.add(*register_cmd);

    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "qcreg: error: " << e.what() << '\n';
        return exit_input_error;
    }

    Context ctx{out, err, args};
    try {
        ctx.threads = configure_threads();
        if (flatten_cmd->parsed()) return cmd_flatten(flatten, ctx);
        if (deform_cmd->parsed()) return cmd_deform(deform, ctx);
        return cmd_register(reg, ctx);
    } catch (const Error& e) {
        err << "qcreg: error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "qcreg: error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const std::exception& e) {
        err << "qcreg: error: " << e.what() << '\n';
        return exit_numeric_failure;
    }
}

}  // namespace qcreg::cli
