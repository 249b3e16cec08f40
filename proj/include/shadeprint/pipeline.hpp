// Stage runners and the config-driven pipeline:
// image -> height -> solid -> overhang fix -> layers -> G-code.
//
// Stages talk to each other only through files in the output directory, so
// any stage can be run on its own against artifacts from an earlier run.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shadeprint/error.hpp"
#include "shadeprint/io.hpp"
#include "shadeprint/mesh.hpp"
#include "shadeprint/overhang.hpp"
#include "shadeprint/photostereo.hpp"
#include "shadeprint/sdf.hpp"
#include "shadeprint/sfs.hpp"
#include "shadeprint/slicer.hpp"
#include "shadeprint/stl.hpp"

namespace shadeprint {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config: "key = value" lines grouped under [stage] headers. '#' starts a
// comment. Every key has a default below; unknown keys are rejected.

struct ConfigKey {
    const char* stage;
    const char* key;
    const char* value;
    const char* help;
};

inline const std::vector<ConfigKey>& config_defaults() {
    static const std::vector<ConfigKey> keys = {
        {"pipeline", "stages", "sfs, mesh, overhang, slice", "stages to run, in order (sfs|ps, mesh, overhang, slice)"},
        {"pipeline", "out_dir", "out", "artifact directory"},
        {"pipeline", "pixel_size", "0.5", "grid spacing of the height map in mm"},

        {"sfs", "image", "", "PGM image (required for sfs)"},
        {"sfs", "mask", "", "PGM mask; empty means pixels brighter than 0"},
        {"sfs", "solver", "eikonal", "eikonal | semi-lagrangian"},
        {"sfs", "model", "lambertian", "lambertian | oren-nayar | phong | blinn-phong"},
        {"sfs", "light", "0, 0, 1", "light direction"},
        {"sfs", "roughness", "0", "Oren-Nayar sigma"},
        {"sfs", "k_diffuse", "1", "Phong/Blinn-Phong diffuse weight"},
        {"sfs", "k_specular", "0", "Phong/Blinn-Phong specular weight"},
        {"sfs", "shininess", "1", "specular exponent"},
        {"sfs", "occluding", "true", "treat the mask rim as an occluding contour"},
        {"sfs", "i_min", "0.001", "darkest usable intensity"},
        {"sfs", "mu", "1", "Kruzkov parameter (semi-Lagrangian)"},
        {"sfs", "h", "0", "semi-Lagrangian step, mm; 0 means half the pixel size"},
        {"sfs", "tol", "1e-8", "stop when an iteration changes nothing by more than this"},

        {"ps", "image1", "", "first PGM image (required for ps)"},
        {"ps", "image2", "", "second PGM image"},
        {"ps", "light1", "0, 0, 1", "light of the first image"},
        {"ps", "light2", "0.6, 0, 0.8", "light of the second image"},
        {"ps", "mask", "", "PGM mask; empty means the whole frame"},
        {"ps", "boundary", "", "height CSV with the Dirichlet data; empty means 0"},

        {"mesh", "base", "2", "plate thickness below height 0, mm"},
        {"mesh", "format", "binary", "STL flavour: binary | ascii"},

        {"overhang", "spacing", "1.5", "signed distance grid spacing, mm"},
        {"overhang", "alpha", "45", "limit overhang angle, degrees"},
        {"overhang", "t_final", "20", "repair time cap"},
        {"overhang", "v0", "1", "print rate"},
        {"overhang", "c1", "0", "weight of the angle term; 0 means 1 / (z_max - z_min)"},
        {"overhang", "c2", "0", "weight of the curvature term; 0 means the grid spacing"},

        {"slice", "stl", "", "input STL; empty means the previous stage's output"},
        {"slice", "layer_height", "0.2", "mm"},
        {"slice", "infill", "eikonal", "eikonal | square"},
        {"slice", "spacing", "2", "infill spacing, mm"},
        {"slice", "flow", "0.05", "mm of filament per mm of path"},
        {"slice", "feed_perimeter", "1800", "mm/min"},
        {"slice", "feed_infill", "2700", "mm/min"},
        {"slice", "feed_travel", "6000", "mm/min"},
    };
    return keys;
}

class Config {
public:
    Config() {
        for (const auto& k : config_defaults()) values_[k.stage][k.key] = k.value;
    }

    static Config parse(std::istream& in, const std::string& origin = "config") {
        Config c;
        std::string line, stage;
        int lineno = 0;
        auto fail = [&](const std::string& what) {
            throw InputError(origin + ":" + std::to_string(lineno) + ": " + what);
        };
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') fail("unterminated stage header");
                stage = trim(line.substr(1, line.size() - 2));
                if (!c.values_.count(stage)) fail("unknown stage [" + stage + "]");
                c.blocks_.push_back(stage);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) fail("expected 'key = value'");
            if (stage.empty()) fail("key outside a [stage] block");
            const std::string key = trim(line.substr(0, eq));
            if (!c.values_[stage].count(key)) fail("unknown key '" + key + "' in [" + stage + "]");
            c.values_[stage][key] = trim(line.substr(eq + 1));
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config " + path);
        Config c = parse(in, path);
        c.base_dir_ = std::filesystem::path(path).parent_path();
        return c;
    }

    void set(const std::string& stage, const std::string& key, const std::string& value) {
        if (!values_.count(stage) || !values_[stage].count(key)) throw InputError("unknown setting " + stage + "." + key);
        values_[stage][key] = value;
    }

    const std::string& str(const std::string& stage, const std::string& key) const {
        auto s = values_.find(stage);
        if (s == values_.end() || !s->second.count(key)) throw InputError("unknown setting " + stage + "." + key);
        return s->second.at(key);
    }

    double num(const std::string& stage, const std::string& key) const {
        const std::string& v = str(stage, key);
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used == v.size() && std::isfinite(d)) return d;
        } catch (const std::logic_error&) {
        }
        throw InputError(stage + "." + key + ": expected a number, got '" + v + "'");
    }

    bool flag(const std::string& stage, const std::string& key) const {
        const std::string& v = str(stage, key);
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        throw InputError(stage + "." + key + ": expected true or false, got '" + v + "'");
    }

    Vec3 vec(const std::string& stage, const std::string& key) const {
        const auto parts = split(str(stage, key), ',');
        if (parts.size() != 3) throw InputError(stage + "." + key + ": expected three comma-separated numbers");
        Vec3 v;
        for (int k = 0; k < 3; ++k) {
            try {
                v[k] = std::stod(parts[k]);
            } catch (const std::logic_error&) {
                throw InputError(stage + "." + key + ": bad number '" + parts[k] + "'");
            }
        }
        return v;
    }

    std::vector<std::string> list(const std::string& stage, const std::string& key) const {
        std::vector<std::string> out;
        for (auto& p : split(str(stage, key), ','))
            if (!p.empty()) out.push_back(p);
        return out;
    }

    /// Relative paths resolve against the config file's directory.
    std::string path(const std::string& stage, const std::string& key) const {
        const std::string& v = str(stage, key);
        if (v.empty()) return v;
        std::filesystem::path p(v);
        return (p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p).string();
    }

    std::string out_dir() const { return path("pipeline", "out_dir"); }

    nlohmann::ordered_json dump() const {
        nlohmann::ordered_json j;
        for (const auto& k : config_defaults()) j[k.stage][k.key] = str(k.stage, k.key);
        return j;
    }

    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    }

    static std::vector<std::string> split(const std::string& s, char sep) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string part;
        while (std::getline(ss, part, sep)) out.push_back(trim(part));
        return out;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
    std::vector<std::string> blocks_;
    std::filesystem::path base_dir_;
};

// ---------------------------------------------------------------------------
// Synthetic input

/// Lambertian image of a hemisphere of radius radius_fraction * (n-1)/2
/// pixels centred in an n x n frame, lit from `light`. Outside the silhouette
/// the image is 0 and masked out.
inline ScalarField2D hemisphere_image(int n, double radius_fraction = 0.9, const Vec3& light = Vec3(0, 0, 1)) {
    if (n < 8) throw InputError("hemisphere image needs at least 8 pixels a side");
    if (!(radius_fraction > 0.0 && radius_fraction <= 1.0)) throw InputError("radius fraction must lie in (0, 1]");
    const Vec3 l = LightSetup::from_directions(light).light;
    const double c = 0.5 * (n - 1);
    const double r = radius_fraction * c;
    ScalarField2D img(Grid2D(Vec2::Zero(), Vec2::Ones(), {n, n}), 0.0);
    img.mask.assign(img.size(), 0);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const Vec2 d = (img.grid.position(i) - Vec2(c, c)) / r;
        const double q = d.squaredNorm();
        if (q < 1.0) {
            const Vec3 normal(d.x(), d.y(), std::sqrt(1.0 - q));
            img.values[i] = std::max(normal.dot(l), 0.0);
            img.mask[i] = 1;
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Stages. Each returns a JSON summary; failures throw InputError or
// NumericalError.

using Json = nlohmann::ordered_json;

struct SfsSettings {
    std::string image, mask;
    double pixel_size = 0.5;
    std::string solver = "eikonal";
    ReflectanceParams params;
    Vec3 light{0.0, 0.0, 1.0};
    bool occluding = true;
    double i_min = 1e-3;
    double mu = 1.0;
    double h = 0.0;
    double tol = 1e-8;
};

inline ScalarField2D load_image(const std::string& image, const std::string& mask, double pixel_size) {
    ScalarField2D img = read_pgm(image, pixel_size);
    if (!mask.empty()) {
        img.mask = read_pgm_mask(mask, img.grid);
    } else {
        img.mask.assign(img.size(), 0);
        for (std::size_t i = 0; i < img.size(); ++i) img.mask[i] = img.values[i] > 0.0;
    }
    std::size_t inside = 0;
    for (auto m : img.mask) inside += m;
    if (inside == 0) throw InputError(image + ": the reconstruction domain is empty");
    return img;
}

inline SfSSolution run_sfs(const SfsSettings& s) {
    if (s.image.empty()) throw InputError("sfs: no input image given");
    SfSProblem pb;
    pb.image = load_image(s.image, s.mask, s.pixel_size);
    pb.light = LightSetup::from_directions(s.light);
    pb.params = s.params;
    pb.occluding_boundary = s.occluding;
    pb.i_min = s.i_min;
    pb.mu = s.mu;
    pb.h = s.h;
    pb.tol = s.tol;
    SfSSolution sol;
    if (s.solver == "eikonal")
        sol = solve_vertical(pb);
    else if (s.solver == "semi-lagrangian" || s.solver == "sl")
        sol = solve_fixed_point(pb);
    else
        throw InputError("sfs: unknown solver '" + s.solver + "' (eikonal | semi-lagrangian)");
    if (!sol.converged) throw NumericalError("sfs: solver did not converge (last update " + std::to_string(sol.residual) + ")");
    return sol;
}

inline Json height_summary(const ScalarField2D& u) {
    double hi = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u.in_domain(i)) hi = std::max(hi, u.values[i]), ++n;
    return {{"nodes", n}, {"max_height", hi}};
}

inline void write_height(const ScalarField2D& u, const std::string& dir) {
    write_csv(u, dir + "/height.csv");
    double hi = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u.in_domain(i)) hi = std::max(hi, u.values[i]);
    write_pgm(u, dir + "/height.pgm", 0.0, hi > 0.0 ? hi : 1.0, true, 65535);
}

inline ScalarField2D run_ps(const std::string& image1, const std::string& image2, const Vec3& l1, const Vec3& l2,
                            const std::string& mask, double pixel_size, Json* summary = nullptr,
                            const std::string& boundary = "") {
    PSProblem pb;
    pb.i1 = read_pgm(image1, pixel_size);
    pb.i2 = read_pgm(image2, pixel_size);
    if (!mask.empty()) pb.i1.mask = pb.i2.mask = read_pgm_mask(mask, pb.i1.grid);
    if (!boundary.empty()) {
        const ScalarField2D g = read_csv(boundary, pixel_size);
        if (g.grid.dims != pb.i1.grid.dims) throw InputError(boundary + ": boundary data must match the image size");
        for (double v : g.values)
            if (!std::isfinite(v)) throw InputError(boundary + ": boundary data must be finite everywhere");
        pb.boundary = g.values;
    }
    pb.l1 = l1.normalized();
    pb.l2 = l2.normalized();
    TransportSolution sol = solve_photometric_stereo(pb);
    if (!sol.converged) throw NumericalError("ps: transport sweeps did not converge");
    if (summary)
        *summary = {{"sweeps", sol.sweeps},
                    {"residual", sol.residual},
                    {"degenerate", sol.degenerate_count},
                    {"unreachable", sol.unreachable_count}};
    return sol.u;
}

/// Closed solid from a height map, shifted to positive coordinates.
inline TriangleMesh height_to_mesh(const ScalarField2D& u, double base) {
    if (!(base > 0.0)) throw InputError("mesh: base thickness must be positive");
    TriangleMesh m = heightfield_to_solid(u, -base);
    m.name = "shadeprint";
    prepare_for_export(m, u.grid.min_spacing());
    return m;
}

struct OverhangSettings {
    double spacing = 1.5;
    double alpha_deg = 45.0;
    double t_final = 20.0;
    double v0 = 1.0;
    double c1 = 0.0;
    double c2 = 0.0;
};

struct OverhangOutcome {
    TriangleMesh fixed;
    TriangleMesh added;  // material grown by the repair; empty when nothing changed
    Json summary;
};

/// Grid padded by two nodes around the mesh; the first node layer above
/// the padding sits on the build plate.
inline Grid3D padded_grid(const TriangleMesh& mesh, double spacing) {
    if (!(spacing > 0.0)) throw InputError("grid spacing must be positive");
    if (mesh.facets.empty()) throw InputError("mesh has no facets");
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    const Vec3 origin = lo - Vec3::Constant(2.0 * spacing);
    Index<3> dims;
    for (int k = 0; k < 3; ++k) dims[k] = static_cast<int>(std::ceil((hi[k] - origin[k]) / spacing)) + 3;
    return Grid3D(origin, Vec3::Constant(spacing), dims);
}

inline PrintConfig print_config(const TriangleMesh& mesh, const OverhangSettings& s) {
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    PrintConfig cfg;
    cfg.alpha = s.alpha_deg * M_PI / 180.0;
    cfg.v0 = s.v0;
    cfg.z_min = lo.z();
    cfg.t_final = s.t_final;
    cfg.c1 = s.c1;
    cfg.c2 = s.c2;
    cfg.check();
    return cfg;
}

inline Json detection_json(const DetectionResult& det) {
    return {{"overhang_nodes", det.overhang_count},
            {"unprintable_samples", det.report.unprintable},
            {"modifiable_samples", det.report.modifiable},
            {"safe_samples", det.report.safe},
            {"printable_fraction", det.report.fraction_printable()}};
}

/// Detection report; `mask`, when given, receives 1 on overhang nodes and 0
/// elsewhere.
inline Json run_detect(const TriangleMesh& mesh, const OverhangSettings& s, ScalarField3D* mask = nullptr) {
    const PrintConfig cfg = print_config(mesh, s);
    const DetectionResult det = detect_overhangs(sample_sdf(mesh, padded_grid(mesh, s.spacing)), cfg);
    if (mask) {
        *mask = ScalarField3D(det.t1.grid, 0.0);
        for (std::size_t i = 0; i < mask->size(); ++i) mask->values[i] = det.overhang[i];
    }
    return detection_json(det);
}

/// Samples the SDF on a padded grid, detects overhangs and, if any zero-level
/// sample is unprintable, grows the object. When nothing needs fixing the
/// input mesh is returned untouched.
inline OverhangOutcome run_overhang(const TriangleMesh& mesh, const OverhangSettings& s) {
    const Grid3D g = padded_grid(mesh, s.spacing);
    const double h = s.spacing;
    ScalarField3D phi = sample_sdf(mesh, g);
    const PrintConfig cfg = print_config(mesh, s);
    const DetectionResult det = detect_overhangs(phi, cfg);
    const RepairResult rep = repair_overhangs(LevelSetState<3>{phi, 0.0}, cfg);

    OverhangOutcome out;
    out.summary = {{"grid", {g.dims[0], g.dims[1], g.dims[2]}},
                   {"detection", detection_json(det)},
                   {"printable_fraction_after", rep.report.fraction_printable()},
                   {"repair_steps", rep.steps},
                   {"repair_time", rep.state.t},
                   {"printable", rep.printable}};
    if (rep.steps == 0) {
        out.fixed = mesh;
    } else {
        out.fixed = isosurface(rep.state.phi, 0.0);
        out.fixed.name = mesh.name;
        prepare_for_export(out.fixed, h);
        out.added = isosurface(rep.added, 0.0);
        out.added.name = mesh.name + "_added";
        out.added.translate(out.fixed.shift);
        out.added.shift = out.fixed.shift;
    }
    if (!rep.printable)
        throw NumericalError("overhang: repair stopped at t_f with printable fraction " +
                             std::to_string(rep.report.fraction_printable()));
    return out;
}

struct SliceSettings {
    double layer_height = 0.2;
    std::string infill = "eikonal";
    double spacing = 2.0;
    double flow = 0.05;
    Feeds feeds;
};

struct SliceOutcome {
    GCodeProgram program;
    PrintMetrics metrics;
    std::size_t layers = 0;
    std::size_t thin_regions = 0;
};

inline SliceOutcome run_slice(const TriangleMesh& mesh, const SliceSettings& s) {
    if (s.infill != "eikonal" && s.infill != "square")
        throw InputError("slice: unknown infill '" + s.infill + "' (eikonal | square)");
    const MeshReport rep = validate(mesh, false);
    if (!rep.watertight()) throw InputError("slice: mesh is not watertight: " + rep.summary());
    SliceOutcome out;
    const std::vector<Layer> layers = slice(mesh, s.layer_height);
    std::vector<std::vector<Polyline2D>> infill;
    for (const Layer& l : layers) {
        InfillResult r = s.infill == "eikonal" ? infill_eikonal(l, s.spacing) : infill_square(l, s.spacing);
        out.thin_regions += r.thin_regions;
        infill.push_back(std::move(r.curves));
    }
    const ToolPath tp = plan_toolpath(layers, infill, s.feeds);
    out.program = emit_gcode(tp, s.flow);
    out.metrics = metrics(tp);
    out.layers = layers.size();
    return out;
}

inline Json metrics_json(const SliceOutcome& s) {
    return {{"layers", s.layers},
            {"print_time_s", s.metrics.print_time},
            {"material_length_mm", s.metrics.material_length},
            {"travel_length_mm", s.metrics.travel_length},
            {"move_count", s.metrics.move_count},
            {"extrude_moves", s.metrics.extrude_moves},
            {"filament_e", s.program.total_e},
            {"thin_regions", s.thin_regions}};
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << text;
    if (!out) throw InputError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Config-driven pipeline

inline SfsSettings sfs_settings(const Config& c) {
    SfsSettings s;
    s.image = c.path("sfs", "image");
    s.mask = c.path("sfs", "mask");
    s.pixel_size = c.num("pipeline", "pixel_size");
    s.solver = c.str("sfs", "solver");
    s.params.model = parse_reflectance_model(c.str("sfs", "model"));
    s.params.roughness = c.num("sfs", "roughness");
    s.params.k_diffuse = c.num("sfs", "k_diffuse");
    s.params.k_specular = c.num("sfs", "k_specular");
    s.params.phong_exponent = s.params.blinn_exponent = c.num("sfs", "shininess");
    s.light = c.vec("sfs", "light");
    s.occluding = c.flag("sfs", "occluding");
    s.i_min = c.num("sfs", "i_min");
    s.mu = c.num("sfs", "mu");
    s.h = c.num("sfs", "h");
    s.tol = c.num("sfs", "tol");
    return s;
}

inline OverhangSettings overhang_settings(const Config& c) {
    return {c.num("overhang", "spacing"), c.num("overhang", "alpha"), c.num("overhang", "t_final"),
            c.num("overhang", "v0"),      c.num("overhang", "c1"),    c.num("overhang", "c2")};
}

inline SliceSettings slice_settings(const Config& c) {
    SliceSettings s;
    s.layer_height = c.num("slice", "layer_height");
    s.infill = c.str("slice", "infill");
    s.spacing = c.num("slice", "spacing");
    s.flow = c.num("slice", "flow");
    s.feeds = {c.num("slice", "feed_perimeter"), c.num("slice", "feed_infill"), c.num("slice", "feed_travel")};
    return s;
}

/// Runs the configured stages in order and writes metrics.json last. A
/// failing stage stops the run; artifacts of earlier stages stay on disk.
/// Output files depend only on the config and the inputs.
inline Json run_pipeline(const Config& c, std::ostream* log = nullptr) {
    const std::string dir = c.out_dir();
    std::filesystem::create_directories(dir);
    Json report;
    report["version"] = kVersion;
    report["settings"] = c.dump();
    Json& stages = report["stages"];
    std::string last_stl;
    auto note = [&](const std::string& msg) {
        if (log) *log << msg << "\n";
    };
    const StlFormat fmt = parse_stl_format(c.str("mesh", "format"));
    for (const std::string& stage : c.list("pipeline", "stages")) {
        note("stage " + stage);
        if (stage == "sfs") {
            const SfSSolution sol = run_sfs(sfs_settings(c));
            write_height(sol.u, dir);
            Json j = height_summary(sol.u);
            j["iterations"] = sol.iterations;
            j["clamped_dark"] = sol.clamped_dark;
            j["clamped_bright"] = sol.clamped_bright;
            stages["sfs"] = j;
        } else if (stage == "ps") {
            Json j;
            const ScalarField2D u = run_ps(c.path("ps", "image1"), c.path("ps", "image2"), c.vec("ps", "light1"),
                                           c.vec("ps", "light2"), c.path("ps", "mask"), c.num("pipeline", "pixel_size"), &j,
                                           c.path("ps", "boundary"));
            write_height(u, dir);
            j.update(height_summary(u));
            stages["ps"] = j;
        } else if (stage == "mesh") {
            const ScalarField2D u = read_csv(dir + "/height.csv", c.num("pipeline", "pixel_size"));
            const TriangleMesh m = height_to_mesh(u, c.num("mesh", "base"));
            last_stl = dir + "/object.stl";
            stl_write(m, last_stl, fmt);
            const MeshReport rep = validate(m);
            stages["mesh"] = {{"facets", rep.facets}, {"vertices", rep.vertices}, {"volume", rep.volume}, {"valid", rep.ok()}};
        } else if (stage == "overhang") {
            const std::string in = last_stl.empty() ? dir + "/object.stl" : last_stl;
            const OverhangOutcome o = run_overhang(stl_read(in), overhang_settings(c));
            last_stl = dir + "/fixed.stl";
            stl_write(o.fixed, last_stl, fmt);
            stages["overhang"] = o.summary;
        } else if (stage == "slice") {
            std::string in = c.path("slice", "stl");
            if (in.empty()) in = !last_stl.empty() ? last_stl : dir + "/fixed.stl";
            if (!std::filesystem::exists(in) && c.path("slice", "stl").empty() && last_stl.empty()) in = dir + "/object.stl";
            const SliceOutcome s = run_slice(stl_read(in), slice_settings(c));
            write_text(dir + "/print.gcode", s.program.text());
            stages["slice"] = metrics_json(s);
        } else {
            throw InputError("unknown pipeline stage '" + stage + "'");
        }
    }
    write_text(dir + "/metrics.json", report.dump(2) + "\n");
    return report;
}

}  // namespace shadeprint
